#include "cpgan/datamodel.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cpgan/png_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace cpgan {

std::string domain_name(Domain d) { return d == Domain::kProfile ? "profile" : "frontal"; }

Domain parse_domain(const std::string& s) {
  if (s == "profile") return Domain::kProfile;
  if (s == "frontal") return Domain::kFrontal;
  throw std::invalid_argument("unknown domain: " + s);
}

void DatasetManifest::validate() const {
  if (entries.empty()) throw std::invalid_argument("manifest: empty entry list");
  if (height < 1 || width < 1 || channels < 1) throw std::invalid_argument("manifest: bad image size");
  if (num_folds < 1) throw std::invalid_argument("manifest: num_folds must be >= 1");

  std::map<int, int> identity_fold;
  std::map<int, std::set<int>> identity_domains;
  for (const auto& e : entries) {
    if (e.identity < 0) throw std::invalid_argument("manifest: negative identity");
    if (e.fold < 0 || e.fold >= num_folds)
      throw std::invalid_argument("manifest: fold " + std::to_string(e.fold) + " out of range for identity " +
                                  std::to_string(e.identity));
    auto [it, fresh] = identity_fold.emplace(e.identity, e.fold);
    if (!fresh && it->second != e.fold)
      throw std::invalid_argument("manifest: identity " + std::to_string(e.identity) +
                                  " appears in folds " + std::to_string(it->second) + " and " +
                                  std::to_string(e.fold) + " (folds must be identity-disjoint)");
    identity_domains[e.identity].insert(e.domain == Domain::kProfile ? 0 : 1);
  }
  if (static_cast<int>(identity_fold.size()) != num_identities)
    throw std::invalid_argument("manifest: num_identities=" + std::to_string(num_identities) + " but " +
                                std::to_string(identity_fold.size()) + " identities listed");
  for (const auto& [id, domains] : identity_domains)
    if (domains.size() != 2)
      throw std::invalid_argument("manifest: identity " + std::to_string(id) +
                                  " lacks entries in both domains");
}

std::vector<int> DatasetManifest::identities_in_folds(const std::vector<int>& folds) const {
  std::set<int> wanted(folds.begin(), folds.end());
  std::set<int> ids;
  for (const auto& e : entries)
    if (wanted.count(e.fold)) ids.insert(e.identity);
  return {ids.begin(), ids.end()};
}

std::string DatasetManifest::entry_abspath(int idx) const {
  return (fs::path(root) / entries[idx].path).string();
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  m.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_manifest: cannot open " + path);
  nlohmann::json header = {
      {"schema", 1},
      {"height", m.height},
      {"width", m.width},
      {"channels", m.channels},
      {"num_identities", m.num_identities},
      {"num_folds", m.num_folds},
  };
  out << header.dump() << "\n";
  for (const auto& e : m.entries)
    out << e.identity << "," << domain_name(e.domain) << "," << e.view << "," << e.fold << "," << e.path << "\n";
  if (!out) throw std::runtime_error("save_manifest: write failed for " + path);
}

DatasetManifest load_manifest(const std::string& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_manifest: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("load_manifest: empty file " + path);

  DatasetManifest m;
  try {
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.at("schema").get<int>() != 1)
      throw std::invalid_argument("unsupported manifest schema version");
    m.height = header.at("height").get<int>();
    m.width = header.at("width").get<int>();
    m.channels = header.at("channels").get<int>();
    m.num_identities = header.at("num_identities").get<int>();
    m.num_folds = header.at("num_folds").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("load_manifest: bad header in " + path + ": " + e.what());
  }
  m.root = fs::path(path).parent_path().string();

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string identity, domain, view, fold, file;
    if (!std::getline(ss, identity, ',') || !std::getline(ss, domain, ',') || !std::getline(ss, view, ',') ||
        !std::getline(ss, fold, ',') || !std::getline(ss, file))
      throw std::invalid_argument("load_manifest: malformed record at line " + std::to_string(lineno));
    ManifestEntry e;
    try {
      e.identity = std::stoi(identity);
      e.domain = parse_domain(domain);
      e.view = std::stoi(view);
      e.fold = std::stoi(fold);
    } catch (const std::exception&) {
      throw std::invalid_argument("load_manifest: malformed record at line " + std::to_string(lineno));
    }
    e.path = file;
    m.entries.push_back(std::move(e));
  }
  m.validate();
  if (check_files)
    for (int i = 0; i < static_cast<int>(m.entries.size()); ++i)
      if (!fs::exists(m.entry_abspath(i)))
        throw std::runtime_error("load_manifest: missing image file " + m.entry_abspath(i));
  return m;
}

LoadedDataset LoadedDataset::load(const DatasetManifest& m) {
  m.validate();
  LoadedDataset d;
  d.manifest = m;
  d.images.reserve(m.entries.size());
  for (int i = 0; i < static_cast<int>(m.entries.size()); ++i) {
    Tensor<float> img = read_png(m.entry_abspath(i));
    if (img.dim(0) != m.channels || img.dim(1) != m.height || img.dim(2) != m.width)
      throw std::runtime_error("dataset: image " + m.entry_abspath(i) + " has shape " +
                               Tensor<float>::shape_str(img.shape()) + ", manifest expects (" +
                               std::to_string(m.channels) + "," + std::to_string(m.height) + "," +
                               std::to_string(m.width) + ")");
    d.images.push_back(std::move(img));
    const auto& e = m.entries[i];
    d.by_identity_domain_[{e.identity, e.domain == Domain::kProfile ? 0 : 1}].push_back(i);
  }
  return d;
}

const std::vector<int>& LoadedDataset::entries_of(int identity, Domain dom) const {
  static const std::vector<int> kEmpty;
  auto it = by_identity_domain_.find({identity, dom == Domain::kProfile ? 0 : 1});
  return it == by_identity_domain_.end() ? kEmpty : it->second;
}

std::vector<int> LoadedDataset::entries_in_folds(const std::vector<int>& folds, Domain dom) const {
  std::set<int> wanted(folds.begin(), folds.end());
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(manifest.entries.size()); ++i)
    if (manifest.entries[i].domain == dom && wanted.count(manifest.entries[i].fold)) out.push_back(i);
  return out;
}

ImageSample LoadedDataset::sample(int entry_idx) const {
  const auto& e = manifest.entries[entry_idx];
  return {images[entry_idx], e.identity, e.domain, e.fold, e.path};
}

PairBatch sample_pair_batch(const LoadedDataset& data, const std::vector<int>& folds, int batch_size,
                            std::mt19937_64& rng) {
  if (batch_size < 2) throw std::invalid_argument("sample_pair_batch: batch_size must be >= 2");
  const std::vector<int> ids = data.manifest.identities_in_folds(folds);
  if (ids.size() < 2)
    throw std::invalid_argument("sample_pair_batch: need >= 2 identities for impostor pairs, have " +
                                std::to_string(ids.size()));

  const auto& m = data.manifest;
  PairBatch batch;
  batch.profiles.resize({batch_size, m.channels, m.height, m.width});
  batch.frontals.resize({batch_size, m.channels, m.height, m.width});
  batch.labels.reserve(batch_size);

  auto pick = [&rng](const std::vector<int>& v) {
    return v[std::uniform_int_distribution<int>(0, static_cast<int>(v.size()) - 1)(rng)];
  };
  auto put = [&](Tensor<float>& dst, int row, int entry) {
    const Tensor<float>& src = data.images[entry];
    std::copy(src.data(), src.data() + src.numel(), &dst.at(row, 0, 0, 0));
  };

  const int n_genuine = batch_size / 2;
  for (int i = 0; i < batch_size; ++i) {
    const bool genuine = i < n_genuine;
    const int id_p = pick(ids);
    int id_f = id_p;
    if (!genuine)
      while (id_f == id_p) id_f = pick(ids);
    const int ep = pick(data.entries_of(id_p, Domain::kProfile));
    const int ef = pick(data.entries_of(id_f, Domain::kFrontal));
    put(batch.profiles, i, ep);
    put(batch.frontals, i, ef);
    batch.labels.push_back(genuine ? 0 : 1);
    batch.profile_identities.push_back(id_p);
    batch.frontal_identities.push_back(id_f);
  }
  return batch;
}

}  // namespace cpgan
