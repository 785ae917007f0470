#include "cpgan/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace cpgan {

namespace {
constexpr char kMagic[8] = {'C', 'P', 'G', 'A', 'N', 'C', 'K', '1'};

nlohmann::json meta_to_json(const CheckpointMeta& m) {
  return {{"kind", m.kind},   {"epoch", m.epoch},   {"step", m.step},
          {"rng_state", m.rng_state}, {"config", m.config}, {"extra", m.extra},
          {"version", m.version}};
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
  CheckpointMeta m;
  m.kind = j.at("kind").get<std::string>();
  m.epoch = j.at("epoch").get<std::int64_t>();
  m.step = j.at("step").get<std::int64_t>();
  m.rng_state = j.at("rng_state").get<std::string>();
  m.config = j.at("config");
  m.extra = j.at("extra");
  m.version = j.value("version", "");
  return m;
}
}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta, const NamedTensors& tensors) {
  nlohmann::json header = meta_to_json(meta);
  nlohmann::json dir = nlohmann::json::array();
  std::int64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    dir.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}, {"count", t->numel()}});
    offset += static_cast<std::int64_t>(t->numel()) * 4;
  }
  header["tensors"] = std::move(dir);
  const std::string hstr = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + tmp);
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = hstr.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hstr.data(), static_cast<std::streamsize>(hstr.size()));
    for (const auto& [name, t] : tensors)
      out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->numel()) * 4);
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

const Tensor<float>& LoadedCheckpoint::require(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
  return it->second;
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen > (1ull << 30)) throw std::runtime_error("load_checkpoint: corrupt header length");
  std::string hstr(hlen, '\0');
  in.read(hstr.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error("load_checkpoint: truncated header");

  LoadedCheckpoint ck;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hstr);
    ck.meta = meta_from_json(header);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("load_checkpoint: bad metadata: ") + e.what());
  }

  const std::streampos data_start = in.tellg();
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    const std::int64_t offset = entry.at("offset").get<std::int64_t>();
    const int count = entry.at("count").get<int>();
    Tensor<float> t(shape);
    if (t.numel() != count) throw std::runtime_error("load_checkpoint: inconsistent directory for " + name);
    in.seekg(data_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(count) * 4);
    if (!in) throw std::runtime_error("load_checkpoint: truncated tensor data for " + name);
    ck.tensors.emplace(name, std::move(t));
  }
  return ck;
}

std::uint64_t tensor_checksum(const NamedTensors& tensors) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, t] : tensors) {
    mix(name.data(), name.size());
    mix(t->data(), static_cast<std::size_t>(t->numel()) * 4);
  }
  return h;
}

}  // namespace cpgan
