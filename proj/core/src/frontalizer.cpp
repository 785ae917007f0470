#include "cpgan/frontalizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "cpgan/png_io.hpp"

namespace cpgan {

namespace {

void check_input(const CpganModel& model, const Tensor<float>& x, const char* who) {
  if (x.ndim() != 4 || x.dim(1) != model.net.channels || x.dim(2) != model.net.image_size ||
      x.dim(3) != model.net.image_size)
    throw std::invalid_argument(std::string(who) + ": input shape " + x.shape_str() +
                                " does not match the configured image geometry");
  if (!all_finite(x)) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

// Batch of one domain's images for the listed entries.
Tensor<float> gather(const LoadedDataset& data, const std::vector<int>& entries) {
  const auto& m = data.manifest;
  Tensor<float> batch({static_cast<int>(entries.size()), m.channels, m.height, m.width});
  const std::size_t stride = static_cast<std::size_t>(m.channels) * m.height * m.width;
  for (std::size_t i = 0; i < entries.size(); ++i)
    std::copy(data.images[entries[i]].data(), data.images[entries[i]].data() + stride,
              batch.data() + i * stride);
  return batch;
}

Tensor<float> map_batched(CpganModel& model, const Tensor<float>& in, int batch_size, bool zero_skips,
                          bool to_frontal) {
  Tensor<float> out(in.shape());
  const int n = in.dim(0);
  const std::size_t stride = in.numel() / n;
  for (int start = 0; start < n; start += batch_size) {
    const int b = std::min(batch_size, n - start);
    Tensor<float> chunk({b, in.dim(1), in.dim(2), in.dim(3)});
    std::copy(in.data() + start * stride, in.data() + (start + b) * stride, chunk.data());
    Tensor<float> mapped = to_frontal ? frontalize(model, chunk, zero_skips)
                                      : profilize(model, chunk, zero_skips);
    std::copy(mapped.data(), mapped.data() + b * stride, out.data() + start * stride);
  }
  return out;
}

// Mean squared pixel distance between every row of `a` and every row of `b`.
double mean_pair_distance(const Tensor<float>& a, const Tensor<float>& b) {
  const int na = a.dim(0), nb = b.dim(0);
  const std::size_t stride = a.numel() / na;
  double total = 0.0;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      const float* pa = a.data() + i * stride;
      const float* pb = b.data() + j * stride;
      double d2 = 0.0;
      for (std::size_t k = 0; k < stride; ++k) {
        double d = static_cast<double>(pa[k]) - static_cast<double>(pb[k]);
        d2 += d * d;
      }
      total += d2 / static_cast<double>(stride);
    }
  return total / (static_cast<double>(na) * nb);
}

}  // namespace

Tensor<float> frontalize(CpganModel& model, const Tensor<float>& profiles, bool zero_skips) {
  check_input(model, profiles, "frontalize");
  return model.g_fr.decode(model.g_pr.encode(profiles), zero_skips);
}

Tensor<float> profilize(CpganModel& model, const Tensor<float>& frontals, bool zero_skips) {
  check_input(model, frontals, "profilize");
  return model.g_pr.decode(model.g_fr.encode(frontals), zero_skips);
}

void emit_grid(const std::vector<Tensor<float>>& images, int columns, const std::string& path,
               const PngText& text) {
  if (images.empty()) throw std::invalid_argument("emit_grid: empty image list");
  if (columns < 1) throw std::invalid_argument("emit_grid: columns must be >= 1");
  const Tensor<float>& first = images.front();
  if (first.ndim() != 3) throw std::invalid_argument("emit_grid: expected C x H x W images");
  const int c = first.dim(0), h = first.dim(1), w = first.dim(2);
  for (const Tensor<float>& img : images)
    if (!img.same_shape(first)) throw std::invalid_argument("emit_grid: images differ in shape");

  const int n = static_cast<int>(images.size());
  const int rows = (n + columns - 1) / columns;
  Tensor<float> sheet({c, rows * h, columns * w});
  sheet.fill(-1.0f);  // unused cells stay black
  const std::size_t sheet_w = static_cast<std::size_t>(columns) * w;
  const std::size_t sheet_h = static_cast<std::size_t>(rows) * h;
  for (int i = 0; i < n; ++i) {
    const int r = i / columns, col = i % columns;
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y) {
        const float* src = images[i].data() + (static_cast<std::size_t>(ch) * h + y) * w;
        float* dst = sheet.data() + (ch * sheet_h + static_cast<std::size_t>(r) * h + y) * sheet_w +
                     static_cast<std::size_t>(col) * w;
        std::copy(src, src + w, dst);
      }
  }
  write_png(path, sheet, text);
}

IdentityProxyResult frontalization_identity_proxy(CpganModel& model, const LoadedDataset& data,
                                                  const std::vector<int>& folds, int batch_size,
                                                  bool zero_skips) {
  const std::vector<int> ids = data.manifest.identities_in_folds(folds);
  if (ids.size() < 2)
    throw std::invalid_argument("frontalization_identity_proxy: need at least two identities");

  std::map<int, Tensor<float>> frontalized, true_frontals;
  for (int id : ids) {
    std::vector<int> prof = data.entries_of(id, Domain::kProfile);
    std::vector<int> front = data.entries_of(id, Domain::kFrontal);
    if (prof.empty() || front.empty())
      throw std::invalid_argument("frontalization_identity_proxy: identity " + std::to_string(id) +
                                  " lacks images in one domain");
    frontalized[id] = map_batched(model, gather(data, prof), batch_size, zero_skips, /*to_frontal=*/true);
    true_frontals[id] = gather(data, front);
  }

  IdentityProxyResult result;
  result.identities = ids;
  result.num_identities = static_cast<int>(ids.size());
  int hits = 0;
  for (int id : ids) {
    double best = std::numeric_limits<double>::infinity();
    int best_id = -1;
    for (int other : ids) {
      const double d = mean_pair_distance(frontalized[id], true_frontals[other]);
      if (d < best) {
        best = d;
        best_id = other;
      }
    }
    result.best_match.push_back(best_id);
    if (best_id == id) ++hits;
  }
  result.success_rate = static_cast<double>(hits) / result.num_identities;
  return result;
}

WarpConsistencyResult profilize_warp_consistency(CpganModel& model, const LoadedDataset& data,
                                                 const std::vector<int>& folds, int batch_size,
                                                 bool zero_skips) {
  const std::vector<int> ids = data.manifest.identities_in_folds(folds);
  if (ids.empty()) throw std::invalid_argument("profilize_warp_consistency: no identities in folds");

  WarpConsistencyResult result;
  result.num_identities = static_cast<int>(ids.size());
  int hits = 0;
  for (int id : ids) {
    std::vector<int> prof = data.entries_of(id, Domain::kProfile);
    std::vector<int> front = data.entries_of(id, Domain::kFrontal);
    if (prof.empty() || front.empty())
      throw std::invalid_argument("profilize_warp_consistency: identity " + std::to_string(id) +
                                  " lacks images in one domain");
    Tensor<float> true_profiles = gather(data, prof);
    Tensor<float> profilized =
        map_batched(model, gather(data, front), batch_size, zero_skips, /*to_frontal=*/false);
    Tensor<float> frontalized =
        map_batched(model, true_profiles, batch_size, zero_skips, /*to_frontal=*/true);
    if (mean_pair_distance(profilized, true_profiles) < mean_pair_distance(frontalized, true_profiles))
      ++hits;
  }
  result.rate = static_cast<double>(hits) / result.num_identities;
  return result;
}

}  // namespace cpgan
