#pragma once

#include <string>
#include <vector>

#include "cpgan/datamodel.hpp"
#include "cpgan/png_io.hpp"
#include "cpgan/tensor.hpp"
#include "cpgan/trainer.hpp"

namespace cpgan {

/// Cross-decoder synthesis: profile batch through the profile encoder, then
/// the frontal decoder. `zero_skips` routes only the bottleneck vector
/// across domains. Output is N x C x H x W in (-1, 1).
Tensor<float> frontalize(CpganModel& model, const Tensor<float>& profiles, bool zero_skips = false);

/// The reverse direction: frontal batch -> profile rendering.
Tensor<float> profilize(CpganModel& model, const Tensor<float>& frontals, bool zero_skips = false);

/// Writes a PNG contact sheet. `images` alternates input/output (odd columns
/// are inputs); `columns` counts image cells per row. `text` chunks carry
/// provenance (config echo, version).
void emit_grid(const std::vector<Tensor<float>>& images, int columns, const std::string& path,
               const PngText& text = {});

struct IdentityProxyResult {
  double success_rate = 0.0;
  int num_identities = 0;
  std::vector<int> identities;
  std::vector<int> best_match;  // nearest identity per held-out identity
};

/// Identity-preservation proxy: for each identity in `folds`, frontalizes
/// its profiles and finds the identity whose true frontals are nearest in
/// mean pixel L2. Success means the nearest identity is itself.
IdentityProxyResult frontalization_identity_proxy(CpganModel& model, const LoadedDataset& data,
                                                  const std::vector<int>& folds, int batch_size = 32,
                                                  bool zero_skips = false);

struct WarpConsistencyResult {
  double rate = 0.0;
  int num_identities = 0;
};

/// Per identity: are profilized frontals closer (mean pixel L2) to the true
/// profile renders than the frontalized profiles are?
WarpConsistencyResult profilize_warp_consistency(CpganModel& model, const LoadedDataset& data,
                                                 const std::vector<int>& folds, int batch_size = 32,
                                                 bool zero_skips = false);

}  // namespace cpgan
