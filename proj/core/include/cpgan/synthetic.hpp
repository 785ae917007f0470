#pragma once

#include <cstdint>
#include <string>

#include "cpgan/datamodel.hpp"

// Deterministic synthetic paired-domain dataset: each identity is a seeded
// arrangement of colored ellipses and strokes; the frontal domain renders the
// canonical view, the profile domain renders a fixed horizontal perspective
// warp of it. Views within a domain differ only by illumination jitter.

namespace cpgan {

struct SyntheticSpec {
  int num_identities = 30;
  int views_per_domain = 8;
  int image_size = 64;  // square output
  double warp_magnitude = 0.35;      // in [0, 1]; scales the profile yaw
  double illumination_jitter = 0.15;  // >= 0; per-view brightness/tint spread
  std::uint64_t seed = 1;
  int num_folds = 5;  // identities are split identity-disjointly across folds

  void validate() const;
};

/// Renders every view of one identity's canonical pattern; exposed for tests.
Tensor<float> render_synthetic_view(const SyntheticSpec& spec, int identity, Domain domain, int view);

/// Materializes all images as PNGs under out_dir, writes `manifest.txt`
/// there, and returns the manifest. Bit-identical output for identical specs.
DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

}  // namespace cpgan
