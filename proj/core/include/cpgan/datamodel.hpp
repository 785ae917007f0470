#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cpgan/tensor.hpp"

// Dataset plumbing: manifests describing paired-domain image collections with
// identity-disjoint folds, in-memory loading, and balanced genuine/impostor
// pair sampling.

namespace cpgan {

enum class Domain { kProfile, kFrontal };

std::string domain_name(Domain d);
Domain parse_domain(const std::string& s);

struct ManifestEntry {
  int identity = 0;
  Domain domain = Domain::kProfile;
  int view = 0;
  int fold = 0;
  std::string path;  // relative to the manifest's directory
};

/// Text manifest: one JSON header line (schema version, image size, counts)
/// followed by one CSV record per entry.
struct DatasetManifest {
  int height = 64, width = 64, channels = 3;
  int num_identities = 0;
  int num_folds = 0;
  std::vector<ManifestEntry> entries;
  std::string root;  // directory entries' paths are relative to

  /// Throws std::invalid_argument on any violated invariant: empty entry
  /// list, identity present in two folds, identities missing a domain,
  /// fold/identity indices out of range.
  void validate() const;

  /// Identities present in the given folds, sorted ascending.
  std::vector<int> identities_in_folds(const std::vector<int>& folds) const;

  std::string entry_abspath(int idx) const;
};

void save_manifest(const DatasetManifest& m, const std::string& path);

/// Loads and validates; `check_files` additionally requires every referenced
/// image file to exist.
DatasetManifest load_manifest(const std::string& path, bool check_files = true);

/// One image with its labels, pixels in [-1, 1], channels-first.
struct ImageSample {
  Tensor<float> pixels;  // C x H x W
  int identity = 0;
  Domain domain = Domain::kProfile;
  int fold = 0;
  std::string source_path;
};

/// Manifest plus all pixels resident in memory, with per-(identity, domain)
/// indices for sampling and evaluation.
struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<Tensor<float>> images;  // parallel to manifest.entries

  static LoadedDataset load(const DatasetManifest& m);

  const std::vector<int>& entries_of(int identity, Domain d) const;
  std::vector<int> entries_in_folds(const std::vector<int>& folds, Domain d) const;
  ImageSample sample(int entry_idx) const;

 private:
  std::map<std::pair<int, int>, std::vector<int>> by_identity_domain_;
};

/// A balanced batch of aligned cross-domain pairs, tensorized for training.
/// labels[i] = 0 for a genuine pair (same identity), 1 for an impostor pair.
struct PairBatch {
  Tensor<float> profiles;  // N x C x H x W
  Tensor<float> frontals;  // N x C x H x W
  std::vector<int> labels;
  std::vector<int> profile_identities, frontal_identities;

  int size() const { return static_cast<int>(labels.size()); }
};

/// Draws floor(batch_size/2) genuine then ceil(batch_size/2) impostor pairs
/// from the identities in `folds`. Deterministic given the rng state.
PairBatch sample_pair_batch(const LoadedDataset& data, const std::vector<int>& folds, int batch_size,
                            std::mt19937_64& rng);

}  // namespace cpgan
