#pragma once

#include <string>
#include <vector>

#include "cpgan/baselines.hpp"
#include "cpgan/synthetic.hpp"
#include "cpgan/trainer.hpp"
#include "json.hpp"

// Run-level configuration: defaults, then a sectioned key=value config file,
// then documented environment variables, then command-line flags — later
// layers win. File parsing is strict: unknown sections or keys are errors.

namespace cpgan {

struct RunConfig {
  SyntheticSpec synth;
  TrainConfig train;  // carries NetConfig + LossWeights
  AddaConfig adda;    // stage learning rates / epochs; shared fields mirror `train`

  std::string model = "cpgan";  // cpgan | cpcnn | adda
  std::string stage = "both";   // adda: 1 | 2 | both
  std::string manifest_path;
  std::string out_dir;
  std::string checkpoint_path;
  std::string report_out;
  std::string input_path;
  std::string direction = "p2f";  // frontalize: p2f | f2p
  std::string grid_out;
  std::string ablation_variant;  // optional: train one ablation variant's weights
  std::vector<int> eval_folds;
  int eval_batch = 32;

  /// Mirrors the shared fields (architecture, batch, seed, margin, folds)
  /// from `train` into `adda`. Call after all override layers.
  void sync_shared();

  /// The provenance block embedded into artifacts.
  nlohmann::json echo() const;
};

/// Merges `path` into `cfg`. Unknown sections/keys or malformed values throw
/// std::invalid_argument naming the offender.
void apply_config_file(RunConfig& cfg, const std::string& path);

/// CPGAN_SEED (all module seeds) and CPGAN_OUT (output directory).
void apply_env_overrides(RunConfig& cfg);

}  // namespace cpgan
