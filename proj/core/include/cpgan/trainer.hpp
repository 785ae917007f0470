#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpgan/checkpoint.hpp"
#include "cpgan/datamodel.hpp"
#include "cpgan/losses.hpp"
#include "cpgan/networks.hpp"
#include "cpgan/nn.hpp"
#include "cpgan/serialize.hpp"

namespace cpgan {

struct TrainConfig {
  NetConfig net;
  LossWeights weights;
  int batch_size = 128;  // desk-scale runs usually pass 32
  double learning_rate = 4e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int epochs = 10;
  int steps_per_epoch = 0;  // 0: ceil(train profile count / batch_size)
  int d_steps_per_g_step = 1;
  std::uint64_t seed = 1;
  std::vector<int> train_folds;  // empty: all folds
  bool zero_skips = false;
  std::string device = "cpu";
  std::string checkpoint_dir;  // empty: no checkpoints written
  int checkpoint_every = 1;    // epochs between checkpoint writes
  bool keep_epoch_checkpoints = false;  // also retain per-epoch files next to last.ckpt
  std::string log_path;        // empty: no per-step CSV log

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// The two coupled generators, their patch discriminators and the frozen
// feature network, with parameters initialized per-name from one seed.
struct CpganModel {
  NetConfig net;
  UNetGenerator<float> g_pr;
  UNetGenerator<float> g_fr;
  PatchDiscriminator<float> d_pr;
  PatchDiscriminator<float> d_fr;
  PerceptualNet<float> percep;

  explicit CpganModel(const NetConfig& cfg)
      : net(cfg),
        g_pr("enc_pr", "dec_pr", cfg),
        g_fr("enc_fr", "dec_fr", cfg),
        d_pr("disc_pr", cfg),
        d_fr("disc_fr", cfg),
        percep(cfg) {}

  void init(std::uint64_t seed) {
    init_params(generator_params(), seed);
    init_params(discriminator_params(), seed);
  }

  std::vector<Param<float>*> generator_params() {
    std::vector<Param<float>*> ps;
    g_pr.params(ps);
    g_fr.params(ps);
    return ps;
  }

  std::vector<Param<float>*> discriminator_params() {
    std::vector<Param<float>*> ps;
    d_pr.params(ps);
    d_fr.params(ps);
    return ps;
  }

  std::vector<Param<float>*> all_params() {
    auto ps = generator_params();
    d_pr.params(ps);
    d_fr.params(ps);
    percep.params(ps);
    return ps;
  }
};

// Raised when a training step produces a non-finite loss. A state snapshot
// is written first so the failure can be inspected offline.
struct NonFiniteLossError : std::runtime_error {
  NonFiniteLossError(const std::string& what, std::string snapshot)
      : std::runtime_error(what), snapshot_path(std::move(snapshot)) {}
  std::string snapshot_path;
};

struct TrainResult {
  std::vector<LossBreakdown> steps;  // one entry per optimizer step, in order
  LossBreakdown final_losses;
  std::string last_checkpoint;
  int steps_run = 0;
  int epochs_run = 0;
  double seconds = 0.0;
};

class CpganTrainer {
 public:
  using EpochCallback =
      std::function<void(int epoch, const LossBreakdown& last_losses, CpganTrainer& trainer)>;

  CpganTrainer(const LoadedDataset& data, const TrainConfig& cfg);
  CpganTrainer(const LoadedDataset& data, const LoadedCheckpoint& ck);

  // Runs `epochs` additional epochs and returns the losses observed.
  TrainResult train(int epochs, const EpochCallback& on_epoch = {});

  void save(const std::string& path) const;

  /// Points checkpoint/log output somewhere other than the paths echoed in a
  /// loaded checkpoint. Empty strings keep the current values.
  void redirect_outputs(const std::string& checkpoint_dir, const std::string& log_path);

  CpganModel& model() { return *model_; }
  const CpganModel& model() const { return *model_; }
  const TrainConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }
  std::int64_t global_step() const { return global_step_; }
  int steps_per_epoch() const { return steps_per_epoch_; }

  // One optimizer step on one sampled batch; exposed for determinism tests.
  LossBreakdown step_once();

 private:
  void build(std::uint64_t init_seed, bool fresh);
  double disc_phase(PatchDiscriminator<float>& disc, const Tensor<float>& target,
                    const Tensor<float>& recon);
  void generator_image_terms(PatchDiscriminator<float>& disc, const Tensor<float>& target,
                             const Tensor<float>& recon, Tensor<float>& grad_recon,
                             double& gan_term, double& perc_term, double& l2_term);
  std::string write_checkpoint(const std::string& filename) const;
  void append_log(const LossBreakdown& b);
  [[noreturn]] void abort_non_finite(const LossBreakdown& b);

  const LoadedDataset& data_;
  TrainConfig cfg_;
  std::vector<int> folds_;
  int steps_per_epoch_ = 0;
  std::unique_ptr<CpganModel> model_;
  std::unique_ptr<Adam<float>> adam_g_;
  std::unique_ptr<Adam<float>> adam_d_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  std::int64_t global_step_ = 0;
  std::ofstream log_;
};

// Convenience wrappers around CpganTrainer.
TrainResult train_cpgan(const LoadedDataset& data, const TrainConfig& cfg);
TrainResult resume_cpgan(const LoadedDataset& data, const std::string& checkpoint_path,
                         int extra_epochs);

}  // namespace cpgan
