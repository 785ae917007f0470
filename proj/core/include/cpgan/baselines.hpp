#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "cpgan/checkpoint.hpp"
#include "cpgan/datamodel.hpp"
#include "cpgan/losses.hpp"
#include "cpgan/networks.hpp"
#include "cpgan/nn.hpp"
#include "cpgan/serialize.hpp"
#include "cpgan/trainer.hpp"

namespace cpgan {

// ---------------------------------------------------------------------------
// Coupled-encoder baseline: the two encoders and the coupling loss, nothing
// else. Shares TrainConfig with the full model; the image-loss weights are
// ignored.

struct CpcnnModel {
  NetConfig net;
  UNetEncoder<float> enc_pr;
  UNetEncoder<float> enc_fr;

  explicit CpcnnModel(const NetConfig& cfg) : net(cfg), enc_pr("enc_pr", cfg), enc_fr("enc_fr", cfg) {}

  std::vector<Param<float>*> params() {
    std::vector<Param<float>*> ps;
    enc_pr.params(ps);
    enc_fr.params(ps);
    return ps;
  }
};

class CpcnnTrainer {
 public:
  CpcnnTrainer(const LoadedDataset& data, const TrainConfig& cfg);
  CpcnnTrainer(const LoadedDataset& data, const LoadedCheckpoint& ck);

  TrainResult train(int epochs);
  LossBreakdown step_once();
  void save(const std::string& path) const;

  CpcnnModel& model() { return *model_; }
  const TrainConfig& config() const { return cfg_; }
  int steps_per_epoch() const { return steps_per_epoch_; }

 private:
  void build(bool fresh);

  const LoadedDataset& data_;
  TrainConfig cfg_;
  std::vector<int> folds_;
  int steps_per_epoch_ = 0;
  std::unique_ptr<CpcnnModel> model_;
  std::unique_ptr<Adam<float>> adam_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  std::int64_t global_step_ = 0;
  std::ofstream log_;
};

TrainResult train_cpcnn(const LoadedDataset& data, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Two-stage adversarial domain-adaptation baseline. Stage 1 pretrains the
// frontal encoder with an identity classifier; stage 2 freezes both and
// adapts a profile encoder against an embedding-space discriminator, with a
// contrastive pull toward the fixed frontal embeddings.

struct AddaConfig {
  NetConfig net;
  int batch_size = 128;  // desk-scale runs usually pass 32
  double stage1_lr = 1e-3;
  double stage2_lr = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int stage1_epochs = 10;
  int stage2_epochs = 10;
  int steps_per_epoch = 0;  // 0: ceil(train images / batch_size), per stage domain
  double margin = 1.0;
  double contrastive_weight = 1.0;
  std::uint64_t seed = 1;
  std::vector<int> train_folds;  // empty: all folds
  std::string checkpoint_dir;
  std::string log_path;

  void validate() const;
};

void to_json(nlohmann::json& j, const AddaConfig& c);
void from_json(const nlohmann::json& j, AddaConfig& c);

enum class AddaStage { kStage1 = 1, kStage2 = 2, kBoth = 3 };
AddaStage parse_adda_stage(const std::string& s);  // "1" | "2" | "both"

struct AddaResult {
  double stage1_accuracy = 0.0;  // over all training frontals
  int stage1_epochs_run = 0;
  int stage2_epochs_run = 0;
  std::vector<LossBreakdown> stage2_steps;
  double mean_disc_real = 0.0;  // final-epoch average discriminator outputs
  double mean_disc_fake = 0.0;
  std::uint64_t frozen_checksum_before = 0;
  std::uint64_t frozen_checksum_after = 0;
  std::string last_checkpoint;
  double seconds = 0.0;
};

class AddaTrainer {
 public:
  AddaTrainer(const LoadedDataset& data, const AddaConfig& cfg);
  AddaTrainer(const LoadedDataset& data, const LoadedCheckpoint& ck);

  void run_stage1(int epochs, AddaResult& result);
  /// Throws std::invalid_argument unless stage 1 has completed (in this
  /// process or in the loaded checkpoint).
  void run_stage2(int epochs, AddaResult& result);

  void save(const std::string& path) const;
  /// Checksum over the parameters frozen after stage 1.
  std::uint64_t frozen_checksum() const;

  /// Points checkpoint/log output somewhere other than the paths echoed in a
  /// loaded checkpoint. Empty strings keep the current values.
  void redirect_outputs(const std::string& checkpoint_dir, const std::string& log_path);

  bool stage1_done() const { return stage1_done_; }
  bool stage2_done() const { return stage2_done_; }
  double stage1_train_accuracy();

  UNetEncoder<float>& frontal_encoder() { return *enc_fr_; }
  UNetEncoder<float>& profile_encoder() { return *enc_pr_; }
  ClassifierHead<float>& classifier() { return *cls_; }
  const AddaConfig& config() const { return cfg_; }
  const std::vector<int>& class_ids() const { return class_ids_; }

 private:
  void build(bool fresh);
  LossBreakdown stage1_step();
  LossBreakdown stage2_step(double& mean_real, double& mean_fake);
  std::string write_checkpoint(const std::string& filename) const;
  void append_log(int stage, const LossBreakdown& b);

  const LoadedDataset& data_;
  AddaConfig cfg_;
  std::vector<int> folds_;
  std::vector<int> frontal_entries_;  // training frontals
  std::vector<int> class_ids_;        // sorted training identities
  std::unique_ptr<UNetEncoder<float>> enc_fr_;
  std::unique_ptr<UNetEncoder<float>> enc_pr_;
  std::unique_ptr<ClassifierHead<float>> cls_;
  std::unique_ptr<EmbedDiscriminator<float>> edisc_;
  std::unique_ptr<Adam<float>> adam_stage1_;
  std::unique_ptr<Adam<float>> adam_map_;
  std::unique_ptr<Adam<float>> adam_edisc_;
  std::mt19937_64 rng_;
  bool stage1_done_ = false;
  bool stage2_done_ = false;
  std::int64_t global_step_ = 0;
  std::ofstream log_;
};

/// Runs the requested stage(s). Stage 2 alone requires `stage1_checkpoint`.
AddaResult train_adda(const LoadedDataset& data, const AddaConfig& cfg, AddaStage stage,
                      const std::string& stage1_checkpoint = "");

// ---------------------------------------------------------------------------

/// Inference-side view of any trained checkpoint: the two domain encoders,
/// plus the full generator pair when the checkpoint carries decoders.
struct LoadedModel {
  std::string kind;
  NetConfig net;
  std::unique_ptr<CpganModel> cpgan;             // kind == "cpgan"
  std::unique_ptr<UNetEncoder<float>> enc_pr_only;  // other kinds
  std::unique_ptr<UNetEncoder<float>> enc_fr_only;

  UNetEncoder<float>& profile_encoder();
  UNetEncoder<float>& frontal_encoder();
};

LoadedModel load_model_for_eval(const LoadedCheckpoint& ck);

}  // namespace cpgan
