#include "cpgan/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>

#include "cpgan/version.hpp"

namespace fs = std::filesystem;

namespace cpgan {

namespace {

std::vector<int> resolve_folds(const std::vector<int>& requested, const DatasetManifest& m,
                               const char* who) {
  if (!requested.empty()) {
    for (int f : requested)
      if (f < 0 || f >= m.num_folds)
        throw std::invalid_argument(std::string(who) + ": train fold " + std::to_string(f) +
                                    " out of range");
    return requested;
  }
  std::vector<int> all(m.num_folds);
  for (int f = 0; f < m.num_folds; ++f) all[f] = f;
  return all;
}

Tensor<float> gather_images(const LoadedDataset& data, const std::vector<int>& entry_idxs) {
  const auto& m = data.manifest;
  const int n = static_cast<int>(entry_idxs.size());
  Tensor<float> batch({n, m.channels, m.height, m.width});
  const std::size_t stride = static_cast<std::size_t>(m.channels) * m.height * m.width;
  for (int i = 0; i < n; ++i) {
    const Tensor<float>& img = data.images.at(entry_idxs[i]);
    std::copy(img.data(), img.data() + stride, batch.data() + i * stride);
  }
  return batch;
}

}  // namespace

// ---------------------------------------------------------------------------
// Coupled-encoder baseline

CpcnnTrainer::CpcnnTrainer(const LoadedDataset& data, const TrainConfig& cfg) : data_(data), cfg_(cfg) {
  cfg_.validate();
  build(/*fresh=*/true);
}

CpcnnTrainer::CpcnnTrainer(const LoadedDataset& data, const LoadedCheckpoint& ck) : data_(data) {
  if (ck.meta.kind != "cpcnn")
    throw std::invalid_argument("CpcnnTrainer: checkpoint kind \"" + ck.meta.kind + "\" is not \"cpcnn\"");
  cfg_ = ck.meta.config.get<TrainConfig>();
  cfg_.validate();
  build(/*fresh=*/false);
  for (Param<float>* p : model_->params()) {
    const Tensor<float>& t = ck.require(p->name);
    if (!t.same_shape(p->value))
      throw std::invalid_argument("CpcnnTrainer: checkpoint tensor " + p->name + " has shape " +
                                  t.shape_str() + ", model expects " + p->value.shape_str());
    p->value = t;
  }
  for (const auto& [name, t] : ck.tensors)
    if (name.rfind("adam.", 0) == 0) adam_->import_state(name, t);
  adam_->set_steps(ck.meta.extra.value("adam_steps", std::int64_t{0}));
  rng_ = rng_state_from_string(ck.meta.rng_state);
  epoch_ = static_cast<int>(ck.meta.epoch);
  global_step_ = ck.meta.step;
}

void CpcnnTrainer::build(bool fresh) {
  folds_ = resolve_folds(cfg_.train_folds, data_.manifest, "CpcnnTrainer");
  const int n = static_cast<int>(data_.entries_in_folds(folds_, Domain::kProfile).size());
  if (n == 0) throw std::invalid_argument("CpcnnTrainer: no profile images in the training folds");
  steps_per_epoch_ =
      cfg_.steps_per_epoch > 0 ? cfg_.steps_per_epoch : (n + cfg_.batch_size - 1) / cfg_.batch_size;

  model_ = std::make_unique<CpcnnModel>(cfg_.net);
  if (fresh) init_params(model_->params(), cfg_.seed);

  Adam<float>::Hyper h;
  h.lr = cfg_.learning_rate;
  h.beta1 = cfg_.adam_beta1;
  h.beta2 = cfg_.adam_beta2;
  adam_ = std::make_unique<Adam<float>>(model_->params(), h);
  if (fresh) rng_ = make_rng(cfg_.seed, "trainer");

  if (!cfg_.log_path.empty()) {
    bool fresh_file = !fs::exists(cfg_.log_path) || fs::file_size(cfg_.log_path) == 0;
    log_.open(cfg_.log_path, std::ios::app);
    if (!log_) throw std::runtime_error("CpcnnTrainer: cannot open log file " + cfg_.log_path);
    if (fresh_file) log_ << "epoch,step," << LossBreakdown::csv_header() << "\n";
  }
}

LossBreakdown CpcnnTrainer::step_once() {
  PairBatch batch = sample_pair_batch(data_, folds_, cfg_.batch_size, rng_);
  LossBreakdown out;

  EmbeddingOutput<float> enc_p = model_->enc_pr.forward(batch.profiles);
  EmbeddingOutput<float> enc_f = model_->enc_fr.forward(batch.frontals);
  if (!all_finite(enc_p.embedding) || !all_finite(enc_f.embedding))
    throw std::runtime_error("CpcnnTrainer: non-finite embeddings at step " + std::to_string(global_step_));

  adam_->zero_grad();
  auto rcpl = coupling_loss(enc_p.embedding, enc_f.embedding, batch.labels, cfg_.weights.margin);
  out.coupling = rcpl.loss;
  model_->enc_pr.backward(rcpl.grad_z1, {});
  model_->enc_fr.backward(rcpl.grad_z2, {});
  adam_->step();

  LossWeights wz = cfg_.weights;
  wz.lambda_gan = wz.lambda_perceptual = wz.lambda_l2 = 0.0;
  out.finalize(wz);

  ++global_step_;
  if (log_.is_open()) {
    log_ << epoch_ << "," << global_step_ << "," << out.csv_row() << "\n";
    log_.flush();
  }
  return out;
}

void CpcnnTrainer::save(const std::string& path) const {
  CheckpointMeta meta;
  meta.kind = "cpcnn";
  meta.epoch = epoch_;
  meta.step = global_step_;
  meta.rng_state = rng_state_to_string(rng_);
  meta.config = cfg_;
  meta.extra = {{"adam_steps", adam_->steps()}};
  meta.version = version_string();
  NamedTensors tensors;
  for (Param<float>* p : const_cast<CpcnnModel&>(*model_).params()) tensors.emplace_back(p->name, &p->value);
  adam_->export_state(tensors);
  save_checkpoint(path, meta, tensors);
}

TrainResult CpcnnTrainer::train(int epochs) {
  auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  for (int e = 0; e < epochs; ++e) {
    for (int s = 0; s < steps_per_epoch_; ++s) {
      result.steps.push_back(step_once());
      ++result.steps_run;
    }
    ++epoch_;
    ++result.epochs_run;
    if (!cfg_.checkpoint_dir.empty() && (epoch_ % cfg_.checkpoint_every == 0 || e == epochs - 1)) {
      fs::create_directories(cfg_.checkpoint_dir);
      std::string path = (fs::path(cfg_.checkpoint_dir) / "last.ckpt").string();
      save(path);
      result.last_checkpoint = path;
    }
  }
  if (!result.steps.empty()) result.final_losses = result.steps.back();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

TrainResult train_cpcnn(const LoadedDataset& data, const TrainConfig& cfg) {
  CpcnnTrainer trainer(data, cfg);
  return trainer.train(cfg.epochs);
}

// ---------------------------------------------------------------------------
// Domain-adaptation baseline

void AddaConfig::validate() const {
  net.validate();
  if (batch_size < 2 || batch_size % 2 != 0)
    throw std::invalid_argument("AddaConfig: batch_size must be even and >= 2");
  if (!(stage1_lr > 0) || !(stage2_lr > 0)) throw std::invalid_argument("AddaConfig: learning rates must be > 0");
  if (stage1_epochs < 0 || stage2_epochs < 0) throw std::invalid_argument("AddaConfig: epochs must be >= 0");
  if (steps_per_epoch < 0) throw std::invalid_argument("AddaConfig: steps_per_epoch must be >= 0");
  if (!(margin > 0)) throw std::invalid_argument("AddaConfig: margin must be > 0");
  if (contrastive_weight < 0) throw std::invalid_argument("AddaConfig: contrastive_weight must be >= 0");
}

void to_json(nlohmann::json& j, const AddaConfig& c) {
  j = {{"net", c.net},
       {"batch_size", c.batch_size},
       {"stage1_lr", c.stage1_lr},
       {"stage2_lr", c.stage2_lr},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"stage1_epochs", c.stage1_epochs},
       {"stage2_epochs", c.stage2_epochs},
       {"steps_per_epoch", c.steps_per_epoch},
       {"margin", c.margin},
       {"contrastive_weight", c.contrastive_weight},
       {"seed", c.seed},
       {"train_folds", c.train_folds},
       {"checkpoint_dir", c.checkpoint_dir},
       {"log_path", c.log_path}};
}

void from_json(const nlohmann::json& j, AddaConfig& c) {
  j.at("net").get_to(c.net);
  j.at("batch_size").get_to(c.batch_size);
  j.at("stage1_lr").get_to(c.stage1_lr);
  j.at("stage2_lr").get_to(c.stage2_lr);
  j.at("adam_beta1").get_to(c.adam_beta1);
  j.at("adam_beta2").get_to(c.adam_beta2);
  j.at("stage1_epochs").get_to(c.stage1_epochs);
  j.at("stage2_epochs").get_to(c.stage2_epochs);
  j.at("steps_per_epoch").get_to(c.steps_per_epoch);
  j.at("margin").get_to(c.margin);
  j.at("contrastive_weight").get_to(c.contrastive_weight);
  j.at("seed").get_to(c.seed);
  j.at("train_folds").get_to(c.train_folds);
  j.at("checkpoint_dir").get_to(c.checkpoint_dir);
  j.at("log_path").get_to(c.log_path);
}

AddaStage parse_adda_stage(const std::string& s) {
  if (s == "1") return AddaStage::kStage1;
  if (s == "2") return AddaStage::kStage2;
  if (s == "both") return AddaStage::kBoth;
  throw std::invalid_argument("stage must be one of: 1, 2, both (got \"" + s + "\")");
}

AddaTrainer::AddaTrainer(const LoadedDataset& data, const AddaConfig& cfg) : data_(data), cfg_(cfg) {
  cfg_.validate();
  build(/*fresh=*/true);
}

AddaTrainer::AddaTrainer(const LoadedDataset& data, const LoadedCheckpoint& ck) : data_(data) {
  if (ck.meta.kind != "adda")
    throw std::invalid_argument("AddaTrainer: checkpoint kind \"" + ck.meta.kind + "\" is not \"adda\"");
  cfg_ = ck.meta.config.get<AddaConfig>();
  cfg_.validate();
  build(/*fresh=*/false);
  stage1_done_ = ck.meta.extra.value("stage1_done", false);
  stage2_done_ = ck.meta.extra.value("stage2_done", false);
  auto ids = ck.meta.extra.value("class_ids", std::vector<int>{});
  if (ids != class_ids_)
    throw std::invalid_argument("AddaTrainer: checkpoint class set does not match the training folds");

  auto assign = [&](const std::vector<Param<float>*>& ps) {
    for (Param<float>* p : ps) {
      const Tensor<float>& t = ck.require(p->name);
      if (!t.same_shape(p->value))
        throw std::invalid_argument("AddaTrainer: checkpoint tensor " + p->name + " has shape " +
                                    t.shape_str() + ", model expects " + p->value.shape_str());
      p->value = t;
    }
  };
  std::vector<Param<float>*> frozen;
  enc_fr_->params(frozen);
  cls_->params(frozen);
  assign(frozen);
  if (stage2_done_ || ck.tensors.count("enc_pr.stem.w") || ck.tensors.count("edisc.fc1.w")) {
    std::vector<Param<float>*> rest;
    enc_pr_->params(rest);
    edisc_->params(rest);
    assign(rest);
  }
  rng_ = rng_state_from_string(ck.meta.rng_state);
  global_step_ = ck.meta.step;
}

void AddaTrainer::build(bool fresh) {
  folds_ = resolve_folds(cfg_.train_folds, data_.manifest, "AddaTrainer");
  frontal_entries_ = data_.entries_in_folds(folds_, Domain::kFrontal);
  if (frontal_entries_.empty()) throw std::invalid_argument("AddaTrainer: no frontal images in the training folds");
  class_ids_ = data_.manifest.identities_in_folds(folds_);

  enc_fr_ = std::make_unique<UNetEncoder<float>>("enc_fr", cfg_.net);
  enc_pr_ = std::make_unique<UNetEncoder<float>>("enc_pr", cfg_.net);
  cls_ = std::make_unique<ClassifierHead<float>>("cls", cfg_.net.embed_dim,
                                                 static_cast<int>(class_ids_.size()));
  edisc_ = std::make_unique<EmbedDiscriminator<float>>("edisc", cfg_.net.embed_dim);

  if (fresh) {
    std::vector<Param<float>*> ps;
    enc_fr_->params(ps);
    enc_pr_->params(ps);
    cls_->params(ps);
    edisc_->params(ps);
    init_params(ps, cfg_.seed);
    rng_ = make_rng(cfg_.seed, "trainer");
  }

  std::vector<Param<float>*> s1;
  enc_fr_->params(s1);
  cls_->params(s1);
  Adam<float>::Hyper h1{cfg_.stage1_lr, cfg_.adam_beta1, cfg_.adam_beta2, 1e-8};
  adam_stage1_ = std::make_unique<Adam<float>>(s1, h1);

  std::vector<Param<float>*> sm, sd;
  enc_pr_->params(sm);
  edisc_->params(sd);
  Adam<float>::Hyper h2{cfg_.stage2_lr, cfg_.adam_beta1, cfg_.adam_beta2, 1e-8};
  adam_map_ = std::make_unique<Adam<float>>(sm, h2);
  adam_edisc_ = std::make_unique<Adam<float>>(sd, h2);

  if (!cfg_.log_path.empty()) {
    bool fresh_file = !fs::exists(cfg_.log_path) || fs::file_size(cfg_.log_path) == 0;
    log_.open(cfg_.log_path, std::ios::app);
    if (!log_) throw std::runtime_error("AddaTrainer: cannot open log file " + cfg_.log_path);
    if (fresh_file) log_ << "stage,step," << LossBreakdown::csv_header() << "\n";
  }
}

void AddaTrainer::redirect_outputs(const std::string& checkpoint_dir, const std::string& log_path) {
  if (!checkpoint_dir.empty()) cfg_.checkpoint_dir = checkpoint_dir;
  if (!log_path.empty()) {
    cfg_.log_path = log_path;
    if (log_.is_open()) log_.close();
    bool fresh_file = !fs::exists(log_path) || fs::file_size(log_path) == 0;
    log_.open(log_path, std::ios::app);
    if (!log_) throw std::runtime_error("AddaTrainer: cannot open log file " + log_path);
    if (fresh_file) log_ << "stage,step," << LossBreakdown::csv_header() << "\n";
  }
}

std::uint64_t AddaTrainer::frozen_checksum() const {
  std::vector<Param<float>*> ps;
  enc_fr_->params(ps);
  cls_->params(ps);
  NamedTensors tensors;
  for (Param<float>* p : ps) tensors.emplace_back(p->name, &p->value);
  return tensor_checksum(tensors);
}

LossBreakdown AddaTrainer::stage1_step() {
  const int b = cfg_.batch_size;
  std::vector<int> picks(b);
  std::vector<int> labels(b);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(frontal_entries_.size()) - 1);
  for (int i = 0; i < b; ++i) {
    picks[i] = frontal_entries_[pick(rng_)];
    const int identity = data_.manifest.entries[picks[i]].identity;
    labels[i] = static_cast<int>(
        std::lower_bound(class_ids_.begin(), class_ids_.end(), identity) - class_ids_.begin());
  }
  Tensor<float> batch = gather_images(data_, picks);

  adam_stage1_->zero_grad();
  Tensor<float> probs = cls_->forward(enc_fr_->forward(batch).embedding);
  auto ce = softmax_cross_entropy(probs, labels);
  enc_fr_->backward(cls_->backward_logits(ce.grad_logits), {});
  adam_stage1_->step();

  LossBreakdown out;
  out.cls = ce.loss;
  ++global_step_;
  append_log(1, out);
  return out;
}

double AddaTrainer::stage1_train_accuracy() {
  const int n = static_cast<int>(frontal_entries_.size());
  int correct = 0;
  const int bs = cfg_.batch_size;
  for (int start = 0; start < n; start += bs) {
    std::vector<int> chunk(frontal_entries_.begin() + start,
                           frontal_entries_.begin() + std::min(n, start + bs));
    Tensor<float> batch = gather_images(data_, chunk);
    Tensor<float> probs = cls_->forward(enc_fr_->forward(batch).embedding);
    for (int i = 0; i < static_cast<int>(chunk.size()); ++i) {
      int arg = 0;
      for (int k = 1; k < probs.dim(1); ++k)
        if (probs.at(i, k) > probs.at(i, arg)) arg = k;
      if (class_ids_[arg] == data_.manifest.entries[chunk[i]].identity) ++correct;
    }
  }
  return static_cast<double>(correct) / n;
}

LossBreakdown AddaTrainer::stage2_step(double& mean_real, double& mean_fake) {
  PairBatch batch = sample_pair_batch(data_, folds_, cfg_.batch_size, rng_);
  const int n = batch.size();

  // Fixed targets: the frozen frontal encoder is never backpropagated.
  Tensor<float> z_fr = enc_fr_->forward(batch.frontals).embedding;
  Tensor<float> z_pr = enc_pr_->forward(batch.profiles).embedding;

  LossBreakdown out;

  // Discriminator update; one forward over [frontal; profile] embeddings.
  adam_edisc_->zero_grad();
  Tensor<float> z2 = concat_batch(z_fr, z_pr);
  Tensor<float> p2 = edisc_->forward(z2);
  Tensor<float> p_real, p_fake;
  split_batch(p2, n, p_real, p_fake);
  auto rd = gan_discriminator_loss(p_real, p_fake);
  out.adv_d = rd.loss;
  edisc_->backward(concat_batch(rd.grad_real, rd.grad_fake));
  adam_edisc_->step();

  double sum_real = 0.0, sum_fake = 0.0;
  for (int i = 0; i < n; ++i) {
    sum_real += p_real[i];
    sum_fake += p_fake[i];
  }
  mean_real = sum_real / n;
  mean_fake = sum_fake / n;

  // Profile-encoder update against the refreshed discriminator.
  adam_map_->zero_grad();
  Tensor<float> p_map = edisc_->forward(z_pr);
  auto rg = gan_generator_loss(p_map);
  out.adv_g = rg.loss;
  Tensor<float> g_adv = edisc_->backward(rg.grad_fake);  // stray edisc grads die at the next zero_grad

  auto rc = coupling_loss(z_pr, z_fr, batch.labels, cfg_.margin);
  out.contrast = rc.loss;
  EMap<float> gmap(g_adv.data(), 1, g_adv.numel());
  gmap += static_cast<float>(cfg_.contrastive_weight) *
          ECMap<float>(rc.grad_z1.data(), 1, rc.grad_z1.numel());
  enc_pr_->backward(g_adv, {});
  adam_map_->step();

  ++global_step_;
  append_log(2, out);
  return out;
}

void AddaTrainer::run_stage1(int epochs, AddaResult& result) {
  const int spe = cfg_.steps_per_epoch > 0
                      ? cfg_.steps_per_epoch
                      : (static_cast<int>(frontal_entries_.size()) + cfg_.batch_size - 1) / cfg_.batch_size;
  for (int e = 0; e < epochs; ++e) {
    for (int s = 0; s < spe; ++s) stage1_step();
    ++result.stage1_epochs_run;
  }
  stage1_done_ = true;
  result.stage1_accuracy = stage1_train_accuracy();
  if (!cfg_.checkpoint_dir.empty()) result.last_checkpoint = write_checkpoint("stage1.ckpt");
}

void AddaTrainer::run_stage2(int epochs, AddaResult& result) {
  if (!stage1_done_)
    throw std::invalid_argument(
        "adaptation stage requires a completed pretrain stage (run stage 1 first or load its checkpoint)");
  if (!stage2_done_) {
    // Warm-start the profile encoder from the frozen frontal weights.
    std::vector<Param<float>*> src, dst;
    enc_fr_->params(src);
    enc_pr_->params(dst);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
  }
  result.frozen_checksum_before = frozen_checksum();

  const int n_profiles = static_cast<int>(data_.entries_in_folds(folds_, Domain::kProfile).size());
  const int spe = cfg_.steps_per_epoch > 0 ? cfg_.steps_per_epoch
                                           : (n_profiles + cfg_.batch_size - 1) / cfg_.batch_size;
  double mean_real = 0.0, mean_fake = 0.0;
  for (int e = 0; e < epochs; ++e) {
    double acc_real = 0.0, acc_fake = 0.0;
    for (int s = 0; s < spe; ++s) {
      double r, f;
      result.stage2_steps.push_back(stage2_step(r, f));
      acc_real += r;
      acc_fake += f;
    }
    mean_real = acc_real / spe;
    mean_fake = acc_fake / spe;
    ++result.stage2_epochs_run;
  }
  stage2_done_ = true;
  result.mean_disc_real = mean_real;
  result.mean_disc_fake = mean_fake;
  result.frozen_checksum_after = frozen_checksum();
  if (!cfg_.checkpoint_dir.empty()) result.last_checkpoint = write_checkpoint("last.ckpt");
}

std::string AddaTrainer::write_checkpoint(const std::string& filename) const {
  fs::create_directories(cfg_.checkpoint_dir);
  std::string path = (fs::path(cfg_.checkpoint_dir) / filename).string();
  save(path);
  return path;
}

void AddaTrainer::save(const std::string& path) const {
  CheckpointMeta meta;
  meta.kind = "adda";
  meta.epoch = 0;
  meta.step = global_step_;
  meta.rng_state = rng_state_to_string(rng_);
  meta.config = cfg_;
  char checksum[32];
  std::snprintf(checksum, sizeof(checksum), "%016llx",
                static_cast<unsigned long long>(frozen_checksum()));
  meta.extra = {{"stage1_done", stage1_done_},
                {"stage2_done", stage2_done_},
                {"class_ids", class_ids_},
                {"frozen_checksum", checksum}};
  meta.version = version_string();

  std::vector<Param<float>*> ps;
  enc_fr_->params(ps);
  cls_->params(ps);
  enc_pr_->params(ps);
  edisc_->params(ps);
  NamedTensors tensors;
  for (Param<float>* p : ps) tensors.emplace_back(p->name, &p->value);
  save_checkpoint(path, meta, tensors);
}

void AddaTrainer::append_log(int stage, const LossBreakdown& b) {
  if (!log_.is_open()) return;
  log_ << stage << "," << global_step_ << "," << b.csv_row() << "\n";
  log_.flush();
}

UNetEncoder<float>& LoadedModel::profile_encoder() {
  return cpgan ? cpgan->g_pr.encoder() : *enc_pr_only;
}

UNetEncoder<float>& LoadedModel::frontal_encoder() {
  return cpgan ? cpgan->g_fr.encoder() : *enc_fr_only;
}

LoadedModel load_model_for_eval(const LoadedCheckpoint& ck) {
  LoadedModel m;
  m.kind = ck.meta.kind;
  if (ck.meta.kind == "cpgan") {
    TrainConfig cfg = ck.meta.config.get<TrainConfig>();
    m.net = cfg.net;
    m.cpgan = std::make_unique<CpganModel>(cfg.net);
    for (Param<float>* p : m.cpgan->all_params()) {
      const Tensor<float>& t = ck.require(p->name);
      if (!t.same_shape(p->value))
        throw std::invalid_argument("load_model_for_eval: checkpoint tensor " + p->name +
                                    " has shape " + t.shape_str() + ", model expects " +
                                    p->value.shape_str());
      p->value = t;
    }
    return m;
  }
  if (ck.meta.kind == "cpcnn") {
    TrainConfig cfg = ck.meta.config.get<TrainConfig>();
    m.net = cfg.net;
  } else if (ck.meta.kind == "adda") {
    AddaConfig cfg = ck.meta.config.get<AddaConfig>();
    m.net = cfg.net;
  } else {
    throw std::invalid_argument("load_model_for_eval: unknown checkpoint kind \"" + ck.meta.kind + "\"");
  }
  m.enc_pr_only = std::make_unique<UNetEncoder<float>>("enc_pr", m.net);
  m.enc_fr_only = std::make_unique<UNetEncoder<float>>("enc_fr", m.net);
  auto assign = [&](UNetEncoder<float>& enc, const std::string& fallback_prefix) {
    std::vector<Param<float>*> ps;
    enc.params(ps);
    for (Param<float>* p : ps) {
      // A pretrain-only checkpoint has no adapted profile encoder yet; fall
      // back to the frozen frontal weights (the adaptation warm start).
      std::string name = p->name;
      if (!ck.tensors.count(name) && !fallback_prefix.empty())
        name = fallback_prefix + name.substr(name.find('.'));
      const Tensor<float>& t = ck.require(name);
      if (!t.same_shape(p->value))
        throw std::invalid_argument("load_model_for_eval: checkpoint tensor " + name +
                                    " shape mismatch");
      p->value = t;
    }
  };
  assign(*m.enc_fr_only, "");
  assign(*m.enc_pr_only, "enc_fr");
  return m;
}

AddaResult train_adda(const LoadedDataset& data, const AddaConfig& cfg, AddaStage stage,
                      const std::string& stage1_checkpoint) {
  auto t0 = std::chrono::steady_clock::now();
  std::unique_ptr<AddaTrainer> trainer;
  if (stage == AddaStage::kStage2) {
    if (stage1_checkpoint.empty())
      throw std::invalid_argument("stage 2 alone requires a pretrain checkpoint (--checkpoint)");
    LoadedCheckpoint ck = load_checkpoint(stage1_checkpoint);
    trainer = std::make_unique<AddaTrainer>(data, ck);
    trainer->redirect_outputs(cfg.checkpoint_dir, cfg.log_path);
  } else {
    trainer = std::make_unique<AddaTrainer>(data, cfg);
  }

  AddaResult result;
  if (stage == AddaStage::kStage1 || stage == AddaStage::kBoth)
    trainer->run_stage1(cfg.stage1_epochs, result);
  if (stage == AddaStage::kStage2 || stage == AddaStage::kBoth) {
    if (stage == AddaStage::kStage2) result.stage1_accuracy = trainer->stage1_train_accuracy();
    trainer->run_stage2(cfg.stage2_epochs, result);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace cpgan
