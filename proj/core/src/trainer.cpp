#include "cpgan/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include "cpgan/version.hpp"

namespace fs = std::filesystem;

namespace cpgan {

void TrainConfig::validate() const {
  net.validate();
  weights.validate();
  if (batch_size < 2 || batch_size % 2 != 0)
    throw std::invalid_argument("TrainConfig: batch_size must be even and >= 2");
  if (!(learning_rate > 0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (steps_per_epoch < 0) throw std::invalid_argument("TrainConfig: steps_per_epoch must be >= 0");
  if (d_steps_per_g_step < 1) throw std::invalid_argument("TrainConfig: d_steps_per_g_step must be >= 1");
  if (checkpoint_every < 1) throw std::invalid_argument("TrainConfig: checkpoint_every must be >= 1");
  if (device != "cpu") throw std::invalid_argument("TrainConfig: unsupported device \"" + device + "\"");
  for (int f : train_folds)
    if (f < 0) throw std::invalid_argument("TrainConfig: negative fold index");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"net", c.net},
       {"weights", c.weights},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"epochs", c.epochs},
       {"steps_per_epoch", c.steps_per_epoch},
       {"d_steps_per_g_step", c.d_steps_per_g_step},
       {"seed", c.seed},
       {"train_folds", c.train_folds},
       {"zero_skips", c.zero_skips},
       {"device", c.device},
       {"checkpoint_dir", c.checkpoint_dir},
       {"checkpoint_every", c.checkpoint_every},
       {"keep_epoch_checkpoints", c.keep_epoch_checkpoints},
       {"log_path", c.log_path}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("net").get_to(c.net);
  j.at("weights").get_to(c.weights);
  j.at("batch_size").get_to(c.batch_size);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("adam_beta1").get_to(c.adam_beta1);
  j.at("adam_beta2").get_to(c.adam_beta2);
  j.at("epochs").get_to(c.epochs);
  j.at("steps_per_epoch").get_to(c.steps_per_epoch);
  j.at("d_steps_per_g_step").get_to(c.d_steps_per_g_step);
  j.at("seed").get_to(c.seed);
  j.at("train_folds").get_to(c.train_folds);
  j.at("zero_skips").get_to(c.zero_skips);
  j.at("device").get_to(c.device);
  j.at("checkpoint_dir").get_to(c.checkpoint_dir);
  j.at("checkpoint_every").get_to(c.checkpoint_every);
  c.keep_epoch_checkpoints = j.value("keep_epoch_checkpoints", false);
  j.at("log_path").get_to(c.log_path);
}

namespace {

std::vector<int> resolve_folds(const TrainConfig& cfg, const DatasetManifest& m) {
  if (!cfg.train_folds.empty()) {
    for (int f : cfg.train_folds)
      if (f >= m.num_folds)
        throw std::invalid_argument("TrainConfig: train fold " + std::to_string(f) +
                                    " out of range for manifest with " + std::to_string(m.num_folds) +
                                    " folds");
    return cfg.train_folds;
  }
  std::vector<int> all(m.num_folds);
  for (int f = 0; f < m.num_folds; ++f) all[f] = f;
  return all;
}

}  // namespace

CpganTrainer::CpganTrainer(const LoadedDataset& data, const TrainConfig& cfg) : data_(data), cfg_(cfg) {
  cfg_.validate();
  build(cfg_.seed, /*fresh=*/true);
}

CpganTrainer::CpganTrainer(const LoadedDataset& data, const LoadedCheckpoint& ck) : data_(data) {
  if (ck.meta.kind != "cpgan")
    throw std::invalid_argument("CpganTrainer: checkpoint kind \"" + ck.meta.kind + "\" is not \"cpgan\"");
  cfg_ = ck.meta.config.get<TrainConfig>();
  cfg_.validate();
  build(cfg_.seed, /*fresh=*/false);
  for (Param<float>* p : model_->all_params()) {
    const Tensor<float>& t = ck.require(p->name);
    if (!t.same_shape(p->value))
      throw std::invalid_argument("CpganTrainer: checkpoint tensor " + p->name +
                                  " has shape " + t.shape_str() + ", model expects " +
                                  p->value.shape_str() + " (architecture mismatch)");
    p->value = t;
  }
  for (const auto& [name, t] : ck.tensors) {
    if (name.rfind("adam.", 0) != 0) continue;
    // Tensors land in whichever optimizer tracks that parameter.
    std::string pname = name.substr(name.find('.', 5) + 1);
    bool is_disc = pname.rfind("disc_", 0) == 0;
    (is_disc ? *adam_d_ : *adam_g_).import_state(name, t);
  }
  adam_g_->set_steps(ck.meta.extra.value("adam_g_steps", std::int64_t{0}));
  adam_d_->set_steps(ck.meta.extra.value("adam_d_steps", std::int64_t{0}));
  rng_ = rng_state_from_string(ck.meta.rng_state);
  epoch_ = static_cast<int>(ck.meta.epoch);
  global_step_ = ck.meta.step;
}

void CpganTrainer::build(std::uint64_t init_seed, bool fresh) {
  folds_ = resolve_folds(cfg_, data_.manifest);
  const int n_profiles = static_cast<int>(data_.entries_in_folds(folds_, Domain::kProfile).size());
  if (n_profiles == 0) throw std::invalid_argument("CpganTrainer: no profile images in the training folds");
  steps_per_epoch_ = cfg_.steps_per_epoch > 0
                         ? cfg_.steps_per_epoch
                         : (n_profiles + cfg_.batch_size - 1) / cfg_.batch_size;

  model_ = std::make_unique<CpganModel>(cfg_.net);
  if (fresh) model_->init(init_seed);

  Adam<float>::Hyper h;
  h.lr = cfg_.learning_rate;
  h.beta1 = cfg_.adam_beta1;
  h.beta2 = cfg_.adam_beta2;
  adam_g_ = std::make_unique<Adam<float>>(model_->generator_params(), h);
  adam_d_ = std::make_unique<Adam<float>>(model_->discriminator_params(), h);

  if (fresh) rng_ = make_rng(cfg_.seed, "trainer");

  if (!cfg_.log_path.empty()) {
    bool fresh_file = !fs::exists(cfg_.log_path) || fs::file_size(cfg_.log_path) == 0;
    log_.open(cfg_.log_path, std::ios::app);
    if (!log_) throw std::runtime_error("CpganTrainer: cannot open log file " + cfg_.log_path);
    if (fresh_file) log_ << "epoch,step," << LossBreakdown::csv_header() << "\n";
  }
}

double CpganTrainer::disc_phase(PatchDiscriminator<float>& disc, const Tensor<float>& target,
                                const Tensor<float>& recon) {
  const int n = target.dim(0);
  // One forward over [real; fake] so the layer caches cover both halves.
  Tensor<float> cond2 = concat_batch(target, target);
  Tensor<float> cand2 = concat_batch(target, recon);
  Tensor<float> grid2 = disc.forward(cond2, cand2);
  Tensor<float> p_real, p_fake;
  split_batch(grid2, n, p_real, p_fake);
  auto r = gan_discriminator_loss(p_real, p_fake);
  Tensor<float> grad2 = concat_batch(r.grad_real, r.grad_fake);
  disc.backward(grad2, /*input_grad=*/false, /*weight_grad=*/true);
  return r.loss;
}

void CpganTrainer::generator_image_terms(PatchDiscriminator<float>& disc, const Tensor<float>& target,
                                         const Tensor<float>& recon, Tensor<float>& grad_recon,
                                         double& gan_term, double& perc_term, double& l2_term) {
  const LossWeights& w = cfg_.weights;
  grad_recon = Tensor<float>::zeros(recon.shape());
  EMap<float> gmap(grad_recon.data(), 1, grad_recon.numel());
  if (w.lambda_gan > 0) {
    // Fresh forward against the just-updated discriminator; weights stay put.
    Tensor<float> grid = disc.forward(target, recon);
    auto rg = gan_generator_loss(grid);
    gan_term = rg.loss;
    Tensor<float> g = disc.backward(rg.grad_fake, /*input_grad=*/true, /*weight_grad=*/false);
    gmap += static_cast<float>(w.lambda_gan) * ECMap<float>(g.data(), 1, g.numel());
  }
  if (w.lambda_perceptual > 0) {
    // Target features first: the tap caches must hold the generated pass.
    Tensor<float> feat_target = model_->percep.forward(target);
    Tensor<float> feat_gen = model_->percep.forward(recon);
    auto rp = perceptual_feature_loss(feat_gen, feat_target);
    perc_term = rp.loss;
    Tensor<float> g = model_->percep.backward(rp.grad);
    gmap += static_cast<float>(w.lambda_perceptual) * ECMap<float>(g.data(), 1, g.numel());
  }
  if (w.lambda_l2 > 0) {
    auto r2 = l2_reconstruction_loss(recon, target);
    l2_term = r2.loss;
    gmap += static_cast<float>(w.lambda_l2) * ECMap<float>(r2.grad.data(), 1, r2.grad.numel());
  }
}

LossBreakdown CpganTrainer::step_once() {
  const LossWeights& w = cfg_.weights;
  const bool use_gan = w.lambda_gan > 0;
  const bool use_decoder = use_gan || w.lambda_perceptual > 0 || w.lambda_l2 > 0;

  PairBatch batch = sample_pair_batch(data_, folds_, cfg_.batch_size, rng_);
  LossBreakdown out;

  try {
    // Single generator forward reused by both phases.
    EmbeddingOutput<float> enc_p, enc_f;
    Tensor<float> rec_p, rec_f;
    if (use_decoder) {
      auto fp = model_->g_pr.forward(batch.profiles, cfg_.zero_skips);
      enc_p = std::move(fp.enc);
      rec_p = std::move(fp.reconstruction);
      auto ff = model_->g_fr.forward(batch.frontals, cfg_.zero_skips);
      enc_f = std::move(ff.enc);
      rec_f = std::move(ff.reconstruction);
    } else {
      enc_p = model_->g_pr.encode(batch.profiles);
      enc_f = model_->g_fr.encode(batch.frontals);
    }

    // Exploded parameters surface here first, before any loss-side validation.
    if (!all_finite(enc_p.embedding) || !all_finite(enc_f.embedding) ||
        (use_decoder && (!all_finite(rec_p) || !all_finite(rec_f))))
      abort_non_finite(out);

    if (use_gan) {
      for (int ds = 0; ds < cfg_.d_steps_per_g_step; ++ds) {
        adam_d_->zero_grad();
        out.disc_pr = disc_phase(model_->d_pr, batch.profiles, rec_p);
        out.disc_fr = disc_phase(model_->d_fr, batch.frontals, rec_f);
        adam_d_->step();
      }
    }

    adam_g_->zero_grad();
    auto rcpl = coupling_loss(enc_p.embedding, enc_f.embedding, batch.labels, w.margin);
    out.coupling = rcpl.loss;

    Tensor<float> grad_rec_p, grad_rec_f;
    if (use_decoder) {
      generator_image_terms(model_->d_pr, batch.profiles, rec_p, grad_rec_p, out.gan_pr, out.perc_pr,
                            out.l2_pr);
      generator_image_terms(model_->d_fr, batch.frontals, rec_f, grad_rec_f, out.gan_fr, out.perc_fr,
                            out.l2_fr);
    }
    model_->g_pr.backward(grad_rec_p, rcpl.grad_z1);
    model_->g_fr.backward(grad_rec_f, rcpl.grad_z2);
    adam_g_->step();

    const double parts[] = {out.coupling, out.gan_pr, out.gan_fr, out.perc_pr, out.perc_fr,
                            out.l2_pr,    out.l2_fr,  out.disc_pr, out.disc_fr};
    for (double v : parts)
      if (!std::isfinite(v)) abort_non_finite(out);
    out.finalize(w);
  } catch (const std::invalid_argument&) {
    // Every input was shape-checked at construction, so an invalid_argument
    // mid-step means non-finite values reached a loss: same abort path.
    abort_non_finite(out);
  }

  ++global_step_;
  append_log(out);
  return out;
}

void CpganTrainer::abort_non_finite(const LossBreakdown& b) {
  std::string dir = cfg_.checkpoint_dir.empty() ? std::string(".") : cfg_.checkpoint_dir;
  std::string snapshot;
  try {
    fs::create_directories(dir);
    snapshot = write_checkpoint("abort_nonfinite.ckpt");
  } catch (const std::exception&) {
    snapshot.clear();  // diagnosis still matters even if the snapshot fails
  }
  char msg[256];
  std::snprintf(msg, sizeof(msg),
                "non-finite loss at step %lld (coupling=%g gan=%g/%g disc=%g/%g); state snapshot: %s",
                static_cast<long long>(global_step_), b.coupling, b.gan_pr, b.gan_fr, b.disc_pr, b.disc_fr,
                snapshot.empty() ? "<unavailable>" : snapshot.c_str());
  throw NonFiniteLossError(msg, snapshot);
}

std::string CpganTrainer::write_checkpoint(const std::string& filename) const {
  std::string dir = cfg_.checkpoint_dir.empty() ? std::string(".") : cfg_.checkpoint_dir;
  fs::create_directories(dir);
  std::string path = (fs::path(dir) / filename).string();
  save(path);
  return path;
}

void CpganTrainer::save(const std::string& path) const {
  CheckpointMeta meta;
  meta.kind = "cpgan";
  meta.epoch = epoch_;
  meta.step = global_step_;
  meta.rng_state = rng_state_to_string(rng_);
  meta.config = cfg_;
  meta.extra = {{"adam_g_steps", adam_g_->steps()}, {"adam_d_steps", adam_d_->steps()}};
  meta.version = version_string();

  NamedTensors tensors;
  for (Param<float>* p : const_cast<CpganModel&>(*model_).all_params())
    tensors.emplace_back(p->name, &p->value);
  adam_g_->export_state(tensors);
  adam_d_->export_state(tensors);
  save_checkpoint(path, meta, tensors);
}

void CpganTrainer::redirect_outputs(const std::string& checkpoint_dir, const std::string& log_path) {
  if (!checkpoint_dir.empty()) cfg_.checkpoint_dir = checkpoint_dir;
  if (!log_path.empty()) {
    cfg_.log_path = log_path;
    if (log_.is_open()) log_.close();
    bool fresh_file = !fs::exists(log_path) || fs::file_size(log_path) == 0;
    log_.open(log_path, std::ios::app);
    if (!log_) throw std::runtime_error("CpganTrainer: cannot open log file " + log_path);
    if (fresh_file) log_ << "epoch,step," << LossBreakdown::csv_header() << "\n";
  }
}

void CpganTrainer::append_log(const LossBreakdown& b) {
  if (!log_.is_open()) return;
  log_ << epoch_ << "," << global_step_ << "," << b.csv_row() << "\n";
  log_.flush();
}

TrainResult CpganTrainer::train(int epochs, const EpochCallback& on_epoch) {
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
      if (cfg_.keep_epoch_checkpoints) {
        char name[64];
        std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch_);
        write_checkpoint(name);
      }
      result.last_checkpoint = write_checkpoint("last.ckpt");
    }
    if (on_epoch) on_epoch(epoch_, result.steps.back(), *this);
  }
  if (!result.steps.empty()) result.final_losses = result.steps.back();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

TrainResult train_cpgan(const LoadedDataset& data, const TrainConfig& cfg) {
  CpganTrainer trainer(data, cfg);
  return trainer.train(cfg.epochs);
}

TrainResult resume_cpgan(const LoadedDataset& data, const std::string& checkpoint_path, int extra_epochs) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
  CpganTrainer trainer(data, ck);
  return trainer.train(extra_epochs);
}

}  // namespace cpgan
