#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cpgan/losses.hpp"
#include "cpgan/networks.hpp"
#include "cpgan/nn.hpp"
#include "cpgan/rng.hpp"

// Finite-difference validation of the analytic gradients, always in double.
// Each scalar parameter is nudged by +/-h and +/-h/2; the half-step central
// difference is the reference, and disagreement between the two step sizes
// flags rectifier-kink crossings, which are skipped rather than failed.

namespace cpgan {

struct GradCheckSettings {
  double h = 1e-4;
  double rel_tol = 1e-4;
  double denom_floor = 1e-2;        // |a - n| / max(|a|, |n|, floor)
  double kink_gap = 1e-6;           // |n_h - n_h/2| above this marks a kink
  double max_skip_fraction = 0.05;  // more skips than this fails the check
};

struct GradCheckResult {
  std::string name;
  int checked = 0;
  int skipped_kinks = 0;
  int failed = 0;
  double max_rel_err = 0.0;
  std::string worst_param;

  bool passed(const GradCheckSettings& s = {}) const {
    return failed == 0 && checked > 0 &&
           skipped_kinks <= static_cast<int>(s.max_skip_fraction * (checked + skipped_kinks));
  }
};

/// Checks every scalar in `params` against central differences of `loss_fn`.
/// `loss_grad_fn` must zero the gradients, run forward + backward and return
/// the loss; `loss_fn` must be a pure forward evaluation.
inline GradCheckResult check_gradients(const std::string& name, const std::vector<Param<double>*>& params,
                                       const std::function<double()>& loss_fn,
                                       const std::function<double()>& loss_grad_fn,
                                       const GradCheckSettings& s = {}) {
  GradCheckResult r;
  r.name = name;
  loss_grad_fn();
  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  for (Param<double>* p : params) analytic.push_back(p->grad);

  for (std::size_t k = 0; k < params.size(); ++k) {
    Param<double>& p = *params[k];
    for (int i = 0; i < p.value.numel(); ++i) {
      const double save = p.value[i];
      p.value[i] = save + s.h;
      const double f1 = loss_fn();
      p.value[i] = save - s.h;
      const double f2 = loss_fn();
      p.value[i] = save + 0.5 * s.h;
      const double f3 = loss_fn();
      p.value[i] = save - 0.5 * s.h;
      const double f4 = loss_fn();
      p.value[i] = save;

      const double n_full = (f1 - f2) / (2.0 * s.h);
      const double n_half = (f3 - f4) / s.h;
      const double a = analytic[k][i];
      const double rel = std::abs(a - n_half) / std::max({std::abs(a), std::abs(n_half), s.denom_floor});
      if (rel > s.rel_tol &&
          std::abs(n_full - n_half) > s.kink_gap * std::max({1.0, std::abs(n_full), std::abs(n_half)})) {
        ++r.skipped_kinks;  // the difference quotient itself is unstable here
        continue;
      }
      if (rel > r.max_rel_err) {
        r.max_rel_err = rel;
        r.worst_param = p.name + "[" + std::to_string(i) + "]";
      }
      if (rel <= s.rel_tol) ++r.checked;
      else ++r.failed;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Suite of small-network checks covering every training path.

namespace gradsuite {

inline Tensor<double> random_tensor(const std::vector<int>& shape, std::uint64_t seed, const std::string& tag,
                                    double scale = 1.0) {
  Tensor<double> t(shape);
  std::mt19937_64 rng = make_rng(seed, tag);
  std::normal_distribution<double> dist(0.0, scale);
  for (int i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

/// Architecture small enough that every network stays under 2000 scalars.
inline NetConfig tiny_config() {
  NetConfig cfg;
  cfg.image_size = 8;
  cfg.channels = 2;
  cfg.embed_dim = 4;
  cfg.gen_widths = {2, 3, 4, 5};
  cfg.disc_widths = {3, 4, 5};
  cfg.perc_width = 2;
  return cfg;
}

inline GradCheckResult conv_entry(std::uint64_t seed, const GradCheckSettings& s) {
  Conv2d<double> conv("gc.conv", 2, 3, 3, 2);
  std::vector<Param<double>*> ps;
  conv.params(ps);
  init_params(ps, seed);
  const Tensor<double> x = random_tensor({2, 2, 6, 6}, seed, "conv.x");
  const Tensor<double> target = random_tensor({2, 3, 3, 3}, seed, "conv.t");
  auto loss = [&] { return l2_reconstruction_loss(conv.forward(x), target, false).loss; };
  auto loss_grad = [&] {
    for (auto* p : ps) p->grad.zero();
    auto r = l2_reconstruction_loss(conv.forward(x), target);
    conv.backward(r.grad, false);
    return r.loss;
  };
  return check_gradients("conv2d", ps, loss, loss_grad, s);
}

inline GradCheckResult linear_entry(std::uint64_t seed, const GradCheckSettings& s) {
  Linear<double> fc("gc.fc", 7, 4);
  Tanh<double> act;
  std::vector<Param<double>*> ps;
  fc.params(ps);
  init_params(ps, seed);
  const Tensor<double> x = random_tensor({3, 7}, seed, "fc.x");
  const Tensor<double> target = random_tensor({3, 4}, seed, "fc.t", 0.5);
  auto loss = [&] { return l2_reconstruction_loss(act.forward(fc.forward(x)), target, false).loss; };
  auto loss_grad = [&] {
    for (auto* p : ps) p->grad.zero();
    auto r = l2_reconstruction_loss(act.forward(fc.forward(x)), target);
    fc.backward(act.backward(r.grad));
    return r.loss;
  };
  return check_gradients("linear_tanh", ps, loss, loss_grad, s);
}

/// Contrastive loss with the embeddings themselves as the parameters; pair
/// distances sit away from both zero and the margin.
inline GradCheckResult coupling_entry(std::uint64_t seed, const GradCheckSettings& s) {
  Param<double> z1, z2;
  z1.setup("gc.z1", {4, 6}, Init::kZero, 0, 0);
  z2.setup("gc.z2", {4, 6}, Init::kZero, 0, 0);
  z1.value = random_tensor({4, 6}, seed, "cpl.z1", 0.2);
  z2.value = random_tensor({4, 6}, seed, "cpl.z2", 0.2);
  const std::vector<int> labels = {0, 1, 0, 1};
  std::vector<Param<double>*> ps = {&z1, &z2};
  auto loss = [&] { return coupling_loss(z1.value, z2.value, labels, 1.0, false).loss; };
  auto loss_grad = [&] {
    for (auto* p : ps) p->grad.zero();
    auto r = coupling_loss(z1.value, z2.value, labels, 1.0);
    z1.grad = r.grad_z1;
    z2.grad = r.grad_z2;
    return r.loss;
  };
  return check_gradients("coupling_direct", ps, loss, loss_grad, s);
}

/// Two encoders coupled by the contrastive loss — the heart of the model.
inline GradCheckResult encoder_entry(std::uint64_t seed, const GradCheckSettings& s) {
  const NetConfig cfg = tiny_config();
  UNetEncoder<double> ea("gc.enc_a", cfg), eb("gc.enc_b", cfg);
  std::vector<Param<double>*> ps;
  ea.params(ps);
  eb.params(ps);
  init_params(ps, seed);
  const Tensor<double> xa = random_tensor({2, 2, 8, 8}, seed, "enc.xa", 0.5);
  const Tensor<double> xb = random_tensor({2, 2, 8, 8}, seed, "enc.xb", 0.5);
  const std::vector<int> labels = {0, 1};
  auto loss = [&] {
    return coupling_loss(ea.forward(xa).embedding, eb.forward(xb).embedding, labels, 1.0, false).loss;
  };
  auto loss_grad = [&] {
    for (auto* p : ps) p->grad.zero();
    auto fa = ea.forward(xa);
    auto fb = eb.forward(xb);
    auto r = coupling_loss(fa.embedding, fb.embedding, labels, 1.0);
    ea.backward(r.grad_z1, {});
    eb.backward(r.grad_z2, {});
    return r.loss;
  };
  return check_gradients("encoder_coupling", ps, loss, loss_grad, s);
}

/// Full generator with the complete objective: adversarial (through a frozen
/// discriminator), perceptual (through the frozen feature net) and pixel
/// reconstruction, exercising decoder skip routing end to end.
inline GradCheckResult generator_entry(std::uint64_t seed, const GradCheckSettings& s) {
  const NetConfig cfg = tiny_config();
  UNetGenerator<double> gen("gc.gen.enc", "gc.gen.dec", cfg);
  PatchDiscriminator<double> disc("gc.gdisc", cfg);
  PerceptualNet<double> percep(cfg);
  std::vector<Param<double>*> ps, disc_ps;
  gen.params(ps);
  disc.params(disc_ps);
  init_params(ps, seed);
  init_params(disc_ps, seed + 7);
  const Tensor<double> x = random_tensor({2, 2, 8, 8}, seed, "gen.x", 0.5);
  const Tensor<double> target = random_tensor({2, 2, 8, 8}, seed, "gen.t", 0.4);
  const LossWeights w;
  const Tensor<double> target_features = percep.forward(target);

  auto objective = [&](bool with_grad) {
    auto f = gen.forward(x);
    auto grid = disc.forward(x, f.reconstruction);
    auto rg = gan_generator_loss(grid, with_grad);
    auto r2 = l2_reconstruction_loss(f.reconstruction, target, with_grad);
    auto fg = percep.forward(f.reconstruction);
    auto rp = perceptual_feature_loss(fg, target_features, with_grad);
    const double total = total_generator_loss(0.0, rg.loss, rp.loss, r2.loss, w);
    if (with_grad) {
      Tensor<double> grad_recon = disc.backward(rg.grad_fake, true, false);
      for (int i = 0; i < grad_recon.numel(); ++i) grad_recon[i] *= w.lambda_gan;
      Tensor<double> gperc = percep.backward(rp.grad);
      for (int i = 0; i < grad_recon.numel(); ++i)
        grad_recon[i] += w.lambda_l2 * r2.grad[i] + w.lambda_perceptual * gperc[i];
      gen.backward(grad_recon, {});
    }
    return total;
  };
  auto loss = [&] { return objective(false); };
  auto loss_grad = [&] {
    for (auto* p : ps) p->grad.zero();
    return objective(true);
  };
  return check_gradients("generator_full", ps, loss, loss_grad, s);
}

inline GradCheckResult discriminator_entry(std::uint64_t seed, const GradCheckSettings& s) {
  const NetConfig cfg = tiny_config();
  PatchDiscriminator<double> disc("gc.disc", cfg);
  std::vector<Param<double>*> ps;
  disc.params(ps);
  init_params(ps, seed);
  const Tensor<double> cond = random_tensor({2, 2, 8, 8}, seed, "disc.c", 0.5);
  const Tensor<double> real = random_tensor({2, 2, 8, 8}, seed, "disc.r", 0.5);
  const Tensor<double> fake = random_tensor({2, 2, 8, 8}, seed, "disc.f", 0.5);
  const Tensor<double> cond2 = concat_batch(cond, cond);
  const Tensor<double> cand2 = concat_batch(real, fake);
  auto loss = [&] {
    Tensor<double> p_real, p_fake;
    split_batch(disc.forward(cond2, cand2), 2, p_real, p_fake);
    return gan_discriminator_loss(p_real, p_fake, false).loss;
  };
  auto loss_grad = [&] {
    for (auto* p : ps) p->grad.zero();
    Tensor<double> p_real, p_fake;
    split_batch(disc.forward(cond2, cand2), 2, p_real, p_fake);
    auto r = gan_discriminator_loss(p_real, p_fake);
    disc.backward(concat_batch(r.grad_real, r.grad_fake), false, true);
    return r.loss;
  };
  return check_gradients("patch_discriminator", ps, loss, loss_grad, s);
}

/// Encoder trained through the identity classifier (pretraining stage of the
/// domain-adaptation baseline).
inline GradCheckResult classifier_entry(std::uint64_t seed, const GradCheckSettings& s) {
  const NetConfig cfg = tiny_config();
  UNetEncoder<double> enc("gc.cenc", cfg);
  ClassifierHead<double> cls("gc.cls", cfg.embed_dim, 3);
  std::vector<Param<double>*> ps;
  enc.params(ps);
  cls.params(ps);
  init_params(ps, seed);
  const Tensor<double> x = random_tensor({3, 2, 8, 8}, seed, "cls.x", 0.5);
  const std::vector<int> labels = {0, 2, 1};
  auto loss = [&] {
    return softmax_cross_entropy(cls.forward(enc.forward(x).embedding), labels, false).loss;
  };
  auto loss_grad = [&] {
    for (auto* p : ps) p->grad.zero();
    auto f = enc.forward(x);
    auto r = softmax_cross_entropy(cls.forward(f.embedding), labels);
    enc.backward(cls.backward_logits(r.grad_logits), {});
    return r.loss;
  };
  return check_gradients("classifier_encoder", ps, loss, loss_grad, s);
}

inline GradCheckResult embed_disc_entry(std::uint64_t seed, const GradCheckSettings& s) {
  EmbedDiscriminator<double> ed("gc.edisc", 4, 8, 6);
  std::vector<Param<double>*> ps;
  ed.params(ps);
  init_params(ps, seed);
  const Tensor<double> z_src = random_tensor({3, 4}, seed, "ed.zs", 0.8);
  const Tensor<double> z_tgt = random_tensor({3, 4}, seed, "ed.zt", 0.8);
  const Tensor<double> z2 = concat_batch(z_src, z_tgt);
  auto loss = [&] {
    Tensor<double> p_src, p_tgt;
    split_batch(ed.forward(z2), 3, p_src, p_tgt);
    return gan_discriminator_loss(p_src, p_tgt, false).loss;
  };
  auto loss_grad = [&] {
    for (auto* p : ps) p->grad.zero();
    Tensor<double> p_src, p_tgt;
    split_batch(ed.forward(z2), 3, p_src, p_tgt);
    auto r = gan_discriminator_loss(p_src, p_tgt);
    ed.backward(concat_batch(r.grad_real, r.grad_fake));
    return r.loss;
  };
  return check_gradients("embed_discriminator", ps, loss, loss_grad, s);
}

/// Profile encoder driven by the fooling objective plus the contrastive
/// anchor, through a frozen embedding discriminator (adaptation stage of the
/// domain-adaptation baseline).
inline GradCheckResult adda_map_entry(std::uint64_t seed, const GradCheckSettings& s) {
  const NetConfig cfg = tiny_config();
  UNetEncoder<double> enc("gc.menc", cfg);
  EmbedDiscriminator<double> ed("gc.medisc", cfg.embed_dim, 8, 6);
  std::vector<Param<double>*> ps, ed_ps;
  enc.params(ps);
  ed.params(ed_ps);
  init_params(ps, seed);
  init_params(ed_ps, seed + 13);
  const Tensor<double> x = random_tensor({2, 2, 8, 8}, seed, "map.x", 0.5);
  const Tensor<double> z_anchor = random_tensor({2, 4}, seed, "map.za", 0.3);
  const std::vector<int> labels = {0, 1};
  auto objective = [&](bool with_grad) {
    auto f = enc.forward(x);
    auto radv = gan_generator_loss(ed.forward(f.embedding), with_grad);
    auto rcpl = coupling_loss(f.embedding, z_anchor, labels, 1.0, with_grad);
    if (with_grad) {
      Tensor<double> g = ed.backward(radv.grad_fake);
      add_inplace(g, rcpl.grad_z1);
      enc.backward(g, {});
    }
    return radv.loss + rcpl.loss;
  };
  auto loss = [&] { return objective(false); };
  auto loss_grad = [&] {
    for (auto* p : ps) p->grad.zero();
    for (auto* p : ed_ps) p->grad.zero();
    return objective(true);
  };
  return check_gradients("adda_mapping", ps, loss, loss_grad, s);
}

}  // namespace gradsuite

/// Runs every gradient check. Each entry retries with shifted seeds before
/// reporting, so a pathological draw (a pair distance landing on the margin,
/// say) does not produce a spurious failure.
inline std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed = 20240901,
                                                       const GradCheckSettings& settings = {},
                                                       std::ostream* log = nullptr) {
  using Entry = GradCheckResult (*)(std::uint64_t, const GradCheckSettings&);
  const Entry entries[] = {
      gradsuite::conv_entry,       gradsuite::linear_entry,     gradsuite::coupling_entry,
      gradsuite::encoder_entry,    gradsuite::generator_entry,  gradsuite::discriminator_entry,
      gradsuite::classifier_entry, gradsuite::embed_disc_entry, gradsuite::adda_map_entry,
  };
  std::vector<GradCheckResult> results;
  for (Entry entry : entries) {
    GradCheckResult r;
    for (int attempt = 0; attempt < 3; ++attempt) {
      r = entry(seed + 101 * attempt, settings);
      if (r.passed(settings)) break;
    }
    if (log)
      *log << r.name << ": checked=" << r.checked << " kink_skips=" << r.skipped_kinks << " failed=" << r.failed
           << " max_rel_err=" << r.max_rel_err << (r.worst_param.empty() ? "" : " worst=" + r.worst_param)
           << (r.passed(settings) ? " [ok]" : " [FAIL]") << "\n";
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace cpgan
