#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpgan/tensor.hpp"

// Loss functions with their analytic gradients. All reductions are batch
// means accumulated in double; probabilities are clamped away from {0,1}
// before any log.

namespace cpgan {

/// Clamp applied to probabilities before log().
inline constexpr double kProbEps = 1e-7;

/// Weights of the combined generator objective:
///   total = coupling + lambda_gan * gan + lambda_perceptual * perceptual + lambda_l2 * l2
struct LossWeights {
  double margin = 1.0;
  double lambda_gan = 1.0;
  double lambda_perceptual = 0.25;
  double lambda_l2 = 0.25;

  void validate() const {
    if (!(margin > 0.0)) throw std::invalid_argument("LossWeights: margin must be > 0");
    if (lambda_gan < 0.0 || lambda_perceptual < 0.0 || lambda_l2 < 0.0)
      throw std::invalid_argument("LossWeights: lambda weights must be >= 0");
  }
};

/// Per-step loss components. Aggregates (gan, perceptual, l2) are sums over
/// the two domains; disc_* are the discriminator-side losses and are not part
/// of `total`. The cls/adv_d/adv_g/contrast scalars belong to the
/// domain-adaptation baseline and stay zero elsewhere.
struct LossBreakdown {
  double coupling = 0.0;
  double gan_pr = 0.0, gan_fr = 0.0, gan = 0.0;
  double perc_pr = 0.0, perc_fr = 0.0, perceptual = 0.0;
  double l2_pr = 0.0, l2_fr = 0.0, l2 = 0.0;
  double total = 0.0;
  double disc_pr = 0.0, disc_fr = 0.0, disc = 0.0;
  double cls = 0.0, adv_d = 0.0, adv_g = 0.0, contrast = 0.0;

  /// Computes the per-domain sums and the weighted total.
  void finalize(const LossWeights& w);

  static std::string csv_header() {
    return "coupling,gan_pr,gan_fr,gan,perc_pr,perc_fr,perceptual,l2_pr,l2_fr,l2,total,"
           "disc_pr,disc_fr,disc,cls,adv_d,adv_g,contrast";
  }

  std::string csv_row() const {
    char buf[400];
    std::snprintf(buf, sizeof(buf),
                  "%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g",
                  coupling, gan_pr, gan_fr, gan, perc_pr, perc_fr, perceptual, l2_pr, l2_fr, l2, total, disc_pr,
                  disc_fr, disc, cls, adv_d, adv_g, contrast);
    return buf;
  }
};

namespace detail {
template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
  if (!all_finite(t)) throw std::invalid_argument(std::string(what) + ": non-finite values");
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

inline double clamp_prob(double p) { return std::min(1.0 - kProbEps, std::max(kProbEps, p)); }
}  // namespace detail

// ---------------------------------------------------------------------------
// Contrastive / coupling

/// Single-pair contrastive loss on embeddings z1, z2 of length `dim`.
/// label 0 = same identity (pull together), label 1 = different identity
/// (push apart until `margin`). Optional gradients are accumulated into
/// g1/g2 scaled by `gscale` when the pointers are non-null.
template <typename T>
double contrastive_pair_loss(const T* z1, const T* z2, int dim, int label, double margin, T* g1 = nullptr,
                             T* g2 = nullptr, double gscale = 1.0) {
  if (label != 0 && label != 1) throw std::invalid_argument("contrastive_pair_loss: label must be 0 or 1");
  double d2 = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double diff = static_cast<double>(z1[i]) - static_cast<double>(z2[i]);
    d2 += diff * diff;
  }
  const double d = std::sqrt(d2);
  if (label == 0) {
    if (g1) {
      for (int i = 0; i < dim; ++i) {
        const double diff = static_cast<double>(z1[i]) - static_cast<double>(z2[i]);
        g1[i] += static_cast<T>(gscale * diff);
        g2[i] -= static_cast<T>(gscale * diff);
      }
    }
    return 0.5 * d2;
  }
  const double gap = margin - d;
  if (gap <= 0.0) return 0.0;
  if (g1 && d > 0.0) {
    const double scale = gscale * gap / d;  // d/dz1 of 0.5*(m-d)^2 is -(m-d)/d * (z1-z2)
    for (int i = 0; i < dim; ++i) {
      const double diff = static_cast<double>(z1[i]) - static_cast<double>(z2[i]);
      g1[i] -= static_cast<T>(scale * diff);
      g2[i] += static_cast<T>(scale * diff);
    }
  }
  return 0.5 * gap * gap;
}

template <typename T>
struct CouplingResult {
  double loss = 0.0;
  Tensor<T> grad_z1, grad_z2;
};

/// Batch-mean contrastive loss over embedding rows. labels[i] is 0 for a
/// genuine pair and 1 for an impostor pair.
template <typename T>
CouplingResult<T> coupling_loss(const Tensor<T>& z1, const Tensor<T>& z2, const std::vector<int>& labels,
                                double margin, bool with_grad = true) {
  detail::require_same_shape(z1, z2, "coupling_loss");
  detail::require_finite(z1, "coupling_loss z1");
  detail::require_finite(z2, "coupling_loss z2");
  if (z1.ndim() != 2) throw std::invalid_argument("coupling_loss: embeddings must be N x dim");
  const int n = z1.dim(0), dim = z1.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("coupling_loss: labels size does not match batch");
  if (!(margin > 0.0)) throw std::invalid_argument("coupling_loss: margin must be > 0");
  CouplingResult<T> r;
  if (with_grad) {
    r.grad_z1 = Tensor<T>::zeros(z1.shape());
    r.grad_z2 = Tensor<T>::zeros(z2.shape());
  }
  const double gscale = 1.0 / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    T* g1 = with_grad ? &r.grad_z1.at(i, 0) : nullptr;
    T* g2 = with_grad ? &r.grad_z2.at(i, 0) : nullptr;
    sum += contrastive_pair_loss(&z1.at(i, 0), &z2.at(i, 0), dim, labels[i], margin, g1, g2, gscale);
  }
  r.loss = sum / n;
  return r;
}

// ---------------------------------------------------------------------------
// Adversarial (probability-space, non-saturating generator)

template <typename T>
struct DiscLossResult {
  double loss = 0.0;
  Tensor<T> grad_real, grad_fake;
};

/// Discriminator objective: -mean log p_real - mean log(1 - p_fake).
/// Works on any shape of probability tensor (patch grids or N x 1 columns).
template <typename T>
DiscLossResult<T> gan_discriminator_loss(const Tensor<T>& p_real, const Tensor<T>& p_fake, bool with_grad = true) {
  detail::require_same_shape(p_real, p_fake, "gan_discriminator_loss");
  detail::require_finite(p_real, "gan_discriminator_loss p_real");
  detail::require_finite(p_fake, "gan_discriminator_loss p_fake");
  const int n = p_real.numel();
  if (n == 0) throw std::invalid_argument("gan_discriminator_loss: empty input");
  DiscLossResult<T> r;
  if (with_grad) {
    r.grad_real.resize(p_real.shape());
    r.grad_fake.resize(p_fake.shape());
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pr = detail::clamp_prob(static_cast<double>(p_real[i]));
    const double pf = detail::clamp_prob(static_cast<double>(p_fake[i]));
    sum += -std::log(pr) - std::log(1.0 - pf);
    if (with_grad) {
      r.grad_real[i] = static_cast<T>(-1.0 / (n * pr));
      r.grad_fake[i] = static_cast<T>(1.0 / (n * (1.0 - pf)));
    }
  }
  r.loss = sum / n;
  return r;
}

template <typename T>
struct GenLossResult {
  double loss = 0.0;
  Tensor<T> grad_fake;
};

/// Non-saturating generator objective: -mean log p_fake.
template <typename T>
GenLossResult<T> gan_generator_loss(const Tensor<T>& p_fake, bool with_grad = true) {
  detail::require_finite(p_fake, "gan_generator_loss p_fake");
  const int n = p_fake.numel();
  if (n == 0) throw std::invalid_argument("gan_generator_loss: empty input");
  GenLossResult<T> r;
  if (with_grad) r.grad_fake.resize(p_fake.shape());
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pf = detail::clamp_prob(static_cast<double>(p_fake[i]));
    sum += -std::log(pf);
    if (with_grad) r.grad_fake[i] = static_cast<T>(-1.0 / (n * pf));
  }
  r.loss = sum / n;
  return r;
}

// ---------------------------------------------------------------------------
// Reconstruction

template <typename T>
struct ReconLossResult {
  double loss = 0.0;
  Tensor<T> grad;  // w.r.t. the first argument (the generated tensor)
};

/// Mean squared difference per element.
template <typename T>
ReconLossResult<T> l2_reconstruction_loss(const Tensor<T>& generated, const Tensor<T>& target,
                                          bool with_grad = true) {
  detail::require_same_shape(generated, target, "l2_reconstruction_loss");
  detail::require_finite(generated, "l2_reconstruction_loss generated");
  detail::require_finite(target, "l2_reconstruction_loss target");
  const int n = generated.numel();
  if (n == 0) throw std::invalid_argument("l2_reconstruction_loss: empty input");
  ReconLossResult<T> r;
  if (with_grad) r.grad.resize(generated.shape());
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double diff = static_cast<double>(generated[i]) - static_cast<double>(target[i]);
    sum += diff * diff;
    if (with_grad) r.grad[i] = static_cast<T>(2.0 * diff / n);
  }
  r.loss = sum / n;
  return r;
}

/// Mean absolute difference per element over feature activations.
template <typename T>
ReconLossResult<T> perceptual_feature_loss(const Tensor<T>& generated_features, const Tensor<T>& target_features,
                                           bool with_grad = true) {
  detail::require_same_shape(generated_features, target_features, "perceptual_feature_loss");
  detail::require_finite(generated_features, "perceptual_feature_loss generated");
  detail::require_finite(target_features, "perceptual_feature_loss target");
  const int n = generated_features.numel();
  if (n == 0) throw std::invalid_argument("perceptual_feature_loss: empty input");
  ReconLossResult<T> r;
  if (with_grad) r.grad.resize(generated_features.shape());
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double diff = static_cast<double>(generated_features[i]) - static_cast<double>(target_features[i]);
    sum += std::abs(diff);
    if (with_grad) r.grad[i] = static_cast<T>((diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / n);
  }
  r.loss = sum / n;
  return r;
}

// ---------------------------------------------------------------------------
// Combination

/// total = coupling + lambda_gan * gan + lambda_perceptual * perceptual + lambda_l2 * l2
inline double total_generator_loss(double coupling, double gan, double perceptual, double l2,
                                   const LossWeights& w) {
  w.validate();
  if (!std::isfinite(coupling) || !std::isfinite(gan) || !std::isfinite(perceptual) || !std::isfinite(l2))
    throw std::invalid_argument("total_generator_loss: non-finite component");
  return coupling + w.lambda_gan * gan + w.lambda_perceptual * perceptual + w.lambda_l2 * l2;
}

inline void LossBreakdown::finalize(const LossWeights& w) {
  gan = gan_pr + gan_fr;
  perceptual = perc_pr + perc_fr;
  l2 = l2_pr + l2_fr;
  disc = disc_pr + disc_fr;
  total = total_generator_loss(coupling, gan, perceptual, l2, w);
}

// ---------------------------------------------------------------------------
// Classification (domain-adaptation baseline, frontalization identity proxy)

template <typename T>
struct CrossEntropyResult {
  double loss = 0.0;
  double accuracy = 0.0;
  Tensor<T> grad_logits;  // (probs - onehot) / N, feeds the classifier backward
};

/// Softmax cross entropy over probability rows (N x K) with integer labels.
template <typename T>
CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>& probs, const std::vector<int>& labels,
                                            bool with_grad = true) {
  detail::require_finite(probs, "softmax_cross_entropy probs");
  if (probs.ndim() != 2) throw std::invalid_argument("softmax_cross_entropy: probs must be N x K");
  const int n = probs.dim(0), k = probs.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("softmax_cross_entropy: labels size does not match batch");
  CrossEntropyResult<T> r;
  if (with_grad) r.grad_logits.resize(probs.shape());
  double sum = 0.0;
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= k) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    sum += -std::log(detail::clamp_prob(static_cast<double>(probs.at(i, y))));
    int argmax = 0;
    for (int j = 1; j < k; ++j)
      if (probs.at(i, j) > probs.at(i, argmax)) argmax = j;
    if (argmax == y) ++correct;
    if (with_grad)
      for (int j = 0; j < k; ++j)
        r.grad_logits.at(i, j) = static_cast<T>((static_cast<double>(probs.at(i, j)) - (j == y ? 1.0 : 0.0)) / n);
  }
  r.loss = sum / n;
  r.accuracy = static_cast<double>(correct) / n;
  return r;
}

}  // namespace cpgan
