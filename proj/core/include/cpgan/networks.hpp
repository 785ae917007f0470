#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpgan/nn.hpp"

// Network definitions: U-Net conditional generators (encoder + decoder with
// skip connections), patch-based discriminators, the frozen perceptual
// feature network, the identity classifier head and the embedding-space
// domain discriminator. All are templated on the scalar type; training uses
// float, gradient checking instantiates double.

namespace cpgan {

/// Architecture knobs shared by every network in one run. The defaults are
/// the desk-scale 64x64 configuration.
struct NetConfig {
  int image_size = 64;  // H == W, must be a multiple of 8
  int channels = 3;
  int embed_dim = 256;
  std::array<int, 4> gen_widths = {32, 64, 128, 256};  // stem + 3 residual stages
  int gen_blocks_per_stage = 1;  // >= 2 gives the deeper residual variant
  std::array<int, 3> disc_widths = {64, 128, 256};
  int perc_width = 16;          // perceptual net widths: w, 2w, 4w
  double disc_leaky_slope = 0.3;

  int bottleneck_hw() const { return image_size / 8; }
  int patch_grid() const { return image_size / 8; }

  void validate() const {
    if (image_size < 8 || image_size % 8 != 0)
      throw std::invalid_argument("NetConfig: image_size must be a positive multiple of 8");
    if (channels < 1) throw std::invalid_argument("NetConfig: channels must be >= 1");
    if (embed_dim < 1) throw std::invalid_argument("NetConfig: embed_dim must be >= 1");
    if (gen_blocks_per_stage < 1) throw std::invalid_argument("NetConfig: gen_blocks_per_stage must be >= 1");
  }
};

/// Encoder output: the bottleneck embedding plus everything the decoder side
/// consumes (per-stage skip activations, pre-pool spatial map).
template <typename T>
struct EmbeddingOutput {
  Tensor<T> embedding;            // N x embed_dim
  std::vector<Tensor<T>> skips;   // stage outputs, shallow to deep
  Tensor<T> bottleneck_spatial;   // N x widths[3] x hw x hw
};

// ---------------------------------------------------------------------------

/// One residual downsampling block: 3x3 stride-s conv, 3x3 conv, 1x1 projection
/// shortcut, rectifier after both the first conv and the sum.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, int in_ch, int out_ch, int stride)
      : conv1_(name + ".conv1", in_ch, out_ch, 3, stride),
        conv2_(name + ".conv2", out_ch, out_ch, 3, 1),
        shortcut_(name + ".short", in_ch, out_ch, 1, stride) {}

  void params(std::vector<Param<T>*>& out) {
    conv1_.params(out);
    conv2_.params(out);
    shortcut_.params(out);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> y = conv2_.forward(act1_.forward(conv1_.forward(x)));
    add_inplace(y, shortcut_.forward(x));
    return act2_.forward(y);
  }

  Tensor<T> backward(const Tensor<T>& gy, bool input_grad = true) {
    Tensor<T> g = act2_.backward(gy);
    Tensor<T> gx = conv1_.backward(act1_.backward(conv2_.backward(g)), input_grad);
    Tensor<T> gs = shortcut_.backward(g, input_grad);
    if (input_grad) add_inplace(gx, gs);
    return gx;
  }

 private:
  Conv2d<T> conv1_, conv2_, shortcut_;
  Relu<T> act1_, act2_;
};

/// Residual encoder: stem conv + 3 stride-2 residual stages + global average
/// pool + fully connected embedding head.
template <typename T>
class UNetEncoder {
 public:
  UNetEncoder() = default;
  UNetEncoder(const std::string& name, const NetConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    stem_ = Conv2d<T>(name + ".stem", cfg.channels, cfg.gen_widths[0], 3, 1);
    for (int s = 0; s < 3; ++s) {
      std::vector<ResidualBlock<T>> stage;
      for (int b = 0; b < cfg.gen_blocks_per_stage; ++b) {
        const int in_ch = (b == 0) ? cfg.gen_widths[s] : cfg.gen_widths[s + 1];
        const int stride = (b == 0) ? 2 : 1;
        stage.emplace_back(name + ".stage" + std::to_string(s + 1) + ".block" + std::to_string(b), in_ch,
                           cfg.gen_widths[s + 1], stride);
      }
      stages_.push_back(std::move(stage));
    }
    fc_ = Linear<T>(name + ".fc", cfg.gen_widths[3], cfg.embed_dim);
  }

  void params(std::vector<Param<T>*>& out) {
    stem_.params(out);
    for (auto& stage : stages_)
      for (auto& block : stage) block.params(out);
    fc_.params(out);
  }

  EmbeddingOutput<T> forward(const Tensor<T>& x) {
    if (x.ndim() != 4 || x.dim(1) != cfg_.channels || x.dim(2) != cfg_.image_size || x.dim(3) != cfg_.image_size)
      throw std::invalid_argument("UNetEncoder: input shape " + Tensor<T>::shape_str(x.shape()) +
                                  " does not match configured size");
    EmbeddingOutput<T> out;
    Tensor<T> h = stem_act_.forward(stem_.forward(x));
    out.skips.push_back(h);
    for (auto& stage : stages_) {
      for (auto& block : stage) h = block.forward(h);
      out.skips.push_back(h);
    }
    out.bottleneck_spatial = h;
    out.skips.pop_back();  // the deepest map is the bottleneck, not a skip
    out.embedding = fc_.forward(gap_.forward(h));
    return out;
  }

  /// grad_skips may be empty (encoder-only training paths).
  void backward(const Tensor<T>& grad_embedding, const std::vector<Tensor<T>>& grad_skips) {
    Tensor<T> g = gap_.backward(fc_.backward(grad_embedding));
    for (int s = 2; s >= 0; --s) {
      for (int b = static_cast<int>(stages_[s].size()) - 1; b >= 0; --b) g = stages_[s][b].backward(g);
      if (!grad_skips.empty() && grad_skips[s].numel() > 0) add_inplace(g, grad_skips[s]);
    }
    stem_.backward(stem_act_.backward(g), /*input_grad=*/false);
  }

  const NetConfig& config() const { return cfg_; }

 private:
  NetConfig cfg_;
  Conv2d<T> stem_;
  Relu<T> stem_act_;
  std::vector<std::vector<ResidualBlock<T>>> stages_;
  GlobalAvgPool<T> gap_;
  Linear<T> fc_;
};

/// Mirror decoder: FC from the embedding back to the bottleneck shape, then
/// three upsample+concat+conv stages and a tanh output conv.
template <typename T>
class UNetDecoder {
 public:
  UNetDecoder() = default;
  UNetDecoder(const std::string& name, const NetConfig& cfg) : cfg_(cfg) {
    const int hw = cfg.bottleneck_hw();
    defc_ = Linear<T>(name + ".defc", cfg.embed_dim, cfg.gen_widths[3] * hw * hw);
    const std::array<int, 3> in_ch = {cfg.gen_widths[3] + cfg.gen_widths[2], cfg.gen_widths[2] + cfg.gen_widths[1],
                                      cfg.gen_widths[1] + cfg.gen_widths[0]};
    const std::array<int, 3> out_ch = {cfg.gen_widths[2], cfg.gen_widths[1], cfg.gen_widths[0]};
    for (int s = 0; s < 3; ++s)
      up_convs_[s] = Conv2d<T>(name + ".up" + std::to_string(s + 1), in_ch[s], out_ch[s], 3, 1);
    out_conv_ = Conv2d<T>(name + ".out", cfg.gen_widths[0], cfg.channels, 3, 1, Init::kXavierUniform);
  }

  void params(std::vector<Param<T>*>& out) {
    defc_.params(out);
    for (auto& c : up_convs_) c.params(out);
    out_conv_.params(out);
  }

  Tensor<T> forward(const EmbeddingOutput<T>& enc, bool zero_skips = false) {
    const int n = enc.embedding.dim(0);
    const int hw = cfg_.bottleneck_hw();
    zero_skips_ = zero_skips;
    Tensor<T> h = defc_act_.forward(defc_.forward(enc.embedding));
    h.reshape({n, cfg_.gen_widths[3], hw, hw});
    for (int s = 0; s < 3; ++s) {
      Tensor<T> u = ups_[s].forward(h);
      const Tensor<T>& skip = enc.skips[2 - s];
      if (u.dim(2) != skip.dim(2) || u.dim(3) != skip.dim(3) || u.dim(0) != skip.dim(0))
        throw std::invalid_argument("UNetDecoder: skip shape mismatch at stage " + std::to_string(s));
      Tensor<T> sk = skip;
      if (zero_skips) sk.zero();
      h = up_acts_[s].forward(up_convs_[s].forward(concat_channels(u, sk)));
    }
    return out_act_.forward(out_conv_.forward(h));
  }

  /// Returns the gradient w.r.t. the embedding; fills grad_skips (shallow to
  /// deep, matching EmbeddingOutput::skips) for the encoder to absorb.
  Tensor<T> backward(const Tensor<T>& grad_recon, std::vector<Tensor<T>>& grad_skips) {
    grad_skips.assign(3, Tensor<T>());
    Tensor<T> g = out_conv_.backward(out_act_.backward(grad_recon));
    for (int s = 2; s >= 0; --s) {
      Tensor<T> gc = up_convs_[s].backward(up_acts_[s].backward(g));
      Tensor<T> gu, gskip;
      split_channels(gc, gc.dim(1) - skip_width(s), gu, gskip);
      if (zero_skips_) gskip.zero();
      grad_skips[2 - s] = std::move(gskip);
      g = ups_[s].backward(gu);
    }
    const int n = g.dim(0);
    g.reshape({n, g.numel() / n});
    return defc_.backward(defc_act_.backward(g));
  }

 private:
  int skip_width(int stage) const { return cfg_.gen_widths[2 - stage]; }

  NetConfig cfg_;
  Linear<T> defc_;
  Relu<T> defc_act_;
  std::array<Upsample2x<T>, 3> ups_;
  std::array<Conv2d<T>, 3> up_convs_;
  std::array<Relu<T>, 3> up_acts_;
  Conv2d<T> out_conv_;
  Tanh<T> out_act_;
  bool zero_skips_ = false;
};

/// Conditional U-Net generator. forward() is exactly decode(encode(x)); the
/// two halves are also exposed separately for cross-domain decoding.
template <typename T>
class UNetGenerator {
 public:
  UNetGenerator() = default;
  UNetGenerator(const std::string& enc_name, const std::string& dec_name, const NetConfig& cfg)
      : encoder_(enc_name, cfg), decoder_(dec_name, cfg) {}

  struct Forward {
    Tensor<T> reconstruction;
    EmbeddingOutput<T> enc;
  };

  Forward forward(const Tensor<T>& x, bool zero_skips = false) {
    Forward f;
    f.enc = encoder_.forward(x);
    f.reconstruction = decoder_.forward(f.enc, zero_skips);
    return f;
  }

  EmbeddingOutput<T> encode(const Tensor<T>& x) { return encoder_.forward(x); }
  Tensor<T> decode(const EmbeddingOutput<T>& enc, bool zero_skips = false) {
    return decoder_.forward(enc, zero_skips);
  }

  /// Combined backward after forward(): image-space gradient through the
  /// decoder plus an embedding-space gradient (the coupling term) straight
  /// into the encoder. Either may be empty.
  void backward(const Tensor<T>& grad_recon, const Tensor<T>& grad_embedding) {
    std::vector<Tensor<T>> grad_skips;
    Tensor<T> g_embed;
    if (grad_recon.numel() > 0) {
      g_embed = decoder_.backward(grad_recon, grad_skips);
      if (grad_embedding.numel() > 0) add_inplace(g_embed, grad_embedding);
    } else {
      g_embed = grad_embedding;
    }
    encoder_.backward(g_embed, grad_skips);
  }

  void params(std::vector<Param<T>*>& out) {
    encoder_.params(out);
    decoder_.params(out);
  }
  void encoder_params(std::vector<Param<T>*>& out) { encoder_.params(out); }

  UNetEncoder<T>& encoder() { return encoder_; }
  UNetDecoder<T>& decoder() { return decoder_; }

 private:
  UNetEncoder<T> encoder_;
  UNetDecoder<T> decoder_;
};

// ---------------------------------------------------------------------------

/// Patch discriminator over (condition, candidate) channel-concatenated input:
/// 3 stride-2 blocks, one stride-1 block, 1-channel sigmoid output map.
template <typename T>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(const std::string& name, const NetConfig& cfg)
      : cfg_(cfg),
        act1_(cfg.disc_leaky_slope),
        act2_(cfg.disc_leaky_slope),
        act3_(cfg.disc_leaky_slope),
        act4_(cfg.disc_leaky_slope) {
    const auto& w = cfg.disc_widths;
    conv1_ = Conv2d<T>(name + ".conv1", 2 * cfg.channels, w[0], 3, 2);
    conv2_ = Conv2d<T>(name + ".conv2", w[0], w[1], 3, 2);
    conv3_ = Conv2d<T>(name + ".conv3", w[1], w[2], 3, 2);
    conv4_ = Conv2d<T>(name + ".conv4", w[2], w[2], 3, 1);
    out_conv_ = Conv2d<T>(name + ".out", w[2], 1, 3, 1, Init::kXavierUniform);
  }

  void params(std::vector<Param<T>*>& out) {
    conv1_.params(out);
    conv2_.params(out);
    conv3_.params(out);
    conv4_.params(out);
    out_conv_.params(out);
  }

  /// Probability grid, N x 1 x H/8 x W/8.
  Tensor<T> forward(const Tensor<T>& condition, const Tensor<T>& candidate) {
    if (!condition.same_shape(candidate))
      throw std::invalid_argument("PatchDiscriminator: condition/candidate shape mismatch");
    Tensor<T> h = concat_channels(condition, candidate);
    h = act1_.forward(conv1_.forward(h));
    h = act2_.forward(conv2_.forward(h));
    h = act3_.forward(conv3_.forward(h));
    h = act4_.forward(conv4_.forward(h));
    return out_act_.forward(out_conv_.forward(h));
  }

  /// Gradient w.r.t. the candidate image (the generator-side path).
  /// weight_grad=false leaves the discriminator parameters untouched.
  Tensor<T> backward(const Tensor<T>& grad_grid, bool input_grad, bool weight_grad = true) {
    Tensor<T> g = out_conv_.backward(out_act_.backward(grad_grid), true, weight_grad);
    g = conv4_.backward(act4_.backward(g), true, weight_grad);
    g = conv3_.backward(act3_.backward(g), true, weight_grad);
    g = conv2_.backward(act2_.backward(g), true, weight_grad);
    g = conv1_.backward(act1_.backward(g), input_grad, weight_grad);
    if (!input_grad) return {};
    Tensor<T> gcond, gcand;
    split_channels(g, cfg_.channels, gcond, gcand);
    return gcand;
  }

 private:
  NetConfig cfg_;
  Conv2d<T> conv1_, conv2_, conv3_, conv4_, out_conv_;
  LeakyRelu<T> act1_, act2_, act3_, act4_;
  Sigmoid<T> out_act_;
};

// ---------------------------------------------------------------------------

/// Frozen feature network standing in for a pretrained perceptual backbone:
/// six seeded convolutions, two of them stride-2, rectified, never trained.
/// Weights may be replaced wholesale from an external checkpoint.
template <typename T>
class PerceptualNet {
 public:
  /// Seed for the default frozen weights; fixed so every run shares the same
  /// feature space unless weights are supplied externally.
  static constexpr std::uint64_t kDefaultSeed = 0x70657263ULL;

  PerceptualNet() = default;
  explicit PerceptualNet(const NetConfig& cfg) : cfg_(cfg) {
    const int w = cfg.perc_width;
    convs_[0] = Conv2d<T>("percep.conv1", cfg.channels, w, 3, 1);
    convs_[1] = Conv2d<T>("percep.conv2", w, 2 * w, 3, 2);
    convs_[2] = Conv2d<T>("percep.conv3", 2 * w, 2 * w, 3, 1);
    convs_[3] = Conv2d<T>("percep.conv4", 2 * w, 4 * w, 3, 2);
    convs_[4] = Conv2d<T>("percep.conv5", 4 * w, 4 * w, 3, 1);
    convs_[5] = Conv2d<T>("percep.conv6", 4 * w, 4 * w, 3, 1);
    std::vector<Param<T>*> ps;
    params(ps);
    for (Param<T>* p : ps) init_param(*p, kDefaultSeed);
  }

  void params(std::vector<Param<T>*>& out) {
    for (auto& c : convs_) c.params(out);
  }

  /// Tap-layer dimensions for a given input size: (C_p, H_p, W_p).
  std::array<int, 3> feature_shape() const {
    return {4 * cfg_.perc_width, cfg_.image_size / 4, cfg_.image_size / 4};
  }

  Tensor<T> forward(const Tensor<T>& x) {
    Tensor<T> h = x;
    for (int i = 0; i < 6; ++i) h = acts_[i].forward(convs_[i].forward(h));
    return h;
  }

  /// Input gradient only; the weights are frozen.
  Tensor<T> backward(const Tensor<T>& grad_features) {
    Tensor<T> g = grad_features;
    for (int i = 5; i >= 0; --i) g = convs_[i].backward(acts_[i].backward(g), true, /*weight_grad=*/false);
    return g;
  }

 private:
  NetConfig cfg_;
  std::array<Conv2d<T>, 6> convs_;
  std::array<Relu<T>, 6> acts_;
};

// ---------------------------------------------------------------------------

/// Linear identity classifier over embeddings with softmax output.
template <typename T>
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(const std::string& name, int embed_dim, int num_classes)
      : fc_(name + ".fc", embed_dim, num_classes, Init::kXavierUniform), num_classes_(num_classes) {}

  void params(std::vector<Param<T>*>& out) { fc_.params(out); }

  int num_classes() const { return num_classes_; }

  /// Row-wise softmax probabilities, N x K.
  Tensor<T> forward(const Tensor<T>& embedding) {
    Tensor<T> logits = fc_.forward(embedding);
    probs_ = logits;
    const int n = logits.dim(0), k = logits.dim(1);
    for (int i = 0; i < n; ++i) {
      T mx = probs_.at(i, 0);
      for (int j = 1; j < k; ++j) mx = std::max(mx, probs_.at(i, j));
      T sum = T(0);
      for (int j = 0; j < k; ++j) {
        probs_.at(i, j) = std::exp(probs_.at(i, j) - mx);
        sum += probs_.at(i, j);
      }
      for (int j = 0; j < k; ++j) probs_.at(i, j) /= sum;
    }
    return probs_;
  }

  /// Backward from a gradient w.r.t. logits (cross-entropy callers compute
  /// probs - onehot themselves); returns gradient w.r.t. the embedding.
  Tensor<T> backward_logits(const Tensor<T>& grad_logits) { return fc_.backward(grad_logits); }

  const Tensor<T>& probs() const { return probs_; }

 private:
  Linear<T> fc_;
  Tensor<T> probs_;
  int num_classes_ = 0;
};

/// Two-layer perceptron domain discriminator over embeddings (the adversary
/// of the domain-adaptation baseline).
template <typename T>
class EmbedDiscriminator {
 public:
  EmbedDiscriminator() = default;
  EmbedDiscriminator(const std::string& name, int embed_dim, int hidden1 = 128, int hidden2 = 64,
                     double leaky_slope = 0.3)
      : fc1_(name + ".fc1", embed_dim, hidden1), fc2_(name + ".fc2", hidden1, hidden2),
        fc3_(name + ".fc3", hidden2, 1, Init::kXavierUniform), act1_(leaky_slope), act2_(leaky_slope) {}

  void params(std::vector<Param<T>*>& out) {
    fc1_.params(out);
    fc2_.params(out);
    fc3_.params(out);
  }

  /// N x 1 probabilities that the embedding comes from the source domain.
  Tensor<T> forward(const Tensor<T>& embedding) {
    Tensor<T> h = act1_.forward(fc1_.forward(embedding));
    h = act2_.forward(fc2_.forward(h));
    return out_act_.forward(fc3_.forward(h));
  }

  Tensor<T> backward(const Tensor<T>& grad_prob) {
    Tensor<T> g = fc3_.backward(out_act_.backward(grad_prob));
    g = fc2_.backward(act2_.backward(g));
    return fc1_.backward(act1_.backward(g));
  }

 private:
  Linear<T> fc1_, fc2_, fc3_;
  LeakyRelu<T> act1_, act2_;
  Sigmoid<T> out_act_;
};

/// Initializes every parameter in the set from (seed, name).
template <typename T>
void init_params(const std::vector<Param<T>*>& params, std::uint64_t seed) {
  for (Param<T>* p : params) init_param(*p, seed);
}

template <typename T>
int count_scalars(const std::vector<Param<T>*>& params) {
  int n = 0;
  for (const Param<T>* p : params) n += p->value.numel();
  return n;
}

}  // namespace cpgan
