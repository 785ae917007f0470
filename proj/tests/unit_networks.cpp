#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "cpgan/networks.hpp"
#include "cpgan/rng.hpp"
#include "doctest.h"

using namespace cpgan;

namespace {

NetConfig small_net() {
  NetConfig cfg;
  cfg.image_size = 32;
  return cfg;
}

Tensor<float> random_images(int n, const NetConfig& cfg, std::uint64_t seed) {
  Tensor<float> x({n, cfg.channels, cfg.image_size, cfg.image_size});
  std::mt19937_64 rng = make_rng(seed, "net-test");
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (int i = 0; i < x.numel(); ++i) x[i] = u(rng);
  return x;
}

}  // namespace

TEST_CASE("generator reconstructs at input geometry with tanh range") {
  NetConfig cfg = small_net();
  UNetGenerator<float> g("enc", "dec", cfg);
  std::vector<Param<float>*> ps;
  g.params(ps);
  init_params(ps, 3);

  Tensor<float> x = random_images(2, cfg, 1);
  auto out = g.forward(x);
  CHECK(out.reconstruction.dim(0) == 2);
  CHECK(out.reconstruction.dim(1) == cfg.channels);
  CHECK(out.reconstruction.dim(2) == cfg.image_size);
  CHECK(out.reconstruction.dim(3) == cfg.image_size);
  for (int i = 0; i < out.reconstruction.numel(); ++i) {
    CHECK(out.reconstruction[i] >= -1.0f);
    CHECK(out.reconstruction[i] <= 1.0f);
  }
  CHECK(out.enc.embedding.dim(0) == 2);
  CHECK(out.enc.embedding.dim(1) == cfg.embed_dim);
  CHECK(out.enc.skips.size() == 3);
}

TEST_CASE("forward is exactly decode-after-encode") {
  NetConfig cfg = small_net();
  UNetGenerator<float> g("enc", "dec", cfg);
  std::vector<Param<float>*> ps;
  g.params(ps);
  init_params(ps, 4);

  Tensor<float> x = random_images(1, cfg, 2);
  auto full = g.forward(x);
  auto enc = g.encode(x);
  Tensor<float> dec = g.decode(enc);
  REQUIRE(dec.same_shape(full.reconstruction));
  for (int i = 0; i < dec.numel(); ++i) CHECK(dec[i] == full.reconstruction[i]);
}

TEST_CASE("the network is a pure function of input and parameters") {
  // No batch statistics anywhere: the same row gives the same output whether
  // it is alone or inside a larger batch, and repeat calls are identical.
  NetConfig cfg = small_net();
  UNetGenerator<float> g("enc", "dec", cfg);
  std::vector<Param<float>*> ps;
  g.params(ps);
  init_params(ps, 5);

  Tensor<float> batch = random_images(3, cfg, 3);
  auto out_batch = g.forward(batch);

  Tensor<float> row({1, cfg.channels, cfg.image_size, cfg.image_size});
  const int per = row.numel();
  std::copy(batch.data() + per, batch.data() + 2 * per, row.data());
  auto out_row = g.forward(row);
  // Solo and batched runs hit different GEMM blockings, so agreement is up
  // to float32 summation order, not bitwise.
  for (int i = 0; i < per; ++i)
    CHECK(std::abs(out_row.reconstruction[i] - out_batch.reconstruction[per + i]) <= 5e-5f);
  for (int j = 0; j < cfg.embed_dim; ++j)
    CHECK(std::abs(out_row.enc.embedding.at(0, j) - out_batch.enc.embedding.at(1, j)) <= 5e-5f);

  auto again = g.forward(batch);
  for (int i = 0; i < again.reconstruction.numel(); ++i)
    CHECK(again.reconstruction[i] == out_batch.reconstruction[i]);
}

TEST_CASE("zero-skips changes pixels but never shapes") {
  NetConfig cfg = small_net();
  UNetGenerator<float> g("enc", "dec", cfg);
  std::vector<Param<float>*> ps;
  g.params(ps);
  init_params(ps, 6);

  Tensor<float> x = random_images(2, cfg, 4);
  auto enc = g.encode(x);
  Tensor<float> with = g.decode(enc, false);
  Tensor<float> without = g.decode(enc, true);
  CHECK(with.same_shape(without));
  bool any_diff = false;
  for (int i = 0; i < with.numel(); ++i) any_diff = any_diff || with[i] != without[i];
  CHECK(any_diff);
}

TEST_CASE("patch discriminator emits a probability grid at 1/8 scale") {
  NetConfig cfg = small_net();
  PatchDiscriminator<float> d("disc", cfg);
  std::vector<Param<float>*> ps;
  d.params(ps);
  init_params(ps, 7);

  Tensor<float> cond = random_images(2, cfg, 5);
  Tensor<float> cand = random_images(2, cfg, 6);
  Tensor<float> p = d.forward(cond, cand);
  CHECK(p.dim(0) == 2);
  CHECK(p.dim(1) == 1);
  CHECK(p.dim(2) == cfg.image_size / 8);
  CHECK(p.dim(3) == cfg.image_size / 8);
  for (int i = 0; i < p.numel(); ++i) {
    CHECK(p[i] > 0.0f);
    CHECK(p[i] < 1.0f);
  }
  // The candidate matters: swapping it moves the grid.
  Tensor<float> p2 = d.forward(cond, cond);
  bool any_diff = false;
  for (int i = 0; i < p.numel(); ++i) any_diff = any_diff || p[i] != p2[i];
  CHECK(any_diff);
}

TEST_CASE("discriminator backward can leave its weights untouched") {
  NetConfig cfg = small_net();
  PatchDiscriminator<float> d("disc", cfg);
  std::vector<Param<float>*> ps;
  d.params(ps);
  init_params(ps, 8);

  Tensor<float> cond = random_images(1, cfg, 7);
  Tensor<float> cand = random_images(1, cfg, 8);
  Tensor<float> p = d.forward(cond, cand);
  Tensor<float> gp(p.shape());
  gp.fill(0.3f);

  for (Param<float>* q : ps) q->grad.zero();
  Tensor<float> gcand = d.backward(gp, /*input_grad=*/true, /*weight_grad=*/false);
  CHECK(gcand.same_shape(cand));
  for (Param<float>* q : ps)
    for (int i = 0; i < q->grad.numel(); ++i) CHECK(q->grad[i] == 0.0f);

  d.forward(cond, cand);
  d.backward(gp, false, true);
  bool any_nonzero = false;
  for (Param<float>* q : ps)
    for (int i = 0; i < q->grad.numel(); ++i) any_nonzero = any_nonzero || q->grad[i] != 0.0f;
  CHECK(any_nonzero);
}

TEST_CASE("perceptual features have the advertised shape and frozen weights") {
  NetConfig cfg = small_net();
  PerceptualNet<float> p1(cfg), p2(cfg);
  auto fs = p1.feature_shape();
  CHECK(fs[0] == 4 * cfg.perc_width);
  CHECK(fs[1] == cfg.image_size / 4);

  Tensor<float> x = random_images(2, cfg, 9);
  Tensor<float> f1 = p1.forward(x), f2 = p2.forward(x);
  CHECK(f1.dim(1) == fs[0]);
  CHECK(f1.dim(2) == fs[1]);
  CHECK(f1.dim(3) == fs[2]);
  // Two independently constructed instances share the pinned weights.
  for (int i = 0; i < f1.numel(); ++i) CHECK(f1[i] == f2[i]);

  // backward() propagates to the input without touching weight grads.
  std::vector<Param<float>*> ps;
  p1.params(ps);
  for (Param<float>* q : ps) q->grad.zero();
  Tensor<float> gf(f1.shape());
  gf.fill(0.1f);
  Tensor<float> gx = p1.backward(gf);
  CHECK(gx.same_shape(x));
  for (Param<float>* q : ps)
    for (int i = 0; i < q->grad.numel(); ++i) CHECK(q->grad[i] == 0.0f);
}

TEST_CASE("classifier head emits rows on the simplex") {
  ClassifierHead<float> head("cls", 16, 7);
  std::vector<Param<float>*> ps;
  head.params(ps);
  init_params(ps, 10);

  Tensor<float> z({3, 16});
  std::mt19937_64 rng = make_rng(11, "cls-test");
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  for (int i = 0; i < z.numel(); ++i) z[i] = u(rng);
  Tensor<float> probs = head.forward(z);
  CHECK(probs.dim(0) == 3);
  CHECK(probs.dim(1) == 7);
  for (int i = 0; i < 3; ++i) {
    double row = 0.0;
    for (int j = 0; j < 7; ++j) {
      CHECK(probs.at(i, j) >= 0.0f);
      row += probs.at(i, j);
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-5));
  }
  CHECK(head.num_classes() == 7);
}

TEST_CASE("embedding discriminator outputs one probability per row") {
  EmbedDiscriminator<float> d("edisc", 16);
  std::vector<Param<float>*> ps;
  d.params(ps);
  init_params(ps, 12);

  Tensor<float> z({5, 16});
  std::mt19937_64 rng = make_rng(13, "edisc-test");
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (int i = 0; i < z.numel(); ++i) z[i] = u(rng);
  Tensor<float> p = d.forward(z);
  CHECK(p.dim(0) == 5);
  CHECK(p.dim(1) == 1);
  for (int i = 0; i < p.numel(); ++i) {
    CHECK(p[i] > 0.0f);
    CHECK(p[i] < 1.0f);
  }
}

TEST_CASE("distinct inputs give distinct embeddings") {
  NetConfig cfg = small_net();
  UNetGenerator<float> g("enc", "dec", cfg);
  std::vector<Param<float>*> ps;
  g.params(ps);
  init_params(ps, 14);

  Tensor<float> x = random_images(2, cfg, 10);
  auto enc = g.encode(x);
  double dist = 0.0;
  for (int j = 0; j < cfg.embed_dim; ++j) {
    const double d = enc.embedding.at(0, j) - enc.embedding.at(1, j);
    dist += d * d;
  }
  CHECK(dist > 0.0);
}

TEST_CASE("network size stays desk-scale") {
  NetConfig cfg;  // default 64x64 geometry used in training
  UNetGenerator<float> g("enc", "dec", cfg);
  PatchDiscriminator<float> d("disc", cfg);
  std::vector<Param<float>*> gp, dp;
  g.params(gp);
  d.params(dp);
  // Stay well under anything requiring accelerator hardware.
  CHECK(count_scalars(gp) < 20'000'000);
  CHECK(count_scalars(dp) < 2'000'000);
  CHECK(count_scalars(gp) > 100'000);  // but still a real model
}

TEST_CASE("invalid geometry is rejected at construction") {
  NetConfig bad;
  bad.image_size = 30;  // not a multiple of 8
  CHECK_THROWS_AS(UNetGenerator<float>("e", "d", bad), std::invalid_argument);
  NetConfig wrong = small_net();
  UNetGenerator<float> g("enc", "dec", wrong);
  Tensor<float> x({1, wrong.channels, 64, 64});
  CHECK_THROWS_AS(g.encode(x), std::invalid_argument);
}
