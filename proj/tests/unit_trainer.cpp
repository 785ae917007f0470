#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "cpgan/baselines.hpp"
#include "cpgan/checkpoint.hpp"
#include "cpgan/serialize.hpp"
#include "cpgan/synthetic.hpp"
#include "cpgan/trainer.hpp"
#include "doctest.h"

using namespace cpgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cpgan_tr_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

// One tiny dataset shared by every test in this binary.
const LoadedDataset& tiny_data() {
  static TempDir dir("data");
  static LoadedDataset data = [] {
    SyntheticSpec s;
    s.num_identities = 6;
    s.views_per_domain = 2;
    s.image_size = 32;
    s.num_folds = 3;
    s.seed = 9;
    return LoadedDataset::load(generate_synthetic(s, dir.str()));
  }();
  return data;
}

TrainConfig tiny_config(const std::string& out_dir) {
  TrainConfig cfg;
  cfg.net.image_size = 32;
  cfg.batch_size = 4;
  cfg.steps_per_epoch = 2;
  cfg.epochs = 1;
  cfg.seed = 5;
  cfg.train_folds = {0, 1};
  cfg.checkpoint_dir = out_dir;
  return cfg;
}

NamedTensors value_views(const std::vector<Param<float>*>& ps) {
  NamedTensors out;
  for (Param<float>* p : ps) out.emplace_back(p->name, &p->value);
  return out;
}

}  // namespace

TEST_CASE("training config validation") {
  TempDir dir("cfg");
  TrainConfig cfg = tiny_config(dir.str());
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 3;  // pair sampling needs an even batch
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config(dir.str());
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config(dir.str());
  cfg.d_steps_per_g_step = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config(dir.str());
  cfg.device = "tpu";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config(dir.str());
  CHECK(cfg.adam_beta1 == 0.5);
  CHECK(cfg.adam_beta2 == 0.999);
  CHECK(cfg.learning_rate == 4e-4);
}

TEST_CASE("zero epochs is a no-op that still reports cleanly") {
  TempDir dir("noop");
  CpganTrainer t(tiny_data(), tiny_config(dir.str()));
  auto before = value_views(t.model().all_params());
  const std::uint64_t sum_before = tensor_checksum(before);
  TrainResult r = t.train(0);
  CHECK(r.steps_run == 0);
  CHECK(r.epochs_run == 0);
  CHECK(r.steps.empty());
  CHECK(tensor_checksum(value_views(t.model().all_params())) == sum_before);
}

TEST_CASE("the first step is identical across fresh constructions") {
  TempDir d1("det_a"), d2("det_b");
  CpganTrainer a(tiny_data(), tiny_config(d1.str()));
  CpganTrainer b(tiny_data(), tiny_config(d2.str()));

  // Same seed: identical initialization...
  CHECK(tensor_checksum(value_views(a.model().all_params())) ==
        tensor_checksum(value_views(b.model().all_params())));

  // ... identical first batch, losses, and updated parameters.
  LossBreakdown la = a.step_once();
  LossBreakdown lb = b.step_once();
  CHECK(la.total == lb.total);
  CHECK(la.coupling == lb.coupling);
  CHECK(la.disc == lb.disc);
  CHECK(tensor_checksum(value_views(a.model().all_params())) ==
        tensor_checksum(value_views(b.model().all_params())));

  // A different seed diverges.
  TrainConfig other = tiny_config(d2.str());
  other.seed = 6;
  CpganTrainer c(tiny_data(), other);
  CHECK(tensor_checksum(value_views(c.model().all_params())) !=
        tensor_checksum(value_views(a.model().all_params())));
}

TEST_CASE("only the phases that run touch their parameters") {
  TempDir dir("phases");
  TrainConfig cfg = tiny_config(dir.str());
  cfg.weights.lambda_gan = 0.0;  // no adversarial phase at all
  cfg.weights.lambda_perceptual = 0.0;
  cfg.weights.lambda_l2 = 0.0;
  CpganTrainer t(tiny_data(), cfg);

  const std::uint64_t disc_before = tensor_checksum(value_views(t.model().discriminator_params()));
  std::vector<Param<float>*> percep_ps;
  t.model().percep.params(percep_ps);
  const std::uint64_t percep_before = tensor_checksum(value_views(percep_ps));
  const std::uint64_t gen_before = tensor_checksum(value_views(t.model().generator_params()));

  for (int i = 0; i < 3; ++i) t.step_once();

  // Generator encoders moved; discriminators and the frozen feature net did not.
  CHECK(tensor_checksum(value_views(t.model().generator_params())) != gen_before);
  CHECK(tensor_checksum(value_views(t.model().discriminator_params())) == disc_before);
  CHECK(tensor_checksum(value_views(percep_ps)) == percep_before);

  // With the adversarial term on, the discriminators train too.
  TempDir dir2("phases2");
  CpganTrainer t2(tiny_data(), tiny_config(dir2.str()));
  const std::uint64_t disc2_before = tensor_checksum(value_views(t2.model().discriminator_params()));
  t2.step_once();
  CHECK(tensor_checksum(value_views(t2.model().discriminator_params())) != disc2_before);
  std::vector<Param<float>*> percep2_ps;
  t2.model().percep.params(percep2_ps);
  CHECK(tensor_checksum(value_views(percep2_ps)) == percep_before);  // frozen everywhere
}

TEST_CASE("coupling-only training drives the coupling loss down") {
  TempDir dir("descent");
  TrainConfig cfg = tiny_config(dir.str());
  cfg.weights.lambda_gan = 0.0;
  cfg.weights.lambda_perceptual = 0.0;
  cfg.weights.lambda_l2 = 0.0;
  cfg.steps_per_epoch = 30;
  CpganTrainer t(tiny_data(), cfg);
  TrainResult r = t.train(1);
  REQUIRE(r.steps.size() == 30);
  const double first5  = std::accumulate(r.steps.begin(), r.steps.begin() + 5, 0.0,
                                         [](double s, const LossBreakdown& b) { return s + b.coupling; });
  const double last5 = std::accumulate(r.steps.end() - 5, r.steps.end(), 0.0,
                                       [](double s, const LossBreakdown& b) { return s + b.coupling; });
  CHECK(last5 < first5);
  for (const auto& b : r.steps) CHECK(std::isfinite(b.total));
}

TEST_CASE("coupled-encoder baseline walks the same path as the zero-weight model") {
  // With every image-space weight at zero the full model reduces to the
  // coupled-encoder baseline: same batches, same losses, same trajectory.
  TempDir d1("eq_gan"), d2("eq_cnn");
  TrainConfig cfg = tiny_config(d1.str());
  cfg.weights.lambda_gan = 0.0;
  cfg.weights.lambda_perceptual = 0.0;
  cfg.weights.lambda_l2 = 0.0;
  CpganTrainer gan(tiny_data(), cfg);
  TrainConfig cfg2 = cfg;
  cfg2.checkpoint_dir = d2.str();
  CpcnnTrainer cnn(tiny_data(), cfg2);

  for (int step = 0; step < 8; ++step) {
    LossBreakdown a = gan.step_once();
    LossBreakdown b = cnn.step_once();
    INFO("step ", step);
    CHECK(a.coupling == doctest::Approx(b.coupling).epsilon(1e-5));
  }
}

TEST_CASE("a split run resumes to the same parameters as an unbroken run") {
  TempDir d_full("full"), d_split("split");

  TrainConfig cfg = tiny_config(d_full.str());
  cfg.steps_per_epoch = 3;
  CpganTrainer full(tiny_data(), cfg);
  full.train(2);

  TrainConfig cfg_s = cfg;
  cfg_s.checkpoint_dir = d_split.str();
  CpganTrainer first(tiny_data(), cfg_s);
  TrainResult r1 = first.train(1);
  REQUIRE(!r1.last_checkpoint.empty());

  LoadedCheckpoint ck = load_checkpoint(r1.last_checkpoint);
  CHECK(ck.meta.kind == "cpgan");
  CHECK(ck.meta.epoch == 1);
  TrainConfig echoed = ck.meta.config.get<TrainConfig>();
  CHECK(echoed.batch_size == cfg.batch_size);
  CHECK(echoed.seed == cfg.seed);

  CpganTrainer second(tiny_data(), ck);
  CHECK(second.epoch() == 1);
  CHECK(second.global_step() == 3);
  second.train(1);

  auto pa = full.model().all_params();
  auto pb = second.model().all_params();
  REQUIRE(pa.size() == pb.size());
  double max_rel = 0.0;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    REQUIRE(pa[k]->name == pb[k]->name);
    for (int i = 0; i < pa[k]->value.numel(); ++i) {
      const double va = pa[k]->value[i], vb = pb[k]->value[i];
      const double rel = std::abs(va - vb) / std::max(1e-8, std::max(std::abs(va), std::abs(vb)));
      max_rel = std::max(max_rel, rel);
    }
  }
  CHECK(max_rel <= 1e-4);
}

TEST_CASE("resume rejects a checkpoint of a different architecture") {
  TempDir dir("arch");
  TrainConfig cfg = tiny_config(dir.str());
  CpganTrainer t(tiny_data(), cfg);
  const std::string path = (fs::path(dir.str()) / "a.ckpt").string();
  t.save(path);

  LoadedCheckpoint ck = load_checkpoint(path);
  ck.meta.config["net"]["embed_dim"] = 64;  // shrink the embedding
  try {
    CpganTrainer broken(tiny_data(), ck);
    FAIL("expected an architecture mismatch");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("architecture mismatch") != std::string::npos);
  }
}

TEST_CASE("checkpoint cadence and retention flags") {
  TempDir dir("cadence");
  TrainConfig cfg = tiny_config(dir.str());
  cfg.steps_per_epoch = 1;
  CpganTrainer t(tiny_data(), cfg);
  t.train(2);
  CHECK(fs::exists(fs::path(dir.str()) / "last.ckpt"));
  CHECK(!fs::exists(fs::path(dir.str()) / "epoch_0001.ckpt"));  // rolling by default

  TempDir dir2("cadence2");
  TrainConfig cfg2 = tiny_config(dir2.str());
  cfg2.steps_per_epoch = 1;
  cfg2.keep_epoch_checkpoints = true;
  CpganTrainer t2(tiny_data(), cfg2);
  t2.train(2);
  CHECK(fs::exists(fs::path(dir2.str()) / "last.ckpt"));
  CHECK(fs::exists(fs::path(dir2.str()) / "epoch_0001.ckpt"));
  CHECK(fs::exists(fs::path(dir2.str()) / "epoch_0002.ckpt"));
}

TEST_CASE("the training log accumulates one row per step") {
  TempDir dir("log");
  TrainConfig cfg = tiny_config(dir.str());
  cfg.log_path = (fs::path(dir.str()) / "log.csv").string();
  cfg.steps_per_epoch = 2;
  CpganTrainer t(tiny_data(), cfg);
  t.train(2);
  std::ifstream in(cfg.log_path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line.find("coupling") != std::string::npos);  // header
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("epoch callbacks observe progress in order") {
  TempDir dir("cb");
  TrainConfig cfg = tiny_config(dir.str());
  std::vector<int> epochs_seen;
  CpganTrainer t(tiny_data(), cfg);
  t.train(3, [&](int epoch, const LossBreakdown& b, CpganTrainer& tr) {
    epochs_seen.push_back(epoch);
    CHECK(std::isfinite(b.total));
    CHECK(tr.epoch() == epoch);
  });
  CHECK(epochs_seen == std::vector<int>{1, 2, 3});
}

TEST_CASE("a divergent run aborts with a snapshot instead of emitting garbage") {
  TempDir dir("blowup");
  TrainConfig cfg = tiny_config(dir.str());
  cfg.learning_rate = 1e12;  // guarantees overflow within a few steps
  CpganTrainer t(tiny_data(), cfg);
  bool aborted = false;
  try {
    for (int i = 0; i < 12 && !aborted; ++i) t.step_once();
  } catch (const NonFiniteLossError& e) {
    aborted = true;
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
    REQUIRE(!e.snapshot_path.empty());
    CHECK(fs::exists(e.snapshot_path));
    // The snapshot is a loadable checkpoint for post-mortems.
    LoadedCheckpoint snap = load_checkpoint(e.snapshot_path);
    CHECK(snap.meta.kind == "cpgan");
  }
  CHECK(aborted);
}

TEST_CASE("auto steps-per-epoch covers the training pool") {
  TempDir dir("auto");
  TrainConfig cfg = tiny_config(dir.str());
  cfg.steps_per_epoch = 0;  // derive from data: ceil(#train profiles / batch)
  CpganTrainer t(tiny_data(), cfg);
  // folds {0,1}: 4 identities x 2 views = 8 profiles; batch 4 -> 2 steps.
  CHECK(t.steps_per_epoch() == 2);
}

TEST_CASE("training fold selection is validated") {
  TempDir dir("folds");
  TrainConfig cfg = tiny_config(dir.str());
  cfg.train_folds = {0, 7};  // fold 7 does not exist
  CHECK_THROWS_AS(CpganTrainer(tiny_data(), cfg), std::invalid_argument);
}
