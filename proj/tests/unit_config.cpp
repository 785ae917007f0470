#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cpgan/config.hpp"
#include "doctest.h"

using namespace cpgan;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& tag, const std::string& contents) {
    path = fs::temp_directory_path() / ("cpgan_cfg_" + tag + "_" + std::to_string(::getpid()) + ".conf");
    std::ofstream(path) << contents;
  }
  ~TempFile() { fs::remove(path); }
  std::string str() const { return path.string(); }
};

struct EnvGuard {
  std::string name;
  EnvGuard(const std::string& n, const std::string& value) : name(n) { ::setenv(n.c_str(), value.c_str(), 1); }
  ~EnvGuard() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST_CASE("defaults stand on their own") {
  RunConfig cfg;
  CHECK(cfg.train.batch_size == 128);
  CHECK(cfg.train.learning_rate == 4e-4);
  CHECK(cfg.train.adam_beta1 == 0.5);
  CHECK(cfg.train.adam_beta2 == 0.999);
  CHECK(cfg.train.weights.lambda_gan == 1.0);
  CHECK(cfg.train.weights.lambda_perceptual == 0.25);
  CHECK(cfg.train.weights.lambda_l2 == 0.25);
  CHECK(cfg.train.weights.margin == 1.0);
  CHECK(cfg.model == "cpgan");
  CHECK(cfg.synth.num_identities == 30);
  CHECK(cfg.synth.views_per_domain == 8);
  CHECK(cfg.synth.num_folds == 5);
}

TEST_CASE("config files override defaults section by section") {
  TempFile f("basic",
             "# training setup\n"
             "[train]\n"
             "batch = 16\n"
             "lr = 0.001\n"
             "folds = 0,1,3\n"
             "zero_skips = true\n"
             "\n"
             "[loss]\n"
             "lambda1 = 0.5\n"
             "lambda2 = 0 ; trailing comment\n"
             "margin = 2.0\n"
             "\n"
             "[synth]\n"
             "identities = 12\n"
             "[run]\n"
             "model = cpcnn\n");
  RunConfig cfg;
  apply_config_file(cfg, f.str());
  CHECK(cfg.train.batch_size == 16);
  CHECK(cfg.train.learning_rate == 0.001);
  CHECK(cfg.train.train_folds == std::vector<int>{0, 1, 3});
  CHECK(cfg.train.zero_skips);
  CHECK(cfg.train.weights.lambda_gan == 0.5);
  CHECK(cfg.train.weights.lambda_perceptual == 0.0);
  CHECK(cfg.train.weights.lambda_l2 == 0.25);  // untouched
  CHECK(cfg.train.weights.margin == 2.0);
  CHECK(cfg.synth.num_identities == 12);
  CHECK(cfg.model == "cpcnn");
}

TEST_CASE("unknown keys are named with their location") {
  TempFile f("typo", "[loss]\nlamda1 = 0\n");
  RunConfig cfg;
  try {
    apply_config_file(cfg, f.str());
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("lamda1") != std::string::npos);
    CHECK(msg.find(":2") != std::string::npos);  // the offending line
    CHECK(msg.find("[loss]") != std::string::npos);
  }
}

TEST_CASE("unknown sections, headerless keys, and malformed values are rejected") {
  RunConfig cfg;
  TempFile bad_section("sec", "[optimizer]\nlr = 1\n");
  CHECK_THROWS_AS(apply_config_file(cfg, bad_section.str()), std::invalid_argument);

  TempFile no_section("nosec", "batch = 16\n");
  CHECK_THROWS_AS(apply_config_file(cfg, no_section.str()), std::invalid_argument);

  TempFile bad_value("val", "[train]\nbatch = twelve\n");
  CHECK_THROWS_AS(apply_config_file(cfg, bad_value.str()), std::invalid_argument);

  TempFile bad_line("line", "[train]\nbatch\n");
  CHECK_THROWS_AS(apply_config_file(cfg, bad_line.str()), std::invalid_argument);

  CHECK_THROWS_AS(apply_config_file(cfg, "/nonexistent/file.conf"), std::invalid_argument);
}

TEST_CASE("environment variables override the file layer") {
  TempFile f("env", "[train]\nseed = 3\n[synth]\nseed = 3\n");
  RunConfig cfg;
  apply_config_file(cfg, f.str());
  CHECK(cfg.train.seed == 3);

  EnvGuard seed("CPGAN_SEED", "99");
  EnvGuard out("CPGAN_OUT", "/tmp/cpgan_env_out");
  apply_env_overrides(cfg);
  CHECK(cfg.train.seed == 99);
  CHECK(cfg.synth.seed == 99);
  CHECK(cfg.adda.seed == 99);
  CHECK(cfg.out_dir == "/tmp/cpgan_env_out");
}

TEST_CASE("a malformed environment seed is a config error") {
  RunConfig cfg;
  EnvGuard seed("CPGAN_SEED", "not-a-number");
  CHECK_THROWS_AS(apply_env_overrides(cfg), std::invalid_argument);
}

TEST_CASE("shared settings propagate to the adaptation baseline") {
  RunConfig cfg;
  cfg.train.batch_size = 24;
  cfg.train.seed = 77;
  cfg.train.train_folds = {1, 2};
  cfg.train.weights.margin = 1.5;
  cfg.train.net.image_size = 32;
  cfg.sync_shared();
  CHECK(cfg.adda.batch_size == 24);
  CHECK(cfg.adda.seed == 77);
  CHECK(cfg.adda.train_folds == std::vector<int>{1, 2});
  CHECK(cfg.adda.margin == 1.5);
  CHECK(cfg.adda.net.image_size == 32);
}

TEST_CASE("the echo is a complete machine-readable description") {
  RunConfig cfg;
  cfg.model = "adda";
  cfg.stage = "2";
  cfg.manifest_path = "/data/manifest.txt";
  cfg.out_dir = "/out";
  cfg.train.batch_size = 8;
  nlohmann::json j = cfg.echo();
  CHECK(j["model"] == "adda");
  CHECK(j["stage"] == "2");
  CHECK(j["manifest"] == "/data/manifest.txt");
  CHECK(j["out"] == "/out");
  CHECK(j["train"]["batch_size"] == 8);
  CHECK(j["synth"]["identities"] == 30);
  CHECK(j.contains("adda"));
}

TEST_CASE("comments and blank lines are ignored, whitespace is trimmed") {
  TempFile f("ws",
             "\n"
             "   # full-line comment\n"
             "  [train]   \n"
             "   batch   =    8   \n"
             "; alt comment style\n"
             "\n");
  RunConfig cfg;
  apply_config_file(cfg, f.str());
  CHECK(cfg.train.batch_size == 8);
}
