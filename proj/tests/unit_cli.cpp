// Exercises the installed binary end to end via std::system: exit codes,
// artifact layout, and flag/env/config precedence as seen by a shell user.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cpgan_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

struct EnvGuard {
  std::string key;
  EnvGuard(const std::string& k, const std::string& v) : key(k) { ::setenv(k.c_str(), v.c_str(), 1); }
  ~EnvGuard() { ::unsetenv(key.c_str()); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(CPGAN_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

int count_pngs(const fs::path& dir) {
  int n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One tiny dataset shared by the pipeline cases below; generated through the
// binary itself so its exit code is part of the test.
const std::string& shared_manifest() {
  static TempDir dir("data");
  static std::string manifest = [&] {
    REQUIRE(run("synth-data --identities 6 --views 2 --size 16 --folds 3 --seed 9 --out " + dir.str()) == 0);
    return (dir.path / "manifest.txt").string();
  }();
  return manifest;
}

}  // namespace

TEST_CASE("help exits cleanly for the app and every subcommand") {
  CHECK(run("--help") == 0);
  for (const char* sub : {"synth-data", "train", "eval", "ablate", "frontalize", "grad-check"})
    CHECK(run(std::string(sub) + " --help") == 0);
}

TEST_CASE("bad invocations exit with the configuration-error code") {
  CHECK(run("") == 2);                    // a subcommand is required
  CHECK(run("--bogus") == 2);             // unknown flag
  CHECK(run("train --bogus 3") == 2);     // unknown subcommand flag
  CHECK(run("train --model warpdrive") == 2);
  CHECK(run("train --model cpgan") == 2);  // no manifest
  CHECK(run("synth-data --identities 0 --out /tmp/cpgan_cli_never") == 2);
}

TEST_CASE("config files are applied before flags and bad ones abort early") {
  TempDir dir("conf");
  const fs::path good = dir.path / "good.conf";
  std::ofstream(good) << "[synth]\nidentities = 4\nviews = 1\nsize = 16\nfolds = 2\nseed = 5\n";
  const fs::path typo = dir.path / "typo.conf";
  std::ofstream(typo) << "[loss]\nlamda1 = 0\n";

  const fs::path out_conf = dir.path / "from_conf";
  CHECK(run("synth-data --config " + good.string() + " --out " + out_conf.string()) == 0);
  CHECK(count_pngs(out_conf) == 8);  // 4 identities x 1 view x 2 domains

  // Flags win over the file: same config, but 6 identities on the command line.
  const fs::path out_flag = dir.path / "from_flag";
  CHECK(run("synth-data --config " + good.string() + " --identities 6 --out " + out_flag.string()) == 0);
  CHECK(count_pngs(out_flag) == 12);

  CHECK(run("synth-data --config " + typo.string() + " --out " + dir.str() + "/never") == 2);
  CHECK(run("synth-data --config /nonexistent.conf --out " + dir.str() + "/never") == 2);
}

TEST_CASE("synth-data writes the manifest and one PNG per view and domain") {
  TempDir dir("synth");
  CHECK(run("synth-data --identities 30 --views 8 --size 16 --seed 1 --out " + dir.str()) == 0);
  CHECK(fs::exists(dir.path / "manifest.txt"));
  CHECK(fs::exists(dir.path / "effective_config.json"));
  CHECK(count_pngs(dir.path) == 480);  // 30 x 8 x 2
}

TEST_CASE("the seed env var steers generation and explicit flags beat it") {
  const std::string common = "synth-data --identities 4 --views 1 --size 16 --folds 2 ";
  TempDir a("env_a"), b("env_b"), c("env_c");
  {
    EnvGuard g("CPGAN_SEED", "41");
    CHECK(run(common + "--out " + a.str()) == 0);
  }
  CHECK(run(common + "--seed 41 --out " + b.str()) == 0);
  {
    EnvGuard g("CPGAN_SEED", "7");  // loses to --seed 41
    CHECK(run(common + "--seed 41 --out " + c.str()) == 0);
  }
  CHECK(slurp(a.path / "manifest.txt") == slurp(b.path / "manifest.txt"));
  CHECK(slurp(b.path / "manifest.txt") == slurp(c.path / "manifest.txt"));
  // Same seed must mean the same pixels, not just the same index.
  const std::string sample = "id000_frontal_v00.png";
  CHECK(slurp(a.path / sample) == slurp(b.path / sample));
}

TEST_CASE("train, eval, and frontalize round-trip through the binary") {
  const std::string m = shared_manifest();
  TempDir train_out("train"), eval_out("eval"), grid_out("grid");

  CHECK(run("train --manifest " + m +
            " --model cpgan --epochs 1 --batch 4 --steps-per-epoch 2 --folds 0,1 --seed 3 --out " +
            train_out.str()) == 0);
  const fs::path ckpt = train_out.path / "last.ckpt";
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(train_out.path / "train_log.csv"));
  CHECK(fs::exists(train_out.path / "effective_config.json"));

  CHECK(run("eval --checkpoint " + ckpt.string() + " --manifest " + m +
            " --folds 2 --batch 4 --report-out " + eval_out.str()) == 0);
  CHECK(fs::exists(eval_out.path / "roc.csv"));
  CHECK(fs::exists(eval_out.path / "cmc.csv"));
  CHECK(fs::exists(eval_out.path / "roc.svg"));
  CHECK(slurp(eval_out.path / "report.json").find("\"auc\"") != std::string::npos);

  const fs::path grid = grid_out.path / "grid.png";
  CHECK(run("frontalize --checkpoint " + ckpt.string() + " --input " + m +
            " --folds 2 --pairs 2 --columns 2 --grid-out " + grid.string()) == 0);
  CHECK(fs::exists(grid));
}

TEST_CASE("runtime failures and ordering violations use distinct exit codes") {
  const std::string m = shared_manifest();
  TempDir dir("codes");
  // Second-stage adaptation without its prerequisite checkpoint is a setup error.
  CHECK(run("train --model adda --stage 2 --manifest " + m + " --batch 4 --out " + dir.str() + "/x") == 2);
  // Missing files discovered at work time are runtime failures.
  CHECK(run("eval --checkpoint /nonexistent.ckpt --manifest " + m + " --report-out " + dir.str() + "/y") == 1);
  CHECK(run("train --manifest /nonexistent_manifest.txt --model cpgan --out " + dir.str() + "/z") == 1);
}
