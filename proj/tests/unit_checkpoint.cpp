#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "cpgan/checkpoint.hpp"
#include "doctest.h"

using namespace cpgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cpgan_ck_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

Tensor<float> iota(std::vector<int> shape, float scale) {
  Tensor<float> t(std::move(shape));
  for (int i = 0; i < t.numel(); ++i) t[i] = scale * static_cast<float>(i);
  return t;
}

}  // namespace

TEST_CASE("checkpoint round-trips metadata and tensors exactly") {
  TempDir dir("rt");
  const std::string path = (dir.path / "a.ckpt").string();

  Tensor<float> w = iota({3, 4}, 0.25f);
  Tensor<float> b = iota({4}, -1.5f);
  CheckpointMeta meta;
  meta.kind = "cpgan";
  meta.epoch = 7;
  meta.step = 123;
  meta.rng_state = "987 654 321";
  meta.config = {{"lr", 0.01}, {"note", "round-trip"}};
  meta.extra = {{"adam_g_steps", 55}};
  meta.version = "test-build";
  save_checkpoint(path, meta, {{"layer.w", &w}, {"layer.b", &b}});

  LoadedCheckpoint ck = load_checkpoint(path);
  CHECK(ck.meta.kind == "cpgan");
  CHECK(ck.meta.epoch == 7);
  CHECK(ck.meta.step == 123);
  CHECK(ck.meta.rng_state == "987 654 321");
  CHECK(ck.meta.config["lr"] == 0.01);
  CHECK(ck.meta.config["note"] == "round-trip");
  CHECK(ck.meta.extra["adam_g_steps"] == 55);
  CHECK(ck.meta.version == "test-build");
  REQUIRE(ck.tensors.size() == 2);

  const Tensor<float>& w2 = ck.require("layer.w");
  REQUIRE(w2.shape() == w.shape());
  for (int i = 0; i < w.numel(); ++i) CHECK(w2[i] == w[i]);
  const Tensor<float>& b2 = ck.require("layer.b");
  for (int i = 0; i < b.numel(); ++i) CHECK(b2[i] == b[i]);
  CHECK_THROWS_AS(ck.require("layer.missing"), std::runtime_error);
}

TEST_CASE("non-checkpoint files are rejected by the magic tag") {
  TempDir dir("magic");
  const std::string path = (dir.path / "not_a.ckpt").string();
  std::ofstream(path) << "this is just text\n";
  try {
    load_checkpoint(path);
    FAIL("expected a failure");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("is not a checkpoint file") != std::string::npos);
  }
}

TEST_CASE("truncated blobs are detected") {
  TempDir dir("trunc");
  const std::string path = (dir.path / "t.ckpt").string();
  Tensor<float> w = iota({64}, 1.0f);
  CheckpointMeta meta;
  meta.kind = "cpcnn";
  save_checkpoint(path, meta, {{"w", &w}});

  const auto full = fs::file_size(path);
  fs::resize_file(path, full - 32);
  CHECK_THROWS(load_checkpoint(path));
}

TEST_CASE("writes are atomic: no partial file left on success, no temp litter") {
  TempDir dir("atomic");
  const std::string path = (dir.path / "x.ckpt").string();
  Tensor<float> w = iota({8}, 2.0f);
  CheckpointMeta meta;
  meta.kind = "cpgan";
  save_checkpoint(path, meta, {{"w", &w}});
  // Overwrite with different content; the reader must see one or the other,
  // and after the call, exactly the new one.
  Tensor<float> w2 = iota({8}, -3.0f);
  save_checkpoint(path, meta, {{"w", &w2}});
  LoadedCheckpoint ck = load_checkpoint(path);
  CHECK(ck.require("w")[3] == -9.0f);

  int files = 0;
  for (auto& p : fs::directory_iterator(dir.path)) {
    ++files;
    CHECK(p.path().extension() == ".ckpt");  // no .tmp leftovers
  }
  CHECK(files == 1);
}

TEST_CASE("checksum is order-sensitive content hashing") {
  Tensor<float> a = iota({5}, 1.0f), b = iota({5}, 1.0f), c = iota({5}, 2.0f);
  const auto h_ab = tensor_checksum({{"a", &a}, {"b", &b}});
  CHECK(h_ab == tensor_checksum({{"a", &a}, {"b", &b}}));
  CHECK(h_ab != tensor_checksum({{"a", &a}, {"b", &c}}));  // content changes hash
  b[4] += 1e-6f;
  CHECK(h_ab != tensor_checksum({{"a", &a}, {"b", &b}}));  // single-bit sensitivity
}

TEST_CASE("missing files produce a readable error") {
  CHECK_THROWS(load_checkpoint("/nonexistent/dir/x.ckpt"));
}
