#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <filesystem>

#include "cpgan/frontalizer.hpp"
#include "cpgan/png_io.hpp"
#include "cpgan/synthetic.hpp"
#include "cpgan/trainer.hpp"
#include "doctest.h"

using namespace cpgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cpgan_fr_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

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

// An untrained model is all these structural tests need.
CpganModel& fresh_model() {
  static CpganModel* model = [] {
    NetConfig net;
    net.image_size = 32;
    auto* m = new CpganModel(net);
    m->init(5);
    return m;
  }();
  return *model;
}

Tensor<float> some_profiles(int n) {
  const LoadedDataset& data = tiny_data();
  std::vector<int> idxs = data.entries_in_folds({2}, Domain::kProfile);
  REQUIRE(static_cast<int>(idxs.size()) >= n);
  Tensor<float> batch({n, 3, 32, 32});
  for (int i = 0; i < n; ++i)
    std::copy(data.images[idxs[i]].data(), data.images[idxs[i]].data() + 3 * 32 * 32,
              batch.data() + static_cast<std::size_t>(i) * 3 * 32 * 32);
  return batch;
}

}  // namespace

TEST_CASE("cross-decoding keeps geometry and output range") {
  Tensor<float> x = some_profiles(3);
  Tensor<float> y = frontalize(fresh_model(), x);
  CHECK(y.same_shape(x));
  for (int i = 0; i < y.numel(); ++i) {
    CHECK(y[i] >= -1.0f);
    CHECK(y[i] <= 1.0f);
  }
  Tensor<float> z = profilize(fresh_model(), x);
  CHECK(z.same_shape(x));
}

TEST_CASE("skip policy changes pixels, never shapes") {
  Tensor<float> x = some_profiles(2);
  Tensor<float> with = frontalize(fresh_model(), x, false);
  Tensor<float> without = frontalize(fresh_model(), x, true);
  CHECK(with.same_shape(without));
  bool any_diff = false;
  for (int i = 0; i < with.numel(); ++i) any_diff = any_diff || with[i] != without[i];
  CHECK(any_diff);
}

TEST_CASE("same-domain decode equals the generator's own reconstruction") {
  CpganModel& m = fresh_model();
  Tensor<float> x = some_profiles(2);
  auto fwd = m.g_fr.forward(x);
  Tensor<float> via_parts = m.g_fr.decode(m.g_fr.encode(x));
  REQUIRE(via_parts.same_shape(fwd.reconstruction));
  for (int i = 0; i < via_parts.numel(); ++i) CHECK(via_parts[i] == fwd.reconstruction[i]);
}

TEST_CASE("malformed inputs are rejected") {
  CpganModel& m = fresh_model();
  Tensor<float> flat({3, 32, 32});
  CHECK_THROWS_AS(frontalize(m, flat), std::invalid_argument);  // missing batch dim
  Tensor<float> wrong_size({1, 3, 16, 16});
  CHECK_THROWS_AS(frontalize(m, wrong_size), std::invalid_argument);
  Tensor<float> nan_batch({1, 3, 32, 32});
  nan_batch.fill(std::numeric_limits<float>::quiet_NaN());
  CHECK_THROWS_AS(frontalize(m, nan_batch), std::invalid_argument);
}

TEST_CASE("grid sheets tile input/output pairs row-major") {
  TempDir dir("grid");
  const std::string path = (dir.path / "grid.png").string();

  // 8 pairs in 4 columns: 16 cells, 4 rows of 4. Inputs fill odd columns
  // (1st, 3rd, ...), outputs the even ones.
  std::vector<Tensor<float>> cells;
  for (int p = 0; p < 8; ++p) {
    Tensor<float> in({3, 32, 32}), out({3, 32, 32});
    in.fill(-1.0f + 0.25f * static_cast<float>(p));   // distinct flat colors
    out.fill(1.0f - 0.25f * static_cast<float>(p));
    cells.push_back(in);
    cells.push_back(out);
  }
  emit_grid(cells, 4, path);

  Tensor<float> sheet = read_png(path);
  CHECK(sheet.dim(0) == 3);
  CHECK(sheet.dim(1) == 4 * 32);
  CHECK(sheet.dim(2) == 4 * 32);

  // Cell (row r, col c) holds list item 4r + c; sample cell centers.
  auto center = [&](int r, int c) { return sheet.at(0, r * 32 + 16, c * 32 + 16); };
  const float q = 2.0f / 255.0f;  // 8-bit quantization head-room
  CHECK(center(0, 0) == doctest::Approx(-1.0f).epsilon(q));
  CHECK(center(0, 1) == doctest::Approx(1.0f).epsilon(q));
  CHECK(center(0, 2) == doctest::Approx(-0.75f).epsilon(q));
  CHECK(center(1, 0) == doctest::Approx(-0.5f).epsilon(q));   // pair 2 input
  CHECK(center(3, 3) == doctest::Approx(-0.75f).epsilon(q));  // last output
}

TEST_CASE("ragged grids pad with background, empty grids are an error") {
  TempDir dir("ragged");
  const std::string path = (dir.path / "r.png").string();
  std::vector<Tensor<float>> cells;
  for (int i = 0; i < 3; ++i) {
    Tensor<float> t({3, 16, 16});
    t.fill(0.5f);
    cells.push_back(t);
  }
  emit_grid(cells, 2, path);  // 2 rows, second row half empty
  Tensor<float> sheet = read_png(path);
  CHECK(sheet.dim(1) == 32);
  CHECK(sheet.dim(2) == 32);
  // The vacant cell reads back as the -1 background.
  CHECK(sheet.at(0, 24, 24) == doctest::Approx(-1.0f).epsilon(2.0f / 255.0f));

  CHECK_THROWS_AS(emit_grid({}, 4, path), std::invalid_argument);
  CHECK_THROWS_AS(emit_grid(cells, 0, path), std::invalid_argument);

  // Mismatched cell shapes are rejected.
  std::vector<Tensor<float>> bad = cells;
  bad.push_back(Tensor<float>({3, 8, 8}));
  CHECK_THROWS_AS(emit_grid(bad, 2, path), std::invalid_argument);
}

TEST_CASE("grids carry their provenance as embedded text") {
  TempDir dir("text");
  const std::string path = (dir.path / "t.png").string();
  std::vector<Tensor<float>> cells(2, Tensor<float>({3, 16, 16}));
  emit_grid(cells, 2, path, {{"run_config", "{\"seed\":5}"}, {"build", "test"}});
  PngText text = read_png_text(path);
  REQUIRE(text.size() == 2);
  CHECK(text[0].first == "run_config");
  CHECK(text[0].second == "{\"seed\":5}");
  CHECK(text[1].first == "build");
}

TEST_CASE("identity proxy runs on held-out identities and reports a rate") {
  // Untrained model: the proxy must still produce a well-formed result over
  // the held-out fold; the rate itself is near chance and is asserted in the
  // acceptance gate instead.
  IdentityProxyResult r = frontalization_identity_proxy(fresh_model(), tiny_data(), {2}, 4);
  CHECK(r.num_identities == 2);  // fold 2 holds 2 of the 6 identities
  CHECK(r.identities.size() == 2);
  CHECK(r.best_match.size() == 2);
  CHECK(r.success_rate >= 0.0);
  CHECK(r.success_rate <= 1.0);
  // Every best match is one of the held-out identities.
  for (int match : r.best_match)
    CHECK(std::find(r.identities.begin(), r.identities.end(), match) != r.identities.end());
}

TEST_CASE("warp consistency compares against true profile renders") {
  WarpConsistencyResult r = profilize_warp_consistency(fresh_model(), tiny_data(), {2}, 4);
  CHECK(r.num_identities == 2);
  CHECK(r.rate >= 0.0);
  CHECK(r.rate <= 1.0);
}

TEST_CASE("proxy demands identities with both domains present") {
  CHECK_THROWS_AS(frontalization_identity_proxy(fresh_model(), tiny_data(), {9}, 4),
                  std::invalid_argument);
}
