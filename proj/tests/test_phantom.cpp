#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gloredi/dataset.hpp"
#include "gloredi/io.hpp"
#include "gloredi/metrics.hpp"
#include "gloredi/phantom.hpp"
#include "test_util.hpp"

using namespace gloredi;

namespace {

Grid downsample2(const Grid& g) {
  const std::size_t n = g.extent(0) / 2;
  Grid out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.at(i, j) = 0.25 * (g.at(2 * i, 2 * j) + g.at(2 * i + 1, 2 * j) + g.at(2 * i, 2 * j + 1) +
                             g.at(2 * i + 1, 2 * j + 1));
    }
  }
  return out;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

DatasetConfig small_config(std::size_t count) {
  DatasetConfig cfg;
  cfg.count = count;
  cfg.seed = 42;
  return cfg;
}

}  // namespace

TEST_CASE("Shepp-Logan normalization and determinism") {
  const Grid p = shepp_logan(64);
  CHECK(p.min() >= 0.0);
  CHECK(p.max() == 1.0);
  CHECK(p.min() == 0.0);
  // Skull ring: a row through the centre crosses a bright boundary pixel.
  double brightest_edge = 0.0;
  for (std::size_t j = 0; j < 16; ++j) brightest_edge = std::max(brightest_edge, p.at(32, j));
  CHECK(brightest_edge > 0.5);
  CHECK(shepp_logan(64).storage() == p.storage());
  CHECK_THROWS_AS(shepp_logan(8), std::invalid_argument);
}

TEST_CASE("Shepp-Logan is resolution consistent") {
  const Grid coarse = shepp_logan(64);
  const Grid fine = downsample2(shepp_logan(128));
  CHECK((coarse - fine).max_abs() < 0.1);
}

TEST_CASE("random phantoms") {
  std::mt19937_64 a(17), b(17);
  const Grid first = random_phantom(64, a);
  CHECK(random_phantom(64, b).storage() == first.storage());

  std::mt19937_64 rng(18);
  double mean = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Grid p = random_phantom(64, rng);
    CHECK(p.min() >= 0.0);
    CHECK(p.max() <= 1.0);
    mean += p.sum() / static_cast<double>(p.size());
  }
  mean /= 100.0;
  CHECK(mean > 0.05);
  CHECK(mean < 0.6);
}

TEST_CASE("render_ellipses rejects degenerate input") {
  const Ellipse flat{0.0, 0.0, 0.0, 0.3, 0.0, 1.0};
  CHECK_THROWS_AS(render_ellipses(16, std::span<const Ellipse>(&flat, 1)), std::invalid_argument);
  CHECK_THROWS_AS(render_ellipses(0, {}), std::invalid_argument);
}

TEST_CASE("dataset triplets") {
  DatasetConfig cfg = small_config(3);
  const auto samples = build_dataset(cfg);
  REQUIRE(samples.size() == 3);
  for (const auto& s : samples) {
    CHECK(s.full.shape() == Shape{64, 64});
    CHECK(s.teacher_input.shape() == Shape{64, 64});
    CHECK(s.student_input.shape() == Shape{64, 64});
  }
  CHECK(samples[1].id == 1);
  CHECK(make_sample(cfg, 1).student_input.storage() == samples[1].student_input.storage());

  cfg.teacher_multiplier = 1;
  const SampleTriplet same = make_sample(cfg, 0);
  CHECK(same.teacher_input.storage() == same.student_input.storage());

  cfg.count = 0;
  CHECK(build_dataset(cfg).empty());
}

TEST_CASE("dataset validation") {
  DatasetConfig cfg = small_config(1);
  cfg.n_sparse = 18;
  cfg.teacher_multiplier = 4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.teacher_multiplier = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config(1);
  cfg.photons = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config(1);
  cfg.attenuation = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config(1);
  cfg.n_sparse = 7;
  CHECK_THROWS_AS(build_dataset(cfg), std::invalid_argument);
}

TEST_CASE("more views give better FBP inputs") {
  DatasetConfig cfg = small_config(100);
  cfg.seed = 7;
  std::size_t better = 0;
  double mean_student = 0.0;
  for (std::size_t id = 0; id < cfg.count; ++id) {
    const SampleTriplet s = make_sample(cfg, id);
    const double pt = psnr(s.teacher_input, s.full), ps = psnr(s.student_input, s.full);
    if (pt > ps) ++better;
    mean_student += ps / static_cast<double>(cfg.count);
  }
  CHECK(better >= 95);
  CHECK(mean_student > 18.0);
  CHECK(mean_student < 28.0);
}

TEST_CASE("dataset write/read round trip is byte stable") {
  const DatasetConfig cfg = small_config(2);
  const auto samples = build_dataset(cfg);
  const auto dir_a = testutil::scratch_dir("phantom_a");
  const auto dir_b = testutil::scratch_dir("phantom_b");
  write_dataset(dir_a, cfg, samples);
  write_dataset(dir_b, cfg, build_dataset(cfg));

  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_a)) {
    ++files;
    CHECK(file_bytes(entry.path()) == file_bytes(dir_b / entry.path().filename()));
  }
  CHECK(files == 7);

  const auto loaded = read_dataset(dir_a);
  REQUIRE(loaded.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(loaded[k].id == samples[k].id);
    CHECK(loaded[k].seed == samples[k].seed);
    // Images are stored as float32.
    CHECK((loaded[k].full - samples[k].full).max_abs() < 1e-6);
    CHECK((loaded[k].student_input - samples[k].student_input).max_abs() < 1e-5);
  }
  CHECK_THROWS_AS(read_dataset(dir_a / "missing"), FormatError);
}

TEST_CASE("per-sample seeds are distinct streams") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(5, 9) == derive_seed(5, 9));
}
