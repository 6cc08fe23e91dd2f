#include <doctest.h>

#include <cmath>
#include <limits>

#include "gloredi/metrics.hpp"
#include "test_util.hpp"

using namespace gloredi;

namespace {

// Per-pixel window sums with explicit 2-D Gaussian weights and mirrored indices.
double ssim_oracle(const Grid& a, const Grid& b, double range) {
  const long h = static_cast<long>(a.extent(0)), w = static_cast<long>(a.extent(1));
  auto mirror = [](long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return static_cast<std::size_t>(i);
  };
  double norm = 0.0;
  for (int dy = -5; dy <= 5; ++dy) {
    for (int dx = -5; dx <= 5; ++dx) norm += std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
  }
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double total = 0.0;
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = -5; dy <= 5; ++dy) {
        for (int dx = -5; dx <= 5; ++dx) {
          const double wt = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)) / norm;
          const double va = a.at(mirror(i + dy, h), mirror(j + dx, w));
          const double vb = b.at(mirror(i + dy, h), mirror(j + dx, w));
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  return total / static_cast<double>(h * w);
}

}  // namespace

TEST_CASE("psnr closed forms") {
  std::mt19937_64 rng(1);
  const Grid a = testutil::random_grid({16, 16}, rng, 0.0, 1.0);
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  Grid b = a;
  for (auto& v : b.values()) v += 0.1;
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(b, a) == psnr(a, b));
  CHECK(psnr(a, b, 2.0) == doctest::Approx(20.0 + 20.0 * std::log10(2.0)));
  CHECK_THROWS_AS(psnr(a, Grid({4, 4})), std::invalid_argument);
}

TEST_CASE("psnr is shift invariant") {
  std::mt19937_64 rng(2);
  const Grid a = testutil::random_grid({20, 20}, rng, 0.0, 1.0);
  const Grid b = testutil::random_grid({20, 20}, rng, 0.0, 1.0);
  Grid as = a, bs = b;
  for (auto& v : as.values()) v += 3.7;
  for (auto& v : bs.values()) v += 3.7;
  CHECK(psnr(as, bs) == doctest::Approx(psnr(a, b)).epsilon(1e-9));
}

TEST_CASE("rmse closed forms") {
  std::mt19937_64 rng(3);
  const Grid a = testutil::random_grid({8, 8}, rng);
  CHECK(rmse(a, a) == 0.0);
  Grid b = a;
  for (auto& v : b.values()) v += 0.1;
  CHECK(rmse(a, b) == doctest::Approx(0.1).epsilon(1e-12));
  Grid c = a;
  for (auto& v : c.values()) v += 0.3;
  CHECK(rmse(a, c) == doctest::Approx(3.0 * rmse(a, b)).epsilon(1e-12));
}

TEST_CASE("ssim basics") {
  std::mt19937_64 rng(4);
  const Grid a = testutil::random_grid({32, 32}, rng, 0.0, 1.0);
  const Grid b = testutil::random_grid({32, 32}, rng, 0.0, 1.0);
  CHECK(ssim(a, a) == 1.0);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) < 1e-12);
  CHECK(ssim(a, b) >= -1.0);
  CHECK(ssim(a, b) <= 1.0);

  Grid binary({32, 32});
  for (std::size_t i = 0; i < binary.size(); ++i) binary[i] = ((i / 4) + (i / 128)) % 2 == 0 ? 1.0 : 0.0;
  Grid inverse = binary;
  for (auto& v : inverse.values()) v = 1.0 - v;
  CHECK(ssim(binary, inverse) < 0.2);
  CHECK_THROWS_AS(ssim(Grid({2, 3, 3}), Grid({2, 3, 3})), std::invalid_argument);
}

TEST_CASE("ssim matches the direct window oracle") {
  std::mt19937_64 rng(5);
  const Grid a = testutil::random_grid({32, 32}, rng, 0.0, 1.0);
  Grid b = a;
  std::normal_distribution<double> noise(0.0, 0.1);
  for (auto& v : b.values()) v += noise(rng);
  CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b, 1.0)) < 1e-8);
  CHECK(std::abs(ssim(a, b, 2.0) - ssim_oracle(a, b, 2.0)) < 1e-8);
}

TEST_CASE("evaluate bundles the metrics") {
  std::mt19937_64 rng(6);
  const Grid a = testutil::random_grid({16, 16}, rng, 0.0, 1.0);
  const Grid b = testutil::random_grid({16, 16}, rng, 0.0, 1.0);
  const MetricReport r = evaluate(a, b);
  CHECK(r.psnr == psnr(a, b));
  CHECK(r.ssim == ssim(a, b));
  CHECK(r.rmse == rmse(a, b));
  CHECK(r.data_range == 1.0);
}
