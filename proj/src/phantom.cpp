#include "gloredi/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gloredi {
namespace {

constexpr std::size_t kSupersample = 8;

constexpr double deg(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

Grid render_ellipses(std::size_t n, std::span<const Ellipse> ellipses) {
  if (n == 0) throw std::invalid_argument("render_ellipses: empty image");
  struct Prepared {
    double cx, cy, cos_t, sin_t, inv_a2, inv_b2, rho;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(ellipses.size());
  for (const auto& e : ellipses) {
    if (!(e.semi_a > 0.0) || !(e.semi_b > 0.0)) throw std::invalid_argument("ellipse semi-axes must be positive");
    prepared.push_back({e.center_x, e.center_y, std::cos(e.rotation), std::sin(e.rotation),
                        1.0 / (e.semi_a * e.semi_a), 1.0 / (e.semi_b * e.semi_b), e.intensity});
  }

  const double half = static_cast<double>(n) / 2.0;
  const double sub = 1.0 / static_cast<double>(kSupersample);
  Grid image({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t si = 0; si < kSupersample; ++si) {
        const double row = static_cast<double>(i) + (static_cast<double>(si) + 0.5) * sub;
        const double y = (half - row) / half;
        for (std::size_t sj = 0; sj < kSupersample; ++sj) {
          const double col = static_cast<double>(j) + (static_cast<double>(sj) + 0.5) * sub;
          const double x = (col - half) / half;
          for (const auto& p : prepared) {
            const double dx = x - p.cx, dy = y - p.cy;
            const double u = dx * p.cos_t + dy * p.sin_t;
            const double v = -dx * p.sin_t + dy * p.cos_t;
            if (u * u * p.inv_a2 + v * v * p.inv_b2 <= 1.0) acc += p.rho;
          }
        }
      }
      image.at(i, j) = acc * sub * sub;
    }
  }
  return image;
}

std::vector<Ellipse> shepp_logan_ellipses() {
  return {
      {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
      {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
      {0.22, 0.0, 0.11, 0.31, deg(-18.0), -0.2},
      {-0.22, 0.0, 0.16, 0.41, deg(18.0), -0.2},
      {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
      {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
      {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
      {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
      {0.0, -0.606, 0.023, 0.023, 0.0, 0.1},
      {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
  };
}

Grid shepp_logan(std::size_t n) {
  if (n < 16) throw std::invalid_argument("shepp_logan: side must be >= 16, got " + std::to_string(n));
  const auto ellipses = shepp_logan_ellipses();
  Grid image = render_ellipses(n, ellipses);
  const double lo = image.min(), hi = image.max();
  for (auto& v : image.values()) v = (v - lo) / (hi - lo);
  return image;
}

Grid random_phantom(std::size_t n, std::mt19937_64& rng) {
  using U = std::uniform_real_distribution<double>;
  std::vector<Ellipse> ellipses;
  ellipses.push_back({U(-0.05, 0.05)(rng), U(-0.05, 0.05)(rng), U(0.6, 0.85)(rng), U(0.6, 0.85)(rng),
                      U(-std::numbers::pi / 6.0, std::numbers::pi / 6.0)(rng), U(0.25, 0.45)(rng)});
  const int inner = std::uniform_int_distribution<int>(3, 11)(rng);
  for (int k = 0; k < inner; ++k) {
    const double radius = U(0.0, 0.5)(rng);
    const double angle = U(0.0, 2.0 * std::numbers::pi)(rng);
    ellipses.push_back({radius * std::cos(angle), radius * std::sin(angle), U(0.03, 0.22)(rng),
                        U(0.03, 0.22)(rng), U(0.0, std::numbers::pi)(rng), U(-0.2, 0.5)(rng)});
  }
  Grid image = render_ellipses(n, ellipses);
  for (auto& v : image.values()) v = std::clamp(v, 0.0, 1.0);
  return image;
}

}  // namespace gloredi
