#include "gloredi/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace gloredi {
namespace {

constexpr int kRadius = 5;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

double mean_squared_error(const Grid& a, const Grid& b) {
  require_same_shape(a, b, "metric");
  if (a.empty()) throw std::invalid_argument("metric: empty image");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

std::array<double, 2 * kRadius + 1> gaussian_taps() {
  std::array<double, 2 * kRadius + 1> taps{};
  double total = 0.0;
  for (int k = -kRadius; k <= kRadius; ++k) {
    taps[k + kRadius] = std::exp(-static_cast<double>(k * k) / (2.0 * kSigma * kSigma));
    total += taps[k + kRadius];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

// Half-sample symmetric reflection: -1 -> 0, n -> n-1.
std::size_t reflect(long i, long n) {
  const long period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - 1 - i);
}

Grid gaussian_filter(const Grid& g) {
  static const auto taps = gaussian_taps();
  const long h = static_cast<long>(g.extent(0)), w = static_cast<long>(g.extent(1));
  Grid tmp(g.shape()), out(g.shape());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) acc += taps[k + kRadius] * g.at(static_cast<std::size_t>(i), reflect(j + k, w));
      tmp.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
    }
  }
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) acc += taps[k + kRadius] * tmp.at(reflect(i + k, h), static_cast<std::size_t>(j));
      out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Grid& a, const Grid& b, double data_range) {
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

double rmse(const Grid& a, const Grid& b) { return std::sqrt(mean_squared_error(a, b)); }

double ssim(const Grid& a, const Grid& b, double data_range) {
  require_same_shape(a, b, "ssim");
  if (a.rank() != 2) throw std::invalid_argument("ssim: images must be 2-D");
  Grid aa(a.shape()), bb(a.shape()), ab(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const Grid mu_a = gaussian_filter(a), mu_b = gaussian_filter(b);
  const Grid e_aa = gaussian_filter(aa), e_bb = gaussian_filter(bb), e_ab = gaussian_filter(ab);
  const double c1 = (kK1 * data_range) * (kK1 * data_range);
  const double c2 = (kK2 * data_range) * (kK2 * data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(a.size());
}

MetricReport evaluate(const Grid& prediction, const Grid& reference, double data_range) {
  return {psnr(prediction, reference, data_range), ssim(prediction, reference, data_range),
          rmse(prediction, reference), data_range};
}

}  // namespace gloredi
