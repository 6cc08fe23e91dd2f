#include "gloredi/tomo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gloredi/fft.hpp"

namespace gloredi {

void ScanGeometry::validate() const {
  if (image_size < 1) throw std::invalid_argument("geometry: image_size must be positive");
  if (n_detectors < image_size) {
    throw std::invalid_argument("geometry: n_detectors (" + std::to_string(n_detectors) +
                                ") must be >= image_size (" + std::to_string(image_size) + ")");
  }
  if (n_full_views < 2) throw std::invalid_argument("geometry: need at least 2 full views");
  if (!(detector_spacing > 0.0) || !(angle_range > 0.0)) {
    throw std::invalid_argument("geometry: detector_spacing and angle_range must be positive");
  }
}

std::vector<double> ScanGeometry::full_angles() const {
  std::vector<double> angles(n_full_views);
  for (std::size_t v = 0; v < n_full_views; ++v) {
    angles[v] = angle_range * static_cast<double>(v) / static_cast<double>(n_full_views);
  }
  return angles;
}

FilterKind parse_filter_kind(std::string_view name) {
  if (name == "ram-lak") return FilterKind::kRamLak;
  if (name == "hann") return FilterKind::kHann;
  throw std::invalid_argument("unknown filter '" + std::string(name) + "' (expected ram-lak or hann)");
}

namespace {

constexpr double kRayStep = 0.5;

// Bilinear sample of a square image at pixel coordinates (row, col); zero outside.
double sample_bilinear(const Grid& image, std::size_t n, double row, double col) {
  const double r0f = std::floor(row), c0f = std::floor(col);
  const auto r0 = static_cast<long>(r0f), c0 = static_cast<long>(c0f);
  const double wr = row - r0f, wc = col - c0f;
  const long last = static_cast<long>(n) - 1;
  auto pix = [&](long r, long c) -> double {
    if (r < 0 || c < 0 || r > last || c > last) return 0.0;
    return image[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)];
  };
  return (1.0 - wr) * ((1.0 - wc) * pix(r0, c0) + wc * pix(r0, c0 + 1)) +
         wr * ((1.0 - wc) * pix(r0 + 1, c0) + wc * pix(r0 + 1, c0 + 1));
}

}  // namespace

Sinogram radon(const Grid& image, const ScanGeometry& geom, const std::vector<double>& angles) {
  if (image.rank() != 2 || image.extent(0) != image.extent(1)) {
    throw std::invalid_argument("radon: image must be square, got " + shape_string(image.shape()));
  }
  geom.validate();
  const std::size_t n = image.extent(0);
  if (n != geom.image_size) {
    throw std::invalid_argument("radon: image side " + std::to_string(n) + " differs from geometry " +
                                std::to_string(geom.image_size));
  }
  if (angles.empty()) throw std::invalid_argument("radon: no view angles");
  image.require_finite("radon input");

  const double centre = (static_cast<double>(n) - 1.0) / 2.0;
  const double det_centre = (static_cast<double>(geom.n_detectors) - 1.0) / 2.0;
  // Half-diagonal plus a pixel of margin bounds every ray's support.
  const double reach = static_cast<double>(n) * std::numbers::sqrt2 / 2.0 + 1.0;
  const auto half_steps = static_cast<long>(std::ceil(reach / kRayStep));

  Sinogram sino{Grid({angles.size(), geom.n_detectors}), angles};
  for (std::size_t v = 0; v < angles.size(); ++v) {
    const double c = std::cos(angles[v]), s = std::sin(angles[v]);
    for (std::size_t d = 0; d < geom.n_detectors; ++d) {
      const double t = (static_cast<double>(d) - det_centre) * geom.detector_spacing;
      double acc = 0.0;
      for (long k = -half_steps; k <= half_steps; ++k) {
        const double along = static_cast<double>(k) * kRayStep;
        const double x = t * c - along * s;
        const double y = t * s + along * c;
        const double col = x + centre, row = y + centre;
        if (row <= -1.0 || col <= -1.0 || row >= static_cast<double>(n) || col >= static_cast<double>(n)) {
          continue;
        }
        acc += sample_bilinear(image, n, row, col);
      }
      sino.values.at(v, d) = acc * kRayStep;
    }
  }
  return sino;
}

Sinogram radon(const Grid& image, const ScanGeometry& geom) { return radon(image, geom, geom.full_angles()); }

Grid fbp(const Sinogram& sino, const ScanGeometry& geom, FilterKind filter) {
  geom.validate();
  if (sino.views() < 2) throw std::invalid_argument("fbp: need at least 2 views");
  if (sino.values.rank() != 2 || sino.values.extent(0) != sino.views()) {
    throw std::invalid_argument("fbp: sinogram rows do not match angle count");
  }
  if (sino.detectors() != geom.n_detectors) {
    throw std::invalid_argument("fbp: sinogram has " + std::to_string(sino.detectors()) +
                                " detectors, geometry expects " + std::to_string(geom.n_detectors));
  }
  sino.values.require_finite("fbp input");

  const std::size_t nd = geom.n_detectors;
  std::size_t padded = 1;
  while (padded < 2 * nd) padded <<= 1;
  const double tau = geom.detector_spacing;

  // Frequency response of the band-limited spatial ramp kernel.
  std::vector<double> kernel(padded, 0.0);
  kernel[0] = 1.0 / (4.0 * tau * tau);
  for (std::size_t k = 1; k < padded / 2; ++k) {
    if (k % 2 == 1) {
      const double value = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(k * k) * tau * tau);
      kernel[k] = value;
      kernel[padded - k] = value;
    }
  }
  auto response = rfft(kernel);
  std::vector<double> gain(response.size());
  for (std::size_t k = 0; k < response.size(); ++k) {
    gain[k] = response[k].real() * tau;
    if (filter == FilterKind::kHann) {
      gain[k] *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(padded)));
    }
  }

  const std::size_t n = geom.image_size;
  const double centre = (static_cast<double>(n) - 1.0) / 2.0;
  const double det_centre = (static_cast<double>(nd) - 1.0) / 2.0;
  const double scale = geom.angle_range / (2.0 * static_cast<double>(sino.views()));

  Grid image({n, n});
  std::vector<double> row(padded);
  for (std::size_t v = 0; v < sino.views(); ++v) {
    std::fill(row.begin(), row.end(), 0.0);
    std::copy_n(sino.values.data() + v * nd, nd, row.begin());
    auto spec = rfft(row);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= gain[k];
    const auto filtered = irfft(spec, padded);

    const double c = std::cos(sino.angles[v]), s = std::sin(sino.angles[v]);
    for (std::size_t i = 0; i < n; ++i) {
      const double y = static_cast<double>(i) - centre;
      for (std::size_t j = 0; j < n; ++j) {
        const double x = static_cast<double>(j) - centre;
        const double pos = (x * c + y * s) / tau + det_centre;
        const double f = std::floor(pos);
        const auto d0 = static_cast<long>(f);
        const double w = pos - f;
        double value = 0.0;
        if (d0 >= 0 && d0 < static_cast<long>(nd)) value += (1.0 - w) * filtered[static_cast<std::size_t>(d0)];
        if (d0 + 1 >= 0 && d0 + 1 < static_cast<long>(nd)) value += w * filtered[static_cast<std::size_t>(d0 + 1)];
        image.at(i, j) += value;
      }
    }
  }
  image *= scale;
  return image;
}

Sinogram subsample_views(const Sinogram& sino, std::size_t n_sparse) {
  const std::size_t views = sino.views();
  if (n_sparse == 0 || views % n_sparse != 0) {
    throw std::invalid_argument("subsample_views: " + std::to_string(n_sparse) + " does not divide " +
                                std::to_string(views) + " views");
  }
  const std::size_t stride = views / n_sparse;
  const std::size_t nd = sino.detectors();
  Sinogram out{Grid({n_sparse, nd}), std::vector<double>(n_sparse)};
  for (std::size_t v = 0; v < n_sparse; ++v) {
    std::copy_n(sino.values.data() + v * stride * nd, nd, out.values.data() + v * nd);
    out.angles[v] = sino.angles[v * stride];
  }
  return out;
}

Sinogram add_poisson_noise(const Sinogram& sino, double photons, std::mt19937_64& rng) {
  if (!(photons > 0.0)) throw std::invalid_argument("add_poisson_noise: photon count must be positive");
  Sinogram out = sino;
  for (auto& s : out.values.values()) {
    if (s < 0.0) throw std::invalid_argument("add_poisson_noise: negative sinogram entry");
    std::poisson_distribution<long long> counts(photons * std::exp(-s));
    const auto k = std::max<long long>(counts(rng), 1);
    s = -std::log(static_cast<double>(k) / photons);
  }
  return out;
}

}  // namespace gloredi
