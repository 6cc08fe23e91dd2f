#pragma once

#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "gloredi/tensor.hpp"

namespace gloredi {

/// Parallel-beam scan description. Lengths are in pixel units.
struct ScanGeometry {
  std::size_t image_size = 64;
  std::size_t n_detectors = 96;
  std::size_t n_full_views = 180;
  double detector_spacing = 1.0;
  // Unused by the parallel-beam projector; kept for a fan-beam variant.
  double source_distance = 595.0;
  double angle_range = 2.0 * std::numbers::pi;

  /// Throws std::invalid_argument on N_d < N, N_v < 2 or non-positive lengths.
  void validate() const;
  /// Uniformly spaced angles v * angle_range / n_full_views.
  std::vector<double> full_angles() const;
};

struct Sinogram {
  Grid values;                // views x detectors
  std::vector<double> angles; // radians, ascending

  std::size_t views() const { return angles.size(); }
  std::size_t detectors() const { return values.extent(1); }
};

enum class FilterKind { kRamLak, kHann };

FilterKind parse_filter_kind(std::string_view name);

/// Line integrals of `image` along parallel rays. Angle 0 casts rays along +y;
/// detector d sits at offset (d - (N_d-1)/2) * spacing from the rotation centre.
/// Rays are sampled every half pixel with bilinear interpolation.
Sinogram radon(const Grid& image, const ScanGeometry& geom, const std::vector<double>& angles);

/// Full-view Radon transform (geom.full_angles()).
Sinogram radon(const Grid& image, const ScanGeometry& geom);

/// Ramp-filtered (optionally Hann-windowed) backprojection onto an N x N grid.
Grid fbp(const Sinogram& sino, const ScanGeometry& geom, FilterKind filter = FilterKind::kRamLak);

/// Keeps every (views / n_sparse)-th row. n_sparse must divide the view count.
Sinogram subsample_views(const Sinogram& sino, std::size_t n_sparse);

/// Transmission Poisson noise: counts ~ Poisson(I0 exp(-s)), s' = -ln(max(counts,1)/I0).
Sinogram add_poisson_noise(const Sinogram& sino, double photons, std::mt19937_64& rng);

}  // namespace gloredi
