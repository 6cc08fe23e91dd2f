#pragma once

#include <random>
#include <span>
#include <vector>

#include "gloredi/tensor.hpp"

namespace gloredi {

/// Ellipse in normalized coordinates: the image spans [-1,1]^2, y pointing up.
struct Ellipse {
  double center_x = 0.0;
  double center_y = 0.0;
  double semi_a = 0.5;    // along the rotated x axis
  double semi_b = 0.5;    // along the rotated y axis
  double rotation = 0.0;  // radians, counter-clockwise
  double intensity = 1.0; // additive
};

/// Sums ellipse indicators with 8x8 supersampling per pixel (area-averaged).
Grid render_ellipses(std::size_t n, std::span<const Ellipse> ellipses);

/// The 10-ellipse modified Shepp-Logan table.
std::vector<Ellipse> shepp_logan_ellipses();

/// Modified Shepp-Logan phantom, affinely renormalized to [0,1]. n >= 16.
Grid shepp_logan(std::size_t n);

/// Random body phantom: one enclosing body ellipse plus 3-11 inner ellipses,
/// clipped to [0,1]. Parameter ranges:
///   body: centre offset U(-0.05,0.05), semi-axes U(0.6,0.85), rotation U(-pi/6,pi/6),
///         intensity U(0.25,0.45)
///   inner: centre radius U(0,0.5) at a uniform angle, semi-axes U(0.03,0.22),
///          rotation U(0,pi), intensity U(-0.2,0.5)
Grid random_phantom(std::size_t n, std::mt19937_64& rng);

}  // namespace gloredi
