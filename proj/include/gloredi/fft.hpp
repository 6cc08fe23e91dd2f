#pragma once

#include <span>
#include <vector>

#include "gloredi/tensor.hpp"

namespace gloredi {

// Convention: unnormalized forward transforms, 1/(H*W) on the inverse.
// All 2-D transforms act on the last two axes; leading axes are looped over,
// so a N x C x H x W batch is transformed plane by plane.

/// Real-to-complex 2-D DFT: bin(u,v) = sum g[x,y] exp(-2 pi i (ux/H + vy/W)),
/// returned in half-spectrum layout (last axis W/2+1).
ComplexGrid rfft2(const Grid& g);

/// Inverse of rfft2. `out_shape` is the real shape; the spectrum must have the
/// matching half-spectrum layout. Only the hermitian-consistent part of the
/// input contributes: the DC and Nyquist columns are read through their real
/// part after the column transform.
Grid irfft2(const ComplexGrid& spectrum, const Shape& out_shape);

/// Adjoint of rfft2 seen as a real-linear map. `grad` packs dL/dRe + i dL/dIm.
Grid rfft2_adjoint(const ComplexGrid& grad, const Shape& out_shape);

/// Adjoint of irfft2 seen as a real-linear map; result packs dL/dRe + i dL/dIm.
ComplexGrid irfft2_adjoint(const Grid& grad);

/// 1-D real-to-complex DFT of length n, returning n/2+1 bins.
std::vector<Complex> rfft(std::span<const double> signal);
/// 1-D inverse of rfft (normalized by 1/n).
std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n);

}  // namespace gloredi
