#pragma once

#include <utility>
#include <vector>

#include "gloredi/tensor.hpp"

namespace gloredi {

/// Unnormalized 2-D DCT-II of a single channel:
///   f[w,h] = sum_{i,j} Z[i,j] cos(pi w (i+1/2) / N_w) cos(pi h (j+1/2) / N_h)
Grid dct2(const Grid& channel);

/// Adjoint of dct2: dZ[i,j] = sum_{w,h} G[w,h] B^{i,j}_{w,h}.
Grid dct2_adjoint(const Grid& grad);

/// Rectangular band-pass selector over a DCT spectrum.
/// M[i,j] = 1 iff b_low*N_w <= i <= b_up*N_w and b_low*N_h <= j <= b_up*N_h.
struct BandMask {
  std::size_t width = 0;   // N_w, first spatial axis
  std::size_t height = 0;  // N_h, second spatial axis
  double b_low = 0.0;
  double b_up = 1.0;
  Grid mask;                                             // N_w x N_h of 0/1
  std::vector<std::pair<std::size_t, std::size_t>> indices;  // selected (i,j), row-major order

  std::size_t count() const { return indices.size(); }
};

BandMask make_band_mask(std::size_t width, std::size_t height, double b_low, double b_up);

struct SpectralEmbedding {
  std::vector<double> values;
  bool normalized = false;
  /// L2 norm of the gathered vector before normalization.
  double raw_norm = 0.0;
};

/// Per-channel dct2 of a C x N_w x N_h map, gather of masked entries in mask
/// order, channels concatenated in ascending order, optional L2 normalization.
/// Normalizing a zero vector throws NumericalError("zero-norm embedding").
SpectralEmbedding bandpass_embed(const Grid& features, const BandMask& mask, bool normalize);

/// Gradient of a scalar loss w.r.t. the C x N_w x N_h features, given the
/// gradient w.r.t. the embedding values produced by bandpass_embed.
Grid bandpass_embed_backward(const std::vector<double>& grad_embedding, const SpectralEmbedding& embedding,
                             const BandMask& mask, const Shape& feature_shape);

}  // namespace gloredi
