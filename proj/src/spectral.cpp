#include "gloredi/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace gloredi {
namespace {

// basis[k * n + i] = cos(pi k (i + 1/2) / n)
std::vector<double> cosine_basis(std::size_t n) {
  std::vector<double> basis(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      basis[k * n + i] = std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(i) + 0.5) /
                                  static_cast<double>(n));
    }
  }
  return basis;
}

void require_plane(const Grid& g, const char* what) {
  if (g.rank() != 2) throw std::invalid_argument(std::string(what) + ": expected a 2-D grid, got " + shape_string(g.shape()));
}

}  // namespace

Grid dct2(const Grid& channel) {
  require_plane(channel, "dct2");
  const std::size_t nw = channel.extent(0), nh = channel.extent(1);
  const auto a = cosine_basis(nw), b = cosine_basis(nh);
  Grid tmp({nw, nh});
  for (std::size_t w = 0; w < nw; ++w) {
    for (std::size_t i = 0; i < nw; ++i) {
      const double c = a[w * nw + i];
      for (std::size_t j = 0; j < nh; ++j) tmp.at(w, j) += c * channel.at(i, j);
    }
  }
  Grid out({nw, nh});
  for (std::size_t w = 0; w < nw; ++w) {
    for (std::size_t h = 0; h < nh; ++h) {
      double acc = 0.0;
      for (std::size_t j = 0; j < nh; ++j) acc += tmp.at(w, j) * b[h * nh + j];
      out.at(w, h) = acc;
    }
  }
  return out;
}

Grid dct2_adjoint(const Grid& grad) {
  require_plane(grad, "dct2_adjoint");
  const std::size_t nw = grad.extent(0), nh = grad.extent(1);
  const auto a = cosine_basis(nw), b = cosine_basis(nh);
  Grid tmp({nw, nh});  // tmp[i,h] = sum_w a[w,i] G[w,h]
  for (std::size_t w = 0; w < nw; ++w) {
    for (std::size_t i = 0; i < nw; ++i) {
      const double c = a[w * nw + i];
      for (std::size_t h = 0; h < nh; ++h) tmp.at(i, h) += c * grad.at(w, h);
    }
  }
  Grid out({nw, nh});
  for (std::size_t i = 0; i < nw; ++i) {
    for (std::size_t j = 0; j < nh; ++j) {
      double acc = 0.0;
      for (std::size_t h = 0; h < nh; ++h) acc += tmp.at(i, h) * b[h * nh + j];
      out.at(i, j) = acc;
    }
  }
  return out;
}

BandMask make_band_mask(std::size_t width, std::size_t height, double b_low, double b_up) {
  if (width == 0 || height == 0) throw std::invalid_argument("band mask: dimensions must be positive");
  if (!(b_low >= 0.0) || !(b_up <= 1.0) || !(b_low < b_up)) {
    throw std::invalid_argument("band mask: need 0 <= b_low < b_up <= 1, got [" + std::to_string(b_low) + ", " +
                                std::to_string(b_up) + "]");
  }
  BandMask m{width, height, b_low, b_up, Grid({width, height}), {}};
  const double w_lo = b_low * static_cast<double>(width), w_hi = b_up * static_cast<double>(width);
  const double h_lo = b_low * static_cast<double>(height), h_hi = b_up * static_cast<double>(height);
  for (std::size_t i = 0; i < width; ++i) {
    const double fi = static_cast<double>(i);
    if (fi < w_lo || fi > w_hi) continue;
    for (std::size_t j = 0; j < height; ++j) {
      const double fj = static_cast<double>(j);
      if (fj < h_lo || fj > h_hi) continue;
      m.mask.at(i, j) = 1.0;
      m.indices.emplace_back(i, j);
    }
  }
  if (m.indices.empty()) {
    throw std::invalid_argument("band mask: [" + std::to_string(b_low) + ", " + std::to_string(b_up) +
                                "] selects no coefficient");
  }
  return m;
}

SpectralEmbedding bandpass_embed(const Grid& features, const BandMask& mask, bool normalize) {
  if (features.rank() != 3 || features.extent(1) != mask.width || features.extent(2) != mask.height) {
    throw std::invalid_argument("bandpass_embed: feature shape " + shape_string(features.shape()) +
                                " does not match mask " + std::to_string(mask.width) + "x" +
                                std::to_string(mask.height));
  }
  const std::size_t channels = features.extent(0), plane = mask.width * mask.height;
  SpectralEmbedding emb;
  emb.values.reserve(channels * mask.count());
  for (std::size_t c = 0; c < channels; ++c) {
    Grid channel({mask.width, mask.height},
                 std::vector<double>(features.data() + c * plane, features.data() + (c + 1) * plane));
    const Grid spectrum = dct2(channel);
    for (const auto& [i, j] : mask.indices) emb.values.push_back(spectrum.at(i, j));
  }
  double sq = 0.0;
  for (double v : emb.values) sq += v * v;
  emb.raw_norm = std::sqrt(sq);
  if (normalize) {
    if (!(emb.raw_norm > 0.0)) throw NumericalError("zero-norm embedding");
    for (auto& v : emb.values) v /= emb.raw_norm;
    emb.normalized = true;
  }
  return emb;
}

Grid bandpass_embed_backward(const std::vector<double>& grad_embedding, const SpectralEmbedding& embedding,
                             const BandMask& mask, const Shape& feature_shape) {
  if (feature_shape.size() != 3 || feature_shape[1] != mask.width || feature_shape[2] != mask.height) {
    throw std::invalid_argument("bandpass_embed_backward: feature shape mismatch");
  }
  const std::size_t channels = feature_shape[0];
  if (grad_embedding.size() != embedding.values.size() || grad_embedding.size() != channels * mask.count()) {
    throw std::invalid_argument("bandpass_embed_backward: gradient length mismatch");
  }
  std::vector<double> g = grad_embedding;
  if (embedding.normalized) {
    // z = u / |u|  =>  dL/du = (g - z (z . g)) / |u|
    double zg = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) zg += embedding.values[k] * g[k];
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = (g[k] - embedding.values[k] * zg) / embedding.raw_norm;
  }
  Grid out(feature_shape);
  const std::size_t plane = mask.width * mask.height;
  for (std::size_t c = 0; c < channels; ++c) {
    Grid spectrum_grad({mask.width, mask.height});
    for (std::size_t k = 0; k < mask.count(); ++k) {
      const auto [i, j] = mask.indices[k];
      spectrum_grad.at(i, j) = g[c * mask.count() + k];
    }
    const Grid dz = dct2_adjoint(spectrum_grad);
    std::copy_n(dz.data(), plane, out.data() + c * plane);
  }
  return out;
}

}  // namespace gloredi
