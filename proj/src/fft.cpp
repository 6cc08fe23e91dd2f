#include "gloredi/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <string>
#include <tuple>

namespace gloredi {
namespace {

enum class PlanKind { kForward, kBackward, kRealToComplex, kComplexToReal };

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(PlanKind kind, int n) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(kind, n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<fftw_complex> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    std::vector<double> r(static_cast<std::size_t>(n));
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    switch (kind) {
      case PlanKind::kForward:
        plan = fftw_plan_dft_1d(n, a.data(), b.data(), FFTW_FORWARD, flags);
        break;
      case PlanKind::kBackward:
        plan = fftw_plan_dft_1d(n, a.data(), b.data(), FFTW_BACKWARD, flags);
        break;
      case PlanKind::kRealToComplex:
        plan = fftw_plan_dft_r2c_1d(n, r.data(), a.data(), flags);
        break;
      case PlanKind::kComplexToReal:
        plan = fftw_plan_dft_c2r_1d(n, a.data(), r.data(), flags);
        break;
    }
    if (!plan) throw std::runtime_error("FFTW planning failed for length " + std::to_string(n));
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<PlanKind, int>, fftw_plan> plans_;
};

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

void c2c(std::vector<Complex>& in, std::vector<Complex>& out, bool forward) {
  auto plan = PlanCache::instance().get(forward ? PlanKind::kForward : PlanKind::kBackward,
                                        static_cast<int>(in.size()));
  fftw_execute_dft(plan, as_fftw(in.data()), as_fftw(out.data()));
}

void r2c(const double* in, Complex* out, std::size_t n) {
  auto plan = PlanCache::instance().get(PlanKind::kRealToComplex, static_cast<int>(n));
  // r2c does not modify its input.
  fftw_execute_dft_r2c(plan, const_cast<double*>(in), as_fftw(out));
}

// c2r destroys its input, so callers pass a scratch copy.
void c2r(Complex* scratch, double* out, std::size_t n) {
  auto plan = PlanCache::instance().get(PlanKind::kComplexToReal, static_cast<int>(n));
  fftw_execute_dft_c2r(plan, as_fftw(scratch), out);
}

struct PlaneDims {
  std::size_t planes, h, w, wh;
};

PlaneDims plane_dims(const Shape& real_shape) {
  if (real_shape.size() < 2) throw std::invalid_argument("2-D transform needs rank >= 2");
  PlaneDims d{1, real_shape[real_shape.size() - 2], real_shape.back(), real_shape.back() / 2 + 1};
  for (std::size_t i = 0; i + 2 < real_shape.size(); ++i) d.planes *= real_shape[i];
  return d;
}

Shape half_shape(const Shape& real_shape) {
  Shape s = real_shape;
  s.back() = real_shape.back() / 2 + 1;
  return s;
}

// Column (first-axis) transform of each half-spectrum plane in place.
void transform_columns(ComplexGrid& spec, const PlaneDims& d, bool forward) {
  std::vector<Complex> col(d.h), res(d.h);
  for (std::size_t p = 0; p < d.planes; ++p) {
    Complex* base = spec.data() + p * d.h * d.wh;
    for (std::size_t v = 0; v < d.wh; ++v) {
      for (std::size_t u = 0; u < d.h; ++u) col[u] = base[u * d.wh + v];
      c2c(col, res, forward);
      for (std::size_t u = 0; u < d.h; ++u) base[u * d.wh + v] = res[u];
    }
  }
}

// Unnormalized c2r of every plane (columns first, then rows).
Grid inverse_unnormalized(ComplexGrid spec, const Shape& out_shape) {
  const auto d = plane_dims(out_shape);
  if (spec.shape() != half_shape(out_shape)) {
    throw std::invalid_argument("irfft2: spectrum shape " + shape_string(spec.shape()) +
                                " inconsistent with output shape " + shape_string(out_shape));
  }
  transform_columns(spec, d, false);
  Grid out(out_shape);
  std::vector<Complex> row(d.wh);
  const bool even = d.w % 2 == 0;
  for (std::size_t p = 0; p < d.planes; ++p) {
    for (std::size_t a = 0; a < d.h; ++a) {
      const Complex* src = spec.data() + (p * d.h + a) * d.wh;
      std::copy_n(src, d.wh, row.data());
      row[0].imag(0.0);
      if (even) row[d.wh - 1].imag(0.0);
      c2r(row.data(), out.data() + (p * d.h + a) * d.w, d.w);
    }
  }
  return out;
}

}  // namespace

ComplexGrid rfft2(const Grid& g) {
  if (g.empty()) throw std::invalid_argument("rfft2: empty grid");
  const auto d = plane_dims(g.shape());
  ComplexGrid spec(half_shape(g.shape()));
  for (std::size_t p = 0; p < d.planes; ++p) {
    for (std::size_t a = 0; a < d.h; ++a) {
      r2c(g.data() + (p * d.h + a) * d.w, spec.data() + (p * d.h + a) * d.wh, d.w);
    }
  }
  transform_columns(spec, d, true);
  return spec;
}

Grid irfft2(const ComplexGrid& spectrum, const Shape& out_shape) {
  Grid out = inverse_unnormalized(spectrum, out_shape);
  const auto d = plane_dims(out_shape);
  out *= 1.0 / static_cast<double>(d.h * d.w);
  return out;
}

Grid rfft2_adjoint(const ComplexGrid& grad, const Shape& out_shape) {
  const auto d = plane_dims(out_shape);
  ComplexGrid halved = grad;
  // c2r doubles interior columns (their conjugate partners); the adjoint
  // counts every stored bin once.
  const std::size_t interior_end = d.w % 2 == 0 ? d.wh - 1 : d.wh;
  for (std::size_t r = 0; r < d.planes * d.h; ++r) {
    for (std::size_t v = 1; v < interior_end; ++v) halved[r * d.wh + v] *= 0.5;
  }
  return inverse_unnormalized(std::move(halved), out_shape);
}

ComplexGrid irfft2_adjoint(const Grid& grad) {
  const auto d = plane_dims(grad.shape());
  ComplexGrid spec = rfft2(grad);
  const double scale = 1.0 / static_cast<double>(d.h * d.w);
  const std::size_t interior_end = d.w % 2 == 0 ? d.wh - 1 : d.wh;
  for (std::size_t r = 0; r < d.planes * d.h; ++r) {
    for (std::size_t v = 0; v < d.wh; ++v) {
      const double weight = (v >= 1 && v < interior_end) ? 2.0 : 1.0;
      spec[r * d.wh + v] *= weight * scale;
    }
  }
  return spec;
}

std::vector<Complex> rfft(std::span<const double> signal) {
  if (signal.empty()) throw std::invalid_argument("rfft: empty signal");
  std::vector<Complex> out(signal.size() / 2 + 1);
  r2c(signal.data(), out.data(), signal.size());
  return out;
}

std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n) {
  if (n == 0 || spectrum.size() != n / 2 + 1) throw std::invalid_argument("irfft: length mismatch");
  std::vector<Complex> scratch(spectrum.begin(), spectrum.end());
  scratch[0].imag(0.0);
  if (n % 2 == 0) scratch.back().imag(0.0);
  std::vector<double> out(n);
  c2r(scratch.data(), out.data(), n);
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

}  // namespace gloredi
