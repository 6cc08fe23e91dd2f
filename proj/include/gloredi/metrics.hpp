#pragma once

#include "gloredi/tensor.hpp"

namespace gloredi {

struct MetricReport {
  double psnr = 0.0;  // dB, +inf for identical images
  double ssim = 0.0;
  double rmse = 0.0;
  double data_range = 1.0;
};

/// 10 log10(range^2 / mse); +infinity when the images are identical.
double psnr(const Grid& a, const Grid& b, double data_range = 1.0);

double rmse(const Grid& a, const Grid& b);

/// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// half-sample symmetric boundary extension. Inputs are 2-D.
double ssim(const Grid& a, const Grid& b, double data_range = 1.0);

MetricReport evaluate(const Grid& prediction, const Grid& reference, double data_range = 1.0);

}  // namespace gloredi
