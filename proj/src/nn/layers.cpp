#include "gloredi/nn/layers.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace gloredi::nn {
namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using ConstMapR = Eigen::Map<const MatR>;

void require_batch(const Grid& x, std::size_t channels, const std::string& who) {
  if (x.rank() != 4 || x.extent(1) != channels) {
    throw std::invalid_argument(who + ": expected N x " + std::to_string(channels) + " x H x W input, got " +
                                shape_string(x.shape()));
  }
}

struct ConvGeom {
  std::size_t channels, in_h, in_w, kernel, stride, padding, out_h, out_w;
  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t cols() const { return out_h * out_w; }
};

// col[(c*k + ki)*k + kj][oi*out_w + oj] = x[c][oi*s - p + ki][oj*s - p + kj] (zero outside)
void im2col(const double* x, const ConvGeom& g, double* col) {
  const long ih = static_cast<long>(g.in_h), iw = static_cast<long>(g.in_w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = x + c * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * g.cols();
        for (std::size_t oi = 0; oi < g.out_h; ++oi) {
          const long ii = static_cast<long>(oi * g.stride + ki) - static_cast<long>(g.padding);
          double* dst = row + oi * g.out_w;
          if (ii < 0 || ii >= ih) {
            std::fill_n(dst, g.out_w, 0.0);
            continue;
          }
          const double* src = plane + ii * iw;
          for (std::size_t oj = 0; oj < g.out_w; ++oj) {
            const long jj = static_cast<long>(oj * g.stride + kj) - static_cast<long>(g.padding);
            dst[oj] = (jj < 0 || jj >= iw) ? 0.0 : src[jj];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back, accumulating into x.
void col2im(const double* col, const ConvGeom& g, double* x) {
  const long ih = static_cast<long>(g.in_h), iw = static_cast<long>(g.in_w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = x + c * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.kernel; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * g.cols();
        for (std::size_t oi = 0; oi < g.out_h; ++oi) {
          const long ii = static_cast<long>(oi * g.stride + ki) - static_cast<long>(g.padding);
          if (ii < 0 || ii >= ih) continue;
          const double* src = row + oi * g.out_w;
          double* dst = plane + ii * iw;
          for (std::size_t oj = 0; oj < g.out_w; ++oj) {
            const long jj = static_cast<long>(oj * g.stride + kj) - static_cast<long>(g.padding);
            if (jj >= 0 && jj < iw) dst[jj] += src[oj];
          }
        }
      }
    }
  }
}

void kaiming_uniform(Grid& w, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : w.values()) v = dist(rng);
}

}  // namespace

void Layer::require_forward(bool cached) const {
  if (!cached) throw std::logic_error(name() + ": backward called before forward");
}

std::vector<Param*> parameters(Module& m) {
  std::vector<Param*> out;
  m.collect_parameters(out);
  return out;
}

std::vector<NamedGrid> buffers(Module& m) {
  std::vector<NamedGrid> out;
  m.collect_buffers(out);
  return out;
}

std::vector<NamedGrid> state(Module& m) {
  std::vector<NamedGrid> out;
  for (Param* p : parameters(m)) out.push_back({p->name, &p->value});
  m.collect_buffers(out);
  return out;
}

void zero_grad(Module& m) {
  for (Param* p : parameters(m)) p->grad.fill(0.0);
}

std::size_t parameter_count(Module& m) {
  std::size_t total = 0;
  for (Param* p : parameters(m)) total += p->value.size();
  return total;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, std::size_t padding, bool bias, std::mt19937_64& rng)
    : Layer(std::move(name)),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      has_bias_(bias) {
  if (in_ == 0 || out_ == 0 || kernel_ == 0 || stride_ == 0) throw std::invalid_argument(this->name() + ": bad conv config");
  weight_ = {child("weight"), Grid({out_, in_, kernel_, kernel_}), Grid({out_, in_, kernel_, kernel_})};
  kaiming_uniform(weight_.value, in_ * kernel_ * kernel_, rng);
  if (has_bias_) bias_ = {child("bias"), Grid({out_}), Grid({out_})};
}

void Conv2d::collect_parameters(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

Grid Conv2d::forward(const Grid& x) {
  require_batch(x, in_, name());
  if (x.extent(2) + 2 * padding_ < kernel_ || x.extent(3) + 2 * padding_ < kernel_) {
    throw std::invalid_argument(name() + ": input smaller than kernel");
  }
  const ConvGeom g{in_, x.extent(2), x.extent(3), kernel_, stride_, padding_, out_size(x.extent(2)), out_size(x.extent(3))};
  const std::size_t n = x.extent(0);
  Grid y({n, out_, g.out_h, g.out_w});
  std::vector<double> col(g.rows() * g.cols());
  ConstMapR w(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(g.rows()));
  for (std::size_t s = 0; s < n; ++s) {
    im2col(x.data() + s * in_ * g.in_h * g.in_w, g, col.data());
    ConstMapR c(col.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    MapR ys(y.data() + s * out_ * g.cols(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(g.cols()));
    ys.noalias() = w * c;
    if (has_bias_) {
      for (std::size_t o = 0; o < out_; ++o) ys.row(static_cast<Eigen::Index>(o)).array() += bias_.value[o];
    }
  }
  input_ = x;
  return y;
}

Grid Conv2d::backward(const Grid& grad_out) {
  require_forward(!input_.empty());
  const ConvGeom g{in_, input_.extent(2), input_.extent(3), kernel_, stride_, padding_, out_size(input_.extent(2)),
                   out_size(input_.extent(3))};
  const std::size_t n = input_.extent(0);
  if (grad_out.shape() != Shape{n, out_, g.out_h, g.out_w}) {
    throw std::invalid_argument(name() + ": gradient shape " + shape_string(grad_out.shape()) + " mismatch");
  }
  Grid dx(input_.shape());
  std::vector<double> col(g.rows() * g.cols()), dcol(g.rows() * g.cols());
  ConstMapR w(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(g.rows()));
  MapR dw(weight_.grad.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(g.rows()));
  for (std::size_t s = 0; s < n; ++s) {
    im2col(input_.data() + s * in_ * g.in_h * g.in_w, g, col.data());
    ConstMapR c(col.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    ConstMapR dy(grad_out.data() + s * out_ * g.cols(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(g.cols()));
    dw.noalias() += dy * c.transpose();
    MapR dc(dcol.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    dc.noalias() = w.transpose() * dy;
    col2im(dcol.data(), g, dx.data() + s * in_ * g.in_h * g.in_w);
    if (has_bias_) {
      for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += dy.row(static_cast<Eigen::Index>(o)).sum();
    }
  }
  return dx;
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(std::string name, std::size_t in_channels, std::size_t out_channels,
                                 std::size_t kernel, std::size_t stride, std::size_t padding,
                                 std::size_t output_padding, bool bias, std::mt19937_64& rng)
    : Layer(std::move(name)),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      output_padding_(output_padding),
      has_bias_(bias) {
  if (in_ == 0 || out_ == 0 || kernel_ == 0 || stride_ == 0 || output_padding_ >= stride_) {
    throw std::invalid_argument(this->name() + ": bad transposed conv config");
  }
  weight_ = {child("weight"), Grid({in_, out_, kernel_, kernel_}), Grid({in_, out_, kernel_, kernel_})};
  kaiming_uniform(weight_.value, in_ * kernel_ * kernel_, rng);
  if (has_bias_) bias_ = {child("bias"), Grid({out_}), Grid({out_})};
}

void ConvTranspose2d::collect_parameters(std::vector<Param*>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

Grid ConvTranspose2d::forward(const Grid& x) {
  require_batch(x, in_, name());
  const std::size_t h = x.extent(2), w = x.extent(3);
  const long oh = static_cast<long>((h - 1) * stride_ + kernel_ + output_padding_) - 2 * static_cast<long>(padding_);
  const long ow = static_cast<long>((w - 1) * stride_ + kernel_ + output_padding_) - 2 * static_cast<long>(padding_);
  if (oh <= 0 || ow <= 0) throw std::invalid_argument(name() + ": non-positive output size");
  // The transposed conv is the adjoint of a conv mapping (oh x ow) -> (h x w).
  const ConvGeom g{out_, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), kernel_, stride_, padding_, h, w};
  const std::size_t n = x.extent(0);
  Grid y({n, out_, g.in_h, g.in_w});
  std::vector<double> col(g.rows() * g.cols());
  ConstMapR wm(weight_.value.data(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(g.rows()));
  for (std::size_t s = 0; s < n; ++s) {
    ConstMapR xs(x.data() + s * in_ * h * w, static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(h * w));
    MapR c(col.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    c.noalias() = wm.transpose() * xs;
    double* ys = y.data() + s * out_ * g.in_h * g.in_w;
    col2im(col.data(), g, ys);
    if (has_bias_) {
      for (std::size_t o = 0; o < out_; ++o) {
        for (std::size_t p = 0; p < g.in_h * g.in_w; ++p) ys[o * g.in_h * g.in_w + p] += bias_.value[o];
      }
    }
  }
  input_ = x;
  return y;
}

Grid ConvTranspose2d::backward(const Grid& grad_out) {
  require_forward(!input_.empty());
  const std::size_t n = input_.extent(0), h = input_.extent(2), w = input_.extent(3);
  if (grad_out.rank() != 4 || grad_out.extent(0) != n || grad_out.extent(1) != out_) {
    throw std::invalid_argument(name() + ": gradient shape " + shape_string(grad_out.shape()) + " mismatch");
  }
  const ConvGeom g{out_, grad_out.extent(2), grad_out.extent(3), kernel_, stride_, padding_, h, w};
  Grid dx(input_.shape());
  std::vector<double> col(g.rows() * g.cols());
  ConstMapR wm(weight_.value.data(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(g.rows()));
  MapR dw(weight_.grad.data(), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(g.rows()));
  for (std::size_t s = 0; s < n; ++s) {
    const double* dys = grad_out.data() + s * out_ * g.in_h * g.in_w;
    im2col(dys, g, col.data());
    ConstMapR c(col.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    ConstMapR xs(input_.data() + s * in_ * h * w, static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(h * w));
    MapR dxs(dx.data() + s * in_ * h * w, static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(h * w));
    dxs.noalias() = wm * c;
    dw.noalias() += xs * c.transpose();
    if (has_bias_) {
      for (std::size_t o = 0; o < out_; ++o) {
        double acc = 0.0;
        for (std::size_t p = 0; p < g.in_h * g.in_w; ++p) acc += dys[o * g.in_h * g.in_w + p];
        bias_.grad[o] += acc;
      }
    }
  }
  return dx;
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, std::size_t channels, double momentum, double eps)
    : Layer(std::move(name)), channels_(channels), momentum_(momentum), eps_(eps) {
  gamma_ = {child("gamma"), Grid({channels_}, 1.0), Grid({channels_})};
  beta_ = {child("beta"), Grid({channels_}), Grid({channels_})};
  running_mean_ = Grid({channels_});
  running_var_ = Grid({channels_}, 1.0);
}

void BatchNorm2d::collect_parameters(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(std::vector<NamedGrid>& out) {
  out.push_back({child("running_mean"), &running_mean_});
  out.push_back({child("running_var"), &running_var_});
}

Grid BatchNorm2d::forward(const Grid& x) {
  require_batch(x, channels_, name());
  const std::size_t n = x.extent(0), plane = x.extent(2) * x.extent(3);
  const std::size_t count = n * plane;
  Grid y(x.shape());
  normalized_ = Grid(x.shape());
  inv_std_.assign(channels_, 0.0);
  cached_training_ = training();
  for (std::size_t c = 0; c < channels_; ++c) {
    double mean, var;
    if (cached_training_) {
      double acc = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const double* p = x.data() + (s * channels_ + c) * plane;
        for (std::size_t k = 0; k < plane; ++k) acc += p[k];
      }
      mean = acc / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const double* p = x.data() + (s * channels_ + c) * plane;
        for (std::size_t k = 0; k < plane; ++k) sq += (p[k] - mean) * (p[k] - mean);
      }
      var = sq / static_cast<double>(count);
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
      running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * unbiased;
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    const double g = gamma_.value[c], b = beta_.value[c];
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * channels_ + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        const double xh = (x[off + k] - mean) * inv;
        normalized_[off + k] = xh;
        y[off + k] = g * xh + b;
      }
    }
  }
  return y;
}

Grid BatchNorm2d::backward(const Grid& grad_out) {
  require_forward(!normalized_.empty());
  require_same_shape(grad_out, normalized_, name());
  const std::size_t n = grad_out.extent(0), plane = grad_out.extent(2) * grad_out.extent(3);
  const double count = static_cast<double>(n * plane);
  Grid dx(grad_out.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * channels_ + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        sum_dy += grad_out[off + k];
        sum_dy_xh += grad_out[off + k] * normalized_[off + k];
      }
    }
    gamma_.grad[c] += sum_dy_xh;
    beta_.grad[c] += sum_dy;
    const double g = gamma_.value[c], inv = inv_std_[c];
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * channels_ + c) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        if (cached_training_) {
          dx[off + k] = g * inv / count * (count * grad_out[off + k] - sum_dy - normalized_[off + k] * sum_dy_xh);
        } else {
          dx[off + k] = g * inv * grad_out[off + k];
        }
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------------ ReLU

Grid ReLU::forward(const Grid& x) {
  Grid y = x;
  for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
  input_ = x;
  return y;
}

Grid ReLU::backward(const Grid& grad_out) {
  require_forward(!input_.empty());
  require_same_shape(grad_out, input_, name());
  Grid dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(input_[i] > 0.0)) dx[i] = 0.0;
  }
  return dx;
}

// ------------------------------------------------------- ReflectionPad2d

namespace {

std::size_t mirror(long i, long n) {
  if (i < 0) return static_cast<std::size_t>(-i);
  if (i >= n) return static_cast<std::size_t>(2 * (n - 1) - i);
  return static_cast<std::size_t>(i);
}

}  // namespace

Grid ReflectionPad2d::forward(const Grid& x) {
  if (x.rank() != 4) throw std::invalid_argument(name() + ": expected a 4-D batch");
  const std::size_t h = x.extent(2), w = x.extent(3);
  if (pad_ >= h || pad_ >= w) throw std::invalid_argument(name() + ": padding must be smaller than the input");
  const std::size_t oh = h + 2 * pad_, ow = w + 2 * pad_;
  const std::size_t planes = x.extent(0) * x.extent(1);
  Grid y({x.extent(0), x.extent(1), oh, ow});
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data() + p * h * w;
    double* dst = y.data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      const std::size_t si = mirror(static_cast<long>(i) - static_cast<long>(pad_), static_cast<long>(h));
      for (std::size_t j = 0; j < ow; ++j) {
        dst[i * ow + j] = src[si * w + mirror(static_cast<long>(j) - static_cast<long>(pad_), static_cast<long>(w))];
      }
    }
  }
  input_shape_ = x.shape();
  return y;
}

Grid ReflectionPad2d::backward(const Grid& grad_out) {
  require_forward(!input_shape_.empty());
  const std::size_t h = input_shape_[2], w = input_shape_[3];
  const std::size_t oh = h + 2 * pad_, ow = w + 2 * pad_;
  if (grad_out.shape() != Shape{input_shape_[0], input_shape_[1], oh, ow}) {
    throw std::invalid_argument(name() + ": gradient shape mismatch");
  }
  Grid dx(input_shape_);
  const std::size_t planes = input_shape_[0] * input_shape_[1];
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = grad_out.data() + p * oh * ow;
    double* dst = dx.data() + p * h * w;
    for (std::size_t i = 0; i < oh; ++i) {
      const std::size_t si = mirror(static_cast<long>(i) - static_cast<long>(pad_), static_cast<long>(h));
      for (std::size_t j = 0; j < ow; ++j) {
        dst[si * w + mirror(static_cast<long>(j) - static_cast<long>(pad_), static_cast<long>(w))] += src[i * ow + j];
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------ Sequential

Grid Sequential::forward(const Grid& x) {
  Grid h = x;
  for (auto& layer : layers_) h = layer->forward(h);
  return h;
}

Grid Sequential::backward(const Grid& grad_out) {
  Grid g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect_parameters(std::vector<Param*>& out) {
  for (auto& layer : layers_) layer->collect_parameters(out);
}

void Sequential::collect_buffers(std::vector<NamedGrid>& out) {
  for (auto& layer : layers_) layer->collect_buffers(out);
}

void Sequential::set_training(bool training) {
  Layer::set_training(training);
  for (auto& layer : layers_) layer->set_training(training);
}

// ------------------------------------------------------ conv/BN/ReLU units

ConvBnRelu::ConvBnRelu(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                       std::size_t stride, std::size_t padding, std::mt19937_64& rng)
    : Layer(std::move(name)),
      conv_(child("conv"), in_channels, out_channels, kernel, stride, padding, false, rng),
      bn_(child("bn"), out_channels),
      relu_(child("relu")) {}

Grid ConvBnRelu::forward(const Grid& x) { return relu_.forward(bn_.forward(conv_.forward(x))); }
Grid ConvBnRelu::backward(const Grid& grad_out) { return conv_.backward(bn_.backward(relu_.backward(grad_out))); }

void ConvBnRelu::collect_parameters(std::vector<Param*>& out) {
  conv_.collect_parameters(out);
  bn_.collect_parameters(out);
}

void ConvBnRelu::collect_buffers(std::vector<NamedGrid>& out) { bn_.collect_buffers(out); }

void ConvBnRelu::set_training(bool training) {
  Layer::set_training(training);
  bn_.set_training(training);
}

UpConvBnRelu::UpConvBnRelu(std::string name, std::size_t in_channels, std::size_t out_channels, std::mt19937_64& rng)
    : Layer(std::move(name)),
      conv_(child("conv"), in_channels, out_channels, 3, 2, 1, 1, false, rng),
      bn_(child("bn"), out_channels),
      relu_(child("relu")) {}

Grid UpConvBnRelu::forward(const Grid& x) { return relu_.forward(bn_.forward(conv_.forward(x))); }
Grid UpConvBnRelu::backward(const Grid& grad_out) { return conv_.backward(bn_.backward(relu_.backward(grad_out))); }

void UpConvBnRelu::collect_parameters(std::vector<Param*>& out) {
  conv_.collect_parameters(out);
  bn_.collect_parameters(out);
}

void UpConvBnRelu::collect_buffers(std::vector<NamedGrid>& out) { bn_.collect_buffers(out); }

void UpConvBnRelu::set_training(bool training) {
  Layer::set_training(training);
  bn_.set_training(training);
}

}  // namespace gloredi::nn
