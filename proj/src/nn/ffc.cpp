#include "gloredi/nn/ffc.hpp"

#include <stdexcept>

#include "gloredi/fft.hpp"

namespace gloredi::nn {
namespace {

std::unique_ptr<Layer> make_norm(std::string name, std::size_t channels, bool norm_act) {
  if (norm_act) return std::make_unique<BatchNorm2d>(std::move(name), channels);
  return std::make_unique<Identity>(std::move(name));
}

std::unique_ptr<Layer> make_act(std::string name, bool norm_act) {
  if (norm_act) return std::make_unique<ReLU>(std::move(name));
  return std::make_unique<Identity>(std::move(name));
}

// N x C x H x Wh complex -> N x 2C x H x Wh real, channel 2c = Re, 2c+1 = Im.
Grid spectrum_to_channels(const ComplexGrid& spec) {
  const auto& s = spec.shape();
  const std::size_t n = s[0], c = s[1], plane = s[2] * s[3];
  Grid out({n, 2 * c, s[2], s[3]});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const Complex* src = spec.data() + (b * c + ch) * plane;
      double* re = out.data() + (b * 2 * c + 2 * ch) * plane;
      double* im = re + plane;
      for (std::size_t k = 0; k < plane; ++k) {
        re[k] = src[k].real();
        im[k] = src[k].imag();
      }
    }
  }
  return out;
}

ComplexGrid channels_to_spectrum(const Grid& g) {
  const std::size_t n = g.extent(0), c = g.extent(1) / 2, plane = g.extent(2) * g.extent(3);
  ComplexGrid out({n, c, g.extent(2), g.extent(3)});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* re = g.data() + (b * 2 * c + 2 * ch) * plane;
      const double* im = re + plane;
      Complex* dst = out.data() + (b * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) dst[k] = Complex(re[k], im[k]);
    }
  }
  return out;
}

void require_pair(const FeaturePair& p, std::size_t local, std::size_t global, const std::string& who) {
  const auto& l = p.local;
  const auto& g = p.global;
  if (l.rank() != 4 || g.rank() != 4 || l.extent(1) != local || g.extent(1) != global || l.extent(0) != g.extent(0) ||
      l.extent(2) != g.extent(2) || l.extent(3) != g.extent(3)) {
    throw std::invalid_argument(who + ": feature pair " + shape_string(l.shape()) + " / " + shape_string(g.shape()) +
                                " does not match split " + std::to_string(local) + "+" + std::to_string(global));
  }
}

}  // namespace

// ------------------------------------------------------------ FourierUnit

FourierUnit::FourierUnit(std::string name, std::size_t channels, bool norm_act, std::mt19937_64& rng)
    : Layer(std::move(name)),
      channels_(channels),
      reduce_(child("reduce"), channels, channels / 2 == 0 ? 1 : channels / 2, 1, 1, 0, false, rng),
      reduce_bn_(make_norm(child("reduce_bn"), channels / 2 == 0 ? 1 : channels / 2, norm_act)),
      reduce_act_(make_act(child("reduce_relu"), norm_act)),
      spectral_conv_(child("spectral"), channels == 0 ? 1 : channels, channels == 0 ? 1 : channels, 1, 1, 0, false, rng),
      spectral_bn_(make_norm(child("spectral_bn"), channels == 0 ? 1 : channels, norm_act)),
      spectral_act_(make_act(child("spectral_relu"), norm_act)),
      expand_(child("expand"), channels / 2 == 0 ? 1 : channels / 2, channels == 0 ? 1 : channels, 1, 1, 0, false, rng) {
  if (channels == 0 || channels % 2 != 0) {
    throw std::invalid_argument(this->name() + ": channel count must be even and positive, got " +
                                std::to_string(channels));
  }
}

Grid FourierUnit::forward(const Grid& x) {
  const Grid reduced = reduce_act_->forward(reduce_bn_->forward(reduce_.forward(x)));
  const Grid freq = spectrum_to_channels(rfft2(reduced));
  const Grid mixed = spectral_act_->forward(spectral_bn_->forward(spectral_conv_.forward(freq)));
  Grid summed = irfft2(channels_to_spectrum(mixed), reduced.shape());
  summed += reduced;
  spatial_shape_ = reduced.shape();
  return expand_.forward(summed);
}

Grid FourierUnit::backward(const Grid& grad_out) {
  require_forward(!spatial_shape_.empty());
  const Grid d_summed = expand_.backward(grad_out);
  // summed = reduced + irfft2(mixed)
  const Grid d_mixed = spectrum_to_channels(irfft2_adjoint(d_summed));
  const Grid d_freq = spectral_conv_.backward(spectral_bn_->backward(spectral_act_->backward(d_mixed)));
  Grid d_reduced = rfft2_adjoint(channels_to_spectrum(d_freq), spatial_shape_);
  d_reduced += d_summed;
  return reduce_.backward(reduce_bn_->backward(reduce_act_->backward(d_reduced)));
}

void FourierUnit::collect_parameters(std::vector<Param*>& out) {
  reduce_.collect_parameters(out);
  reduce_bn_->collect_parameters(out);
  spectral_conv_.collect_parameters(out);
  spectral_bn_->collect_parameters(out);
  expand_.collect_parameters(out);
}

void FourierUnit::collect_buffers(std::vector<NamedGrid>& out) {
  reduce_bn_->collect_buffers(out);
  spectral_bn_->collect_buffers(out);
}

void FourierUnit::set_training(bool training) {
  Layer::set_training(training);
  reduce_bn_->set_training(training);
  spectral_bn_->set_training(training);
}

// --------------------------------------------------------------- FfcLayer

FfcLayer::FfcLayer(std::string name, std::size_t local_channels, std::size_t global_channels, bool norm_act,
                   std::mt19937_64& rng)
    : Module(std::move(name)),
      l2l_(child("l2l"), local_channels, local_channels, 3, 1, 1, false, rng),
      g2l_(child("g2l"), global_channels, local_channels, 3, 1, 1, false, rng),
      l2g_(child("l2g"), local_channels, global_channels, 3, 1, 1, false, rng),
      g2g_(child("g2g"), global_channels, norm_act, rng),
      bn_local_(make_norm(child("bn_local"), local_channels, norm_act)),
      act_local_(make_act(child("relu_local"), norm_act)),
      bn_global_(make_norm(child("bn_global"), global_channels, norm_act)),
      act_global_(make_act(child("relu_global"), norm_act)) {}

FeaturePair FfcLayer::forward(const FeaturePair& x) {
  Grid local = l2l_.forward(x.local);
  local += g2l_.forward(x.global);
  Grid global = l2g_.forward(x.local);
  global += g2g_.forward(x.global);
  return {act_local_->forward(bn_local_->forward(local)), act_global_->forward(bn_global_->forward(global))};
}

FeaturePair FfcLayer::backward(const FeaturePair& grad_out) {
  const Grid d_local = bn_local_->backward(act_local_->backward(grad_out.local));
  const Grid d_global = bn_global_->backward(act_global_->backward(grad_out.global));
  Grid dx_local = l2l_.backward(d_local);
  dx_local += l2g_.backward(d_global);
  Grid dx_global = g2l_.backward(d_local);
  dx_global += g2g_.backward(d_global);
  return {std::move(dx_local), std::move(dx_global)};
}

void FfcLayer::collect_parameters(std::vector<Param*>& out) {
  l2l_.collect_parameters(out);
  g2l_.collect_parameters(out);
  l2g_.collect_parameters(out);
  g2g_.collect_parameters(out);
  bn_local_->collect_parameters(out);
  bn_global_->collect_parameters(out);
}

void FfcLayer::collect_buffers(std::vector<NamedGrid>& out) {
  g2g_.collect_buffers(out);
  bn_local_->collect_buffers(out);
  bn_global_->collect_buffers(out);
}

void FfcLayer::set_training(bool training) {
  Module::set_training(training);
  g2g_.set_training(training);
  bn_local_->set_training(training);
  bn_global_->set_training(training);
}

// --------------------------------------------------------------- FfcBlock

FfcBlock::FfcBlock(std::string name, std::size_t local_channels, std::size_t global_channels, bool norm_act,
                   std::mt19937_64& rng)
    : Module(std::move(name)),
      local_channels_(local_channels),
      global_channels_(global_channels),
      first_(child("ffc1"), local_channels, global_channels, norm_act, rng),
      second_(child("ffc2"), local_channels, global_channels, norm_act, rng) {}

FeaturePair FfcBlock::forward(const FeaturePair& x) {
  require_pair(x, local_channels_, global_channels_, name());
  FeaturePair y = second_.forward(first_.forward(x));
  y.local += x.local;
  y.global += x.global;
  return y;
}

FeaturePair FfcBlock::backward(const FeaturePair& grad_out) {
  require_pair(grad_out, local_channels_, global_channels_, name());
  FeaturePair d = first_.backward(second_.backward(grad_out));
  d.local += grad_out.local;
  d.global += grad_out.global;
  return d;
}

void FfcBlock::collect_parameters(std::vector<Param*>& out) {
  first_.collect_parameters(out);
  second_.collect_parameters(out);
}

void FfcBlock::collect_buffers(std::vector<NamedGrid>& out) {
  first_.collect_buffers(out);
  second_.collect_buffers(out);
}

void FfcBlock::set_training(bool training) {
  Module::set_training(training);
  first_.set_training(training);
  second_.set_training(training);
}

}  // namespace gloredi::nn
