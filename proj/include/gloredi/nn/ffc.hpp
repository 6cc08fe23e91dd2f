#pragma once

#include <memory>

#include "gloredi/nn/layers.hpp"

namespace gloredi::nn {

/// Local/global channel split of an FFC feature map (shared N, H, W).
struct FeaturePair {
  Grid local;
  Grid global;
};

/// Spectral transform of the global branch:
///   1x1 conv C -> C/2, BN, ReLU
///   rfft2 per channel, (re, im) interleaved as C real channels
///   1x1 conv C -> C, BN, ReLU in the frequency domain
///   irfft2, add the reduced activation, 1x1 conv C/2 -> C
/// With `norm_act` false every BN/ReLU is replaced by the identity, which makes
/// the unit linear (used for linearity probes).
class FourierUnit : public Layer {
 public:
  FourierUnit(std::string name, std::size_t channels, bool norm_act, std::mt19937_64& rng);

  Grid forward(const Grid& x) override;
  Grid backward(const Grid& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<NamedGrid>& out) override;
  void set_training(bool training) override;

 private:
  std::size_t channels_;
  Conv2d reduce_;
  std::unique_ptr<Layer> reduce_bn_, reduce_act_;
  Conv2d spectral_conv_;
  std::unique_ptr<Layer> spectral_bn_, spectral_act_;
  Conv2d expand_;
  Shape spatial_shape_;  // N x C/2 x H x W
};

/// One FFC layer:
///   y_l = ReLU(BN(l2l(x_l) + g2l(x_g)))
///   y_g = ReLU(BN(l2g(x_l) + fourier(x_g)))
class FfcLayer : public Module {
 public:
  FfcLayer(std::string name, std::size_t local_channels, std::size_t global_channels, bool norm_act,
           std::mt19937_64& rng);

  FeaturePair forward(const FeaturePair& x);
  FeaturePair backward(const FeaturePair& grad_out);
  void collect_parameters(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<NamedGrid>& out) override;
  void set_training(bool training) override;

 private:
  Conv2d l2l_, g2l_, l2g_;
  FourierUnit g2g_;
  std::unique_ptr<Layer> bn_local_, act_local_, bn_global_, act_global_;
};

/// Residual FFC block: out = in + layer2(layer1(in)) per branch.
class FfcBlock : public Module {
 public:
  FfcBlock(std::string name, std::size_t local_channels, std::size_t global_channels, bool norm_act,
           std::mt19937_64& rng);

  FeaturePair forward(const FeaturePair& x);
  FeaturePair backward(const FeaturePair& grad_out);
  void collect_parameters(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<NamedGrid>& out) override;
  void set_training(bool training) override;

 private:
  std::size_t local_channels_, global_channels_;
  FfcLayer first_, second_;
};

}  // namespace gloredi::nn
