#pragma once

#include <memory>
#include <random>
#include <vector>

#include "gloredi/nn/ffc.hpp"
#include "gloredi/nn/layers.hpp"

namespace gloredi::nn {

/// Channel plan shared by encoder and decoder. At width_multiplier 1 the plan
/// is 64 -> 128 -> 256 (64 local + 192 global); 0.25 gives 16 -> 32 -> 64.
struct EncoderDecoderConfig {
  std::size_t base_channels = 64;
  std::size_t ffc_blocks_encoder = 7;
  std::size_t ffc_blocks_decoder = 2;
  double global_ratio = 0.75;
  double width_multiplier = 0.25;
  std::size_t input_channels = 1;

  /// Throws std::invalid_argument on an inconsistent plan.
  void validate() const;

  std::size_t stem_channels() const;
  std::size_t trunk_channels() const { return 4 * stem_channels(); }
  std::size_t global_channels() const;
  std::size_t local_channels() const { return trunk_channels() - global_channels(); }
};

/// ReflectionPad(3) -> 7x7 conv -> 3x3/s2 conv -> split (3x3/s2 pair) -> m FFC
/// blocks -> concat. Maps N x C_in x H x W to N x trunk x H/4 x W/4.
class Encoder : public Layer {
 public:
  Encoder(std::string name, const EncoderDecoderConfig& cfg, std::mt19937_64& rng);

  Grid forward(const Grid& x) override;
  Grid backward(const Grid& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<NamedGrid>& out) override;
  void set_training(bool training) override;

  const EncoderDecoderConfig& config() const { return cfg_; }

 private:
  EncoderDecoderConfig cfg_;
  ReflectionPad2d pad_;
  ConvBnRelu stem_, down_, split_local_, split_global_;
  std::vector<std::unique_ptr<FfcBlock>> blocks_;
  bool cached_ = false;
};

/// split (3x3/s1 pair) -> n FFC blocks -> concat -> two stride-2 transposed
/// convs -> ReflectionPad(3) -> 7x7 conv to one channel.
class Decoder : public Layer {
 public:
  Decoder(std::string name, const EncoderDecoderConfig& cfg, std::mt19937_64& rng);

  Grid forward(const Grid& z) override;
  Grid backward(const Grid& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<NamedGrid>& out) override;
  void set_training(bool training) override;

  const EncoderDecoderConfig& config() const { return cfg_; }

 private:
  EncoderDecoderConfig cfg_;
  ConvBnRelu split_local_, split_global_;
  std::vector<std::unique_ptr<FfcBlock>> blocks_;
  UpConvBnRelu up1_, up2_;
  ReflectionPad2d pad_;
  Conv2d out_;
  bool cached_ = false;
};

/// Copies parameter values and buffers from `src` into `dst`, matched by name.
/// Throws std::invalid_argument on any name or shape mismatch.
void copy_state(Module& src, Module& dst);

}  // namespace gloredi::nn
