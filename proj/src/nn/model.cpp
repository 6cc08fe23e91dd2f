#include "gloredi/nn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace gloredi::nn {
namespace {

constexpr std::size_t kReflect = 3;

FeaturePair split_pair(const Grid& z, std::size_t local) {
  auto [l, g] = split_channels(z, local);
  return {std::move(l), std::move(g)};
}

}  // namespace

std::size_t EncoderDecoderConfig::stem_channels() const {
  return static_cast<std::size_t>(std::lround(static_cast<double>(base_channels) * width_multiplier));
}

std::size_t EncoderDecoderConfig::global_channels() const {
  return static_cast<std::size_t>(std::lround(static_cast<double>(trunk_channels()) * global_ratio));
}

void EncoderDecoderConfig::validate() const {
  if (ffc_blocks_encoder + ffc_blocks_decoder < 1) {
    throw std::invalid_argument("model: at least one FFC block is required");
  }
  if (!(width_multiplier > 0.0) || !std::isfinite(width_multiplier)) {
    throw std::invalid_argument("model: width_multiplier must be positive");
  }
  if (input_channels < 1) throw std::invalid_argument("model: input_channels must be >= 1");
  const std::size_t stem = stem_channels();
  if (stem < 4 || stem % 4 != 0) {
    throw std::invalid_argument("model: base_channels * width_multiplier = " + std::to_string(stem) +
                                " must be >= 4 and divisible by 4");
  }
  if (!(global_ratio > 0.0 && global_ratio < 1.0)) {
    throw std::invalid_argument("model: global_ratio must lie strictly between 0 and 1");
  }
  const std::size_t global = global_channels();
  if (global == 0 || global >= trunk_channels() || global % 2 != 0) {
    throw std::invalid_argument("model: global branch width " + std::to_string(global) +
                                " must be even and leave a non-empty local branch");
  }
}

// ---------------------------------------------------------------- Encoder

Encoder::Encoder(std::string name, const EncoderDecoderConfig& cfg, std::mt19937_64& rng)
    : Layer(std::move(name)),
      cfg_((cfg.validate(), cfg)),
      pad_(child("pad"), kReflect),
      stem_(child("down1"), cfg.input_channels, cfg.stem_channels(), 7, 1, 0, rng),
      down_(child("down2"), cfg.stem_channels(), 2 * cfg.stem_channels(), 3, 2, 1, rng),
      split_local_(child("split.local"), 2 * cfg.stem_channels(), cfg.local_channels(), 3, 2, 1, rng),
      split_global_(child("split.global"), 2 * cfg.stem_channels(), cfg.global_channels(), 3, 2, 1, rng) {
  for (std::size_t b = 0; b < cfg.ffc_blocks_encoder; ++b) {
    blocks_.push_back(std::make_unique<FfcBlock>(child("block" + std::to_string(b)), cfg.local_channels(),
                                                 cfg.global_channels(), true, rng));
  }
}

Grid Encoder::forward(const Grid& x) {
  if (x.rank() != 4 || x.extent(1) != cfg_.input_channels || x.extent(2) % 4 != 0 || x.extent(3) % 4 != 0) {
    throw std::invalid_argument(name() + ": expected N x " + std::to_string(cfg_.input_channels) +
                                " x H x W with H, W divisible by 4, got " + shape_string(x.shape()));
  }
  const Grid h = down_.forward(stem_.forward(pad_.forward(x)));
  FeaturePair p{split_local_.forward(h), split_global_.forward(h)};
  for (auto& block : blocks_) p = block->forward(p);
  cached_ = true;
  return concat_channels(p.local, p.global);
}

Grid Encoder::backward(const Grid& grad_out) {
  require_forward(cached_);
  FeaturePair d = split_pair(grad_out, cfg_.local_channels());
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = (*it)->backward(d);
  Grid dh = split_local_.backward(d.local);
  dh += split_global_.backward(d.global);
  return pad_.backward(stem_.backward(down_.backward(dh)));
}

void Encoder::collect_parameters(std::vector<Param*>& out) {
  stem_.collect_parameters(out);
  down_.collect_parameters(out);
  split_local_.collect_parameters(out);
  split_global_.collect_parameters(out);
  for (auto& block : blocks_) block->collect_parameters(out);
}

void Encoder::collect_buffers(std::vector<NamedGrid>& out) {
  stem_.collect_buffers(out);
  down_.collect_buffers(out);
  split_local_.collect_buffers(out);
  split_global_.collect_buffers(out);
  for (auto& block : blocks_) block->collect_buffers(out);
}

void Encoder::set_training(bool training) {
  Layer::set_training(training);
  stem_.set_training(training);
  down_.set_training(training);
  split_local_.set_training(training);
  split_global_.set_training(training);
  for (auto& block : blocks_) block->set_training(training);
}

// ---------------------------------------------------------------- Decoder

Decoder::Decoder(std::string name, const EncoderDecoderConfig& cfg, std::mt19937_64& rng)
    : Layer(std::move(name)),
      cfg_((cfg.validate(), cfg)),
      split_local_(child("split.local"), cfg.trunk_channels(), cfg.local_channels(), 3, 1, 1, rng),
      split_global_(child("split.global"), cfg.trunk_channels(), cfg.global_channels(), 3, 1, 1, rng),
      up1_(child("up1"), cfg.trunk_channels(), 2 * cfg.stem_channels(), rng),
      up2_(child("up2"), 2 * cfg.stem_channels(), cfg.stem_channels(), rng),
      pad_(child("pad"), kReflect),
      out_(child("out"), cfg.stem_channels(), 1, 7, 1, 0, true, rng) {
  for (std::size_t b = 0; b < cfg.ffc_blocks_decoder; ++b) {
    blocks_.push_back(std::make_unique<FfcBlock>(child("block" + std::to_string(b)), cfg.local_channels(),
                                                 cfg.global_channels(), true, rng));
  }
}

Grid Decoder::forward(const Grid& z) {
  if (z.rank() != 4 || z.extent(1) != cfg_.trunk_channels()) {
    throw std::invalid_argument(name() + ": expected N x " + std::to_string(cfg_.trunk_channels()) +
                                " x H x W representation, got " + shape_string(z.shape()));
  }
  FeaturePair p{split_local_.forward(z), split_global_.forward(z)};
  for (auto& block : blocks_) p = block->forward(p);
  const Grid up = up2_.forward(up1_.forward(concat_channels(p.local, p.global)));
  cached_ = true;
  return out_.forward(pad_.forward(up));
}

Grid Decoder::backward(const Grid& grad_out) {
  require_forward(cached_);
  const Grid d_cat = up1_.backward(up2_.backward(pad_.backward(out_.backward(grad_out))));
  FeaturePair d = split_pair(d_cat, cfg_.local_channels());
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = (*it)->backward(d);
  Grid dz = split_local_.backward(d.local);
  dz += split_global_.backward(d.global);
  return dz;
}

void Decoder::collect_parameters(std::vector<Param*>& out) {
  split_local_.collect_parameters(out);
  split_global_.collect_parameters(out);
  for (auto& block : blocks_) block->collect_parameters(out);
  up1_.collect_parameters(out);
  up2_.collect_parameters(out);
  out_.collect_parameters(out);
}

void Decoder::collect_buffers(std::vector<NamedGrid>& out) {
  split_local_.collect_buffers(out);
  split_global_.collect_buffers(out);
  for (auto& block : blocks_) block->collect_buffers(out);
  up1_.collect_buffers(out);
  up2_.collect_buffers(out);
}

void Decoder::set_training(bool training) {
  Layer::set_training(training);
  split_local_.set_training(training);
  split_global_.set_training(training);
  for (auto& block : blocks_) block->set_training(training);
  up1_.set_training(training);
  up2_.set_training(training);
}

void copy_state(Module& src, Module& dst) {
  const auto from = state(src);
  auto to = state(dst);
  if (from.size() != to.size()) {
    throw std::invalid_argument("copy_state: " + src.name() + " has " + std::to_string(from.size()) +
                                " tensors, " + dst.name() + " has " + std::to_string(to.size()));
  }
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].name != to[i].name || from[i].grid->shape() != to[i].grid->shape()) {
      throw std::invalid_argument("copy_state: tensor mismatch " + from[i].name + " vs " + to[i].name);
    }
    *to[i].grid = *from[i].grid;
  }
}

}  // namespace gloredi::nn
