#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gloredi/tensor.hpp"

namespace gloredi::nn {

/// Trainable tensor with its accumulated gradient. `name` is the full dotted
/// path ("encoder.down1.conv.weight") and is stable across runs.
struct Param {
  std::string name;
  Grid value;
  Grid grad;
};

/// Non-trainable state (BN running statistics) addressed by name.
struct NamedGrid {
  std::string name;
  Grid* grid;
};

/// Anything that owns parameters or buffers.
class Module {
 public:
  explicit Module(std::string name) : name_(std::move(name)) {}
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  const std::string& name() const { return name_; }

  virtual void collect_parameters(std::vector<Param*>& out) { (void)out; }
  virtual void collect_buffers(std::vector<NamedGrid>& out) { (void)out; }
  virtual void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

 protected:
  std::string child(const std::string& leaf) const { return name_.empty() ? leaf : name_ + "." + leaf; }

 private:
  std::string name_;
  bool training_ = true;
};

/// Single-input layer over N x C x H x W batches. forward caches what backward
/// needs; backward accumulates parameter gradients and returns dL/dx.
class Layer : public Module {
 public:
  using Module::Module;
  virtual Grid forward(const Grid& x) = 0;
  virtual Grid backward(const Grid& grad_out) = 0;

 protected:
  /// Throws std::logic_error when backward runs without a cached forward.
  void require_forward(bool cached) const;
};

std::vector<Param*> parameters(Module& m);
std::vector<NamedGrid> buffers(Module& m);
/// Parameter values followed by buffers, in collection order.
std::vector<NamedGrid> state(Module& m);
void zero_grad(Module& m);
std::size_t parameter_count(Module& m);

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride, std::size_t padding, bool bias, std::mt19937_64& rng);

  Grid forward(const Grid& x) override;
  Grid backward(const Grid& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;

  Param& weight() { return weight_; }
  Param* bias() { return has_bias_ ? &bias_ : nullptr; }
  std::size_t out_size(std::size_t in) const { return (in + 2 * padding_ - kernel_) / stride_ + 1; }

 private:
  std::size_t in_, out_, kernel_, stride_, padding_;
  bool has_bias_;
  Param weight_, bias_;
  Grid input_;
};

/// Transposed convolution, weight laid out in_channels x out_channels x k x k.
/// Output side = (H-1)*stride - 2*padding + kernel + output_padding.
class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                  std::size_t stride, std::size_t padding, std::size_t output_padding, bool bias,
                  std::mt19937_64& rng);

  Grid forward(const Grid& x) override;
  Grid backward(const Grid& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;

  Param& weight() { return weight_; }

 private:
  std::size_t in_, out_, kernel_, stride_, padding_, output_padding_;
  bool has_bias_;
  Param weight_, bias_;
  Grid input_;
};

/// Batch normalization over (N, H, W) per channel. Training mode uses batch
/// statistics and updates running estimates (unbiased variance) with
/// `momentum`; eval mode normalizes with the running estimates.
class BatchNorm2d : public Layer {
 public:
  BatchNorm2d(std::string name, std::size_t channels, double momentum = 0.1, double eps = 1e-5);

  Grid forward(const Grid& x) override;
  Grid backward(const Grid& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<NamedGrid>& out) override;

  Grid& running_mean() { return running_mean_; }
  Grid& running_var() { return running_var_; }

 private:
  std::size_t channels_;
  double momentum_, eps_;
  Param gamma_, beta_;
  Grid running_mean_, running_var_;
  Grid normalized_;
  std::vector<double> inv_std_;
  bool cached_training_ = true;
};

class ReLU : public Layer {
 public:
  using Layer::Layer;
  Grid forward(const Grid& x) override;
  Grid backward(const Grid& grad_out) override;

 private:
  Grid input_;
};

/// Mirror padding without edge repetition (PyTorch ReflectionPad2d).
class ReflectionPad2d : public Layer {
 public:
  ReflectionPad2d(std::string name, std::size_t pad) : Layer(std::move(name)), pad_(pad) {}
  Grid forward(const Grid& x) override;
  Grid backward(const Grid& grad_out) override;

 private:
  std::size_t pad_;
  Shape input_shape_;
};

/// Passes values through unchanged; stands in for BN/ReLU in linear probes.
class Identity : public Layer {
 public:
  using Layer::Layer;
  Grid forward(const Grid& x) override { return x; }
  Grid backward(const Grid& grad_out) override { return grad_out; }
};

class Sequential : public Layer {
 public:
  using Layer::Layer;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Grid forward(const Grid& x) override;
  Grid backward(const Grid& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<NamedGrid>& out) override;
  void set_training(bool training) override;

  std::size_t size() const { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// conv -> BN -> ReLU, the recurring unit of the encoder/decoder trunks.
class ConvBnRelu : public Layer {
 public:
  ConvBnRelu(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
             std::size_t stride, std::size_t padding, std::mt19937_64& rng);

  Grid forward(const Grid& x) override;
  Grid backward(const Grid& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<NamedGrid>& out) override;
  void set_training(bool training) override;

  Conv2d& conv() { return conv_; }

 private:
  Conv2d conv_;
  BatchNorm2d bn_;
  ReLU relu_;
};

/// Transposed conv -> BN -> ReLU (decoder upsampling unit).
class UpConvBnRelu : public Layer {
 public:
  UpConvBnRelu(std::string name, std::size_t in_channels, std::size_t out_channels, std::mt19937_64& rng);

  Grid forward(const Grid& x) override;
  Grid backward(const Grid& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<NamedGrid>& out) override;
  void set_training(bool training) override;

 private:
  ConvTranspose2d conv_;
  BatchNorm2d bn_;
  ReLU relu_;
};

}  // namespace gloredi::nn
