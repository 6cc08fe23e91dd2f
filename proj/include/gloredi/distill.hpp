#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "gloredi/nn/layers.hpp"
#include "gloredi/tensor.hpp"

namespace gloredi {

/// Loss value with its gradient w.r.t. the first (trainable) argument.
struct LossResult {
  double value = 0.0;
  Grid grad;
};

/// mean |pred - target|; gradient sign(pred - target) / count, 0 at ties.
LossResult l1_pixel_loss(const Grid& pred, const Grid& target);

inline constexpr double kCosineEps = 1e-8;

struct RddResult {
  double value = 0.0;
  /// Mean cosine similarity over all locations (and samples).
  double cos_mean = 0.0;
  Grid grad;  // w.r.t. z_student
};

/// Directional distillation between C x H x W maps: mean over locations of
/// 1 - cos(z_s[:,i,j], z_t[:,i,j]) with the norm product clamped below by
/// kCosineEps. A leading batch axis (N x C x H x W) averages over samples.
/// z_teacher is a constant.
RddResult rdd_loss(const Grid& z_student, const Grid& z_teacher);

/// FIFO queue of detached embedding vectors, oldest first.
class MemoryBank {
 public:
  explicit MemoryBank(std::size_t capacity = 300);

  /// Appends in order, evicting the oldest entries beyond capacity.
  void push(std::vector<double> embedding);
  void push_batch(const std::vector<std::vector<double>>& embeddings);
  void clear() { entries_.clear(); }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<double>& at(std::size_t i) const { return entries_.at(i); }
  const std::deque<std::vector<double>>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<std::vector<double>> entries_;
};

struct BcdOptions {
  double temperature = 1.0;
  /// Include the positive logit in the softmax denominator (InfoNCE). When
  /// false only bank entries appear there and the loss may go negative.
  bool include_positive = true;
};

struct VectorLoss {
  double value = 0.0;
  std::vector<double> grad;  // w.r.t. z_student
};

/// -log(exp(s.t/tau) / (exp(s.t/tau) + sum_{z in bank} exp(s.z/tau))),
/// evaluated with max-logit subtraction. Empty bank gives 0 and a zero gradient.
VectorLoss bcd_loss(const std::vector<double>& z_student, const std::vector<double>& z_teacher,
                    const MemoryBank& bank, const BcdOptions& options = {});

/// teacher <- m * teacher + (1 - m) * student for every parameter and buffer,
/// matched by name. Throws std::invalid_argument on a name or shape mismatch.
void ema_update(nn::Module& teacher, nn::Module& student, double momentum);

class EmaTracker {
 public:
  explicit EmaTracker(double momentum = 0.9);
  double momentum() const { return momentum_; }
  void update(nn::Module& teacher, nn::Module& student) const { ema_update(teacher, student, momentum_); }

 private:
  double momentum_;
};

}  // namespace gloredi
