#include "gloredi/distill.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gloredi {

LossResult l1_pixel_loss(const Grid& pred, const Grid& target) {
  require_same_shape(pred, target, "l1_pixel_loss");
  if (pred.empty()) throw std::invalid_argument("l1_pixel_loss: empty input");
  const double inv = 1.0 / static_cast<double>(pred.size());
  LossResult r{0.0, Grid(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.value += std::abs(d);
    r.grad[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  r.value *= inv;
  return r;
}

RddResult rdd_loss(const Grid& z_student, const Grid& z_teacher) {
  require_same_shape(z_student, z_teacher, "rdd_loss");
  if (z_student.rank() != 3 && z_student.rank() != 4) {
    throw std::invalid_argument("rdd_loss: expected C x H x W or N x C x H x W, got " +
                                shape_string(z_student.shape()));
  }
  const bool batched = z_student.rank() == 4;
  const std::size_t n = batched ? z_student.extent(0) : 1;
  const std::size_t off = batched ? 1 : 0;
  const std::size_t c = z_student.extent(off), plane = z_student.extent(off + 1) * z_student.extent(off + 2);
  const double scale = 1.0 / static_cast<double>(n * plane);

  RddResult r{0.0, 0.0, Grid(z_student.shape())};
  for (std::size_t b = 0; b < n; ++b) {
    const double* a = z_student.data() + b * c * plane;
    const double* t = z_teacher.data() + b * c * plane;
    double* g = r.grad.data() + b * c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      double aa = 0.0, tt = 0.0, at = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        const double av = a[k * plane + p], tv = t[k * plane + p];
        aa += av * av;
        tt += tv * tv;
        at += av * tv;
      }
      const double na = std::sqrt(aa), nt = std::sqrt(tt);
      const double denom = std::max(na * nt, kCosineEps);
      const double cos = at / denom;
      r.value += 1.0 - cos;
      r.cos_mean += cos;
      // d(1 - cos)/da
      if (na * nt > kCosineEps) {
        for (std::size_t k = 0; k < c; ++k) {
          g[k * plane + p] = -scale * (t[k * plane + p] / denom - cos * a[k * plane + p] / aa);
        }
      } else {
        for (std::size_t k = 0; k < c; ++k) g[k * plane + p] = -scale * t[k * plane + p] / kCosineEps;
      }
    }
  }
  r.value *= scale;
  r.cos_mean *= scale;
  return r;
}

MemoryBank::MemoryBank(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("memory bank: capacity must be positive");
}

void MemoryBank::push(std::vector<double> embedding) {
  if (!entries_.empty() && embedding.size() != entries_.front().size()) {
    throw std::invalid_argument("memory bank: embedding length " + std::to_string(embedding.size()) +
                                " differs from stored length " + std::to_string(entries_.front().size()));
  }
  entries_.push_back(std::move(embedding));
  while (entries_.size() > capacity_) entries_.pop_front();
}

void MemoryBank::push_batch(const std::vector<std::vector<double>>& embeddings) {
  for (const auto& e : embeddings) push(e);
}

VectorLoss bcd_loss(const std::vector<double>& z_student, const std::vector<double>& z_teacher,
                    const MemoryBank& bank, const BcdOptions& options) {
  const std::size_t len = z_student.size();
  if (z_teacher.size() != len) throw std::invalid_argument("bcd_loss: student/teacher length mismatch");
  if (!(options.temperature > 0.0)) throw std::invalid_argument("bcd_loss: temperature must be positive");
  VectorLoss r{0.0, std::vector<double>(len, 0.0)};
  if (bank.empty()) return r;
  if (bank.at(0).size() != len) throw std::invalid_argument("bcd_loss: bank embedding length mismatch");

  auto logit = [&](const std::vector<double>& z) {
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) s += z_student[k] * z[k];
    return s / options.temperature;
  };
  const double positive = logit(z_teacher);
  std::vector<double> logits;
  logits.reserve(bank.size() + 1);
  for (const auto& z : bank.entries()) logits.push_back(logit(z));
  if (options.include_positive) logits.push_back(positive);

  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - top);
  r.value = top + std::log(total) - positive;

  // dL/ds = (sum_j p_j z_j - z_t) / tau with p the softmax over the denominator terms.
  for (std::size_t j = 0; j < bank.size(); ++j) {
    const double w = std::exp(logits[j] - top) / total;
    const auto& z = bank.at(j);
    for (std::size_t k = 0; k < len; ++k) r.grad[k] += w * z[k];
  }
  const double w_pos = options.include_positive ? std::exp(positive - top) / total : 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    r.grad[k] = (r.grad[k] + (w_pos - 1.0) * z_teacher[k]) / options.temperature;
  }
  return r;
}

void ema_update(nn::Module& teacher, nn::Module& student, double momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw std::invalid_argument("ema_update: momentum must lie in [0,1]");
  auto dst = nn::state(teacher);
  const auto src = nn::state(student);
  if (dst.size() != src.size()) throw std::invalid_argument("ema_update: teacher/student tensor count differs");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || dst[i].grid->shape() != src[i].grid->shape()) {
      throw std::invalid_argument("ema_update: tensor mismatch " + dst[i].name + " vs " + src[i].name);
    }
    Grid& t = *dst[i].grid;
    const Grid& s = *src[i].grid;
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = momentum * t[k] + (1.0 - momentum) * s[k];
  }
}

EmaTracker::EmaTracker(double momentum) : momentum_(momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw std::invalid_argument("EmaTracker: momentum must lie in [0,1]");
}

}  // namespace gloredi
