#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "gloredi/config.hpp"
#include "gloredi/dataset.hpp"
#include "gloredi/distill.hpp"
#include "gloredi/io.hpp"
#include "gloredi/nn/checkpoint.hpp"
#include "gloredi/nn/model.hpp"
#include "gloredi/spectral.hpp"

namespace gloredi {

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter moments, index-aligned with the parameter list it was built for.
struct AdamState {
  std::vector<Grid> m1, m2;
  std::uint64_t step = 0;

  explicit AdamState(const std::vector<nn::Param*>& params = {});
};

/// One bias-corrected Adam update of every parameter from its grad.
void adam_step(const std::vector<nn::Param*>& params, AdamState& state, double lr, const AdamConfig& cfg);

struct TrainConfig {
  nn::EncoderDecoderConfig model;
  double alpha = 0.1;
  double beta = 0.0002;
  double temperature = 1.0;
  double ema_momentum = 0.9;
  std::size_t bank_capacity = 300;
  AdamConfig adam;
  double lr = 1e-3;
  /// Epochs between learning-rate halvings.
  std::size_t lr_halving_epochs = 40;
  std::size_t batch_size = 4;
  std::size_t iterations = 200;
  std::uint64_t seed = 0;
  double mask_low = 0.2;
  double mask_high = 0.5;
  bool normalize_embedding = true;
  bool include_positive = true;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// Applies `key = value` entries onto `cfg`; unknown keys throw ConfigError.
TrainConfig apply_config(TrainConfig cfg, const std::vector<ConfigEntry>& entries);
/// Flat key/value listing of every field, in config-file syntax order.
std::vector<std::pair<std::string, std::string>> describe(const TrainConfig& cfg);

/// lr0 * 0.5^floor(epoch / period)
double lr_at(std::size_t epoch, double lr0, std::size_t period);

struct IterationLog {
  std::size_t iter = 0;  // 1-based
  double lr = 0.0;
  double pixel_s = 0.0;
  double pixel_t = 0.0;
  double rdd = 0.0;
  double bcd = 0.0;
  double cos_mean = 0.0;
};

inline constexpr const char* kLogHeader = "iter,lr,pixelS,pixelT,rdd,bcd,cos_mean";
std::string format_log_row(const IterationLog& row);

enum class TrainMode { kGloReDi, kFreeNet };

/// Teacher/student optimization loop. Each GloReDi iteration runs, in order:
/// EMA of the teacher decoder, teacher forward, teacher-encoder step, student
/// forward, student step on pixel + alpha*rdd + beta*bcd, bank push of z_T.
/// FreeNet mode runs only the student with the pixel loss.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<SampleTriplet> data, TrainMode mode);
  ~Trainer();

  /// Runs one iteration. Throws NumericalError naming a non-finite loss term.
  IterationLog step();
  /// Steps until `cfg.iterations` have completed, reporting each row.
  void run(const std::function<void(const IterationLog&)>& on_row = {});

  std::size_t iteration() const { return iteration_; }
  std::size_t epoch() const;
  const TrainConfig& config() const { return cfg_; }
  TrainMode mode() const { return mode_; }

  nn::Encoder& student_encoder() { return *enc_s_; }
  nn::Decoder& student_decoder() { return *dec_s_; }
  nn::Encoder* teacher_encoder() { return enc_t_.get(); }
  nn::Decoder* teacher_decoder() { return dec_t_.get(); }
  const MemoryBank& bank() const { return bank_; }

  /// encoder + decoder of the student plus config.* entries.
  nn::Checkpoint student_checkpoint();
  /// Everything needed to resume: both models, Adam moments, bank, iteration.
  nn::Checkpoint state_checkpoint();
  void restore(const nn::Checkpoint& state);

  /// Samples (dataset indices) of the batch used by iteration `iter` (0-based).
  std::vector<std::size_t> batch_indices(std::size_t iter) const;

 private:
  IterationLog step_glore_di(const Grid& full, const Grid& teacher_in, const Grid& student_in);
  IterationLog step_freenet(const Grid& full, const Grid& student_in);

  TrainConfig cfg_;
  std::vector<SampleTriplet> data_;
  TrainMode mode_;
  BandMask mask_;
  std::unique_ptr<nn::Encoder> enc_s_, enc_t_;
  std::unique_ptr<nn::Decoder> dec_s_, dec_t_;
  std::vector<nn::Param*> student_params_, teacher_params_;
  AdamState adam_s_, adam_t_;
  MemoryBank bank_;
  std::size_t iteration_ = 0;
};

std::vector<IterationLog> train_glore_di(const std::vector<SampleTriplet>& data, const TrainConfig& cfg);
std::vector<IterationLog> train_freenet(const std::vector<SampleTriplet>& data, const TrainConfig& cfg);

/// Encoder/decoder pair restored from a student checkpoint.
struct StudentModel {
  std::unique_ptr<nn::Encoder> encoder;
  std::unique_ptr<nn::Decoder> decoder;
  nn::EncoderDecoderConfig config;

  /// Eval-mode reconstruction of one H x W image.
  Grid reconstruct(const Grid& image);
};

StudentModel load_student(const nn::Checkpoint& ckpt);

}  // namespace gloredi
