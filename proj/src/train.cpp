#include "gloredi/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

namespace gloredi {
namespace {

// RNG streams derived from TrainConfig::seed.
constexpr std::uint64_t kStreamEncoderS = 0x5EED0001;
constexpr std::uint64_t kStreamDecoderS = 0x5EED0002;
constexpr std::uint64_t kStreamEncoderT = 0x5EED0003;
constexpr std::uint64_t kStreamShuffle = 0x5EED1000;

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void check_loss(double value, const char* term, std::size_t iter) {
  if (!std::isfinite(value)) {
    throw NumericalError("non-finite " + std::string(term) + " loss at iteration " + std::to_string(iter));
  }
}

Grid batch_of(const std::vector<SampleTriplet>& data, const std::vector<std::size_t>& idx,
              Grid SampleTriplet::*field) {
  std::vector<Grid> items;
  items.reserve(idx.size());
  for (auto i : idx) {
    const Grid& img = data[i].*field;
    items.push_back(img.reshaped({1, img.extent(0), img.extent(1)}));
  }
  return stack(items);
}

// (re)builds an encoder/decoder from a seed stream.
template <typename Net>
std::unique_ptr<Net> make_net(const char* name, const nn::EncoderDecoderConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::make_unique<Net>(name, cfg, rng);
}

std::vector<nn::Param*> joint_parameters(nn::Module& a, nn::Module& b) {
  auto out = nn::parameters(a);
  auto more = nn::parameters(b);
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

// Runs `fn` with the module's BN running statistics restored afterwards.
template <typename Fn>
auto with_frozen_buffers(nn::Module& m, Fn&& fn) {
  auto bufs = nn::buffers(m);
  std::vector<Grid> saved;
  saved.reserve(bufs.size());
  for (const auto& b : bufs) saved.push_back(*b.grid);
  auto result = fn();
  for (std::size_t i = 0; i < bufs.size(); ++i) *bufs[i].grid = std::move(saved[i]);
  return result;
}

void add_adam(nn::Checkpoint& ckpt, const std::string& prefix, const std::vector<nn::Param*>& params,
              const AdamState& st) {
  ckpt.add_scalar(prefix + ".step", static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.add(prefix + ".m1." + params[i]->name, st.m1[i]);
    ckpt.add(prefix + ".m2." + params[i]->name, st.m2[i]);
  }
}

void load_adam(const nn::Checkpoint& ckpt, const std::string& prefix, const std::vector<nn::Param*>& params,
               AdamState& st) {
  st.step = static_cast<std::uint64_t>(ckpt.scalar(prefix + ".step"));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Grid& m1 = ckpt.get(prefix + ".m1." + params[i]->name);
    const Grid& m2 = ckpt.get(prefix + ".m2." + params[i]->name);
    if (m1.shape() != params[i]->value.shape() || m2.shape() != params[i]->value.shape()) {
      throw FormatError("checkpoint: Adam moment shape mismatch for " + params[i]->name);
    }
    st.m1[i] = m1;
    st.m2[i] = m2;
  }
}

void add_model_config(nn::Checkpoint& ckpt, const nn::EncoderDecoderConfig& m) {
  ckpt.add_scalar("config.base_channels", static_cast<double>(m.base_channels));
  ckpt.add_scalar("config.ffc_blocks_encoder", static_cast<double>(m.ffc_blocks_encoder));
  ckpt.add_scalar("config.ffc_blocks_decoder", static_cast<double>(m.ffc_blocks_decoder));
  ckpt.add_scalar("config.global_ratio", m.global_ratio);
  ckpt.add_scalar("config.width_multiplier", m.width_multiplier);
  ckpt.add_scalar("config.input_channels", static_cast<double>(m.input_channels));
}

nn::EncoderDecoderConfig read_model_config(const nn::Checkpoint& ckpt) {
  auto count = [&](const char* key) {
    const double v = ckpt.scalar(key);
    if (!(v >= 0.0) || v != std::floor(v)) throw FormatError(std::string("checkpoint: invalid ") + key);
    return static_cast<std::size_t>(v);
  };
  nn::EncoderDecoderConfig m;
  m.base_channels = count("config.base_channels");
  m.ffc_blocks_encoder = count("config.ffc_blocks_encoder");
  m.ffc_blocks_decoder = count("config.ffc_blocks_decoder");
  // Stored as float32; snap back to the decimal the user wrote.
  m.global_ratio = std::round(ckpt.scalar("config.global_ratio") * 1e6) / 1e6;
  m.width_multiplier = std::round(ckpt.scalar("config.width_multiplier") * 1e6) / 1e6;
  m.input_channels = count("config.input_channels");
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return m;
}

}  // namespace

// ------------------------------------------------------------------ Adam

AdamState::AdamState(const std::vector<nn::Param*>& params) {
  for (const auto* p : params) {
    m1.emplace_back(p->value.shape());
    m2.emplace_back(p->value.shape());
  }
}

void adam_step(const std::vector<nn::Param*>& params, AdamState& state, double lr, const AdamConfig& cfg) {
  if (state.m1.size() != params.size()) throw std::invalid_argument("adam_step: state/parameter count mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Grid& w = params[i]->value;
    const Grid& g = params[i]->grad;
    Grid& m = state.m1[i];
    Grid& v = state.m2[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

double lr_at(std::size_t epoch, double lr0, std::size_t period) {
  if (period == 0) throw std::invalid_argument("lr_at: halving period must be positive");
  return lr0 * std::pow(0.5, static_cast<double>(epoch / period));
}

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  model.validate();
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
  };
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be >= 0");
  require(beta >= 0.0 && std::isfinite(beta), "beta must be >= 0");
  require(temperature > 0.0, "temperature must be positive");
  require(ema_momentum >= 0.0 && ema_momentum <= 1.0, "ema_momentum must lie in [0,1]");
  require(bank_capacity > 0, "bank_capacity must be positive");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "adam_beta1 must lie in [0,1)");
  require(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "adam_beta2 must lie in [0,1)");
  require(adam.eps > 0.0, "adam_eps must be positive");
  require(lr > 0.0, "lr must be positive");
  require(lr_halving_epochs > 0, "lr_halving_epochs must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(iterations > 0, "iterations must be positive");
  require(mask_low >= 0.0 && mask_low < mask_high && mask_high <= 1.0, "mask bounds need 0 <= low < high <= 1");
}

TrainConfig apply_config(TrainConfig cfg, const std::vector<ConfigEntry>& entries) {
  for (const auto& e : entries) {
    const std::string& k = e.key;
    if (k == "alpha") cfg.alpha = parse_double(e);
    else if (k == "beta") cfg.beta = parse_double(e);
    else if (k == "temperature") cfg.temperature = parse_double(e);
    else if (k == "ema_momentum") cfg.ema_momentum = parse_double(e);
    else if (k == "bank_capacity") cfg.bank_capacity = parse_size(e);
    else if (k == "adam_beta1") cfg.adam.beta1 = parse_double(e);
    else if (k == "adam_beta2") cfg.adam.beta2 = parse_double(e);
    else if (k == "adam_eps") cfg.adam.eps = parse_double(e);
    else if (k == "lr") cfg.lr = parse_double(e);
    else if (k == "lr_halving_epochs") cfg.lr_halving_epochs = parse_size(e);
    else if (k == "batch_size") cfg.batch_size = parse_size(e);
    else if (k == "iterations") cfg.iterations = parse_size(e);
    else if (k == "seed") cfg.seed = parse_u64(e);
    else if (k == "mask_low") cfg.mask_low = parse_double(e);
    else if (k == "mask_high") cfg.mask_high = parse_double(e);
    else if (k == "normalize_embedding") cfg.normalize_embedding = parse_bool(e);
    else if (k == "include_positive") cfg.include_positive = parse_bool(e);
    else if (k == "base_channels") cfg.model.base_channels = parse_size(e);
    else if (k == "ffc_blocks_encoder") cfg.model.ffc_blocks_encoder = parse_size(e);
    else if (k == "ffc_blocks_decoder") cfg.model.ffc_blocks_decoder = parse_size(e);
    else if (k == "global_ratio") cfg.model.global_ratio = parse_double(e);
    else if (k == "width_multiplier") cfg.model.width_multiplier = parse_double(e);
    else if (k == "input_channels") cfg.model.input_channels = parse_size(e);
    else throw ConfigError("config line " + std::to_string(e.line) + ": unknown key '" + k + "'");
  }
  return cfg;
}

std::vector<std::pair<std::string, std::string>> describe(const TrainConfig& c) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  auto n = [](double v) { return format_number(v); };
  auto u = [](std::uint64_t v) { return std::to_string(v); };
  return {{"alpha", n(c.alpha)},
          {"beta", n(c.beta)},
          {"temperature", n(c.temperature)},
          {"ema_momentum", n(c.ema_momentum)},
          {"bank_capacity", u(c.bank_capacity)},
          {"adam_beta1", n(c.adam.beta1)},
          {"adam_beta2", n(c.adam.beta2)},
          {"adam_eps", n(c.adam.eps)},
          {"lr", n(c.lr)},
          {"lr_halving_epochs", u(c.lr_halving_epochs)},
          {"batch_size", u(c.batch_size)},
          {"iterations", u(c.iterations)},
          {"seed", u(c.seed)},
          {"mask_low", n(c.mask_low)},
          {"mask_high", n(c.mask_high)},
          {"normalize_embedding", b(c.normalize_embedding)},
          {"include_positive", b(c.include_positive)},
          {"base_channels", u(c.model.base_channels)},
          {"ffc_blocks_encoder", u(c.model.ffc_blocks_encoder)},
          {"ffc_blocks_decoder", u(c.model.ffc_blocks_decoder)},
          {"global_ratio", n(c.model.global_ratio)},
          {"width_multiplier", n(c.model.width_multiplier)},
          {"input_channels", u(c.model.input_channels)}};
}

std::string format_log_row(const IterationLog& r) {
  return std::to_string(r.iter) + "," + format_number(r.lr) + "," + format_number(r.pixel_s) + "," +
         format_number(r.pixel_t) + "," + format_number(r.rdd) + "," + format_number(r.bcd) + "," +
         format_number(r.cos_mean);
}

// --------------------------------------------------------------- Trainer

Trainer::Trainer(TrainConfig cfg, std::vector<SampleTriplet> data, TrainMode mode)
    : cfg_((cfg.validate(), std::move(cfg))),
      data_(std::move(data)),
      mode_(mode),
      bank_(cfg_.bank_capacity) {
  if (data_.empty()) throw std::invalid_argument("train: dataset is empty");
  const Shape& shape = data_.front().full.shape();
  if (shape.size() != 2 || shape[0] % 4 != 0 || shape[1] % 4 != 0) {
    throw std::invalid_argument("train: images must be 2-D with sides divisible by 4, got " + shape_string(shape));
  }
  for (const auto& s : data_) {
    if (s.full.shape() != shape || s.student_input.shape() != shape || s.teacher_input.shape() != shape) {
      throw std::invalid_argument("train: inconsistent image shapes in dataset");
    }
  }
  mask_ = make_band_mask(shape[0] / 4, shape[1] / 4, cfg_.mask_low, cfg_.mask_high);

  enc_s_ = make_net<nn::Encoder>("encoder", cfg_.model, derive_seed(cfg_.seed, kStreamEncoderS));
  dec_s_ = make_net<nn::Decoder>("decoder", cfg_.model, derive_seed(cfg_.seed, kStreamDecoderS));
  student_params_ = joint_parameters(*enc_s_, *dec_s_);
  adam_s_ = AdamState(student_params_);
  if (mode_ == TrainMode::kGloReDi) {
    enc_t_ = make_net<nn::Encoder>("encoder", cfg_.model, derive_seed(cfg_.seed, kStreamEncoderT));
    dec_t_ = make_net<nn::Decoder>("decoder", cfg_.model, derive_seed(cfg_.seed, kStreamDecoderS));
    nn::copy_state(*dec_s_, *dec_t_);
    teacher_params_ = nn::parameters(*enc_t_);
    adam_t_ = AdamState(teacher_params_);
  }
}

Trainer::~Trainer() = default;

std::size_t Trainer::epoch() const { return iteration_ * cfg_.batch_size / data_.size(); }

std::vector<std::size_t> Trainer::batch_indices(std::size_t iter) const {
  const std::size_t d = data_.size();
  std::vector<std::size_t> out;
  out.reserve(cfg_.batch_size);
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> perm(d);
  for (std::size_t k = 0; k < cfg_.batch_size; ++k) {
    const std::size_t pos = iter * cfg_.batch_size + k;
    const std::size_t ep = pos / d;
    if (ep != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::mt19937_64 rng(derive_seed(cfg_.seed, kStreamShuffle + ep));
      std::shuffle(perm.begin(), perm.end(), rng);
      cached_epoch = ep;
    }
    out.push_back(perm[pos % d]);
  }
  return out;
}

IterationLog Trainer::step() {
  const auto idx = batch_indices(iteration_);
  const Grid full = batch_of(data_, idx, &SampleTriplet::full);
  const Grid student_in = batch_of(data_, idx, &SampleTriplet::student_input);
  IterationLog row;
  if (mode_ == TrainMode::kGloReDi) {
    row = step_glore_di(full, batch_of(data_, idx, &SampleTriplet::teacher_input), student_in);
  } else {
    row = step_freenet(full, student_in);
  }
  ++iteration_;
  row.iter = iteration_;
  return row;
}

IterationLog Trainer::step_freenet(const Grid& full, const Grid& student_in) {
  IterationLog row;
  row.lr = lr_at(epoch(), cfg_.lr, cfg_.lr_halving_epochs);
  enc_s_->set_training(true);
  dec_s_->set_training(true);
  const Grid pred = dec_s_->forward(enc_s_->forward(student_in));
  const LossResult pixel = l1_pixel_loss(pred, full);
  check_loss(pixel.value, "pixelS", iteration_ + 1);
  nn::zero_grad(*enc_s_);
  nn::zero_grad(*dec_s_);
  enc_s_->backward(dec_s_->backward(pixel.grad));
  adam_step(student_params_, adam_s_, row.lr, cfg_.adam);
  row.pixel_s = pixel.value;
  return row;
}

IterationLog Trainer::step_glore_di(const Grid& full, const Grid& teacher_in, const Grid& student_in) {
  const std::size_t iter = iteration_ + 1;
  IterationLog row;
  row.lr = lr_at(epoch(), cfg_.lr, cfg_.lr_halving_epochs);
  const std::size_t n = full.extent(0);

  // (1) teacher decoder tracks the student decoder
  ema_update(*dec_t_, *dec_s_, cfg_.ema_momentum);

  // (2) teacher forward; decoder running statistics stay EMA-only
  enc_t_->set_training(true);
  dec_t_->set_training(true);
  const Grid z_t = enc_t_->forward(teacher_in);
  const Grid pred_t = with_frozen_buffers(*dec_t_, [&] { return dec_t_->forward(z_t); });
  const LossResult pixel_t = l1_pixel_loss(pred_t, full);
  check_loss(pixel_t.value, "pixelT", iter);

  // (3) only the teacher encoder steps
  nn::zero_grad(*enc_t_);
  nn::zero_grad(*dec_t_);
  enc_t_->backward(dec_t_->backward(pixel_t.grad));
  adam_step(teacher_params_, adam_t_, row.lr, cfg_.adam);

  // (4) student forward
  enc_s_->set_training(true);
  dec_s_->set_training(true);
  const Grid z_s = enc_s_->forward(student_in);
  const Grid pred_s = dec_s_->forward(z_s);
  const LossResult pixel_s = l1_pixel_loss(pred_s, full);
  check_loss(pixel_s.value, "pixelS", iter);

  const RddResult rdd = rdd_loss(z_s, z_t);
  check_loss(rdd.value, "rdd", iter);

  std::vector<std::vector<double>> teacher_embeddings;
  teacher_embeddings.reserve(n);
  Grid bcd_grad(z_s.shape());
  const std::size_t per_sample = z_s.size() / n;
  const Shape sample_shape(z_s.shape().begin() + 1, z_s.shape().end());
  double bcd_total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const SpectralEmbedding e_s = bandpass_embed(take_sample(z_s, b), mask_, cfg_.normalize_embedding);
    SpectralEmbedding e_t = bandpass_embed(take_sample(z_t, b), mask_, cfg_.normalize_embedding);
    const VectorLoss l = bcd_loss(e_s.values, e_t.values, bank_, {cfg_.temperature, cfg_.include_positive});
    bcd_total += l.value;
    if (cfg_.beta > 0.0 && !bank_.empty()) {
      const Grid g = bandpass_embed_backward(l.grad, e_s, mask_, sample_shape);
      std::copy(g.data(), g.data() + per_sample, bcd_grad.data() + b * per_sample);
    }
    teacher_embeddings.push_back(std::move(e_t.values));
  }
  const double bcd = bcd_total / static_cast<double>(n);
  check_loss(bcd, "bcd", iter);

  // (5) student step on the compound loss
  nn::zero_grad(*enc_s_);
  nn::zero_grad(*dec_s_);
  Grid dz = dec_s_->backward(pixel_s.grad);
  if (cfg_.alpha > 0.0) dz.add_scaled(rdd.grad, cfg_.alpha);
  if (cfg_.beta > 0.0) dz.add_scaled(bcd_grad, cfg_.beta / static_cast<double>(n));
  enc_s_->backward(dz);
  adam_step(student_params_, adam_s_, row.lr, cfg_.adam);

  // (6) bank update last
  bank_.push_batch(teacher_embeddings);

  row.pixel_s = pixel_s.value;
  row.pixel_t = pixel_t.value;
  row.rdd = rdd.value;
  row.bcd = bcd;
  row.cos_mean = rdd.cos_mean;
  return row;
}

void Trainer::run(const std::function<void(const IterationLog&)>& on_row) {
  while (iteration_ < cfg_.iterations) {
    const IterationLog row = step();
    if (on_row) on_row(row);
  }
}

nn::Checkpoint Trainer::student_checkpoint() {
  nn::Checkpoint ckpt;
  add_model_config(ckpt, cfg_.model);
  ckpt.add_module(*enc_s_);
  ckpt.add_module(*dec_s_);
  return ckpt;
}

nn::Checkpoint Trainer::state_checkpoint() {
  nn::Checkpoint ckpt;
  add_model_config(ckpt, cfg_.model);
  ckpt.add_scalar("meta.iteration", static_cast<double>(iteration_));
  ckpt.add_scalar("meta.glore_di", mode_ == TrainMode::kGloReDi ? 1.0 : 0.0);
  ckpt.add_module(*enc_s_, "student.");
  ckpt.add_module(*dec_s_, "student.");
  add_adam(ckpt, "adam.student", student_params_, adam_s_);
  if (mode_ == TrainMode::kGloReDi) {
    ckpt.add_module(*enc_t_, "teacher.");
    ckpt.add_module(*dec_t_, "teacher.");
    add_adam(ckpt, "adam.teacher", teacher_params_, adam_t_);
    if (!bank_.empty()) {
      const std::size_t len = bank_.at(0).size();
      Grid entries({bank_.size(), len});
      for (std::size_t i = 0; i < bank_.size(); ++i) std::copy_n(bank_.at(i).data(), len, entries.data() + i * len);
      ckpt.add("bank.entries", std::move(entries));
    }
  }
  return ckpt;
}

void Trainer::restore(const nn::Checkpoint& st) {
  const bool glore_di = st.scalar("meta.glore_di") != 0.0;
  if (glore_di != (mode_ == TrainMode::kGloReDi)) {
    throw FormatError("checkpoint: training mode differs from the resumed run");
  }
  const nn::EncoderDecoderConfig m = read_model_config(st);
  if (m.base_channels != cfg_.model.base_channels || m.ffc_blocks_encoder != cfg_.model.ffc_blocks_encoder ||
      m.ffc_blocks_decoder != cfg_.model.ffc_blocks_decoder || m.input_channels != cfg_.model.input_channels ||
      m.global_channels() != cfg_.model.global_channels() || m.stem_channels() != cfg_.model.stem_channels()) {
    throw FormatError("checkpoint: model configuration differs from the resumed run");
  }
  st.load_module(*enc_s_, "student.");
  st.load_module(*dec_s_, "student.");
  load_adam(st, "adam.student", student_params_, adam_s_);
  if (glore_di) {
    st.load_module(*enc_t_, "teacher.");
    st.load_module(*dec_t_, "teacher.");
    load_adam(st, "adam.teacher", teacher_params_, adam_t_);
    bank_.clear();
    if (st.contains("bank.entries")) {
      const Grid& entries = st.get("bank.entries");
      if (entries.rank() != 2) throw FormatError("checkpoint: bank.entries must be 2-D");
      const std::size_t len = entries.extent(1);
      for (std::size_t i = 0; i < entries.extent(0); ++i) {
        bank_.push(std::vector<double>(entries.data() + i * len, entries.data() + (i + 1) * len));
      }
    }
  }
  iteration_ = static_cast<std::size_t>(st.scalar("meta.iteration"));
}

std::vector<IterationLog> train_glore_di(const std::vector<SampleTriplet>& data, const TrainConfig& cfg) {
  Trainer trainer(cfg, data, TrainMode::kGloReDi);
  std::vector<IterationLog> log;
  trainer.run([&](const IterationLog& r) { log.push_back(r); });
  return log;
}

std::vector<IterationLog> train_freenet(const std::vector<SampleTriplet>& data, const TrainConfig& cfg) {
  Trainer trainer(cfg, data, TrainMode::kFreeNet);
  std::vector<IterationLog> log;
  trainer.run([&](const IterationLog& r) { log.push_back(r); });
  return log;
}

// ---------------------------------------------------------- StudentModel

StudentModel load_student(const nn::Checkpoint& ckpt) {
  StudentModel model;
  model.config = read_model_config(ckpt);
  std::mt19937_64 rng(0);
  model.encoder = std::make_unique<nn::Encoder>("encoder", model.config, rng);
  model.decoder = std::make_unique<nn::Decoder>("decoder", model.config, rng);
  ckpt.load_module(*model.encoder);
  ckpt.load_module(*model.decoder);
  model.encoder->set_training(false);
  model.decoder->set_training(false);
  return model;
}

Grid StudentModel::reconstruct(const Grid& image) {
  if (image.rank() != 2) throw std::invalid_argument("reconstruct: expected a 2-D image");
  if (config.input_channels != 1) throw std::invalid_argument("reconstruct: model expects multi-channel input");
  encoder->set_training(false);
  decoder->set_training(false);
  const Grid out = decoder->forward(encoder->forward(image.reshaped({1, 1, image.extent(0), image.extent(1)})));
  return out.reshaped({image.extent(0), image.extent(1)});
}

}  // namespace gloredi
