#include <doctest.h>

#include <cmath>
#include <limits>

#include "gloredi/train.hpp"
#include "test_util.hpp"

using namespace gloredi;

namespace {

std::vector<SampleTriplet> tiny_data(std::size_t count, std::size_t multiplier = 2) {
  DatasetConfig d;
  d.count = count;
  d.geometry.image_size = 16;
  d.geometry.n_detectors = 24;
  d.teacher_multiplier = multiplier;
  d.seed = 3;
  return build_dataset(d);
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.model.ffc_blocks_encoder = 1;
  cfg.model.ffc_blocks_decoder = 1;
  cfg.batch_size = 2;
  cfg.iterations = 4;
  cfg.bank_capacity = 6;
  cfg.seed = 11;
  return cfg;
}

bool same_rows(const std::vector<IterationLog>& a, const std::vector<IterationLog>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (format_log_row(a[i]) != format_log_row(b[i])) return false;
  }
  return true;
}

std::vector<Grid> snapshot(nn::Module& m) {
  std::vector<Grid> out;
  for (const auto& s : nn::state(m)) out.push_back(*s.grid);
  return out;
}

}  // namespace

TEST_CASE("Adam") {
  nn::Param p{"theta", Grid({1}, 1.0), Grid({1})};
  std::vector<nn::Param*> params{&p};
  AdamState state(params);
  adam_step(params, state, 1e-2, AdamConfig{});
  CHECK(p.value[0] == 1.0);
  CHECK(state.step == 1);

  p.value[0] = 1.0;
  AdamState fresh(params);
  std::size_t steps = 0;
  while (std::abs(p.value[0]) >= 1e-2 && steps < 500) {
    p.grad[0] = 2.0 * p.value[0];
    adam_step(params, fresh, 1e-2, AdamConfig{});
    ++steps;
  }
  CHECK(std::abs(p.value[0]) < 1e-2);
  CHECK(steps <= 500);

  nn::Param q{"theta", Grid({1}, 1.0), Grid({1})};
  std::vector<nn::Param*> qs{&q};
  AdamState qstate(qs);
  p.value[0] = 1.0;
  AdamState pstate(params);
  for (int i = 0; i < 20; ++i) {
    p.grad[0] = 2.0 * p.value[0];
    q.grad[0] = 2.0 * q.value[0];
    adam_step(params, pstate, 1e-2, AdamConfig{});
    adam_step(qs, qstate, 1e-2, AdamConfig{});
  }
  CHECK(p.value[0] == q.value[0]);
}

TEST_CASE("learning-rate schedule") {
  CHECK(lr_at(0, 1e-3, 40) == doctest::Approx(1e-3));
  CHECK(lr_at(39, 1e-3, 40) == doctest::Approx(1e-3));
  CHECK(lr_at(40, 1e-3, 40) == doctest::Approx(5e-4));
  CHECK(lr_at(85, 1e-3, 40) == doctest::Approx(2.5e-4));
}

TEST_CASE("training configuration") {
  TrainConfig cfg = tiny_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Trainer(cfg, tiny_data(4), TrainMode::kGloReDi), std::invalid_argument);
  cfg = tiny_config();
  cfg.ema_momentum = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Trainer(tiny_config(), {}, TrainMode::kGloReDi), std::invalid_argument);

  const auto entries = parse_config(
      "# smoke run\n"
      "alpha = 0.5\n"
      "iterations=12\n"
      "width_multiplier = 0.5\n"
      "normalize_embedding = off\n"
      "adam_beta1 = 0.9\n");
  const TrainConfig applied = apply_config(TrainConfig{}, entries);
  CHECK(applied.alpha == 0.5);
  CHECK(applied.iterations == 12);
  CHECK(applied.model.width_multiplier == 0.5);
  CHECK_FALSE(applied.normalize_embedding);
  CHECK(applied.adam.beta1 == 0.9);
  CHECK_THROWS_AS(apply_config(TrainConfig{}, parse_config("colour = red\n")), ConfigError);
  CHECK_THROWS_AS(apply_config(TrainConfig{}, parse_config("iterations = many\n")), ConfigError);
  CHECK_THROWS_AS(apply_config(TrainConfig{}, parse_config("iterations = -3\n")), ConfigError);
  CHECK_THROWS_AS(parse_config("alpha 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("alpha = 1\nalpha = 2\n"), ConfigError);

  std::string text;
  for (const auto& [k, v] : describe(applied)) text += k + " = " + v + "\n";
  const TrainConfig again = apply_config(TrainConfig{}, parse_config(text));
  CHECK(describe(again) == describe(applied));
}

TEST_CASE("batches follow a seeded per-epoch permutation") {
  TrainConfig cfg = tiny_config();
  Trainer t(cfg, tiny_data(6), TrainMode::kFreeNet);
  std::vector<std::size_t> seen;
  for (std::size_t it = 0; it < 3; ++it) {
    const auto b = t.batch_indices(it);
    CHECK(b.size() == 2);
    seen.insert(seen.end(), b.begin(), b.end());
  }
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  Trainer u(cfg, tiny_data(6), TrainMode::kFreeNet);
  CHECK(u.batch_indices(4) == t.batch_indices(4));
}

TEST_CASE("training logs are deterministic") {
  const auto data = tiny_data(4);
  const TrainConfig cfg = tiny_config();
  const auto a = train_glore_di(data, cfg);
  const auto b = train_glore_di(data, cfg);
  REQUIRE(a.size() == 4);
  CHECK(same_rows(a, b));
  CHECK(a[0].iter == 1);
  CHECK(a[3].iter == 4);
  CHECK(a[0].lr == cfg.lr);
}

TEST_CASE("without distillation GloReDi follows the FreeNet trajectory") {
  const auto data = tiny_data(4, 1);
  TrainConfig cfg = tiny_config();
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  Trainer glore(cfg, data, TrainMode::kGloReDi);
  Trainer free(cfg, data, TrainMode::kFreeNet);
  for (int i = 0; i < 3; ++i) {
    const IterationLog g = glore.step();
    const IterationLog f = free.step();
    CHECK(g.pixel_s == f.pixel_s);
  }
  const auto a = snapshot(glore.student_decoder()), b = snapshot(free.student_decoder());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].storage() == b[i].storage());
}

TEST_CASE("teacher decoder moves only by EMA") {
  TrainConfig cfg = tiny_config();
  Trainer t(cfg, tiny_data(4), TrainMode::kGloReDi);
  const auto initial_student = snapshot(t.student_decoder());
  const auto initial_teacher = snapshot(*t.teacher_decoder());
  for (std::size_t i = 0; i < initial_student.size(); ++i) {
    CHECK(initial_student[i].storage() == initial_teacher[i].storage());
  }

  const IterationLog first = t.step();
  CHECK(first.bcd == 0.0);
  CHECK(t.bank().size() == cfg.batch_size);

  for (int k = 0; k < 2; ++k) {
    const auto student = snapshot(t.student_decoder());
    const auto teacher = snapshot(*t.teacher_decoder());
    t.step();
    const auto after = snapshot(*t.teacher_decoder());
    const double m = cfg.ema_momentum;
    for (std::size_t i = 0; i < after.size(); ++i) {
      const Grid expected = m * teacher[i] + (1.0 - m) * student[i];
      CHECK((after[i] - expected).max_abs() < 1e-12);
    }
  }
  CHECK(t.bank().size() == 6);
}

TEST_CASE("non-finite losses name the offending term") {
  auto data = tiny_data(4);
  for (auto& s : data) s.full[5] = std::numeric_limits<double>::quiet_NaN();
  Trainer t(tiny_config(), data, TrainMode::kGloReDi);
  try {
    t.step();
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("pixelT") != std::string::npos);
    CHECK(msg.find("iteration 1") != std::string::npos);
  }
  Trainer f(tiny_config(), data, TrainMode::kFreeNet);
  CHECK_THROWS_AS(f.step(), NumericalError);
}

TEST_CASE("resume continues the log") {
  const auto data = tiny_data(4);
  TrainConfig cfg = tiny_config();
  cfg.iterations = 6;
  const auto straight = train_glore_di(data, cfg);

  Trainer first(cfg, data, TrainMode::kGloReDi);
  for (int i = 0; i < 3; ++i) first.step();
  const nn::Checkpoint state = first.state_checkpoint();

  Trainer resumed(cfg, data, TrainMode::kGloReDi);
  resumed.restore(state);
  CHECK(resumed.iteration() == 3);
  CHECK(resumed.bank().size() == first.bank().size());
  std::vector<IterationLog> tail;
  resumed.run([&](const IterationLog& row) { tail.push_back(row); });
  REQUIRE(tail.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(format_log_row(tail[i]) == format_log_row(straight[i + 3]));

  // Through a file the tensors are rounded to float32.
  const auto dir = testutil::scratch_dir("train_resume");
  nn::save_checkpoint(dir / "state.gdc", state);
  Trainer from_file(cfg, data, TrainMode::kGloReDi);
  from_file.restore(nn::load_checkpoint(dir / "state.gdc"));
  const IterationLog row = from_file.step();
  CHECK(row.iter == 4);
  CHECK(row.pixel_s == doctest::Approx(straight[3].pixel_s).epsilon(1e-4));

  TrainConfig other = cfg;
  other.model.ffc_blocks_encoder = 2;
  Trainer mismatch(other, data, TrainMode::kGloReDi);
  CHECK_THROWS(mismatch.restore(state));
}

TEST_CASE("student checkpoint reproduces reconstructions") {
  const auto data = tiny_data(4);
  Trainer t(tiny_config(), data, TrainMode::kGloReDi);
  t.run();
  const nn::Checkpoint ckpt = t.student_checkpoint();
  StudentModel in_memory = load_student(ckpt);
  t.student_encoder().set_training(false);
  t.student_decoder().set_training(false);
  const Grid direct = t.student_decoder().forward(
      t.student_encoder().forward(data[1].student_input.reshaped({1, 1, 16, 16})));
  CHECK(in_memory.reconstruct(data[1].student_input).storage() == direct.reshaped({16, 16}).storage());

  const auto dir = testutil::scratch_dir("train_student");
  nn::save_checkpoint(dir / "student.gdc", ckpt);
  StudentModel a = load_student(nn::load_checkpoint(dir / "student.gdc"));
  StudentModel b = load_student(nn::load_checkpoint(dir / "student.gdc"));
  CHECK(a.reconstruct(data[2].student_input).storage() == b.reconstruct(data[2].student_input).storage());
  CHECK(a.config.ffc_blocks_encoder == 1);
}
