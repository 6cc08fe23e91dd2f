#include <doctest.h>

#include <cmath>

#include "gloredi/distill.hpp"
#include "gloredi/nn/layers.hpp"
#include "test_util.hpp"

using namespace gloredi;

namespace {

std::vector<double> unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Per-location cosine distance averaged over locations.
double rdd_oracle(const Grid& s, const Grid& t) {
  const std::size_t c = s.extent(0), hw = s.size() / c;
  double total = 0.0;
  for (std::size_t p = 0; p < hw; ++p) {
    double st = 0.0, ss = 0.0, tt = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      st += s[k * hw + p] * t[k * hw + p];
      ss += s[k * hw + p] * s[k * hw + p];
      tt += t[k * hw + p] * t[k * hw + p];
    }
    total += 1.0 - st / std::max(std::sqrt(ss * tt), kCosineEps);
  }
  return total / static_cast<double>(hw);
}

}  // namespace

TEST_CASE("pixel L1 loss") {
  std::mt19937_64 rng(1);
  Grid p = testutil::random_grid({2, 1, 4, 4}, rng);
  CHECK(l1_pixel_loss(p, p).value == 0.0);
  Grid t = p;
  for (auto& v : t.values()) v -= 0.5;
  CHECK(l1_pixel_loss(p, t).value == doctest::Approx(0.5).epsilon(1e-12));
  const Grid target = testutil::random_grid(p.shape(), rng);
  const LossResult r = l1_pixel_loss(p, target);
  CHECK(testutil::fd_max_rel_err(p, r.grad, [&] { return l1_pixel_loss(p, target).value; }, 32, rng, 1e-6) < 1e-6);
  CHECK_THROWS_AS(l1_pixel_loss(p, Grid({2, 1, 4, 3})), std::invalid_argument);
}

TEST_CASE("directional distillation closed forms") {
  std::mt19937_64 rng(2);
  const Grid t = testutil::random_grid({4, 3, 3}, rng);
  CHECK(std::abs(rdd_loss(t, t).value) < 1e-12);
  CHECK(rdd_loss(-1.0 * t, t).value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(rdd_loss(3.5 * t, t).value) < 1e-12);
  CHECK(rdd_loss(t, t).cos_mean == doctest::Approx(1.0));
  CHECK_THROWS_AS(rdd_loss(t, Grid({4, 3, 2})), std::invalid_argument);
}

TEST_CASE("directional distillation matches the oracle and finite differences") {
  std::mt19937_64 rng(3);
  Grid s = testutil::random_grid({4, 3, 3}, rng);
  const Grid t = testutil::random_grid({4, 3, 3}, rng);
  const RddResult r = rdd_loss(s, t);
  CHECK(r.value == doctest::Approx(rdd_oracle(s, t)).epsilon(1e-12));
  CHECK(r.value >= 0.0);
  CHECK(r.value <= 2.0);
  CHECK(testutil::fd_max_rel_err(s, r.grad, [&] { return rdd_loss(s, t).value; }, 36, rng, 1e-6) < 1e-4);

  // Batched input averages the per-sample losses.
  Grid sb = testutil::random_grid({2, 4, 3, 3}, rng);
  const Grid tb = testutil::random_grid({2, 4, 3, 3}, rng);
  const double expected = 0.5 * (rdd_oracle(take_sample(sb, 0), take_sample(tb, 0)) +
                                 rdd_oracle(take_sample(sb, 1), take_sample(tb, 1)));
  const RddResult rb = rdd_loss(sb, tb);
  CHECK(rb.value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(testutil::fd_max_rel_err(sb, rb.grad, [&] { return rdd_loss(sb, tb).value; }, 72, rng, 1e-6) < 1e-4);
}

TEST_CASE("directional distillation is invariant to per-location rescaling") {
  std::mt19937_64 rng(4);
  const Grid s = testutil::random_grid({3, 4, 4}, rng);
  const Grid t = testutil::random_grid({3, 4, 4}, rng);
  Grid scaled = s;
  std::uniform_real_distribution<double> factor(0.1, 10.0);
  for (std::size_t p = 0; p < 16; ++p) {
    const double f = factor(rng);
    for (std::size_t c = 0; c < 3; ++c) scaled[c * 16 + p] *= f;
  }
  CHECK(rdd_loss(scaled, t).value == doctest::Approx(rdd_loss(s, t).value).epsilon(1e-12));
}

TEST_CASE("directional distillation clamps zero vectors") {
  const Grid zero({2, 2, 2});
  Grid t({2, 2, 2}, 1.0);
  const RddResult r = rdd_loss(zero, t);
  CHECK(r.value == doctest::Approx(1.0));
  CHECK(r.grad.all_finite());
}

TEST_CASE("contrastive loss closed forms") {
  MemoryBank bank(10);
  const std::vector<double> z{1.0, 0.0, 0.0};
  CHECK(bcd_loss(z, z, bank).value == 0.0);

  bank.push({0.0, 1.0, 0.0});
  CHECK(bcd_loss(z, z, bank).value == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0))));
  CHECK(bcd_loss(z, z, bank).value == doctest::Approx(0.3133).epsilon(1e-4));

  for (std::size_t k : {1u, 3u, 7u}) {
    MemoryBank copies(10);
    for (std::size_t i = 0; i < k; ++i) copies.push(z);
    CHECK(bcd_loss(z, z, copies).value == doctest::Approx(std::log(static_cast<double>(k + 1))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(bcd_loss(z, {1.0, 0.0}, bank), std::invalid_argument);
  CHECK_THROWS_AS(bcd_loss({1.0, 0.0}, {1.0, 0.0}, bank), std::invalid_argument);
}

TEST_CASE("contrastive loss gradients and monotonicity") {
  std::mt19937_64 rng(5);
  MemoryBank bank(20);
  for (int i = 0; i < 6; ++i) bank.push(unit(random_vector(8, rng)));
  const std::vector<double> t = unit(random_vector(8, rng));
  for (bool include_positive : {true, false}) {
    for (double tau : {1.0, 0.3}) {
      const BcdOptions opt{tau, include_positive};
      std::vector<double> s = random_vector(8, rng);
      Grid sg({8}, s);
      const VectorLoss r = bcd_loss(s, t, bank, opt);
      const Grid analytic({8}, r.grad);
      auto loss = [&] { return bcd_loss(sg.storage(), t, bank, opt).value; };
      CHECK(testutil::fd_max_rel_err(sg, analytic, loss, 8, rng, 1e-6) < 1e-4);
      if (include_positive) CHECK(r.value >= 0.0);
    }
  }
  // Moving the student toward the teacher lowers the loss.
  std::vector<double> s = unit(random_vector(8, rng));
  double previous = bcd_loss(s, t, bank).value;
  for (int step = 0; step < 5; ++step) {
    for (std::size_t i = 0; i < 8; ++i) s[i] = 0.7 * s[i] + 0.3 * t[i];
    s = unit(s);
    const double now = bcd_loss(s, t, bank).value;
    CHECK(dot(s, t) > 0.0);
    CHECK(now < previous);
    previous = now;
  }
}

TEST_CASE("memory bank is a bounded FIFO") {
  MemoryBank bank(300);
  for (int i = 0; i < 350; ++i) bank.push({static_cast<double>(i), 0.0});
  CHECK(bank.size() == 300);
  CHECK(bank.at(0)[0] == 50.0);
  CHECK(bank.at(299)[0] == 349.0);
  for (std::size_t i = 0; i < bank.size(); ++i) CHECK(bank.at(i)[0] == static_cast<double>(50 + i));
  bank.push_batch({});
  CHECK(bank.size() == 300);
  CHECK_THROWS_AS(bank.push({1.0}), std::invalid_argument);
  CHECK_THROWS_AS(MemoryBank(0), std::invalid_argument);

  MemoryBank small(3);
  small.push_batch({{1.0}, {2.0}});
  CHECK(small.at(1)[0] == 2.0);
  small.push_batch({{3.0}, {4.0}});
  CHECK(small.size() == 3);
  CHECK(small.at(0)[0] == 2.0);
  small.clear();
  CHECK(small.empty());
}

TEST_CASE("EMA update") {
  std::mt19937_64 rng(6);
  nn::Conv2d student("net", 2, 3, 3, 1, 1, true, rng);
  nn::Conv2d teacher("net", 2, 3, 3, 1, 1, true, rng);
  const Grid t0 = teacher.weight().value;

  ema_update(teacher, student, 1.0);
  CHECK(teacher.weight().value.storage() == t0.storage());

  const double m = 0.9;
  const double gap0 = (t0 - student.weight().value).l2_norm();
  for (int k = 1; k <= 5; ++k) {
    EmaTracker(m).update(teacher, student);
    const double gap = (teacher.weight().value - student.weight().value).l2_norm();
    CHECK(gap == doctest::Approx(std::pow(m, k) * gap0).epsilon(1e-6));
  }
  ema_update(teacher, student, 0.0);
  CHECK(teacher.weight().value.storage() == student.weight().value.storage());

  nn::BatchNorm2d bn_s("bn", 2), bn_t("bn", 2);
  bn_s.running_mean() = Grid({2}, 4.0);
  ema_update(bn_t, bn_s, 0.75);
  CHECK(bn_t.running_mean()[0] == doctest::Approx(1.0));

  nn::Conv2d other("other", 2, 3, 3, 1, 1, true, rng);
  CHECK_THROWS_AS(ema_update(teacher, other, 0.5), std::invalid_argument);
}
