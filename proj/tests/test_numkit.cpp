#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "xgkn/error.hpp"
#include "xgkn/num/matrix.hpp"
#include "xgkn/num/optim.hpp"
#include "xgkn/num/stats.hpp"
#include "xgkn/num/tape.hpp"

using namespace xgkn;
using namespace xgkn::num;

TEST(Matrix, MatmulVariantsAgree) {
  Rng rng(1);
  const Matrix a = fixtures::random_matrix(3, 4, rng);
  const Matrix b = fixtures::random_matrix(5, 4, rng);
  EXPECT_LT(max_abs_diff(matmul_bt(a, b), matmul(a, b.transposed())), 1e-14);
  EXPECT_LT(max_abs_diff(matmul_at(a.transposed(), b.transposed()), matmul(a, b.transposed())), 1e-14);
}

TEST(Tape, LinearGradientIsColumnSums) {
  Rng rng(2);
  Matrix a = fixtures::random_matrix(3, 4, rng);
  Parameter x("x", fixtures::random_matrix(4, 1, rng));
  Tape tape;
  Var out = sum(matmul(tape.constant(a), tape.parameter(x)));
  tape.backward(out);
  for (std::size_t j = 0; j < 4; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < 3; ++i) col += a(i, j);
    EXPECT_NEAR(x.grad[j], col, 1e-14);
  }
}

TEST(Tape, SquareAtThree) {
  Parameter x("x", Matrix(1, 1, 3.0));
  Tape tape;
  tape.backward(sum(square(tape.parameter(x))));
  EXPECT_DOUBLE_EQ(x.grad[0], 6.0);
}

TEST(Tape, ChainMatmulLogSumPassesFiniteDifferences) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    Parameter a("a", fixtures::random_matrix(3, 3, rng, 0.2, 1.0));
    Parameter b("b", fixtures::random_matrix(3, 3, rng, 0.2, 1.0));
    std::vector<Parameter*> ps{&a, &b};
    const double err = finite_difference_check(
        [&](Tape& tape) { return sum(log(matmul(tape.parameter(a), tape.parameter(b)))); }, ps);
    EXPECT_LT(err, 1e-4);
  }
}

TEST(Tape, OpVocabularyPassesFiniteDifferences) {
  Rng rng(4);
  Parameter a("a", fixtures::random_matrix(4, 3, rng, 0.3, 1.2));
  Parameter r("r", fixtures::random_matrix(1, 3, rng, 0.3, 1.2));
  Parameter s("s", fixtures::random_matrix(1, 1, rng, 0.5, 1.5));
  Parameter sq("sq", fixtures::random_matrix(4, 4, rng));
  std::vector<Parameter*> ps{&a, &r, &s, &sq};
  const std::vector<int> labels{0, 2, 1, 0};
  const std::vector<std::size_t> rows{3, 0};
  const double err = finite_difference_check(
      [&](Tape& tape) {
        Var va = tape.parameter(a), vr = tape.parameter(r), vs = tape.parameter(s);
        Var x = add_row(mul_row(va, vr), vr);
        Var y = div_scalar(sigmoid(x), vs);
        Var z = xlogx(add_scalar(y, 0.5));
        Var w = rsqrt(add_scalar(square(relu(scale(sub(x, y), 1.5))), 1.0));
        Var c = concat_cols(std::vector<Var>{z, w});
        Var g = gather_rows(c, rows);
        Var st = stack_rows(std::vector<Var>{col_mean(x), col_sum(x)});
        Var sym = symmetric_sigmoid(tape.parameter(sq));
        Var ce = cross_entropy(matmul_bt(transpose(transpose(va)), mul(va, va)), labels);
        Var rn = row_normalize(clamp_min(x, 0.4));
        return add(add(add(sum(g), frobenius_norm(st)), add(sum(sym), ce)), sum(rn));
      },
      ps);
  EXPECT_LT(err, 1e-4);
}

TEST(Tape, RowNormalizeZeroRowHasZeroGradient) {
  Parameter a("a", Matrix(2, 2, std::vector<double>{0.0, 0.0, 3.0, 4.0}));
  std::vector<std::size_t> zero;
  Tape tape;
  Var out = sum(row_normalize(tape.parameter(a), 1e-12, &zero));
  EXPECT_EQ(zero, std::vector<std::size_t>{0});
  tape.backward(out);
  EXPECT_EQ(a.grad[0], 0.0);
  EXPECT_EQ(a.grad[1], 0.0);
  EXPECT_NEAR(out.scalar(), 1.4, 1e-15);
}

TEST(Adam, ZeroGradientNoDecayLeavesParams) {
  Parameter x("x", Matrix(2, 2, 0.7));
  std::vector<Parameter*> ps{&x};
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  auto st = make_adam_state(ps, cfg);
  adam_step(ps, st);
  EXPECT_EQ(x.value, Matrix(2, 2, 0.7));
}

TEST(Adam, FirstStepIsLearningRate) {
  Parameter x("x", Matrix(1, 1, 0.0));
  std::vector<Parameter*> ps{&x};
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.0;
  auto st = make_adam_state(ps, cfg);
  x.grad[0] = 1.0;
  adam_step(ps, st);
  EXPECT_NEAR(x.value[0], -0.01, 1e-9);
  EXPECT_EQ(x.grad[0], 0.0);
}

TEST(Adam, ConvergesOnQuadratic) {
  Parameter x("x", Matrix(1, 1, 0.0));
  std::vector<Parameter*> ps{&x};
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.0;
  auto st = make_adam_state(ps, cfg);
  for (int i = 0; i < 500; ++i) {
    Tape tape;
    tape.backward(sum(square(add_scalar(tape.parameter(x), -2.0))));
    adam_step(ps, st);
  }
  EXPECT_LT(std::abs(x.value[0] - 2.0), 0.05);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  Rng rng(5);
  Parameter x("x", fixtures::random_matrix(3, 3, rng));
  const Matrix before = x.value;
  std::vector<Parameter*> ps{&x};
  AdamConfig cfg;
  cfg.lr = 0.0;
  cfg.weight_decay = 0.0;
  auto st = make_adam_state(ps, cfg);
  for (int i = 0; i < 5; ++i) {
    x.grad = fixtures::random_matrix(3, 3, rng);
    adam_step(ps, st);
  }
  EXPECT_EQ(x.value, before);
}

TEST(Softmax, Examples) {
  const std::vector<double> u = softmax(std::vector<double>(4, 2.5));
  for (double v : u) EXPECT_DOUBLE_EQ(v, 0.25);
  const std::vector<double> w = softmax(std::vector<double>{0.0, std::log(3.0)});
  EXPECT_NEAR(w[0], 0.25, 1e-15);
  EXPECT_NEAR(w[1], 0.75, 1e-15);
}

TEST(Softmax, ProbabilityVectorForExtremeInputs) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(1 + rng.below(20));
    for (double& x : v) x = (rng.uniform() - 0.5) * 2000.0;
    const auto p = softmax(v);
    double total = 0.0;
    for (double x : p) {
      EXPECT_GE(x, 0.0);
      total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Spearman, Examples) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_NEAR(spearman_abs(x, x), 1.0, 1e-15);
  EXPECT_NEAR(spearman_abs(x, std::vector<double>{5, 4, 3, 2, 1}), 1.0, 1e-15);
  // Distinct values: rho = 1 - 6 sum d^2 / (n (n^2 - 1)).
  const std::vector<double> y{3, 1, 4, 5, 2};
  double d2 = 0.0;
  for (std::size_t i = 0; i < 5; ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
  EXPECT_NEAR(spearman_abs(x, y), std::abs(1.0 - 6.0 * d2 / (5.0 * 24.0)), 1e-12);
  EXPECT_NEAR(spearman_abs(x, y), 0.2, 1e-12);
  EXPECT_EQ(spearman_abs(x, std::vector<double>(5, 1.0)), 0.0);
}

TEST(Spearman, SymmetricAndMonotoneInvariant) {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(12), b(12);
    for (auto& v : a) v = rng.uniform();
    for (auto& v : b) v = std::floor(rng.uniform() * 5);
    const double r = spearman_abs(a, b);
    EXPECT_NEAR(r, spearman_abs(b, a), 1e-14);
    std::vector<double> ta(a);
    for (auto& v : ta) v = std::exp(3.0 * v) - 7.0;
    EXPECT_NEAR(r, spearman_abs(ta, b), 1e-14);
  }
}

TEST(Ranks, TiesShareMean) {
  EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Stats, MeanAndSampleStd) {
  const std::vector<double> v{0.4, 0.5, 0.6};
  EXPECT_NEAR(mean(v), 0.5, 1e-15);
  EXPECT_NEAR(sample_std(v), 0.1, 1e-15);
  EXPECT_EQ(sample_std(std::vector<double>{0.3}), 0.0);
}

TEST(Welch, IdenticalSamples) {
  const std::vector<double> a{1, 2, 3, 4};
  const auto r = welch_ttest(a, a);
  EXPECT_EQ(r.t, 0.0);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
  EXPECT_FALSE(r.significant);
}

TEST(Welch, TextbookFixture) {
  const auto r = welch_ttest(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{2, 3, 4, 5, 6});
  EXPECT_NEAR(r.t, -1.0, 1e-12);
  EXPECT_NEAR(r.df, 8.0, 1e-12);
  EXPECT_NEAR(r.p_value, 0.3466, 1e-4);
}

TEST(Welch, LargeSeparation) {
  Rng rng(8);
  std::vector<double> a(10), b(10);
  for (std::size_t i = 0; i < 10; ++i) {
    a[i] = rng.normal();
    b[i] = a[i] + 10.0;
  }
  const auto r = welch_ttest(a, b);
  EXPECT_LT(r.p_value, 0.001);
  EXPECT_TRUE(r.significant);
}

TEST(Welch, ZeroVarianceBothSidesIsAnError) {
  EXPECT_THROW(welch_ttest(std::vector<double>{1, 1}, std::vector<double>{2, 2}), Error);
  EXPECT_THROW(welch_ttest(std::vector<double>{1}, std::vector<double>{2, 3}), Error);
}
