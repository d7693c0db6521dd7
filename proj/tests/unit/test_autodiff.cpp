#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "bridgedpi/ad/gradcheck.hpp"
#include "bridgedpi/ad/ops.hpp"
#include "bridgedpi/ad/primitive.hpp"

using namespace bridgedpi::ad;
using T = Tensor<double>;

namespace {

T random_tensor(Shape shape, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto &x : v)
    x = dist(rng);
  return T(std::move(shape), std::move(v));
}

// Scalarises an arbitrary output with fixed random weights so every entry
// contributes a distinct gradient.
T weighted_sum(const T &out, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  return ops::sum(ops::mul(out, random_tensor(out.shape(), rng, 0.5, 1.5)));
}

double check(const std::function<T()> &fn, std::vector<std::pair<std::string, T>> params,
             GradCheckOptions options = {}) {
  const auto report = finite_difference_check<double>(fn, std::move(params), options);
  for (const auto &p : report.params)
    EXPECT_GT(p.checked, 0u) << p.name;
  return report.max_rel_error;
}

constexpr double kTol = 1e-4;

} // namespace

TEST(Primitives, ForwardValues) {
  EXPECT_DOUBLE_EQ(ops::sigmoid(T::scalar(0.0)).item(), 0.5);
  const auto r = ops::relu(T({3}, {-1.0, 0.0, 2.0}));
  EXPECT_EQ(r.values(), (std::vector<double>{0.0, 0.0, 2.0}));
  const auto c = ops::cosine_similarity_matrix(T({2, 3}, {1.0, 2.0, 3.0, 1.0, 2.0, 3.0}));
  ASSERT_EQ(c.shape(), (Shape{2, 2}));
  for (double v : c.values())
    EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(Primitives, DispatchByName) {
  const T x({3}, {-1.0, 0.0, 2.0});
  EXPECT_EQ(apply_primitive<double>("relu", {x}).values(), (std::vector<double>{0, 0, 2}));
  Attributes<double> attrs;
  attrs.factor = 3.0;
  EXPECT_EQ(apply_primitive<double>("scale", {x}, attrs).values(),
            (std::vector<double>{-3, 0, 6}));
  EXPECT_THROW(apply_primitive<double>("softmax", {x}), bridgedpi::Error);
  EXPECT_THROW(apply_primitive<double>("dropout", {x}), bridgedpi::Error);
  EXPECT_THROW(apply_primitive<double>("add", {x, T({2}, {1.0, 2.0})}), bridgedpi::ShapeError);
  EXPECT_THROW(apply_primitive<double>("matmul", {T({2, 3}), T({2, 3})}), bridgedpi::ShapeError);
}

TEST(Backward, SquareAtThree) {
  T x = T::scalar(3.0, true);
  Tape<double> tape;
  T y;
  {
    Tape<double>::Recording rec(tape);
    y = ops::mul(x, x);
  }
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, ReluSubgradient) {
  for (double at : {-1.0, 0.0}) {
    T x = T::scalar(at, true);
    Tape<double> tape;
    T y;
    {
      Tape<double>::Recording rec(tape);
      y = ops::sum(ops::relu(x));
    }
    tape.backward(y);
    EXPECT_EQ(x.grad()[0], 0.0) << at;
  }
}

TEST(Backward, SumOfMatrixVectorProduct) {
  std::mt19937_64 rng(3);
  T w = random_tensor({3, 4}, rng);
  w.set_requires_grad(true);
  const T v = random_tensor({4, 1}, rng);
  Tape<double> tape;
  T y;
  {
    Tape<double>::Recording rec(tape);
    y = ops::sum(ops::matmul(w, v));
  }
  tape.backward(y);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_DOUBLE_EQ(w.grad()[i * 4 + j], v.at(j));
  EXPECT_LT(check([&] { return ops::sum(ops::matmul(w, v)); }, {{"W", w}}), kTol);
}

TEST(Backward, Errors) {
  T x({2}, {1.0, 2.0}, true);
  Tape<double> tape;
  T y, s;
  {
    Tape<double>::Recording rec(tape);
    y = ops::scale(x, 2.0);
    s = ops::sum(y);
  }
  EXPECT_THROW(tape.backward(y), bridgedpi::ShapeError);
  tape.backward(s);
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(s), bridgedpi::Error);
}

TEST(Backward, NothingRecordedWithoutActiveTape) {
  T x({2}, {1.0, 2.0}, true);
  Tape<double> tape;
  const T y = ops::sum(x);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

TEST(GradCheck, QuadraticForm) {
  std::mt19937_64 rng(1);
  T a = random_tensor({5, 5}, rng);
  T x = random_tensor({5, 1}, rng);
  auto fn = [&] {
    // x^T A x as sum(x * (A x))
    return ops::sum(ops::mul(x, ops::matmul(a, x)));
  };
  EXPECT_LT(check(fn, {{"x", x}, {"A", a}}), 1e-7);
}

TEST(GradCheck, DetectsNonDeterminism) {
  T x({1}, std::vector<double>{1.0});
  int calls = 0;
  auto fn = [&] { return ops::scale(ops::sum(x), static_cast<double>(++calls)); };
  EXPECT_THROW(finite_difference_check<double>(fn, {{"x", x}}), bridgedpi::Error);
}

TEST(GradCheck, ReluAwayFromKink) {
  std::mt19937_64 rng(17);
  T x = random_tensor({40}, rng);
  x.values()[0] = 0.0;
  x.values()[1] = 5e-4;
  GradCheckOptions opt;
  opt.include = [&](std::size_t, std::size_t c) { return std::abs(x.at(c)) > 1e-3; };
  EXPECT_LT(check([&] { return weighted_sum(ops::relu(x)); }, {{"x", x}}, opt), kTol);
}

TEST(GradCheck, EveryPrimitive) {
  std::mt19937_64 rng(42);

  T a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
  EXPECT_LT(check([&] { return weighted_sum(ops::matmul(a, b)); }, {{"a", a}, {"b", b}}), kTol);

  T ba = random_tensor({2, 3, 4}, rng), bb = random_tensor({2, 4, 3}, rng);
  EXPECT_LT(check([&] { return weighted_sum(ops::matmul(ba, bb)); }, {{"a", ba}, {"b", bb}}),
            kTol);
  EXPECT_LT(check([&] { return weighted_sum(ops::matmul(ba, b)); }, {{"a", ba}, {"b", b}}), kTol);

  T c = random_tensor({3, 4}, rng);
  EXPECT_LT(check([&] { return weighted_sum(ops::add(a, c)); }, {{"a", a}, {"c", c}}), kTol);
  EXPECT_LT(check([&] { return weighted_sum(ops::mul(a, c)); }, {{"a", a}, {"c", c}}), kTol);
  EXPECT_LT(check([&] { return weighted_sum(ops::scale(a, -2.5)); }, {{"a", a}}), kTol);

  T bias = random_tensor({4}, rng);
  EXPECT_LT(check([&] { return weighted_sum(ops::add_bias(ba, bias)); },
                  {{"x", ba}, {"bias", bias}}),
            kTol);
  EXPECT_LT(check([&] { return weighted_sum(ops::sigmoid(a)); }, {{"a", a}}), kTol);

  EXPECT_LT(check([&] { return ops::sum(a); }, {{"a", a}}), kTol);
  EXPECT_LT(check([&] { return ops::mean(a); }, {{"a", a}}), kTol);
  EXPECT_LT(check([&] { return ops::sum_squares(a); }, {{"a", a}}), kTol);
  EXPECT_LT(check([&] { return weighted_sum(ops::reshape(a, {2, 6})); }, {{"a", a}}), kTol);
  EXPECT_LT(check([&] { return weighted_sum(ops::repeat(a, 3)); }, {{"a", a}}), kTol);
  EXPECT_LT(check([&] { return weighted_sum(ops::slice(ba, 1, 1, 3)); }, {{"x", ba}}), kTol);
  T other = random_tensor({2, 2, 4}, rng);
  EXPECT_LT(check([&] { return weighted_sum(ops::concat<double>({ba, other}, 1)); },
                  {{"x", ba}, {"y", other}}),
            kTol);

  T table = random_tensor({6, 3}, rng);
  const std::vector<int> ids{2, 0, 5, 2, 1, 0};
  EXPECT_LT(check([&] { return weighted_sum(ops::embedding(table, ids, {2, 3})); },
                  {{"table", table}}),
            kTol);

  T seq = random_tensor({2, 7, 3}, rng), kernel = random_tensor({3, 3, 4}, rng),
    kbias = random_tensor({4}, rng);
  EXPECT_LT(check([&] { return weighted_sum(ops::conv1d(seq, kernel, kbias)); },
                  {{"x", seq}, {"kernel", kernel}, {"bias", kbias}}),
            kTol);
  T even_kernel = random_tensor({4, 3, 2}, rng), ebias = random_tensor({2}, rng);
  EXPECT_LT(check([&] { return weighted_sum(ops::conv1d(seq, even_kernel, ebias)); },
                  {{"x", seq}, {"kernel", even_kernel}, {"bias", ebias}}),
            kTol);

  // Continuous random values: the arg-max is unique with probability 1.
  EXPECT_LT(check([&] { return weighted_sum(ops::global_maxpool(seq)); }, {{"x", seq}}), kTol);

  T feats = random_tensor({6, 4}, rng), gamma = random_tensor({4}, rng, 0.5, 1.5),
    beta = random_tensor({4}, rng);
  ops::BatchNormStats<double> stats(4);
  stats.running_mean = random_tensor({4}, rng);
  stats.running_var = random_tensor({4}, rng, 0.5, 2.0);
  EXPECT_LT(check([&] { return weighted_sum(ops::batchnorm(feats, gamma, beta, stats, true)); },
                  {{"x", feats}, {"gamma", gamma}, {"beta", beta}}),
            kTol);
  EXPECT_LT(check([&] { return weighted_sum(ops::batchnorm(feats, gamma, beta, stats, false)); },
                  {{"x", feats}, {"gamma", gamma}, {"beta", beta}}),
            kTol);

  EXPECT_LT(check(
                [&] {
                  std::mt19937_64 mask_rng(5);
                  return weighted_sum(ops::dropout(feats, 0.3, mask_rng, true));
                },
                {{"x", feats}}),
            kTol);

  T nodes = random_tensor({2, 5, 4}, rng);
  EXPECT_LT(check([&] { return weighted_sum(ops::cosine_similarity_matrix(nodes)); },
                  {{"nodes", nodes}}),
            kTol);
  T adj = random_tensor({2, 5, 5}, rng, 0.1, 1.0);
  EXPECT_LT(check([&] { return weighted_sum(ops::degree_normalize(adj)); }, {{"A", adj}}), kTol);

  T probs = random_tensor({6}, rng, 0.05, 0.95);
  const std::vector<double> labels{1, 0, 0, 1, 1, 0};
  EXPECT_LT(check([&] { return ops::binary_cross_entropy(probs, labels); }, {{"p", probs}}),
            kTol);
}

TEST(BatchNorm, TrainingOutputIsStandardised) {
  std::mt19937_64 rng(8);
  const T x = random_tensor({64, 5}, rng, -3.0, 7.0);
  const T gamma = T::filled({5}, 1.0), beta({5});
  ops::BatchNormStats<double> stats(5);
  const auto y = ops::batchnorm(x, gamma, beta, stats, true);
  for (std::size_t j = 0; j < 5; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < 64; ++i)
      m += y.at(i * 5 + j);
    m /= 64.0;
    for (std::size_t i = 0; i < 64; ++i)
      v += (y.at(i * 5 + j) - m) * (y.at(i * 5 + j) - m);
    v /= 64.0;
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-6 + 1e-4); // epsilon 1e-5 shrinks the variance slightly
  }
  // Running statistics moved 10% toward the batch.
  EXPECT_NE(stats.running_mean.at(0), 0.0);
}

TEST(BatchNorm, InferenceIsAffineInRunningStatistics) {
  ops::BatchNormStats<double> stats(2);
  stats.running_mean = T({2}, {1.0, -2.0});
  stats.running_var = T({2}, {4.0, 0.25});
  const T gamma({2}, {2.0, 1.0}), beta({2}, {0.5, 0.0});
  const T x({1, 2}, {3.0, -1.0});
  const auto y = ops::batchnorm(x, gamma, beta, stats, false);
  EXPECT_NEAR(y.at(0), 2.0 * (3.0 - 1.0) / std::sqrt(4.0 + 1e-5) + 0.5, 1e-12);
  EXPECT_NEAR(y.at(1), (-1.0 + 2.0) / std::sqrt(0.25 + 1e-5), 1e-12);
  EXPECT_EQ(stats.running_mean.at(0), 1.0);
}

TEST(Dropout, RateScalingAndReproducibility) {
  const double p = 0.3;
  const T x = T::filled({100000}, 1.0);
  std::mt19937_64 rng_a(123), rng_b(123);
  const auto a = ops::dropout(x, p, rng_a, true);
  const auto b = ops::dropout(x, p, rng_b, true);
  EXPECT_EQ(a.values(), b.values());
  std::size_t zeros = 0;
  for (double v : a.values()) {
    if (v == 0.0)
      ++zeros;
    else
      EXPECT_DOUBLE_EQ(v, 1.0 / (1.0 - p));
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 1e5, p, 0.01 * p);
  EXPECT_THROW(ops::dropout(x, p, rng_a, false), bridgedpi::Error);
}

TEST(Conv1d, IdentityKernelReproducesInput) {
  std::mt19937_64 rng(4);
  const T x = random_tensor({2, 9, 1}, rng);
  const auto y = ops::conv1d(x, T::filled({1, 1, 1}, 1.0), T({1}));
  EXPECT_EQ(y.values(), x.values());

  const T multi = random_tensor({1, 6, 3}, rng);
  T eye({1, 3, 3});
  for (std::size_t i = 0; i < 3; ++i)
    eye.values()[i * 3 + i] = 1.0;
  EXPECT_EQ(ops::conv1d(multi, eye, T({3})).values(), multi.values());
}

TEST(Conv1d, SamePaddingMatchesDirectSum) {
  std::mt19937_64 rng(6);
  const T x = random_tensor({1, 5, 2}, rng), w = random_tensor({3, 2, 1}, rng), b({1}, std::vector<double>{0.25});
  const auto y = ops::conv1d(x, w, b);
  for (std::size_t t = 0; t < 5; ++t) {
    double expected = 0.25;
    for (std::size_t k = 0; k < 3; ++k) {
      const long src = static_cast<long>(t + k) - 1;
      if (src < 0 || src >= 5)
        continue;
      for (std::size_t c = 0; c < 2; ++c)
        expected += x.at(static_cast<std::size_t>(src) * 2 + c) * w.at(k * 2 + c);
    }
    EXPECT_NEAR(y.at(t), expected, 1e-12);
  }
}

TEST(GlobalMaxPool, MatchesBruteForce) {
  std::mt19937_64 rng(12);
  const T x = random_tensor({3, 11, 4}, rng);
  const auto y = ops::global_maxpool(x);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t c = 0; c < 4; ++c) {
      double best = -1e300;
      for (std::size_t t = 0; t < 11; ++t)
        best = std::max(best, x.at((b * 11 + t) * 4 + c));
      EXPECT_EQ(y.at(b * 4 + c), best);
    }
}

TEST(CosineSimilarity, ZeroRowsAndSymmetry) {
  const T x({3, 2}, {0.0, 0.0, 1.0, 0.0, -1.0, 0.0});
  const auto a = ops::cosine_similarity_matrix(x);
  EXPECT_EQ(a.at(0), 1.0);
  EXPECT_EQ(a.at(1), 0.0);
  EXPECT_NEAR(a.at(1 * 3 + 2), -1.0, 1e-7);
  EXPECT_EQ(a.at(1 * 3 + 2), a.at(2 * 3 + 1));
}

TEST(BinaryCrossEntropy, RejectsNonBinaryLabels) {
  EXPECT_THROW(ops::binary_cross_entropy(T({1}, std::vector<double>{0.5}), std::vector<double>{2.0}),
               bridgedpi::DataError);
}
