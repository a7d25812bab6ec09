#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "discsense/error.hpp"
#include "discsense/hyperopt.hpp"

namespace discsense {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd V(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

TEST(Matern52, ClosedForm) {
  EXPECT_EQ(Matern52(V({0.3, 0.2}), V({0.3, 0.2}), V({0.5, 2.0}), 1.7), 1.7);
  const long double s5 = std::sqrt(5.0L);
  const long double expected = (1.0L + s5 + 5.0L / 3.0L) * std::exp(-s5);
  EXPECT_NEAR(Matern52(V({0.0}), V({1.0}), V({1.0}), 1.0),
              static_cast<double>(expected), 1e-15);
}

TEST(Matern52, SymmetricAndDecreasing) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  const VectorXd ell = V({0.3, 0.7, 1.1});
  for (int t = 0; t < 100; ++t) {
    const VectorXd x = VectorXd::NullaryExpr(3, [&] { return u(rng); });
    const VectorXd y = VectorXd::NullaryExpr(3, [&] { return u(rng); });
    EXPECT_EQ(Matern52(x, y, ell, 1.3), Matern52(y, x, ell, 1.3));
  }
  double prev = 2.0;
  for (double d = 0.0; d < 5.0; d += 0.1) {
    const double k = Matern52(V({0.0}), V({d}), V({1.0}), 1.0);
    EXPECT_LT(k, prev);
    prev = k;
  }
}

TEST(PosteriorFromCovariances, OneByOneExample) {
  MatrixXd gram(1, 1);
  gram << 1.0;
  const Posterior p = PosteriorFromCovariances(gram, V({0.5}), 1.0, V({2.0}), 0.0, 0.0);
  EXPECT_NEAR(p.mean, 1.0, 1e-12);
  EXPECT_NEAR(p.variance, 0.75, 1e-12);
}

KernelHyper Hyper(VectorXd ell, double amp, double noise, double mean) {
  KernelHyper h;
  h.lengthscales = std::move(ell);
  h.amplitude = amp;
  h.noise = noise;
  h.mean = mean;
  return h;
}

TEST(GaussianProcess, InterpolatesAndRevertsToPrior) {
  MatrixXd x(4, 2);
  x << 0.1, 0.2, 0.5, 0.9, 0.8, 0.3, 0.4, 0.6;
  const VectorXd y = V({1.0, -0.5, 2.0, 0.3});
  const GaussianProcess gp(x, y, Hyper(V({0.4, 0.6}), 1.5, 0.0, 0.2));
  for (int i = 0; i < 4; ++i) {
    const Posterior p = gp.Predict(x.row(i).transpose());
    EXPECT_NEAR(p.mean, y(i), 1e-6);
    EXPECT_NEAR(p.variance, 0.0, 1e-6);
    EXPECT_GE(p.raw_variance, -1e-6);
  }
  const Posterior far = gp.Predict(V({1e3, -1e3}));
  EXPECT_NEAR(far.mean, 0.2, 1e-12);
  EXPECT_NEAR(far.variance, 1.5, 1e-12);
}

TEST(GaussianProcess, DuplicatePointsUseJitter) {
  MatrixXd x(3, 1);
  x << 0.5, 0.5, 0.5;
  const GaussianProcess gp(x, V({1.0, 1.0, 1.0}), Hyper(V({0.3}), 1.0, 0.0, 0.0));
  const Posterior p = gp.Predict(V({0.5}));
  EXPECT_NEAR(p.mean, 1.0, 1e-4);
  EXPECT_TRUE(std::isfinite(gp.LogMarginalLikelihood()));
}

TEST(GaussianProcess, IllConditionedAfterMaxJitter) {
  // Eigenvalue −1: no jitter up to 1e-4 rescues it.
  MatrixXd gram(2, 2);
  gram << 1, 2, 2, 1;
  try {
    PosteriorFromCovariances(gram, V({0.5, 0.5}), 1.0, V({0.0, 1.0}), 0.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "ill-conditioned");
  }
}

TEST(ExpectedImprovement, Examples) {
  EXPECT_NEAR(ExpectedImprovement(0.7, 0.0, 1.0), 0.3, 1e-15);
  EXPECT_EQ(ExpectedImprovement(1.3, 0.0, 1.0), 0.0);
  EXPECT_NEAR(ExpectedImprovement(1.0, 1.0, 1.0), 1.0 / std::sqrt(2.0 * M_PI), 1e-15);
  EXPECT_NEAR(ExpectedImprovement(1.0, 1.0, 1.0), 0.398942, 1e-6);
}

TEST(ExpectedImprovement, NonNegativeAndMonotoneInSigma) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3, 3);
  std::uniform_real_distribution<double> s(0, 2);
  for (int t = 0; t < 1000; ++t) {
    const double best = u(rng);
    const double mu = best - std::abs(u(rng));
    double s1 = s(rng), s2 = s(rng);
    if (s1 > s2) std::swap(s1, s2);
    const double e1 = ExpectedImprovement(mu, s1 * s1, best);
    const double e2 = ExpectedImprovement(mu, s2 * s2, best);
    EXPECT_GE(e1, 0.0);
    EXPECT_LE(e1, e2 + 1e-15);
    EXPECT_GE(ExpectedImprovement(u(rng), s1 * s1, best), 0.0);
  }
}

TEST(SampleKernelHyperparams, DeterministicAndFinite) {
  MatrixXd x(6, 2);
  x << 0.1, 0.9, 0.3, 0.2, 0.5, 0.5, 0.7, 0.1, 0.9, 0.8, 0.2, 0.4;
  const VectorXd y = V({1.0, 0.4, -0.2, 0.3, 1.1, 0.0});
  const auto a = SampleKernelHyperparams(x, y, 5);
  const auto b = SampleKernelHyperparams(x, y, 5);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].lengthscales, b[i].lengthscales);
    EXPECT_EQ(a[i].amplitude, b[i].amplitude);
    EXPECT_EQ(a[i].noise, b[i].noise);
    EXPECT_EQ(a[i].mean, b[i].mean);
  }
  EXPECT_THROW(SampleKernelHyperparams(x.topRows(1), y.head(1), 1), Error);
}

TEST(SampleKernelHyperparams, ConstantDataKeepsFiniteLikelihood) {
  MatrixXd x(5, 1);
  x << 0.0, 0.25, 0.5, 0.75, 1.0;
  const VectorXd y = VectorXd::Constant(5, 0.0);
  for (const KernelHyper& h : SampleKernelHyperparams(x, y, 3)) {
    EXPECT_GT(h.noise, 0.0);
    EXPECT_TRUE(std::isfinite(GaussianProcess(x, y, h).LogMarginalLikelihood()));
  }
}

TEST(SampleKernelHyperparams, SineLengthscaleInRange) {
  MatrixXd x(8, 1);
  VectorXd y(8);
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = i / 7.0;
    y(i) = std::sin(2.0 * M_PI * x(i, 0));
  }
  // Grid-scan oracle: the likelihood-maximizing lengthscale is moderate.
  double best_ell = 0.0;
  double best_ll = -INFINITY;
  for (double log_ell = std::log(0.01); log_ell < std::log(100.0); log_ell += 0.05) {
    const double ll =
        GaussianProcess(x, y, Hyper(V({std::exp(log_ell)}), 1.0, 1e-6, 0.0))
            .LogMarginalLikelihood();
    if (ll > best_ll) {
      best_ll = ll;
      best_ell = std::exp(log_ell);
    }
  }
  EXPECT_GE(best_ell, 0.05);
  EXPECT_LE(best_ell, 5.0);
  std::vector<double> ells;
  for (const KernelHyper& h : SampleKernelHyperparams(x, y, 11)) ells.push_back(h.lengthscales(0));
  std::nth_element(ells.begin(), ells.begin() + ells.size() / 2, ells.end());
  const double median = ells[ells.size() / 2];
  EXPECT_GE(median, 0.05);
  EXPECT_LE(median, 5.0);
}

TEST(SearchSpace, DecodeRoundsHalfUpAndClamps) {
  const SearchSpace space({{"n", 64, 100, DimKind::kInteger}, {"r", 0, 0.9, DimKind::kReal}});
  EXPECT_EQ(space.Decode(V({0.5 / 36.0, 0.0})).at("n"), 65);  // 64.5 → 65
  EXPECT_EQ(space.Decode(V({1.5, -1.0})).at("n"), 100);
  EXPECT_EQ(space.Decode(V({1.5, -1.0})).at("r"), 0.0);
  EXPECT_TRUE(space.Contains({{"n", 70}, {"r", 0.5}}));
  EXPECT_FALSE(space.Contains({{"n", 70.5}, {"r", 0.5}}));
  EXPECT_FALSE(space.Contains({{"n", 63}, {"r", 0.5}}));
  EXPECT_THROW(SearchSpace({{"a", 1, 1, DimKind::kReal}}), Error);
  EXPECT_THROW(SearchSpace({{"a", 0, 1, DimKind::kReal}, {"a", 0, 2, DimKind::kReal}}), Error);
}

TEST(SearchSpace, ClassifierSpaceRanges) {
  const SearchSpace space = SearchSpace::ClassifierSpace();
  ASSERT_EQ(space.size(), 11);
  const double upper[] = {320, 100, 320, 320, 100, 320, 320, 100, 0.9, 0.9, 0.5};
  for (int i = 0; i < 11; ++i) EXPECT_EQ(space.dims()[i].upper, upper[i]) << space.dims()[i].name;
  // The reported best configuration lies inside.
  EXPECT_TRUE(space.Contains({{"lstm1", 259}, {"lstm2", 75}, {"lstm3", 263},
                              {"lstm4", 127}, {"lstm5", 89}, {"lstm6", 150},
                              {"dense1", 269}, {"dense2", 69}, {"dropout1", 0.11},
                              {"dropout2", 0.57}, {"lr", 0.1549}}));
}

Trial Done(const SearchSpace& space, VectorXd unit, double y) {
  Trial t;
  t.config = space.Decode(unit);
  t.unit = space.Encode(t.config);
  t.objective = y;
  return t;
}

TEST(SuggestNext, EmptyHistoryInBounds) {
  const SearchSpace space = SearchSpace::ClassifierSpace();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Trial t = SuggestNext({}, space, seed);
    EXPECT_TRUE(space.Contains(t.config));
    EXPECT_FALSE(t.objective.has_value());
  }
}

TEST(SuggestNext, IdenticalHistoryMovesAway) {
  const SearchSpace space({{"x", 0, 1, DimKind::kReal}, {"y", 0, 1, DimKind::kReal}});
  std::vector<Trial> history(4, Done(space, V({0.4, 0.6}), 1.0));
  const Trial t = SuggestNext(history, space, 3);
  EXPECT_GT((t.unit - history[0].unit).norm(), 1e-6);
}

TEST(SuggestNext, QuadraticMinimumFound) {
  const SearchSpace space({{"x", 0, 1, DimKind::kReal}});
  std::vector<Trial> history;
  for (double x : {0.0, 0.1, 0.2, 0.45, 0.6, 0.9}) {
    history.push_back(Done(space, V({x}), (x - 0.3) * (x - 0.3)));
  }
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Trial t = SuggestNext(history, space, seed);
    EXPECT_NEAR(t.config.at("x"), 0.3, 0.15) << "seed " << seed;
  }
}

TEST(SuggestNext, InvariantToObjectiveShift) {
  const SearchSpace space({{"x", 0, 1, DimKind::kReal}, {"y", 0, 1, DimKind::kReal}});
  std::vector<Trial> a, b;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 6; ++i) {
    const VectorXd x = V({u(rng), u(rng)});
    const double y = std::sin(3 * x(0)) + x(1) * x(1);
    a.push_back(Done(space, x, y));
    b.push_back(Done(space, x, y + 1024.0));
  }
  const Trial ta = SuggestNext(a, space, 9);
  const Trial tb = SuggestNext(b, space, 9);
  EXPECT_LT((ta.unit - tb.unit).norm(), 1e-9);
}

TEST(SuggestNext, IntegerDimsOnGrid) {
  const SearchSpace space = SearchSpace::ClassifierSpace();
  std::vector<Trial> history;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 5; ++i) {
    Trial t = SuggestNext(history, space, rng());
    t.objective = std::uniform_real_distribution<double>(0, 1)(rng);
    history.push_back(t);
  }
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Trial t = SuggestNext(history, space, s);
    EXPECT_TRUE(space.Contains(t.config));
    for (const Dimension& d : space.dims()) {
      if (d.kind == DimKind::kInteger) {
        EXPECT_EQ(t.config.at(d.name), std::round(t.config.at(d.name)));
      }
    }
  }
}

TEST(RunSearch, BudgetOneAndPenalties) {
  const SearchSpace space({{"x", 0, 1, DimKind::kReal}});
  const SearchResult one = RunSearch([](const NamedConfig& c) { return c.at("x"); }, space, 1, 7);
  ASSERT_EQ(one.trials.size(), 1u);
  EXPECT_EQ(one.best_index, 0);
  EXPECT_EQ(one.trials[0].unit, SuggestNext({}, space, 7).unit);

  int calls = 0;
  const SearchResult r = RunSearch(
      [&calls](const NamedConfig& c) -> double {
        ++calls;
        if (calls == 2) return std::nan("");
        if (calls == 4) throw Error("boom");
        return (c.at("x") - 0.5) * (c.at("x") - 0.5);
      },
      space, 8, 3);
  ASSERT_EQ(r.trials.size(), 8u);
  EXPECT_TRUE(std::isinf(*r.trials[1].objective));
  EXPECT_TRUE(std::isinf(*r.trials[3].objective));
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    EXPECT_LE(r.trace[i].best_so_far, r.trace[i - 1].best_so_far);
  }
  EXPECT_EQ(*r.best().objective, r.trace.back().best_so_far);
}

TEST(Trace, JsonRoundTrip) {
  const SearchSpace space({{"n", 1, 9, DimKind::kInteger}});
  int calls = 0;
  const SearchResult r = RunSearch(
      [&calls](const NamedConfig& c) { return ++calls == 1 ? INFINITY : c.at("n"); }, space,
      4, 1);
  std::stringstream buf;
  WriteTrace(r.trace, buf);
  const auto back = ReadTrace(buf);
  ASSERT_EQ(back.size(), 4u);
  EXPECT_TRUE(std::isinf(back[0].objective));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back[i].config, r.trace[i].config);
    EXPECT_EQ(back[i].index, r.trace[i].index);
  }
}

}  // namespace
}  // namespace discsense
