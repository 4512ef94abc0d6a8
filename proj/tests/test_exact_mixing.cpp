#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <filesystem>
#include <random>

#include "dcut/exact_mixing.hpp"
#include "dcut/fft.hpp"
#include "dcut/srw.hpp"

using namespace dcut;

namespace {

DistVector random_dist(const GroupParams& p, Engine& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(p.size());
  for (auto& x : v) x = u(rng);
  DistVector f(p.n(), std::move(v));
  f.normalize();
  return f;
}

double linf(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Row of exp(t (P - I)) for the identity start, from a dense 2n x 2n kernel.
std::vector<double> dense_expm_row(const GeneratorSet& gs, const GroupParams& p, double t) {
  const auto mu = step_measure(gs, p);
  const auto N = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd Q = -Eigen::MatrixXd::Identity(N, N);
  for (std::uint64_t x = 0; x < p.size(); ++x) {
    const auto gx = DihedralElement::from_flat(x, p);
    for (std::uint64_t u = 0; u < p.n(); ++u) {
      if (mu.a[u] != 0) Q(x, multiply(gx, DihedralElement::rotation(u), p).flat(p)) += mu.a[u];
      if (mu.b[u] != 0) Q(x, multiply(gx, DihedralElement::reflection(u), p).flat(p)) += mu.b[u];
    }
  }
  const Eigen::MatrixXd E = (t * Q).exp();
  std::vector<double> row(p.size());
  for (Eigen::Index j = 0; j < N; ++j) row[j] = E(0, j);
  return row;
}

}  // namespace

TEST(Fft, MatchesNaiveDft) {
  for (std::size_t n : {1, 2, 3, 8, 13, 101, 128}) {
    Dft d(n);
    Engine rng(n);
    std::normal_distribution<double> g;
    std::vector<cplx> x(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    const auto X = d.forward(x);
    for (std::size_t k = 0; k < n; ++k) {
      cplx s = 0;
      for (std::size_t j = 0; j < n; ++j)
        s += x[j] * std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(j * k % n) / static_cast<double>(n));
      EXPECT_LT(std::abs(s - X[k]), 1e-9) << n;
    }
    const auto back = d.inverse(X);
    for (std::size_t j = 0; j < n; ++j) EXPECT_LT(std::abs(back[j] - x[j]), 1e-12);
  }
}

TEST(DistVector, Basics) {
  const GroupParams p(13);
  const auto d = DistVector::delta(p);
  EXPECT_TRUE(d.valid());
  EXPECT_DOUBLE_EQ(tv_exact(d), 1 - 1.0 / 26);
  EXPECT_NEAR(tv_exact(DistVector::uniform(p)), 0.0, 1e-16);
  EXPECT_THROW(DistVector(13, std::vector<double>(25)), DomainError);
  DistVector neg(3, {1.0, -1e-16, 0, 0, 0, 0});
  neg.clip_negatives();
  EXPECT_EQ(neg[1], 0.0);
  DistVector bad(3, {1.0, -1e-10, 0, 0, 0, 0});
  EXPECT_THROW(bad.clip_negatives(), NumericalError);
}

TEST(DistVector, BinaryRoundTrip) {
  const GroupParams p(13);
  Engine rng(1);
  const auto f = random_dist(p, rng);
  const auto path = std::filesystem::temp_directory_path() / "dcut_dist_roundtrip.bin";
  write_dist_binary(f, path.string());
  EXPECT_EQ(std::filesystem::file_size(path), 16 + 8 * p.size());
  const auto g = read_dist_binary(path.string());
  EXPECT_EQ(g.n(), f.n());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(g[i], f[i]);
  std::filesystem::remove(path);
}

TEST(StepMeasure, Examples) {
  const GroupParams p(5);
  auto m1 = step_measure(GeneratorSet(5, {{false, 1}}), p);
  EXPECT_DOUBLE_EQ(m1.a[1], 0.5);
  EXPECT_DOUBLE_EQ(m1.a[4], 0.5);
  EXPECT_DOUBLE_EQ(m1.mass(), 1.0);
  for (double v : m1.b) EXPECT_EQ(v, 0.0);
  auto m2 = step_measure(GeneratorSet(5, {{true, 2}}), p);
  EXPECT_DOUBLE_EQ(m2.b[2], 1.0);
  for (double v : m2.a) EXPECT_EQ(v, 0.0);
  auto m3 = step_measure(GeneratorSet(5, {{false, 1}, {true, 0}}), p);
  EXPECT_DOUBLE_EQ(m3.a[1], 0.25);
  EXPECT_DOUBLE_EQ(m3.a[4], 0.25);
  EXPECT_DOUBLE_EQ(m3.b[0], 0.5);
  // identity generator: both atoms at u = 0
  auto m4 = step_measure(GeneratorSet(5, {{false, 0}}), p);
  EXPECT_DOUBLE_EQ(m4.a[0], 1.0);
}

TEST(StepMeasure, RotationPartSymmetric) {
  const GroupParams p(101);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto mu = step_measure(sample_generator_set(p, 9, seed), p);
    EXPECT_NEAR(mu.mass(), 1.0, 1e-15);
    for (std::uint64_t u = 0; u < 101; ++u) EXPECT_EQ(mu.a[u], mu.a[neg_mod(u, 101)]);
  }
}

TEST(Convolve, NaiveExamples) {
  const GroupParams p(5);
  const auto mu = step_measure(GeneratorSet(5, {{false, 1}}), p);
  const auto nu = convolve_naive(DistVector::delta(p), mu, p);
  EXPECT_DOUBLE_EQ(nu[1], 0.5);
  EXPECT_DOUBLE_EQ(nu[4], 0.5);
  StepMeasure id{std::vector<double>(5, 0.0), std::vector<double>(5, 0.0)};
  id.a[0] = 1;
  Engine rng(5);
  const auto f = random_dist(p, rng);
  EXPECT_EQ(linf(convolve_naive(f, id, p).probs(), f.probs()), 0.0);
}

TEST(Convolve, FastMatchesNaiveOnRandomInputs) {
  const GroupParams p(101);
  Engine rng(11);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto gs = sample_generator_set(p, 1 + trial % 12, rng);
    const auto mu = step_measure(gs, p);
    const auto f = random_dist(p, rng);
    worst = std::max(worst, linf(convolve_fast(f, mu, p).probs(), convolve_naive(f, mu, p).probs()));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(Convolve, StationarityAndMass) {
  const GroupParams p(101);
  const auto mu = step_measure(sample_generator_set(p, 7, 3), p);
  const auto u = DistVector::uniform(p);
  EXPECT_LE(linf(convolve_naive(u, mu, p).probs(), u.probs()), 1e-14);
  EXPECT_LE(linf(convolve_fast(u, mu, p).probs(), u.probs()), 1e-14);
  Engine rng(2);
  const auto f = random_dist(p, rng);
  EXPECT_NEAR(convolve_naive(f, mu, p).mass(), 1.0, 1e-12);
  EXPECT_NEAR(convolve_fast(f, mu, p).mass(), 1.0, 1e-12);
}

TEST(Convolve, PureRotationShiftsCosetsIndependently) {
  const GroupParams p(13);
  const auto mu = step_measure(GeneratorSet(13, {{false, 3}}), p);
  Engine rng(4);
  const auto f = random_dist(p, rng);
  const auto g = convolve_fast(f, mu, p);
  for (std::uint64_t x = 0; x < 13; ++x) {
    // rotation coset: f0 at x - u plus x + u; reflection coset likewise
    EXPECT_NEAR(g[x], 0.5 * (f[(x + 10) % 13] + f[(x + 3) % 13]), 1e-14);
    EXPECT_NEAR(g[13 + x], 0.5 * (f[13 + (x + 10) % 13] + f[13 + (x + 3) % 13]), 1e-14);
  }
}

TEST(Convolve, DoubleReflectionIsIdentity) {
  const GroupParams p(101);
  const auto mu = step_measure(GeneratorSet(101, {{true, 17}}), p);
  Engine rng(8);
  const auto f = random_dist(p, rng);
  EXPECT_LE(linf(convolve_fast(convolve_fast(f, mu, p), mu, p).probs(), f.probs()), 1e-14);
  EXPECT_EQ(linf(convolve_naive(convolve_naive(f, mu, p), mu, p).probs(), f.probs()), 0.0);
}

TEST(Evolve, TimeZeroIsExact) {
  const GroupParams p(13);
  Engine rng(1);
  const auto f = random_dist(p, rng);
  const auto r = evolve_continuous(f, sample_generator_set(p, 3, 1), p, 0.0);
  EXPECT_EQ(linf(r.dist.probs(), f.probs()), 0.0);
}

TEST(Evolve, RejectsBadTolAndBudget) {
  const GroupParams p(13);
  const auto gs = sample_generator_set(p, 3, 1);
  EvolveOptions o;
  o.tol = 1e-3;
  EXPECT_THROW(evolve_continuous(DistVector::delta(p), gs, p, 1.0, o), DomainError);
  o.tol = 1e-12;
  o.step_budget = 1000;
  EXPECT_THROW(evolve_continuous(DistVector::delta(p), gs, p, 5000.0, o), BudgetError);
}

TEST(Evolve, SmallTimeTaylor) {
  const GroupParams p(101);
  const auto gs = sample_generator_set(p, 6, 2);
  const auto mu = step_measure(gs, p);
  const auto f0 = DistVector::delta(p);
  const double t = 0.01;
  const auto r = evolve_continuous(f0, gs, p, t);
  const auto pf = convolve_naive(f0, mu, p);
  std::vector<double> taylor(p.size());
  for (std::size_t i = 0; i < taylor.size(); ++i) taylor[i] = (1 - t) * f0[i] + t * pf[i];
  EXPECT_LE(linf(r.dist.probs(), taylor), 1e-3);
  EXPECT_LT(r.mass_deficit, 1e-12);
}

TEST(Evolve, MatchesDenseMatrixExponential) {
  const GroupParams p(101);
  const auto gs = sample_generator_set(p, 6, 77);
  const double t0 = cutoff_time(6, p.size()).t0;
  for (double t : {0.5 * t0, t0, 2 * t0}) {
    const auto oracle = dense_expm_row(gs, p, t);
    for (auto route : {KernelRoute::Direct, KernelRoute::Spectral}) {
      EvolveOptions o;
      o.route = route;
      const auto r = evolve_continuous(DistVector::delta(p), gs, p, t, o);
      EXPECT_LE(linf(r.dist.probs(), oracle), 1e-8) << t;
    }
  }
}

TEST(TvExact, MatchesDirectSum) {
  const GroupParams p(13);
  Engine rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto f = random_dist(p, rng);
    double s = 0;
    for (double v : f.probs()) s += std::abs(v - 1.0 / 26);
    EXPECT_NEAR(tv_exact(f), 0.5 * s, 1e-15);
  }
}

TEST(TvExact, StartPointDoesNotMatter) {
  const GroupParams p(13);
  const auto gs = sample_generator_set(p, 4, 5);
  for (double t : {0.5, 2.0, 6.0}) {
    const double from_id = tv_exact(evolve_continuous(DistVector::delta(p), gs, p, t).dist);
    for (std::uint64_t g = 0; g < p.size(); ++g) {
      const auto from_g = evolve_continuous(DistVector::delta(p, DihedralElement::from_flat(g, p)), gs, p, t);
      EXPECT_NEAR(tv_exact(from_g.dist), from_id, 1e-12);
    }
  }
}

TEST(Collision, ExamplesAndCauchySchwarz) {
  const GroupParams p(13);
  EXPECT_NEAR(collision_exact(DistVector::uniform(p)), 0.0, 1e-14);
  EXPECT_NEAR(collision_exact(DistVector::delta(p)), 25.0, 1e-14);
  Engine rng(6);
  for (int i = 0; i < 50; ++i) {
    const auto f = random_dist(p, rng);
    const double tv = tv_exact(f);
    EXPECT_GE(collision_exact(f) + 1e-15, 4 * tv * tv);
    EXPECT_GT(collision_exact(f), 0.0);
  }
}

TEST(TvCurve, GridZero) {
  const GroupParams p(101);
  const double g[1] = {0.0};
  const auto c = tv_curve(sample_generator_set(p, 6, 1), p, g);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_DOUBLE_EQ(c[0].tv, 1 - 1.0 / 202);
}

TEST(TvCurve, MonotoneAndSelfConsistent) {
  const GroupParams p(101);
  const auto gs = sample_generator_set(p, 6, 9);
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(0.5 * i);
  const auto c = tv_curve(gs, p, grid);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LE(c[i].tv, c[i - 1].tv + 1e-9);
  for (std::size_t i = 0; i < c.size(); i += 7) {
    const auto r = evolve_continuous(DistVector::delta(p), gs, p, grid[i]);
    EXPECT_NEAR(c[i].tv, tv_exact(r.dist), 1e-10);
  }
  const std::vector<double> bad{1.0, 0.5};
  EXPECT_THROW(tv_curve(gs, p, bad), DomainError);
}

TEST(Symmetry, ReflectionAtZeroGivesMirrorSymmetry) {
  const GroupParams p(101);
  const GeneratorSet gs(101, {{false, 5}, {false, 17}, {true, 0}, {true, 0}});
  const auto r = evolve_continuous(DistVector::delta(p), gs, p, 7.5);
  for (std::uint64_t x = 0; x < 101; ++x) EXPECT_NEAR(r.dist[x], r.dist[neg_mod(x, 101)], 1e-14);
}
