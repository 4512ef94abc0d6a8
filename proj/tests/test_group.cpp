#include <gtest/gtest.h>

#include <map>
#include <set>

#include "dcut/group.hpp"
#include "dcut/stats.hpp"

using namespace dcut;

namespace {

// D_n acting on the vertices Z_n of an n-gon: r: i -> i+1, s: i -> -i, and
// s^e r^x: i -> (-1)^e (i + x). Faithful for n >= 3.
std::vector<std::uint64_t> perm_of(const DihedralElement& g, std::uint64_t n) {
  std::vector<std::uint64_t> p(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t shifted = (i + g.rot) % n;
    p[i] = g.refl ? (n - shifted) % n : shifted;
  }
  return p;
}

DihedralElement multiply_by_permutations(const DihedralElement& a, const DihedralElement& b, std::uint64_t n) {
  const auto pa = perm_of(a, n), pb = perm_of(b, n);
  std::vector<std::uint64_t> c(n);
  for (std::uint64_t i = 0; i < n; ++i) c[i] = pa[pb[i]];
  const GroupParams p(n);
  for (std::uint64_t idx = 0; idx < p.size(); ++idx) {
    const auto g = DihedralElement::from_flat(idx, p);
    if (perm_of(g, n) == c) return g;
  }
  ADD_FAILURE() << "product not found";
  return {};
}

std::vector<DihedralElement> all_elements(const GroupParams& p) {
  std::vector<DihedralElement> v;
  for (std::uint64_t i = 0; i < p.size(); ++i) v.push_back(DihedralElement::from_flat(i, p));
  return v;
}

}  // namespace

TEST(GroupParams, RejectsSmallN) {
  EXPECT_THROW(GroupParams(2), DomainError);
  EXPECT_NO_THROW(GroupParams(3));
  EXPECT_EQ(GroupParams(101).size(), 202u);
}

TEST(GroupParams, Primality) {
  EXPECT_TRUE(GroupParams(101).n_is_prime());
  EXPECT_TRUE(GroupParams(10007).n_is_prime());
  EXPECT_FALSE(GroupParams(12).n_is_prime());
  EXPECT_THROW(GroupParams(12).require_prime(), DomainError);
  EXPECT_TRUE(is_prime(18446744073709551557ULL));
  EXPECT_FALSE(is_prime(3215031751ULL));  // strong pseudoprime to bases 2, 3, 5, 7
  std::vector<bool> sieve(2000, true);
  for (std::uint64_t i = 2; i < sieve.size(); ++i) {
    if (sieve[i])
      for (std::uint64_t j = i * i; j < sieve.size(); j += i) sieve[j] = false;
    EXPECT_EQ(is_prime(i), static_cast<bool>(sieve[i])) << i;
  }
}

TEST(DihedralElement, FlatIndexBijection) {
  const GroupParams p(13);
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < p.size(); ++i) {
    const auto g = DihedralElement::from_flat(i, p);
    EXPECT_EQ(g.flat(p), i);
    EXPECT_EQ(g.flat(p), g.refl * p.n() + g.rot);
    seen.insert(g.flat(p));
  }
  EXPECT_EQ(seen.size(), p.size());
}

TEST(Multiply, ReflectionPairGivesRotation) {
  const GroupParams p(11);
  for (std::uint64_t a = 0; a < 11; ++a)
    for (std::uint64_t b = 0; b < 11; ++b)
      EXPECT_EQ(multiply(DihedralElement::reflection(a), DihedralElement::reflection(b), p),
                DihedralElement::rotation((b + 11 - a) % 11));
}

TEST(Multiply, IdentityExhaustiveN7) {
  const GroupParams p(7);
  for (const auto& g : all_elements(p)) {
    EXPECT_EQ(multiply(DihedralElement::identity(), g, p), g);
    EXPECT_EQ(multiply(g, DihedralElement::identity(), p), g);
  }
}

TEST(Multiply, WorkedExampleN5) {
  const GroupParams p(5);
  EXPECT_EQ(multiply(DihedralElement::rotation(2), DihedralElement::reflection(1), p), DihedralElement::reflection(4));
  EXPECT_EQ(multiply_by_permutations(DihedralElement::rotation(2), DihedralElement::reflection(1), 5),
            DihedralElement::reflection(4));
}

TEST(Multiply, AgreesWithPermutationRepresentation) {
  for (std::uint64_t n : {3, 4, 5, 6, 7, 9}) {
    const GroupParams p(n);
    const auto els = all_elements(p);
    for (const auto& a : els)
      for (const auto& b : els) EXPECT_EQ(multiply(a, b, p), multiply_by_permutations(a, b, n)) << n;
  }
}

TEST(Multiply, FlatTableAgreesWithPairs) {
  const GroupParams p(13);
  const auto els = all_elements(p);
  std::vector<std::uint64_t> table(p.size() * p.size());
  for (std::uint64_t i = 0; i < p.size(); ++i)
    for (std::uint64_t j = 0; j < p.size(); ++j) table[i * p.size() + j] = multiply(els[i], els[j], p).flat(p);
  for (std::uint64_t i = 0; i < p.size(); ++i)
    for (std::uint64_t j = 0; j < p.size(); ++j)
      EXPECT_EQ(DihedralElement::from_flat(table[i * p.size() + j], p), multiply(els[i], els[j], p));
}

TEST(Multiply, AssociativityExhaustive) {
  for (std::uint64_t n = 3; n <= 13; ++n) {
    const GroupParams p(n);
    const auto els = all_elements(p);
    std::size_t bad = 0;
    for (const auto& a : els)
      for (const auto& b : els)
        for (const auto& c : els) bad += !(multiply(multiply(a, b, p), c, p) == multiply(a, multiply(b, c, p), p));
    EXPECT_EQ(bad, 0u) << n;
  }
}

TEST(Multiply, DefiningRelations) {
  const GroupParams p(9);
  const auto r = DihedralElement::rotation(1), s = DihedralElement::reflection(0);
  EXPECT_EQ(power(r, 9, p), DihedralElement::identity());
  EXPECT_EQ(multiply(s, s, p), DihedralElement::identity());
  EXPECT_EQ(multiply(r, s, p), multiply(s, inverse(r, p), p));
}

TEST(Inverse, Examples) {
  const GroupParams p(7);
  EXPECT_EQ(inverse(DihedralElement::reflection(3), p), DihedralElement::reflection(3));
  EXPECT_EQ(inverse(DihedralElement::rotation(3), p), DihedralElement::rotation(4));
  const GroupParams q(11);
  for (const auto& g : all_elements(q)) {
    EXPECT_EQ(multiply(g, inverse(g, q), q), DihedralElement::identity());
    EXPECT_EQ(multiply(inverse(g, q), g, q), DihedralElement::identity());
  }
}

TEST(Inverse, GeneratorClosure) {
  const GroupParams p(13);
  for (std::uint64_t u = 0; u < 13; ++u) {
    const Generator refl{true, u}, rot{false, u};
    EXPECT_EQ(inverse(refl.element(), p), refl.element());
    const auto ri = inverse(rot.element(), p);
    EXPECT_EQ(ri.refl, 0);
    EXPECT_EQ(Generator({false, ri.rot}).element(), ri);
  }
}

TEST(Power, MatchesRepeatedMultiplication) {
  const GroupParams p(13);
  for (const auto& g : all_elements(p)) {
    DihedralElement acc = DihedralElement::identity();
    for (int e = 0; e < 30; ++e) {
      EXPECT_EQ(power(g, e, p), acc);
      acc = multiply(acc, g, p);
    }
    EXPECT_EQ(multiply(power(g, -5, p), power(g, 5, p), p), DihedralElement::identity());
  }
}

TEST(GeneratorSet, ReflectionsFirstAndPermutation) {
  std::vector<Generator> g{{false, 1}, {true, 2}, {false, 3}, {true, 4}};
  const GeneratorSet gs(13, g);
  ASSERT_EQ(gs.k(), 4u);
  EXPECT_EQ(gs.k_s(), 2u);
  EXPECT_EQ(gs.k_r(), 2u);
  EXPECT_TRUE(gs[0].is_reflection && gs[1].is_reflection);
  EXPECT_FALSE(gs[2].is_reflection || gs[3].is_reflection);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(gs[i], g[gs.permutation()[i]]);
  EXPECT_DOUBLE_EQ(gs.rho_s() + gs.rho_r(), 1.0);
}

TEST(GeneratorSet, RejectsOutOfRange) {
  EXPECT_THROW(GeneratorSet(5, {{false, 5}}), DomainError);
  EXPECT_THROW(GeneratorSet(5, {}), DomainError);
}

TEST(GeneratorSet, JsonRoundTrip) {
  const GroupParams p(101);
  const auto gs = sample_generator_set(p, 6, 42);
  const auto js = gs.to_json();
  EXPECT_EQ(js["n"], 101);
  EXPECT_EQ(js["k"], 6);
  EXPECT_EQ(js["seed"], 42);
  const auto back = GeneratorSet::from_json(nlohmann::json::parse(js.dump()));
  EXPECT_EQ(back.gens(), gs.gens());
  EXPECT_EQ(back.hash(), gs.hash());
  auto broken = js;
  broken["k"] = 7;
  EXPECT_THROW(GeneratorSet::from_json(broken), DomainError);
}

TEST(Sampling, DeterministicForSeed) {
  const GroupParams p(101);
  const auto a = sample_generator_set(p, 6, 12345);
  const auto b = sample_generator_set(p, 6, 12345);
  const auto c = sample_generator_set(p, 6, 12346);
  EXPECT_EQ(a.gens(), b.gens());
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_NE(a.hash(), c.hash());
}

TEST(Sampling, UniformOverElements) {
  const GroupParams p(13);
  auto rng = make_stream(99, 0);
  std::vector<double> obs(p.size(), 0), exp(p.size(), 1e5 / 26.0);
  for (int i = 0; i < 100000; ++i) {
    const auto gs = sample_generator_set(p, 1, rng);
    obs[gs[0].element().flat(p)] += 1;
  }
  const double se = std::sqrt(1e5 * (1.0 / 26) * (25.0 / 26));
  for (double o : obs) EXPECT_LE(std::abs(o - 1e5 / 26), 4 * se);
  EXPECT_GT(chi_square_gof(obs, exp).p_value, 0.01);
}

TEST(Sampling, ReflectionCountMean) {
  const GroupParams p(101);
  auto rng = make_stream(7, 0);
  double total = 0;
  for (int r = 0; r < 1000; ++r) total += static_cast<double>(sample_generator_set(p, 1000, rng).k_s());
  const double mean = total / 1000;
  EXPECT_GE(mean, 480);
  EXPECT_LE(mean, 520);
}

TEST(Balance, Examples) {
  auto make = [](std::size_t ks, std::size_t k) {
    std::vector<Generator> g;
    for (std::size_t i = 0; i < k; ++i) g.push_back({i < ks, 1});
    return GeneratorSet(13, g);
  };
  EXPECT_TRUE(check_balance(make(4, 8)));
  EXPECT_FALSE(check_balance(make(1, 8)));
  EXPECT_FALSE(check_balance(make(0, 8)));
  EXPECT_FALSE(check_balance(make(8, 8)));
  EXPECT_TRUE(check_balance(make(2, 8)));
  EXPECT_TRUE(check_balance(make(6, 8)));
  EXPECT_FALSE(check_balance(make(7, 8)));
}

TEST(Balance, SampleBalancedCountsRejections) {
  const GroupParams p(101);
  auto rng = make_stream(3, 0);
  std::size_t rejected = 0;
  for (int i = 0; i < 200; ++i) {
    const auto d = sample_balanced(p, 5, rng);
    EXPECT_TRUE(check_balance(d.gs));
    rejected += d.rejections;
  }
  EXPECT_GT(rejected, 0u);  // P(k_S in {0,1,4,5}) = 12/32
}

TEST(Goodness, Examples) {
  const GroupParams p(13);
  auto rot = [](std::vector<std::uint64_t> us, bool refl = false) {
    std::vector<Generator> g;
    for (auto u : us) g.push_back({refl, u});
    return GeneratorSet(13, g);
  };
  EXPECT_TRUE(is_good(rot({1, 2, 3}), p));
  EXPECT_FALSE(is_good(rot({1, 12}), p));
  EXPECT_FALSE(is_good(rot({5, 5}), p));
  EXPECT_FALSE(is_good(rot({0, 0}), p));
  EXPECT_TRUE(is_good(rot({0, 4}), p));
  EXPECT_FALSE(is_good(GeneratorSet(13, {{true, 3}, {false, 10}}), p));
}

TEST(Goodness, ClassesMatchBruteForceConjugation) {
  // The class of r^u under conjugation by all of G is {u, -u}.
  const GroupParams p(13);
  for (std::uint64_t u = 0; u < 13; ++u) {
    std::set<std::uint64_t> cls;
    for (const auto& b : all_elements(p)) {
      const auto c = multiply(multiply(b, DihedralElement::rotation(u), p), inverse(b, p), p);
      ASSERT_EQ(c.refl, 0);
      cls.insert(c.rot);
    }
    EXPECT_EQ(cls, (std::set<std::uint64_t>{u, neg_mod(u, 13)}));
    for (std::uint64_t v = 0; v < 13; ++v) {
      const bool share = cls.count(v) > 0;
      EXPECT_EQ(is_good(GeneratorSet(13, {{false, u}, {true, v}}), p), !share);
    }
  }
}
