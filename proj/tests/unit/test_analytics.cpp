#include <gtest/gtest.h>

#include <cmath>

#include "treegibbs/analytics.hpp"

using namespace treegibbs;

TEST(Analytics, KBasics) {
  for (double beta : {0.0, 0.3, 1.0, 2.5}) EXPECT_EQ(k_beta(0.0, beta), 0.0);
  for (double a : {0.0, 0.5, 1.0, 7.0}) EXPECT_EQ(k_beta(a, 0.0), 0.0);
  for (double beta : {0.2, 0.9, 1.7}) EXPECT_NEAR(k_beta(1.0, beta), std::tanh(beta), 1e-15);
  EXPECT_NEAR(k_beta(1.0, beta1(2)), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(beta1(2), 0.881374, 1e-6);
  EXPECT_THROW(k_beta(-0.1, 1.0), InvalidArgument);
  EXPECT_THROW(f_beta(-0.1, 1.0), InvalidArgument);
  // the two forms of K agree
  for (double a : {0.01, 0.3, 1.0, 4.0})
    for (double beta : {0.1, 0.8, 2.0}) {
      const double direct = 1.0 / (std::exp(-2 * beta) * a + 1) - 1.0 / (std::exp(2 * beta) * a + 1);
      EXPECT_NEAR(k_beta(a, beta), direct, 1e-14);
    }
}

TEST(Analytics, JMapExamples) {
  for (double h : {-1.0, 0.0, 0.7}) {
    EXPECT_EQ(j_map(0.3, 0.0, h, 3), 1.0);
    EXPECT_NEAR(least_fixed_point(0.0, h, 3), 1.0, 1e-13);
  }
  for (double beta : {0.2, 1.0, 2.2}) {
    EXPECT_NEAR(j_map(0.0, beta, 0.0, 2), std::exp(-4 * beta), 1e-15);
    auto t = TreeTopology::build(2, 0);
    auto ms = MessageSet::compute(make_ising(beta, 0.0), t, all_plus(t));
    EXPECT_NEAR(ms.magnetization_ratio(0), std::exp(-4 * beta), 1e-14);
  }
}

TEST(Analytics, FixedPointSolversAgree) {
  EXPECT_NEAR(least_fixed_point(1.0, 0.0, 2), least_fixed_point_bisection(1.0, 0.0, 2), 1e-12);
  for (double beta : {0.3, 0.7, 1.4})
    for (double h : {-0.3, 0.0, 0.4})
      for (int b : {2, 3}) {
        const double a = least_fixed_point(beta, h, b);
        EXPECT_NEAR(a, least_fixed_point_bisection(beta, h, b), 1e-10 * (1 + a));
        EXPECT_LE(j_prime(a, beta, h, b), 1.0 + 1e-9);
      }
}

TEST(Analytics, DerivativeLemmaGrid) {
  for (int b : {2, 3, 4})
    for (int i = 1; i <= 30; ++i)
      for (int k = 0; k <= 6; ++k) {
        const double beta = 0.1 * i;
        const double h = -0.5 + 0.25 * k;
        const double a = least_fixed_point(beta, h, b);
        const double closed = j_prime(a, beta, h, b);
        EXPECT_NEAR(closed, j_prime_numeric(a, beta, h, b), 1e-6 * (1 + closed));
        EXPECT_LT(std::abs(k_beta(a, beta) - closed / b), 1e-9) << beta << " " << h << " " << b;
      }
}

TEST(Analytics, RecursionIdentity) {
  for (int b : {2, 3})
    for (double beta : {0.3, 0.9, 1.5})
      for (double h : {-0.2, 0.0, 0.5}) {
        auto t = TreeTopology::build(b, 5);
        auto ms = MessageSet::compute(make_ising(beta, h), t, all_plus(t));
        for (VertexId z = 0; z < t.internal_count(); ++z) {
          const int ell = t.levels_below(z);
          const double r = ms.magnetization_ratio(z);
          EXPECT_LT(std::abs(r - j_iterate(ell, beta, h, b)) / r, 1e-9);
        }
      }
}

TEST(Analytics, CriticalValues) {
  EXPECT_NEAR(beta0(2), 0.5 * std::log(3.0), 1e-15);
  EXPECT_NEAR(beta0(2), 0.549306, 1e-6);
  for (int b = 2; b <= 9; ++b) {
    EXPECT_NEAR(std::tanh(beta1(b)), 1.0 / std::sqrt(b), 1e-12);
    EXPECT_NEAR(std::tanh(beta0(b)), 1.0 / b, 1e-12);
    EXPECT_LT(beta0(b), beta1(b));
  }
  EXPECT_NEAR(potts_beta1(2, 3), 0.5 * std::log(7.0), 1e-9);
  EXPECT_NEAR(lambda0(2), 4.0, 1e-12);
  EXPECT_NEAR(lambda0(5), 3125.0 / 4096.0, 1e-12);
  EXPECT_NEAR(1.0 / (std::sqrt(5.0) - 1.0), 0.809017, 1e-6);
  for (int b = 5; b <= 9; ++b) EXPECT_GT(1.0 / (std::sqrt(b) - 1.0), lambda0(b));
  auto cv = critical_values(3, 4);
  EXPECT_EQ(cv.beta0, beta0(3));
  EXPECT_NEAR(cv.potts_beta0_upper, 0.5 * std::log(6.0 / 2.0), 1e-15);
  EXPECT_EQ(cv.h_c(0.1), 0.0);
}

TEST(Analytics, CriticalFieldClosedForm) {
  for (int b : {2, 3, 5})
    for (double beta : {beta0(b) + 0.05, 1.0, 2.0}) {
      // roots of a^2 + (2 cosh 2b - 2 b sinh 2b) a + 1 = 0
      const double p = 2 * std::cosh(2 * beta) - 2 * b * std::sinh(2 * beta);
      const double small = (-p - std::sqrt(p * p - 4)) / 2;
      EXPECT_NEAR(small * ((-p + std::sqrt(p * p - 4)) / 2), 1.0, 1e-12);
      EXPECT_NEAR(tangency_point(beta, b), small, 1e-12);
      const double hc = std::abs((b * std::log(f_beta(small, beta)) - std::log(small)) / (2 * beta));
      EXPECT_NEAR(h_critical(beta, b), hc, 1e-12);
    }
}

TEST(Analytics, CriticalFieldSeparatesUniqueness) {
  for (int b : {2, 3})
    for (double beta : {0.8, 1.2, 2.0}) {
      const double hc = h_critical(beta, b);
      ASSERT_GT(hc, 0.0);
      for (double sign : {1.0, -1.0}) {
        const double above = sign * (hc + 0.01);
        const double lo = least_fixed_point(beta, above, b), hi = greatest_fixed_point(beta, above, b);
        EXPECT_NEAR(lo / hi, 1.0, 1e-8);
        const double below = sign * (hc - 0.01);
        EXPECT_GT(greatest_fixed_point(beta, below, b) / least_fixed_point(beta, below, b), 1.001);
      }
    }
}

TEST(Analytics, CriticalFieldVanishesAtBeta0) {
  const int b = 2;
  EXPECT_EQ(h_critical(beta0(b), b), 0.0);
  double prev = h_critical(beta0(b) + 1.0, b);
  for (int k = 1; k <= 20; ++k) {
    const double cur = h_critical(beta0(b) + std::ldexp(1.0, -k), b);
    EXPECT_LT(cur, prev);
    EXPECT_GT(cur, 0.0);
    prev = cur;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Analytics, RatiosBelowLeastFixedPoint) {
  for (double beta : {0.5, 1.0, 1.8})
    for (double h : {0.0, 0.3, -0.05}) {
      if (h < -h_critical(beta, 2)) continue;
      auto t = TreeTopology::build(2, 8);
      auto ms = MessageSet::compute(make_ising(beta, h), t, all_plus(t));
      const double a0 = least_fixed_point(beta, h, 2);
      for (VertexId z = 0; z < t.internal_count(); ++z) EXPECT_LE(ms.magnetization_ratio(z), a0 + 1e-12);
    }
}

TEST(Analytics, KappaGamma) {
  auto t = TreeTopology::build(2, 5);
  auto zero = kappa_ising(make_ising(0.0, 0.0), t, all_plus(t));
  EXPECT_EQ(zero.kappa, 0.0);
  EXPECT_EQ(gamma_ising(0.0), 0.0);
  EXPECT_NEAR(2 * std::pow(gamma_ising(beta1(2)), 2), 1.0, 1e-12);
  auto k2 = kappa_ising(make_ising(2.0, 0.0), t, all_plus(t));
  EXPECT_FALSE(k2.bound_fallback);
  const double a0 = least_fixed_point(2.0, 0.0, 2);
  EXPECT_NEAR(k2.kappa_bound, k_beta(a0, 2.0), 1e-15);
  EXPECT_LE(2 * k2.kappa_bound, j_prime(a0, 2.0, 0.0, 2) + 1e-12);
  EXPECT_LE(j_prime(a0, 2.0, 0.0, 2), 1.0);
  EXPECT_LE(k2.kappa, k2.kappa_bound + 1e-12);
  auto low = kappa_ising(make_ising(1.5, -3.0), t, all_plus(t));
  EXPECT_TRUE(low.bound_fallback);
  for (double beta : {0.2, 0.9, 1.6})
    for (const auto& bc : {all_plus(t), BoundaryCondition::free(), all_minus(t)}) {
      auto m = make_ising(beta, 0.1);
      auto cc = coupling_constants(m, t, bc);
      EXPECT_LE(cc.kappa, cc.gamma);
      EXPECT_NEAR(kappa_numeric(m, t, bc), cc.kappa, 1e-12);
    }
}

TEST(Analytics, DisagreementMatchesK) {
  auto t = TreeTopology::build(2, 4);
  auto m = make_ising(1.1, 0.2);
  auto bc = all_plus(t);
  auto ms = MessageSet::compute(m, t, bc);
  for (VertexId z : {1u, 4u, 9u}) {
    auto region = subtree(t, z);
    auto cfg = make_configuration(t, bc);
    const double tv = tv_disagreement(m, t, bc, region, cfg, *t.parent(z), z);
    EXPECT_NEAR(tv, k_beta(ms.magnetization_ratio(z), 1.1), 1e-10);
  }
  auto m0 = make_hardcore(1.0);
  auto zero = make_potts(3, 0.0, false);
  auto cfg = make_configuration(t, BoundaryCondition::free());
  EXPECT_EQ(tv_disagreement(zero, t, BoundaryCondition::free(), block(t, 1, 2), cfg, 0, 1), 0.0);
  EXPECT_GT(tv_disagreement(m0, t, BoundaryCondition::free(), block(t, 1, 2), cfg, 0, 1), 0.0);
}

TEST(Analytics, NumericGamma) {
  EXPECT_NEAR(gamma_numeric(make_ising(0.8, 0.0), 2), std::tanh(0.8), 1e-12);
  EXPECT_EQ(gamma_numeric(make_potts(3, 0.0, false), 2), 0.0);
  const double g = gamma_numeric(make_colorings(4), 2);
  EXPECT_GT(g, 0.0);
  EXPECT_LE(g, 1.0);
  auto t = TreeTopology::build(2, 4);
  auto cc = coupling_constants(make_colorings(4), t, constant_color(t, 0));
  EXPECT_EQ(cc.provenance, Provenance::Numeric);
  EXPECT_LE(cc.kappa, cc.gamma);
}

TEST(Analytics, HardCoreRecursion) {
  auto traj = hardcore_recursion(1e-6, 2, 5, 0.0);
  for (std::size_t i = 1; i < traj.size(); ++i) EXPECT_NEAR(traj[i], 1e-6, 1e-11);
  for (int b : {2, 3, 4}) EXPECT_NEAR(hardcore_cycle_onset(b), lambda0(b), 1e-3);
  EXPECT_TRUE(hardcore_has_two_cycle(6.0, 2));
  EXPECT_FALSE(hardcore_has_two_cycle(2.0, 2));
}

TEST(Analytics, HardCoreRecursionMatchesDp) {
  auto t = TreeTopology::build(2, 6);
  auto m = make_hardcore(3.0);
  for (const auto& bc : {even_occupied(t), odd_occupied(t)}) {
    auto ms = MessageSet::compute(m, t, bc);
    const double start = bc.assignment()[0] == 1 ? INFINITY : 0.0;
    auto traj = hardcore_recursion(3.0, 2, t.depth() + 1, start);
    for (VertexId v = 0; v < t.internal_count(); ++v) {
      const double r = std::exp(ms.log_z(v, 1) - ms.log_z(v, 0));
      EXPECT_NEAR(r, traj[static_cast<std::size_t>(t.levels_below(v))], 1e-12 * (1 + r));
    }
  }
}

TEST(Analytics, HardCoreEvenOddContrast) {
  auto root_occupation = [](double lambda, const TreeTopology& t, const BoundaryCondition& bc) {
    return MessageSet::compute(make_hardcore(lambda), t, bc).marginal(0)[1];
  };
  auto t = TreeTopology::build(2, 12);
  EXPECT_GT(std::abs(root_occupation(6.0, t, even_occupied(t)) - root_occupation(6.0, t, odd_occupied(t))), 0.1);
  // below the critical activity the boundary influence decays geometrically
  double prev = 1.0;
  for (int depth = 2; depth <= 12; depth += 2) {
    auto td = TreeTopology::build(2, depth);
    const double diff = std::abs(root_occupation(2.0, td, even_occupied(td)) - root_occupation(2.0, td, odd_occupied(td)));
    EXPECT_LT(diff, prev);
    prev = diff;
  }
  // at depth 12 the gap is still ~0.05; the recursion reaches 1e-6 only near depth 70
  EXPECT_GT(prev, 0.04);
  auto occupation = [](double lambda, int depth, double start) {
    const double r = hardcore_recursion(lambda, 2, depth + 1, start).back();
    return r / (1.0 + r);
  };
  EXPECT_LT(std::abs(occupation(2.0, 80, INFINITY) - occupation(2.0, 80, 0.0)), 1e-6);
  EXPECT_GT(std::abs(occupation(6.0, 80, INFINITY) - occupation(6.0, 80, 0.0)), 0.1);
}
