#include <gtest/gtest.h>

#include <cmath>

#include "treegibbs/mixing.hpp"

using namespace treegibbs;

TEST(Mixing, PminIsing) {
  auto t = TreeTopology::build(2, 3);
  EXPECT_EQ(pmin(make_ising(0.0, 0.0), t, all_plus(t)), 0.5);
  for (double h : {0.0, 0.4, -0.7}) {
    for (const auto& bc : {all_plus(t), BoundaryCondition::free(), all_minus(t)}) {
      auto ms = MessageSet::compute(make_ising(1.0, h), t, bc);
      const double p = pmin(ms);
      // a non-root site has b + 1 neighbours
      EXPECT_GE(p, 0.5 * std::exp(-2.0 * (3 + std::abs(h))) - 1e-12);
      EXPECT_LE(p, 0.5);
      for (double r : site_law(ms, 0, std::nullopt)) EXPECT_GE(r, 0.5 * std::exp(-2.0 * (2 + std::abs(h))) - 1e-12);
    }
  }
  // minus next to a plus parent and two plus leaves
  EXPECT_NEAR(pmin(make_ising(1.0, 0.0), t, all_plus(t)), 1.0 / (1.0 + std::exp(6.0)), 1e-15);
  EXPECT_LT(pmin(make_ising(1.0, 0.0), t, all_plus(t)), 0.5 * std::exp(-4.0));
}

TEST(Mixing, PminHardConstraints) {
  auto t = TreeTopology::build(2, 3);
  EXPECT_EQ(pmin(make_colorings(3), t, frozen_coloring(t, 3, 0)), 0.0);
  EXPECT_EQ(pmin(make_hardcore(1.0), t, BoundaryCondition::free()), 0.0);
  // the parent's colour is always excluded
  EXPECT_EQ(pmin(make_colorings(4), t, BoundaryCondition::free()), 0.0);
}

TEST(Mixing, RootContractionTrivialCases) {
  auto t = TreeTopology::build(2, 3);
  auto zero = MessageSet::compute(make_ising(0.0, 0.0), t, all_plus(t));
  for (int ell = 1; ell <= 3; ++ell) EXPECT_NEAR(vm_root_contraction(zero, 0, ell, std::nullopt), 0.0, 1e-15);
  auto ms = MessageSet::compute(make_ising(0.8, 0.1), t, all_plus(t));
  EXPECT_EQ(vm_root_contraction(ms, 1, 0, Spin{0}), 1.0);
  // the level below a leaf is the fixed boundary
  EXPECT_EQ(vm_root_contraction(ms, 7, 1, Spin{1}), 0.0);
  auto frozen = MessageSet::compute(make_colorings(3), t, frozen_coloring(t, 3, 0));
  EXPECT_EQ(vm_root_contraction(frozen, 0, 2, std::nullopt), 0.0);
}

TEST(Mixing, RootContractionMatchesStateSpace) {
  auto t = TreeTopology::build(2, 2);
  Rng rng = make_rng(3);
  std::vector<std::pair<SpinModel, std::string>> cases{{make_ising(0.9, 0.2), "plus"},
                                                       {make_ising(0.7, 0.0), "free"},
                                                       {make_potts(3, 0.9, false), "color:2"},
                                                       {make_hardcore(2.0), "odd"}};
  for (const auto& [m, name] : cases) {
    auto bc = parse_boundary(name, m, t);
    auto ms = MessageSet::compute(m, t, bc);
    for (VertexId x : {VertexId{0}, VertexId{1}, VertexId{4}}) {
      if (x >= t.internal_count()) continue;
      for (auto eta : parent_conditionings(ms, x)) {
        auto st = subtree_space(m, t, bc, x, eta);
        for (int ell = 1; ell < t.levels_below(x); ++ell) {
          const double eps = vm_root_contraction(ms, x, ell, eta);
          double best = 0.0;
          for (int k = 0; k < 30; ++k) {
            // functions of sigma_x projected through the level below
            std::vector<double> g(static_cast<std::size_t>(m.spin_count()));
            for (auto& v : g) v = std::normal_distribution<double>()(rng);
            auto f = st.space.tabulate([&](std::span<const Spin> c) { return g[c[0]]; });
            const double var = st.space.variance(f);
            if (var < 1e-14) continue;
            const double ratio = st.space.variance(st.space.project(f, st.block_region(ell))) / var;
            EXPECT_LE(ratio, eps + 1e-10);
            best = std::max(best, ratio);
          }
          if (m.spin_count() == 2) {
            EXPECT_NEAR(best, eps, 1e-10);
          }
        }
      }
    }
  }
}

TEST(Mixing, DualityWithRandomFunctions) {
  MixingOptions opt;
  opt.ell_max = 3;
  opt.functions = 40;
  for (const auto& m : {make_ising(0.6, 0.0), make_ising(1.2, 0.3), make_potts(3, 0.8, true)}) {
    auto t = TreeTopology::build(2, m.spin_count() == 2 ? 3 : 2);
    for (const auto& bc : {BoundaryCondition::free(), constant_color(t, 0)}) {
      auto reports = mixing_reports(m, t, bc, opt);
      EXPECT_FALSE(reports.empty());
      for (const auto& r : reports) {
        EXPECT_TRUE(r.duality_ok) << r.x << " " << r.ell << " " << r.eps_vm_sampled << " > " << r.eps_vm;
        EXPECT_GE(r.eps_vm, 0.0);
        EXPECT_LE(r.eps_vm, 1.0);
        EXPECT_GE(r.eps_em_sampled, 0.0);
        EXPECT_LE(r.eps_em_sampled, 1.0 + 1e-12);
      }
    }
  }
}

TEST(Mixing, RootContractionNonIncreasing) {
  auto t = TreeTopology::build(2, 4);
  for (const auto& bc : {all_plus(t), BoundaryCondition::free()}) {
    auto ms = MessageSet::compute(make_ising(1.1, 0.0), t, bc);
    for (VertexId x : {VertexId{0}, VertexId{2}}) {
      for (auto eta : parent_conditionings(ms, x)) {
        double prev = 1.0;
        for (int ell = 0; ell <= t.levels_below(x); ++ell) {
          const double e = vm_root_contraction(ms, x, ell, eta);
          EXPECT_LE(e, prev + 1e-12);
          prev = e;
        }
      }
    }
  }
}

TEST(Mixing, ContractionBelowCouplingBound) {
  const double beta = 0.6;
  const int b = 2;
  auto t = TreeTopology::build(b, 5);
  auto ms = MessageSet::compute(make_ising(beta, 0.0), t, BoundaryCondition::free());
  const double rate = b * std::tanh(beta) * std::tanh(beta);
  std::vector<double> ell, log_eps;
  for (int l = 1; l <= 4; ++l) {
    const double e = vm_epsilon(ms, l);
    EXPECT_LE(e, std::pow(rate, l));
    ell.push_back(l);
    log_eps.push_back(std::log(e));
  }
  EXPECT_LE(linear_fit(ell, log_eps).slope, std::log(rate) + 0.05);
}

TEST(Mixing, ZeroTemperatureReportsVanish) {
  auto t = TreeTopology::build(2, 2);
  MixingOptions opt;
  opt.ell_max = 2;
  opt.functions = 10;
  for (const auto& r : mixing_reports(make_ising(0.0, 0.0), t, all_plus(t), opt)) {
    EXPECT_NEAR(r.eps_vm, 0.0, 1e-15);
    EXPECT_NEAR(r.eps_vm_sampled, 0.0, 1e-12);
    EXPECT_NEAR(r.eps_em_sampled, 0.0, 1e-12);
  }
}

TEST(Mixing, VerifyRejectsBlockDependence) {
  auto t = TreeTopology::build(2, 2);
  auto st = subtree_space(make_ising(0.5, 0.0), t, all_plus(t), 0, std::nullopt);
  auto root = st.space.tabulate([](std::span<const Spin> c) { return c[0] + 1.0; });
  EXPECT_THROW(vm_verify(st, root, 1), InvalidArgument);
  std::vector<double> constant(st.space.size(), 2.0);
  EXPECT_EQ(vm_verify(st, constant, 2), 0.0);
  EXPECT_EQ(em_verify(st, constant, 2), 0.0);
  EXPECT_THROW(subtree_space(make_ising(0.5, 0.0), t, all_plus(t), 1, std::nullopt), InvalidArgument);
}

TEST(Mixing, DecayLemmaVariance) {
  // 200 random functions, b = 2, m = 3, beta = 0.6, free boundary
  auto t = TreeTopology::build(2, 3);
  auto m = make_ising(0.6, 0.0);
  auto bc = BoundaryCondition::free();
  auto ms = MessageSet::compute(m, t, bc);
  Rng rng = make_rng(41);
  int applicable = 0;
  for (VertexId x : {VertexId{0}, VertexId{1}, VertexId{3}}) {
    for (auto eta : parent_conditionings(ms, x)) {
      auto st = subtree_space(m, t, bc, x, eta);
      for (int ell = 1; ell <= t.levels_below(x); ++ell) {
        const double eps = vm_root_contraction(ms, x, ell, eta);
        for (int k = 0; k < 200; ++k) {
          auto f = random_positive_function(st.space.size(), rng, 1.0);
          auto c = decay_vcond_variance(st, f, ell, eps);
          if (!c.applicable) break;
          ++applicable;
          EXPECT_TRUE(c.pass) << c.lhs << " > " << c.rhs;
        }
      }
    }
  }
  EXPECT_GT(applicable, 1000);
  std::vector<double> constant(subtree_space(m, t, bc, 0, std::nullopt).space.size(), 1.0);
  auto c = decay_vcond_variance(subtree_space(m, t, bc, 0, std::nullopt), constant, 1, 0.1);
  EXPECT_NEAR(c.lhs, 0.0, 1e-20);
  EXPECT_NEAR(c.rhs, 0.0, 1e-20);
}

TEST(Mixing, DecayLemmaEntropy) {
  auto t = TreeTopology::build(2, 3);
  auto m = make_ising(0.3, 0.0);
  auto bc = all_plus(t);
  auto ms = MessageSet::compute(m, t, bc);
  const double p = pmin(ms);
  Rng rng = make_rng(43);
  int applicable = 0;
  for (VertexId x : {VertexId{0}, VertexId{2}}) {
    for (auto eta : parent_conditionings(ms, x)) {
      auto st = subtree_space(m, t, bc, x, eta);
      for (int ell = 1; ell <= t.levels_below(x); ++ell) {
        double eps = 0.0;
        for (int k = 0; k < 100; ++k) {
          auto f = random_function_outside_block(st, ell, rng, 1.5);
          eps = std::max(eps, em_verify(st, f, ell));
        }
        for (int k = 0; k < 100; ++k) {
          auto f = random_positive_function(st.space.size(), rng, 1.5);
          auto c = decay_vcond_entropy(st, f, ell, eps, p);
          if (!c.applicable) break;
          ++applicable;
          EXPECT_TRUE(c.pass) << c.lhs << " > " << c.rhs;
        }
      }
    }
  }
  EXPECT_GT(applicable, 300);
}

TEST(Mixing, SpatialMixingGivesBlockBound) {
  const int ell = 2;
  for (const auto& bc_name : {"plus", "free"}) {
    auto t = TreeTopology::build(2, 3);
    auto m = make_ising(0.25, 0.1);
    auto bc = parse_boundary(bc_name, m, t);
    auto ms = MessageSet::compute(m, t, bc);
    const double eps = vm_epsilon(ms, ell);
    ASSERT_GT(spat_fast_delta(eps, ell), 0.0);
    auto ss = StateSpace::enumerate(m, t, bc);
    Rng rng = make_rng(47);
    for (int k = 0; k < 100; ++k) {
      auto f = random_positive_function(ss.size(), rng, 1.0);
      auto c = spat_fast_check(ss, f, ell, eps);
      ASSERT_TRUE(c.applicable);
      EXPECT_TRUE(c.pass) << c.lhs << " > " << c.bound;
    }
  }
}

TEST(Mixing, GStatistic) {
  auto t = TreeTopology::build(2, 5);
  auto flat = MessageSet::compute(make_ising(0.0, 0.0), t, all_plus(t));
  auto tails = g_ell_tails(flat, 0, {1, 3, 5}, 1e-9, 2000, 5);
  for (const auto& e : tails) {
    EXPECT_EQ(e.hits, 0u);
    EXPECT_NEAR(e.mean_g, 1.0, 1e-12);
  }
  auto ms = MessageSet::compute(make_ising(1.2, 0.0), t, BoundaryCondition::free());
  auto est = g_ell_tails(ms, 1, {1, 2, 4}, 0.1, 20000, 9);
  for (const auto& e : est) {
    EXPECT_NEAR(e.mean_g, 1.0, 3 * e.mean_g_stderr + 1e-12);
    const double exact = g_ell_tail_exact(ms, 1, e.ell, 0.1);
    EXPECT_TRUE(wilson_interval(e.hits, e.samples, 3.3).contains(exact)) << e.ell << " " << e.tail << " vs " << exact;
  }
}

TEST(Mixing, GTailDecaysUnderPlusBoundary) {
  auto t = TreeTopology::build(2, 8);
  auto ms = MessageSet::compute(make_ising(1.2, 0.0), t, all_plus(t));
  double prev = 1.0;
  for (int ell = 1; ell <= 4; ++ell) {
    const double tail = g_ell_tail_exact(ms, 0, ell, 0.1);
    EXPECT_LT(tail, prev);
    prev = tail;
  }
  EXPECT_LT(prev, 1e-9);
  // the level below the leaves is the fixed boundary: g = 1
  EXPECT_EQ(g_ell_tail_exact(ms, 0, 9, 0.1), 0.0);
}
