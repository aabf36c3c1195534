#include <gtest/gtest.h>

#include <cmath>

#include "treegibbs/exact.hpp"
#include "treegibbs/state_space.hpp"

using namespace treegibbs;

namespace {

double brute_partition_by_weights(const SpinModel& m, const TreeTopology& t, const BoundaryCondition& bc) {
  // independent oracle: sum gibbs_weight over every q^n assignment
  const VertexId n = t.internal_count();
  const int q = m.spin_count();
  std::size_t count = 1;
  for (VertexId v = 0; v < n; ++v) count *= static_cast<std::size_t>(q);
  Configuration c = make_configuration(t, bc);
  double z = 0.0;
  for (std::size_t code = 0; code < count; ++code) {
    std::size_t r = code;
    for (VertexId v = 0; v < n; ++v) {
      c[v] = static_cast<Spin>(r % static_cast<std::size_t>(q));
      r /= static_cast<std::size_t>(q);
    }
    z += gibbs_weight(m, t, bc, c);
  }
  return z;
}

}  // namespace

TEST(Exact, ZeroBetaSymmetric) {
  auto t = TreeTopology::build(2, 3);
  auto ms = MessageSet::compute(make_ising(0.0, 0.0), t, all_plus(t));
  for (VertexId v = 0; v < t.internal_count(); ++v) EXPECT_NEAR(ms.log_z(v, 0), ms.log_z(v, 1), 1e-12);
  auto p = ms.marginal(5);
  EXPECT_NEAR(p[0], 0.5, 1e-14);
}

TEST(Exact, SingleSiteRatio) {
  auto t = TreeTopology::build(2, 0);
  auto ms = MessageSet::compute(make_ising(1.0, 0.0), t, all_plus(t));
  EXPECT_NEAR(ms.log_z(0, 0) - ms.log_z(0, 1), 4.0, 1e-12);
}

TEST(Exact, PartitionFunctionMatchesWeightSum) {
  auto t = TreeTopology::build(2, 2);
  for (const auto& m : {make_ising(0.8, 0.3), make_hardcore(1.7)}) {
    for (const auto& bc : {all_plus(t), BoundaryCondition::free(), all_minus(t)}) {
      auto ms = MessageSet::compute(m, t, bc);
      EXPECT_NEAR(ms.log_partition(), std::log(brute_partition_by_weights(m, t, bc)), 1e-12);
    }
  }
}

TEST(Exact, RootMarginalMatchesEnumeration) {
  auto t = TreeTopology::build(2, 1);
  auto m = make_ising(0.5, 0.0);
  auto bc = all_plus(t);
  auto ms = MessageSet::compute(m, t, bc);
  auto bf = brute_force(m, t, bc);
  EXPECT_NEAR(ms.marginal(0)[0], bf.marginals[0][0], 1e-12);
}

TEST(Exact, OracleEquivalenceAllModels) {
  struct Case {
    SpinModel model;
    std::string boundary;
    int depth;
  };
  std::vector<Case> cases{
      {make_ising(1.1, -0.2), "plus", 3},      {make_ising(0.4, 0.5), "free", 3},
      {make_hardcore(3.0), "even", 3},         {make_hardcore(0.7), "odd", 3},
      {make_colorings(3), "color:2", 3},       {make_colorings(4), "free", 2},
      {make_potts(3, 0.9, false), "color:1", 2}, {make_potts(3, 0.6, true), "free", 2}};
  for (const auto& c : cases) {
    auto t = TreeTopology::build(2, c.depth);
    auto bc = parse_boundary(c.boundary, c.model, t);
    auto ms = MessageSet::compute(c.model, t, bc);
    auto bf = brute_force(c.model, t, bc);
    EXPECT_NEAR(ms.log_partition(), bf.log_partition, 1e-10);
    for (VertexId v = 0; v < t.internal_count(); ++v) {
      auto p = ms.marginal(v);
      for (std::size_t s = 0; s < p.size(); ++s) EXPECT_NEAR(p[s], bf.marginals[v][s], 1e-10);
    }
  }
}

TEST(Exact, ClampedMatchesConditionedEnumeration) {
  auto t = TreeTopology::build(2, 2);
  auto m = make_potts(3, 0.7, false);
  auto bc = constant_color(t, 1);
  std::vector<int> clamp(t.total_count(), kUnclamped);
  clamp[1] = 2;
  clamp[6] = 0;
  auto ms = MessageSet::compute(m, t, bc, clamp);
  auto bf = brute_force(m, t, bc, clamp);
  for (VertexId v = 0; v < t.internal_count(); ++v) {
    auto p = ms.marginal(v);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(p[s], bf.marginals[v][s], 1e-12);
  }
}

TEST(Exact, HardCoreOccupiedParent) {
  auto t = TreeTopology::build(2, 2);
  auto ms = MessageSet::compute(make_hardcore(2.0), t, BoundaryCondition::free());
  EXPECT_EQ(ms.marginal_given_parent(1, 1)[1], 0.0);
}

TEST(Exact, ImpossibleBoundary) {
  auto t = TreeTopology::build(2, 0);
  auto bc = BoundaryCondition::fixed({0, 1});
  EXPECT_THROW(MessageSet::compute(make_colorings(2), t, bc), FrozenContradiction);
}

TEST(Exact, SamplerFrequencies) {
  auto t = TreeTopology::build(2, 3);
  {
    auto ms = MessageSet::compute(make_ising(0.0, 0.0), t, all_plus(t));
    Rng rng = make_rng(1);
    int plus = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) plus += ms.sample(rng)[0] == 0;
    EXPECT_NEAR(plus / double(n), 0.5, 3 * std::sqrt(0.25 / n));
  }
  {
    auto ms = MessageSet::compute(make_ising(1.0, 0.0), t, all_plus(t));
    const double p = ms.marginal(0)[0];
    Rng rng = make_rng(2);
    int plus = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) plus += ms.sample(rng)[0] == 0;
    EXPECT_NEAR(plus / double(n), p, 3 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(Exact, HardCoreSamplesValidAndReproducible) {
  auto t = TreeTopology::build(2, 4);
  auto m = make_hardcore(5.0);
  auto bc = even_occupied(t);
  auto ms = MessageSet::compute(m, t, bc);
  Rng a = make_rng(9), b = make_rng(9);
  for (int i = 0; i < 2000; ++i) {
    auto c = ms.sample(a);
    EXPECT_TRUE(is_valid(m, t, bc, c));
    EXPECT_EQ(c, ms.sample(b));
  }
}

TEST(Exact, BlockPosteriorMatchesClampedMessages) {
  auto t = TreeTopology::build(2, 4);
  auto m = make_ising(0.9, 0.1);
  auto bc = all_plus(t);
  auto ms = MessageSet::compute(m, t, bc);
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = ms.sample(rng);
    for (int ell = 1; ell <= 5; ++ell) {
      auto lw = block_root_log_weights(m, t, bc, 0, ell, c);
      auto p = detail::normalize_log(lw);
      std::vector<int> clamp(t.total_count(), kUnclamped);
      auto lvl = t.descendants(0, ell);
      for (VertexId v = lvl.begin; v < lvl.end; ++v) clamp[v] = c[v];
      auto ref = MessageSet::compute(m, t, bc, clamp).marginal(0);
      EXPECT_NEAR(p[0], ref[0], 1e-12);
    }
  }
}

TEST(Exact, BruteForceCap) {
  auto t = TreeTopology::build(2, 4);
  EXPECT_THROW(brute_force(make_potts(5, 0.1, false), t, BoundaryCondition::free(), {}, 1000), StateSpaceTooLarge);
}
