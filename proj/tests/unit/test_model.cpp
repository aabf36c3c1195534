#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "treegibbs/gibbs.hpp"
#include "treegibbs/model.hpp"
#include "treegibbs/tree.hpp"

using namespace treegibbs;

TEST(Model, IsingPotentials) {
  auto m = make_ising(1.0, 0.0);
  EXPECT_DOUBLE_EQ(m.pair(0, 0).value(), -1.0);
  EXPECT_DOUBLE_EQ(m.pair(1, 1).value(), -1.0);
  EXPECT_DOUBLE_EQ(m.pair(0, 1).value(), 1.0);
  EXPECT_DOUBLE_EQ(m.singleton(0), 0.0);
  auto f = make_ising(0.5, 0.2);
  EXPECT_NEAR(f.singleton(0), -0.1, 1e-15);
  EXPECT_NEAR(f.singleton(1), 0.1, 1e-15);
  EXPECT_EQ(f.params().beta, 0.5);
  EXPECT_EQ(f.params().h, 0.2);
}

TEST(Model, RejectsBadParameters) {
  EXPECT_THROW(make_ising(std::nan(""), 0.0), InvalidArgument);
  EXPECT_THROW(make_ising(INFINITY, 0.0), InvalidArgument);
  EXPECT_THROW(make_ising(-1.0, 0.0), InvalidArgument);
  EXPECT_THROW(make_hardcore(0.0), InvalidArgument);
  EXPECT_THROW(make_hardcore(-2.0), InvalidArgument);
  EXPECT_THROW(make_potts(1, 1.0, false), InvalidArgument);
  EXPECT_THROW(make_colorings(1), InvalidArgument);
}

TEST(Model, HardCoreWeights) {
  auto m = make_hardcore(0.5);
  EXPECT_TRUE(m.pair(1, 1).is_forbidden());
  EXPECT_FALSE(m.pair(0, 1).is_forbidden());
  // two occupied leaves under an empty root
  auto tree = TreeTopology::build(2, 1);
  auto bc = BoundaryCondition::free();
  Configuration empty = make_configuration(tree, bc);
  Configuration two = empty;
  two[1] = 1;
  two[2] = 1;
  EXPECT_NEAR(gibbs_weight(m, tree, bc, two) / gibbs_weight(m, tree, bc, empty), 0.25, 1e-15);
  auto big = TreeTopology::build(2, 2);
  Configuration c = make_configuration(big, bc);
  c[3] = c[4] = c[5] = 1;
  EXPECT_NEAR(gibbs_weight(m, big, bc, c) / gibbs_weight(m, big, bc, make_configuration(big, bc)), 0.125, 1e-15);
  c[1] = 1;
  EXPECT_EQ(gibbs_weight(m, big, bc, c), 0.0);
}

TEST(Model, ColoringsOnAnEdge) {
  auto m = make_colorings(3);
  int valid = 0;
  for (Spin a = 0; a < 3; ++a)
    for (Spin b = 0; b < 3; ++b) valid += m.allowed(a, b) ? 1 : 0;
  EXPECT_EQ(valid, 6);
}

TEST(Model, SiteConditionalIsing) {
  auto m0 = make_ising(0.0, 0.0);
  Spin nb[3] = {0, 0, 1};
  auto p = site_conditional(m0, nb);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  auto m1 = make_ising(1.0, 0.0);
  Spin plus[3] = {0, 0, 0};
  auto q = site_conditional(m1, plus);
  EXPECT_NEAR(q[1], 1.0 / (1.0 + std::exp(6.0)), 1e-15);
}

TEST(Model, SiteConditionalHardCore) {
  auto m = make_hardcore(3.0);
  Spin occ[2] = {0, 1};
  EXPECT_EQ(site_conditional(m, occ)[1], 0.0);
  Spin empty[3] = {0, 0, 0};
  EXPECT_NEAR(site_conditional(m, empty)[1], 0.75, 1e-15);
}

TEST(Model, FrozenContradiction) {
  auto m = make_colorings(2);
  Spin nb[2] = {0, 1};
  EXPECT_THROW(site_conditional(m, nb), FrozenContradiction);
}

TEST(Model, IsingClosedFormRandomContexts) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> beta(0.0, 3.0), field(-1.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    auto m = make_ising(beta(rng), field(rng));
    Spin nb[4];
    int sum = 0;
    for (auto& s : nb) {
      s = static_cast<Spin>(rng() & 1);
      sum += m.ising_sign(s);
    }
    auto p = site_conditional(m, nb);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
    for (Spin cur = 0; cur < 2; ++cur) {
      const int sx = m.ising_sign(cur);
      const double w = std::exp(2 * m.params().beta * sx * (sum + m.params().h));
      EXPECT_NEAR(p[1 - cur], 1.0 / (1.0 + w), 1e-12);
    }
  }
}

TEST(Model, DetailedBalanceAtOneSite) {
  std::mt19937_64 rng(11);
  std::vector<SpinModel> models{make_ising(0.7, 0.3), make_hardcore(2.5), make_potts(3, 1.1, false),
                                make_potts(4, 0.8, true), make_colorings(4)};
  for (const auto& m : models) {
    for (int trial = 0; trial < 50; ++trial) {
      Spin nb[3];
      for (auto& s : nb) s = static_cast<Spin>(rng() % static_cast<unsigned>(m.spin_count()));
      std::vector<double> p;
      try {
        p = site_conditional(m, nb);
      } catch (const FrozenContradiction&) {
        continue;
      }
      double total = 0.0;
      double constant = -1.0;
      for (int s = 0; s < m.spin_count(); ++s) {
        total += p[static_cast<std::size_t>(s)];
        double energy = m.singleton(static_cast<Spin>(s));
        bool forbidden = false;
        for (Spin x : nb) {
          forbidden |= m.pair(static_cast<Spin>(s), x).is_forbidden();
          energy += m.pair(static_cast<Spin>(s), x).value();
        }
        if (forbidden) {
          EXPECT_EQ(p[static_cast<std::size_t>(s)], 0.0);
          continue;
        }
        const double c = p[static_cast<std::size_t>(s)] * std::exp(energy);
        if (constant < 0) constant = c;
        EXPECT_NEAR(c / constant, 1.0, 1e-12);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Model, PottsTwoStatesMatchesIsing) {
  // Potts(q = 2) at 2*beta has the single-site kernels of Ising at beta.
  auto potts = make_potts(2, 2.0 * 0.9, false);
  auto ising = make_ising(0.9, 0.0);
  for (int mask = 0; mask < 8; ++mask) {
    Spin nb[3] = {static_cast<Spin>(mask & 1), static_cast<Spin>((mask >> 1) & 1), static_cast<Spin>((mask >> 2) & 1)};
    auto a = site_conditional(potts, nb);
    auto b = site_conditional(ising, nb);
    EXPECT_NEAR(a[0], b[0], 1e-14);
  }
}

TEST(Model, PottsZeroBetaUniform) {
  auto m = make_potts(5, 0.0, false);
  Spin nb[3] = {0, 4, 2};
  for (double p : site_conditional(m, nb)) EXPECT_NEAR(p, 0.2, 1e-15);
}

TEST(Model, GibbsWeightExamples) {
  auto tree = TreeTopology::build(2, 0);
  auto bc = all_plus(tree);
  auto c = make_configuration(tree, bc);
  EXPECT_NEAR(gibbs_weight(make_ising(1.0, 0.0), tree, bc, c), std::exp(2.0), 1e-12);
  // depth 1 under (+): six agreeing edges
  auto t1 = TreeTopology::build(2, 1);
  auto b1 = all_plus(t1);
  auto c1 = make_configuration(t1, b1);
  const double w_all = gibbs_weight(make_ising(1.0, 0.0), t1, b1, c1);
  EXPECT_NEAR(std::log(w_all), 6.0, 1e-12);
  EXPECT_EQ(gibbs_weight(make_ising(0.0, 0.0), t1, b1, c1), 1.0);
}

TEST(Model, ConfigRoundTrip) {
  ModelParams p{ModelKind::Potts, 0.75, 0.0, 1.0, 3, true};
  auto cfg = to_config(p);
  auto back = model_params_from_config(ConfigBlock::parse(cfg.canonical()));
  EXPECT_EQ(back.kind, ModelKind::Potts);
  EXPECT_EQ(back.q, 3);
  EXPECT_EQ(back.beta, 0.75);
  EXPECT_TRUE(back.antiferro);
  EXPECT_THROW(model_params_from_config(ConfigBlock::parse("model = spinglass")), InvalidArgument);
}

TEST(Config, ParseAndHash) {
  auto a = ConfigBlock::parse("beta = 1.2\n# comment\nmodel=ising\n\n");
  auto b = ConfigBlock::parse("model = ising   \n  beta=1.2");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.get_double("beta"), 1.2);
  EXPECT_EQ(a.get_string("model"), "ising");
  EXPECT_THROW(ConfigBlock::parse("no equals sign"), InvalidArgument);
  auto c = ConfigBlock::parse("grid = 1, 2.5,3");
  EXPECT_EQ(c.get_doubles("grid").size(), 3u);
  EXPECT_THROW(c.get_double("grid"), InvalidArgument);
  EXPECT_EQ(c.get_int("missing", 4), 4);
}
