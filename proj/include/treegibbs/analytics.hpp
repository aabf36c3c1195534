#pragma once

// Closed-form recursions and critical values on the b-ary tree.
//
// Ising, for a >= 0 and c = exp(-2 beta):
//   F(a)   = (a + c) / (c a + 1)
//   K(a)   = 1 / (c a + 1) - 1 / (a / c + 1)
//   J(a)   = exp(-2 beta h) F(a)^b
// For the all-(+) boundary the magnetization ratio of a vertex l levels above
// dT is J^(l)(0), and the parent-influence total variation at z is K(R_z).
//
// Hard-core: the occupied/empty ratio obeys R' = lambda / (1 + R)^b.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "treegibbs/errors.hpp"
#include "treegibbs/exact.hpp"
#include "treegibbs/model.hpp"
#include "treegibbs/tree.hpp"

namespace treegibbs {

// ---- Ising recursions ------------------------------------------------------------

inline double f_beta(double a, double beta) {
  if (a < 0) throw InvalidArgument("F is defined for a >= 0");
  const double c = std::exp(-2.0 * beta);
  return (a + c) / (c * a + 1.0);
}

inline double f_beta_prime(double a, double beta) {
  const double c = std::exp(-2.0 * beta);
  return (1.0 - c * c) / ((c * a + 1.0) * (c * a + 1.0));
}

inline double k_beta(double a, double beta) {
  if (a < 0) throw InvalidArgument("K is defined for a >= 0");
  const double c = std::exp(-2.0 * beta);
  // algebraically a (1 - c^2) / ((c a + 1)(a + c)); this form avoids cancellation
  return a * (1.0 - c * c) / ((c * a + 1.0) * (a + c));
}

inline double j_map(double a, double beta, double h, int b) {
  return std::exp(-2.0 * beta * h) * std::pow(f_beta(a, beta), b);
}

inline double j_prime(double a, double beta, double h, int b) {
  return std::exp(-2.0 * beta * h) * b * std::pow(f_beta(a, beta), b - 1) * f_beta_prime(a, beta);
}

inline double j_prime_numeric(double a, double beta, double h, int b, double step = 1e-6) {
  const double lo = std::max(0.0, a - step);
  return (j_map(a + step, beta, h, b) - j_map(lo, beta, h, b)) / (a + step - lo);
}

inline double j_iterate(int times, double beta, double h, int b, double start = 0.0) {
  double a = start;
  for (int i = 0; i < times; ++i) a = j_map(a, beta, h, b);
  return a;
}

// Upper end of the range of J: every fixed point lies in [0, a_max].
inline double j_upper_bound(double beta, double h, int b) { return std::exp(-2.0 * beta * h + 2.0 * beta * b); }

struct FixedPoint {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Least fixed point a0 of J: monotone iteration from 0 (stops at
// |J(a) - a| < 1e-13 or after 10^4 steps), then a bisection refinement.
inline FixedPoint least_fixed_point_detail(double beta, double h, int b) {
  if (!std::isfinite(beta) || !std::isfinite(h)) throw InvalidArgument("parameters must be finite");
  FixedPoint fp;
  double a = 0.0;
  for (; fp.iterations < 10000; ++fp.iterations) {
    const double next = j_map(a, beta, h, b);
    if (std::abs(next - a) < 1e-13) {
      a = next;
      fp.converged = true;
      break;
    }
    a = next;
  }
  // refine: find a point just above with J(x) <= x and bisect between
  auto phi = [&](double x) { return j_map(x, beta, h, b) - x; };
  double lo = a;
  double step = std::max(1e-12, 1e-12 * a);
  const double top = j_upper_bound(beta, h, b);
  while (step < 1e-3 * (1.0 + top) && phi(lo + step) > 0) step *= 2;
  if (phi(lo + step) <= 0 && phi(lo) >= 0) {
    double hi = lo + step;
    for (int i = 0; i < 200 && hi - lo > 1e-16 * (1.0 + hi); ++i) {
      const double mid = 0.5 * (lo + hi);
      (phi(mid) > 0 ? lo : hi) = mid;
    }
    a = 0.5 * (lo + hi);
    fp.converged = true;
  }
  if (!fp.converged) throw ConvergenceFailure("fixed-point iteration did not converge");
  fp.value = a;
  return fp;
}

inline double least_fixed_point(double beta, double h, int b) { return least_fixed_point_detail(beta, h, b).value; }

// Greatest fixed point, by monotone iteration down from the top of the range.
inline double greatest_fixed_point(double beta, double h, int b) {
  double a = j_upper_bound(beta, h, b);
  for (int i = 0; i < 200000; ++i) {
    const double next = j_map(a, beta, h, b);
    if (std::abs(next - a) < 1e-14 * (1.0 + a)) return next;
    a = next;
  }
  return a;
}

// Independent solver: scan [0, a_max] for the first sign change of J(a) - a and bisect.
inline double least_fixed_point_bisection(double beta, double h, int b) {
  auto phi = [&](double x) { return j_map(x, beta, h, b) - x; };
  const double top = j_upper_bound(beta, h, b) * (1.0 + 1e-12) + 1e-12;
  const int grid = 200000;
  double prev = 0.0;
  for (int i = 1; i <= grid; ++i) {
    const double x = top * i / grid;
    if (phi(x) <= 0) {
      double lo = prev, hi = x;
      for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (phi(mid) > 0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev = x;
  }
  throw ConvergenceFailure("no fixed point found in range");
}

// ---- critical values ----------------------------------------------------------

inline double beta0(int b) {
  if (b < 2) throw InvalidArgument("b must be at least 2");
  return 0.5 * std::log((b + 1.0) / (b - 1.0));
}

inline double beta1(int b) {
  if (b < 2) throw InvalidArgument("b must be at least 2");
  const double r = std::sqrt(static_cast<double>(b));
  return 0.5 * std::log((r + 1.0) / (r - 1.0));
}

inline double lambda0(int b) {
  if (b < 2) throw InvalidArgument("b must be at least 2");
  return std::pow(b, b) / std::pow(b - 1.0, b + 1);
}

// Potts: beta_1 solves (u-1)/(u+q-1) * (u-1)/(u+1) = 1/b with u = exp(2 beta).
inline double potts_beta1(int b, int q) {
  if (b < 2 || q < 2) throw InvalidArgument("need b >= 2 and q >= 2");
  auto lhs = [&](double u) { return (u - 1.0) / (u + q - 1.0) * (u - 1.0) / (u + 1.0) - 1.0 / b; };
  double lo = 1.0, hi = 2.0;
  while (lhs(hi) < 0) hi *= 2.0;
  for (int i = 0; i < 300 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (lhs(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * std::log(0.5 * (lo + hi));
}

inline double potts_beta0_upper(int b, int q) { return 0.5 * std::log((b + q - 1.0) / (b - 1.0)); }

// Tangency point of J in (0, 1) for beta > beta0: the root of b K(a) = 1 there.
// (At a fixed point, J'(a) = b K(a), so J(a) = a, J'(a) = 1 reduces to this.)
inline double tangency_point(double beta, int b) {
  auto phi = [&](double a) { return b * k_beta(a, beta) - 1.0; };
  double lo = 0.0, hi = 1.0;
  if (phi(hi) <= 0) throw InvalidArgument("no tangency at or below the uniqueness threshold");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// h_c(beta): zero for beta <= beta0, otherwise |h| at the tangency of J with the diagonal.
inline double h_critical(double beta, int b) {
  if (beta <= beta0(b)) return 0.0;
  const double a = tangency_point(beta, b);
  return std::abs((b * std::log(f_beta(a, beta)) - std::log(a)) / (2.0 * beta));
}

struct CriticalValues {
  int b = 2;
  int q = 2;
  double beta0 = 0.0;
  double beta1 = 0.0;
  double lambda0 = 0.0;
  double potts_beta1 = 0.0;
  double potts_beta0_upper = 0.0;
  std::function<double(double)> h_c;
};

inline CriticalValues critical_values(int b, int q) {
  CriticalValues cv;
  cv.b = b;
  cv.q = q;
  cv.beta0 = treegibbs::beta0(b);
  cv.beta1 = treegibbs::beta1(b);
  cv.lambda0 = treegibbs::lambda0(b);
  cv.potts_beta1 = treegibbs::potts_beta1(b, q);
  cv.potts_beta0_upper = treegibbs::potts_beta0_upper(b, q);
  cv.h_c = [b](double beta) { return h_critical(beta, b); };
  return cv;
}

// ---- coupling constants ---------------------------------------------------------

enum class Provenance { Analytic, Numeric };

struct CouplingConstants {
  double kappa = 0.0;
  double gamma = 0.0;
  Provenance provenance = Provenance::Analytic;
};

inline double gamma_ising(double beta) { return std::tanh(beta); }

struct KappaIsing {
  double kappa = 0.0;        // max over z of K(R_z) on the finite tree
  double kappa_bound = 0.0;  // K(a0) under (+) with h >= -h_c, otherwise K(1)
  bool bound_fallback = false;
};

inline KappaIsing kappa_ising(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary) {
  if (model.kind() != ModelKind::Ising) throw InvalidArgument("kappa_ising needs an Ising model");
  const double beta = model.params().beta;
  const double h = model.params().h;
  const int b = tree.branching();
  auto ms = MessageSet::compute(model, tree, boundary);
  KappaIsing k;
  for (VertexId z = 1; z < tree.internal_count(); ++z) k.kappa = std::max(k.kappa, k_beta(ms.magnetization_ratio(z), beta));
  const bool plus = !boundary.is_free() &&
                    std::all_of(boundary.assignment().begin(), boundary.assignment().end(), [](Spin s) { return s == 0; });
  if (plus && h >= -h_critical(beta, b)) {
    k.kappa_bound = k_beta(least_fixed_point(beta, h, b), beta);
  } else {
    k.kappa_bound = k_beta(1.0, beta);
    k.bound_fallback = true;
  }
  return k;
}

inline double tv_distance(const std::vector<double>& p, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - r[i]);
  return 0.5 * s;
}

// max over alternative spins at y of || mu_A^eta - mu_A^{eta^y} ||_z, with eta
// read from `config` outside A.
inline double tv_disagreement(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary,
                              const Region& region, const Configuration& config, VertexId y, VertexId z) {
  if (region.contains(y)) throw InvalidArgument("y must lie outside the region");
  auto nb = tree.neighbors(z);
  if (std::find(nb.begin(), nb.end(), y) == nb.end()) throw InvalidArgument("z must be a neighbour of y");
  auto base = region_site_marginal(model, tree, boundary, region, config, z);
  double worst = 0.0;
  Configuration alt = config;
  for (int s = 0; s < model.spin_count(); ++s) {
    if (s == config[y]) continue;
    alt[y] = static_cast<Spin>(s);
    try {
      worst = std::max(worst, tv_distance(base, region_site_marginal(model, tree, boundary, region, alt, z)));
    } catch (const FrozenContradiction&) {
      // eta^y leaves no valid configuration in A; not a boundary condition
    }
  }
  return worst;
}

// kappa on a given finite tree: max over z and realizable parent spins s, s'
// of the total variation between mu^s_{T_z} and mu^{s'}_{T_z} at z.
inline double kappa_numeric(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary) {
  auto ms = MessageSet::compute(model, tree, boundary);
  const int q = model.spin_count();
  double worst = 0.0;
  for (VertexId z = 1; z < tree.internal_count(); ++z) {
    const VertexId p = *tree.parent(z);
    auto pm = ms.marginal(p);
    std::vector<std::vector<double>> cond;
    for (int s = 0; s < q; ++s) {
      if (pm[static_cast<std::size_t>(s)] <= 0) continue;
      cond.push_back(ms.marginal_given_parent(z, static_cast<Spin>(s)));
    }
    for (std::size_t i = 0; i < cond.size(); ++i)
      for (std::size_t j = i + 1; j < cond.size(); ++j) worst = std::max(worst, tv_distance(cond[i], cond[j]));
  }
  return worst;
}

namespace detail {

// Marginal of z in a connected region A of the tree, with every neighbour of A
// clamped to `eta`.
inline bool region_marginal_small(const SpinModel& model, const std::vector<std::vector<VertexId>>& adj,
                                  const std::vector<char>& in_region, const std::vector<Spin>& eta, VertexId z,
                                  std::vector<double>& out) {
  const int q = model.spin_count();
  const auto qs = static_cast<std::size_t>(q);
  std::function<std::vector<double>(VertexId, VertexId)> msg = [&](VertexId u, VertexId from) {
    std::vector<double> lw(qs);
    std::vector<double> t(qs);
    for (int s = 0; s < q; ++s) lw[static_cast<std::size_t>(s)] = model.singleton_log_factor(static_cast<Spin>(s));
    for (VertexId w : adj[u]) {
      if (w == from) continue;
      if (in_region[w]) {
        auto child = msg(w, u);
        for (int s = 0; s < q; ++s) {
          for (int sp = 0; sp < q; ++sp)
            t[static_cast<std::size_t>(sp)] = model.pair_log_factor(static_cast<Spin>(s), static_cast<Spin>(sp)) + child[static_cast<std::size_t>(sp)];
          lw[static_cast<std::size_t>(s)] += log_sum_exp(t.data(), q);
        }
      } else {
        for (int s = 0; s < q; ++s) lw[static_cast<std::size_t>(s)] += model.pair_log_factor(static_cast<Spin>(s), eta[w]);
      }
    }
    return lw;
  };
  auto lw = msg(z, z);
  out.resize(qs);
  return normalize_log(lw.data(), q, out.data());
}

}  // namespace detail

struct GammaSearch {
  int max_region_size = 4;
  std::size_t assignment_cap = std::size_t{1} << 16;
};

// Numeric gamma: exhaustive maximization of the single-site disagreement over
// connected regions A containing z inside the radius-2 ball around a vertex z
// two levels below the root of a depth-4 tree, over every assignment of dA and
// every single-site change at a neighbour y of z. The subtree T_z with its
// parent as y is included as a region, so the result dominates kappa there.
inline double gamma_numeric(const SpinModel& model, int b, const GammaSearch& search = {}) {
  const auto tree = TreeTopology::build(b, 4);
  const VertexId total = tree.total_count();
  std::vector<std::vector<VertexId>> adj(total);
  for (VertexId v = 0; v < total; ++v) adj[v] = tree.neighbors(v);
  const VertexId z = tree.level_range(2).begin;
  // radius-2 ball
  std::set<VertexId> ball{z};
  for (int r = 0; r < 2; ++r) {
    std::set<VertexId> grown = ball;
    for (VertexId v : ball)
      for (VertexId w : adj[v])
        if (!tree.is_boundary(w)) grown.insert(w);
    ball = grown;
  }
  // connected regions containing z
  std::set<std::vector<VertexId>> regions;
  std::function<void(std::vector<VertexId>)> grow = [&](std::vector<VertexId> cur) {
    std::sort(cur.begin(), cur.end());
    if (!regions.insert(cur).second) return;
    if (static_cast<int>(cur.size()) >= search.max_region_size) return;
    for (VertexId v : cur)
      for (VertexId w : adj[v]) {
        if (!ball.count(w) || std::find(cur.begin(), cur.end(), w) != cur.end()) continue;
        auto next = cur;
        next.push_back(w);
        grow(next);
      }
  };
  grow({z});

  const int q = model.spin_count();
  double worst = 0.0;
  std::vector<char> in_region(total, 0);
  std::vector<Spin> eta(total, 0);
  std::vector<double> base, alt;
  for (const auto& region : regions) {
    std::fill(in_region.begin(), in_region.end(), 0);
    for (VertexId v : region) in_region[v] = 1;
    std::vector<VertexId> bd;
    for (VertexId v : region)
      for (VertexId w : adj[v])
        if (!in_region[w] && std::find(bd.begin(), bd.end(), w) == bd.end()) bd.push_back(w);
    std::vector<VertexId> ys;
    for (VertexId w : adj[z])
      if (!in_region[w]) ys.push_back(w);
    if (ys.empty()) continue;
    double count = 1.0;
    for (std::size_t i = 0; i < bd.size(); ++i) count *= q;
    if (count > static_cast<double>(search.assignment_cap)) continue;
    std::vector<int> digits(bd.size(), 0);
    while (true) {
      for (std::size_t i = 0; i < bd.size(); ++i) eta[bd[i]] = static_cast<Spin>(digits[i]);
      if (detail::region_marginal_small(model, adj, in_region, eta, z, base)) {
        for (VertexId y : ys) {
          const Spin keep = eta[y];
          for (int s = 0; s < q; ++s) {
            if (s == keep) continue;
            eta[y] = static_cast<Spin>(s);
            if (detail::region_marginal_small(model, adj, in_region, eta, z, alt)) worst = std::max(worst, tv_distance(base, alt));
          }
          eta[y] = keep;
        }
      }
      std::size_t i = 0;
      while (i < digits.size() && ++digits[i] == q) digits[i++] = 0;
      if (i == digits.size()) break;
    }
  }
  // A = T_z with y its parent, on trees of a few depths
  for (int depth = 1; depth <= 4; ++depth) {
    auto t = TreeTopology::build(b, depth);
    for (Spin s = 0; s < q; ++s) {
      try {
        worst = std::max(worst, kappa_numeric(model, t, BoundaryCondition::constant(t, s)));
      } catch (const FrozenContradiction&) {
      }
    }
    worst = std::max(worst, kappa_numeric(model, t, BoundaryCondition::free()));
  }
  return worst;
}

inline CouplingConstants coupling_constants(const SpinModel& model, const TreeTopology& tree,
                                            const BoundaryCondition& boundary, const GammaSearch& search = {}) {
  CouplingConstants cc;
  if (model.kind() == ModelKind::Ising) {
    cc.kappa = kappa_ising(model, tree, boundary).kappa;
    cc.gamma = gamma_ising(model.params().beta);
    cc.provenance = Provenance::Analytic;
  } else {
    cc.kappa = kappa_numeric(model, tree, boundary);
    cc.gamma = std::max(cc.kappa, gamma_numeric(model, tree.branching(), search));
    cc.provenance = Provenance::Numeric;
  }
  return cc;
}

// ---- hard-core recursion -------------------------------------------------------

// R_{k+1} = lambda / (1 + R_k)^b, starting from `start` (use infinity for an
// occupied level below). Returns R_0..R_steps.
inline std::vector<double> hardcore_recursion(double lambda, int b, int steps, double start) {
  if (lambda <= 0) throw InvalidArgument("lambda must be positive");
  std::vector<double> out{start};
  double r = start;
  for (int i = 0; i < steps; ++i) {
    r = std::isinf(r) ? 0.0 : lambda / std::pow(1.0 + r, b);
    out.push_back(r);
  }
  return out;
}

// The unique fixed point R* of R -> lambda / (1 + R)^b.
inline double hardcore_fixed_point(double lambda, int b) {
  double lo = 0.0, hi = lambda;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid * std::pow(1.0 + mid, b) < lambda ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// True when the iteration from 0 settles on a 2-cycle instead of the fixed point.
inline bool hardcore_has_two_cycle(double lambda, int b, int steps = 20000, double tol = 1e-6) {
  auto traj = hardcore_recursion(lambda, b, steps, 0.0);
  return std::abs(traj[traj.size() - 1] - traj[traj.size() - 2]) > tol;
}

// Smallest lambda at which the fixed point loses stability (|f'(R*)| = 1) and
// the two-step map acquires distinct stable fixed points. Bisection on lambda;
// f' by central differences.
inline double hardcore_cycle_onset(int b) {
  if (b < 2) throw InvalidArgument("b must be at least 2");
  auto slope = [&](double lambda) {
    const double r = hardcore_fixed_point(lambda, b);
    const double d = 1e-6 * std::max(1.0, r);
    auto f = [&](double x) { return lambda / std::pow(1.0 + x, b); };
    return std::abs((f(r + d) - f(r - d)) / (2 * d)) - 1.0;
  };
  double lo = 1e-6, hi = 1.0;
  while (slope(hi) < 0) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace treegibbs
