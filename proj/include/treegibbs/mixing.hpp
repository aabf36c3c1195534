#pragma once

// Spatial mixing on small trees: the variance and entropy mixing conditions
// VM(l, eps) / EM(l, eps), their dual root contraction, the modified conditions
// used to bound c_gap and c_sob, p_min, and the statistic g_s^(l).
//
// Everything at a site x is computed under mu^eta_{T_x}, whose only freedom is
// the spin eta of the parent of x.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "treegibbs/analytics.hpp"
#include "treegibbs/exact.hpp"
#include "treegibbs/parallel.hpp"
#include "treegibbs/state_space.hpp"
#include "treegibbs/stats.hpp"

namespace treegibbs {

inline constexpr std::size_t kMaxLevelAssignments = std::size_t{1} << 20;

// Parent spins of x with positive probability under mu (nullopt only for the root).
inline std::vector<std::optional<Spin>> parent_conditionings(const MessageSet& ms, VertexId x) {
  std::vector<std::optional<Spin>> out;
  auto parent = ms.tree().parent(x);
  if (!parent) {
    out.emplace_back(std::nullopt);
    return out;
  }
  auto p = ms.marginal(*parent);
  for (std::size_t s = 0; s < p.size(); ++s)
    if (p[s] > 0.0) out.emplace_back(static_cast<Spin>(s));
  return out;
}

// mu^eta_{T_x}(sigma_x = .)
inline std::vector<double> site_law(const MessageSet& ms, VertexId x, std::optional<Spin> parent) {
  return parent ? ms.marginal_given_parent(x, *parent) : ms.marginal(x);
}

// min over x, realizable eta and s of mu^eta_{T_x}(sigma_x = s).
inline double pmin(const MessageSet& ms) {
  double best = 1.0;
  for (VertexId x = 0; x < ms.tree().internal_count(); ++x)
    for (auto eta : parent_conditionings(ms, x))
      for (double p : site_law(ms, x, eta)) best = std::min(best, p);
  return best;
}

inline double pmin(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary) {
  return pmin(MessageSet::compute(model, tree, boundary));
}

// ---- dual root contraction -----------------------------------------------------

// eps* = max over g(sigma_x) of Var^eta_{T_x}[E(g | sigma at distance l)] / Var^eta_{T_x}(g),
// the squared maximal correlation between sigma_x and the spins l levels below.
// It equals the best VM constant at (x, l, eta): functions not depending on
// B_{x,l} see sigma_x only through that level.
inline double vm_root_contraction(const MessageSet& ms, VertexId x, int ell, std::optional<Spin> parent,
                                  std::size_t cap = kMaxLevelAssignments) {
  const auto& tree = ms.tree();
  const auto& model = ms.model();
  tree.check(x);
  if (ell < 0) throw InvalidArgument("negative block depth");
  const auto prior = site_law(ms, x, parent);
  std::vector<std::size_t> support;
  for (std::size_t s = 0; s < prior.size(); ++s)
    if (prior[s] > 0.0) support.push_back(s);
  if (support.size() < 2) return 0.0;
  if (ell == 0) return 1.0;
  if (ell >= tree.levels_below(x)) return 0.0;  // the level below is the boundary, or nothing
  const auto level = tree.descendants(x, ell);
  const int q = model.spin_count();
  double count = 1.0;
  for (VertexId i = 0; i < level.size(); ++i) count *= q;
  if (count > static_cast<double>(cap)) throw StateSpaceTooLarge("too many assignments of the level below x");
  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  Configuration config = make_configuration(tree, ms.boundary());
  std::vector<int> digits(level.size(), 0);
  std::vector<double> joint(static_cast<std::size_t>(q));
  Eigen::VectorXd w(k);
  // log partition function of mu^eta_{T_x}
  std::vector<double> root_terms(static_cast<std::size_t>(q));
  for (int s = 0; s < q; ++s)
    root_terms[static_cast<std::size_t>(s)] =
        ms.log_z(x, static_cast<Spin>(s)) + (parent ? model.pair_log_factor(*parent, static_cast<Spin>(s)) : 0.0);
  const double log_zx = detail::log_sum_exp(root_terms.data(), q);
  double total = 0.0;
  for (;;) {
    double lz = 0.0;
    for (VertexId i = 0; i < level.size(); ++i) {
      config[level.begin + i] = static_cast<Spin>(digits[i]);
      lz += ms.log_z(level.begin + i, static_cast<Spin>(digits[i]));
    }
    if (lz != kNegInf) {
      auto lw = block_root_log_weights(model, tree, ms.boundary(), x, ell, config);
      for (int s = 0; s < q; ++s) {
        double l = lw[static_cast<std::size_t>(s)] + lz;
        if (parent) l += model.pair_log_factor(*parent, static_cast<Spin>(s));
        joint[static_cast<std::size_t>(s)] = l;
      }
      const double m = *std::max_element(joint.begin(), joint.end());
      if (m != kNegInf) {
        double z = 0.0;
        for (double& l : joint) z += std::exp(l - m);
        const double weight = std::exp(m + std::log(z) - log_zx);
        for (Eigen::Index i = 0; i < k; ++i) {
          const std::size_t s = support[static_cast<std::size_t>(i)];
          w(i) = std::exp(joint[s] - m) / z - prior[s];
        }
        a.noalias() += weight * w * w.transpose();
        total += weight;
      }
    }
    std::size_t pos = 0;
    while (pos < digits.size() && ++digits[pos] == q) digits[pos++] = 0;
    if (pos == digits.size()) break;
  }
  if (total <= 0.0) return 0.0;
  a /= total;
  Eigen::VectorXd inv_sqrt(k);
  for (Eigen::Index i = 0; i < k; ++i) inv_sqrt(i) = 1.0 / std::sqrt(prior[support[static_cast<std::size_t>(i)]]);
  const Eigen::MatrixXd s = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  return std::clamp(es.eigenvalues()(k - 1), 0.0, 1.0);
}

// max over x and eta of eps*(x, l, eta).
inline double vm_epsilon(const MessageSet& ms, int ell) {
  double best = 0.0;
  for (VertexId x = 0; x < ms.tree().internal_count(); ++x)
    for (auto eta : parent_conditionings(ms, x)) best = std::max(best, vm_root_contraction(ms, x, ell, eta));
  return best;
}

// ---- functionals on mu^eta_{T_x} -------------------------------------------------

// The state space of T_x with parent spin eta, in the local numbering of the subtree.
struct SubtreeSpace {
  SubtreeView view;
  StateSpace space;
  VertexId x = 0;
  std::optional<Spin> parent;

  Region root_excluded() const { return subtree_without_root(view.tree, 0); }
  Region block_region(int ell) const { return block(view.tree, 0, ell); }
};

inline SubtreeSpace subtree_space(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary,
                                  VertexId x, std::optional<Spin> parent,
                                  std::size_t cap = StateSpace::kDefaultCap) {
  if (parent.has_value() != tree.parent(x).has_value()) throw InvalidArgument("parent spin given for the root or missing");
  auto view = restrict_to_subtree(tree, boundary, x);
  auto space = StateSpace::enumerate(model, view.tree, view.boundary, parent, cap);
  return SubtreeSpace{std::move(view), std::move(space), x, parent};
}

// Random positive function of the spins outside B_{x,l}, as a table over the subtree space.
template <class Gen>
std::vector<double> random_function_outside_block(const SubtreeSpace& st, int ell, Gen& rng, double scale = 1.0) {
  const auto& ss = st.space;
  if (ell == 0) return random_positive_function(ss.size(), rng, scale);
  auto part = ss.partition(st.block_region(ell));
  auto values = random_positive_function(part.count(), rng, scale);
  std::vector<double> f(ss.size());
  for (std::size_t i = 0; i < ss.size(); ++i) f[i] = values[part.group_of[i]];
  return f;
}

namespace detail {

inline void require_outside_block(const SubtreeSpace& st, std::span<const double> f, int ell) {
  if (ell > 0 && st.space.depends_on(f, st.block_region(ell))) throw InvalidArgument("function depends on the block B_{x,l}");
}

}  // namespace detail

// Var^eta_{T_x}[E_{T~_x}(f)] / Var^eta_{T_x}(f) for f not depending on B_{x,l}; 0/0 = 0.
// Variance at rounding level relative to E[f^2] counts as 0.
inline double vm_verify(const SubtreeSpace& st, std::span<const double> f, int ell) {
  detail::require_outside_block(st, f, ell);
  const double var = st.space.variance(f);
  const double m = st.space.expectation(f);
  if (var <= 1e-14 * (var + m * m)) return 0.0;
  return st.space.variance(st.space.project(f, st.root_excluded())) / var;
}

// Ent analogue of vm_verify; f >= 0. Ent(f) < 1e-12 E[f] reports 0.
inline double em_verify(const SubtreeSpace& st, std::span<const double> f, int ell) {
  detail::require_outside_block(st, f, ell);
  const double ent = st.space.entropy(f);
  if (ent < 1e-12 * st.space.expectation(f)) return 0.0;
  return st.space.entropy(st.space.project(f, st.root_excluded())) / ent;
}

struct DecayCheck {
  bool applicable = false;  // eps inside the hypothesis of the inequality
  double eps_prime = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = true;
};

// Var[E_{T~_x} f] <= (2 - e')/(1 - e') E[Var_B f] + e'/(1 - e') E[Var_{T~_x} f], e' = 2 eps, eps < 1/2.
inline DecayCheck decay_vcond_variance(const SubtreeSpace& st, std::span<const double> f, int ell, double eps,
                                       double slack = 1e-10) {
  DecayCheck c;
  if (!(eps < 0.5) || ell < 1) return c;
  c.applicable = true;
  c.eps_prime = 2.0 * eps;
  const auto& ss = st.space;
  const Region tilde = st.root_excluded();
  c.lhs = ss.variance(ss.project(f, tilde));
  const double e = c.eps_prime;
  c.rhs = (2.0 - e) / (1.0 - e) * ss.mean_cond_variance(f, st.block_region(ell)) +
          e / (1.0 - e) * ss.mean_cond_variance(f, tilde);
  c.pass = c.lhs <= c.rhs + slack;
  return c;
}

// Ent[E_{T~_x} f] <= 1/(1 - e') E[Ent_B f] + e'/(1 - e') E[Ent_{T~_x} f], e' = sqrt(eps)/p_min, eps < p_min^2.
inline DecayCheck decay_vcond_entropy(const SubtreeSpace& st, std::span<const double> f, int ell, double eps,
                                      double p_min, double slack = 1e-10) {
  DecayCheck c;
  if (!(eps < p_min * p_min) || ell < 1) return c;
  c.applicable = true;
  c.eps_prime = std::sqrt(eps) / p_min;
  const auto& ss = st.space;
  const Region tilde = st.root_excluded();
  c.lhs = ss.entropy(ss.project(f, tilde));
  const double e = c.eps_prime;
  c.rhs = 1.0 / (1.0 - e) * ss.mean_cond_entropy(f, st.block_region(ell)) + e / (1.0 - e) * ss.mean_cond_entropy(f, tilde);
  c.pass = c.lhs <= c.rhs + slack;
  return c;
}

// ---- block bounds on the whole tree ------------------------------------------------

struct SpatFastCheck {
  bool applicable = false;
  double delta = 0.0;
  double lhs = 0.0;    // Var(f) or Ent(f)
  double bound = 0.0;  // (3/delta) E_l(f) or (2/delta) E^e_l(f)
  bool pass = true;
};

// Largest delta with eps <= (1 - delta) / (2 (l + 1 - delta)); <= 0 when none.
inline double spat_fast_delta(double eps, int ell) {
  return (1.0 - 2.0 * eps * (ell + 1)) / (1.0 - 2.0 * eps);
}

// Largest delta with eps <= [(1 - delta) p_min / (l + 1 - delta)]^2.
inline double spat_fast_entropy_delta(double eps, double p_min, int ell) {
  const double r = std::sqrt(eps);
  return (p_min - r * (ell + 1)) / (p_min - r);
}

inline double block_entropy_form(const StateSpace& ss, std::span<const double> f, int ell) {
  double total = 0.0;
  for (VertexId x = 0; x < ss.tree().internal_count(); ++x) total += ss.mean_cond_entropy(f, block(ss.tree(), x, ell));
  return total;
}

inline double block_variance_form(const StateSpace& ss, std::span<const double> f, int ell) {
  double total = 0.0;
  for (VertexId x = 0; x < ss.tree().internal_count(); ++x) total += ss.mean_cond_variance(f, block(ss.tree(), x, ell));
  return total;
}

// Var(f) <= (3/delta) sum_x E[Var_{B_{x,l}} f] when VM(l, eps) holds with delta > 0.
inline SpatFastCheck spat_fast_check(const StateSpace& ss, std::span<const double> f, int ell, double eps,
                                     double slack = 1e-9) {
  SpatFastCheck c;
  c.delta = spat_fast_delta(eps, ell);
  if (!(c.delta > 0.0) || !(eps < 0.5)) return c;
  c.applicable = true;
  c.lhs = ss.variance(f);
  c.bound = 3.0 / c.delta * block_variance_form(ss, f, ell);
  c.pass = c.lhs <= c.bound + slack;
  return c;
}

// Ent(f) <= (2/delta) sum_x E[Ent_{B_{x,l}} f] when EM(l, eps) holds with delta > 0.
inline SpatFastCheck spat_fast_entropy_check(const StateSpace& ss, std::span<const double> f, int ell, double eps,
                                             double p_min, double slack = 1e-9) {
  SpatFastCheck c;
  if (p_min <= 0.0) return c;
  c.delta = spat_fast_entropy_delta(eps, p_min, ell);
  if (!(c.delta > 0.0) || !(std::sqrt(eps) < p_min)) return c;
  c.applicable = true;
  c.lhs = ss.entropy(f);
  c.bound = 2.0 / c.delta * block_entropy_form(ss, f, ell);
  c.pass = c.lhs <= c.bound + slack;
  return c;
}

// ---- reports -----------------------------------------------------------------------

struct MixingReport {
  VertexId x = 0;
  int ell = 0;
  std::optional<Spin> parent;
  double eps_vm = 0.0;          // exact dual root contraction
  double eps_vm_sampled = 0.0;  // max vm_verify over random functions
  double eps_em_sampled = 0.0;  // max em_verify over random functions
  double bound_predicted = std::numeric_limits<double>::quiet_NaN();
  bool duality_ok = true;
  bool bound_ok = true;
};

struct MixingOptions {
  int ell_max = 3;
  int functions = 50;
  std::uint64_t seed = 1;
  // per-level contraction (gamma kappa b); NaN skips the bound check
  double contraction = std::numeric_limits<double>::quiet_NaN();
};

// One report per (x, l, eta) for l = 1..ell_max.
inline std::vector<MixingReport> mixing_reports(const SpinModel& model, const TreeTopology& tree,
                                                const BoundaryCondition& boundary, const MixingOptions& opt) {
  auto ms = MessageSet::compute(model, tree, boundary);
  std::vector<MixingReport> points;
  for (int ell = 1; ell <= opt.ell_max; ++ell)
    for (VertexId x = 0; x < tree.internal_count(); ++x)
      for (auto eta : parent_conditionings(ms, x)) {
        MixingReport r;
        r.x = x;
        r.ell = ell;
        r.parent = eta;
        points.push_back(r);
      }
  parallel_for(points.size(), [&](std::size_t i) {
    auto& r = points[i];
    r.eps_vm = vm_root_contraction(ms, r.x, r.ell, r.parent);
    auto st = subtree_space(model, tree, boundary, r.x, r.parent);
    Rng rng = make_rng(opt.seed, i);
    for (int k = 0; k < opt.functions; ++k) {
      auto f = random_function_outside_block(st, r.ell, rng, 1.5);
      r.eps_vm_sampled = std::max(r.eps_vm_sampled, vm_verify(st, f, r.ell));
      r.eps_em_sampled = std::max(r.eps_em_sampled, em_verify(st, f, r.ell));
    }
    r.duality_ok = r.eps_vm_sampled <= r.eps_vm + 1e-10;
    if (!std::isnan(opt.contraction)) {
      r.bound_predicted = std::pow(opt.contraction, r.ell);
      r.bound_ok = r.eps_vm <= r.bound_predicted + 1e-12;
    }
  });
  return points;
}

// ---- the statistic g_s^(l) ------------------------------------------------------

// g_s^(l)(sigma) = mu(sigma_r = s | sigma at level l) / mu(sigma_r = s), r the root.
class GStatistic {
 public:
  GStatistic(const MessageSet& ms, int ell) : ms_(&ms), ell_(ell), prior_(ms.marginal(0)) {
    if (ell < 1 || ell > ms.tree().depth() + 1) throw InvalidArgument("g statistic needs 1 <= l <= depth + 1");
  }

  int ell() const { return ell_; }

  // Returns NaN when mu(sigma_r = s) = 0.
  std::vector<double> values(const Configuration& sigma) const {
    auto lw = block_root_log_weights(ms_->model(), ms_->tree(), ms_->boundary(), 0, ell_, sigma);
    auto post = detail::normalize_log(lw);
    for (std::size_t s = 0; s < post.size(); ++s)
      post[s] = prior_[s] > 0.0 ? post[s] / prior_[s] : std::numeric_limits<double>::quiet_NaN();
    return post;
  }
  double value(const Configuration& sigma, Spin s) const { return values(sigma)[s]; }

 private:
  const MessageSet* ms_;
  int ell_;
  std::vector<double> prior_;
};

struct TailEstimate {
  int ell = 0;
  std::size_t samples = 0;
  std::size_t hits = 0;
  double tail = 0.0;
  Interval ci;
  double mean_g = 0.0;
  double mean_g_stderr = 0.0;
};

// Estimates mu[|g_s^(l) - 1| > delta] for each l from one set of perfect samples.
inline std::vector<TailEstimate> g_ell_tails(const MessageSet& ms, Spin s, const std::vector<int>& ells, double delta,
                                             std::size_t samples, std::uint64_t seed, std::size_t chunk = 4096) {
  std::vector<GStatistic> stats;
  for (int l : ells) stats.emplace_back(ms, l);
  const std::size_t chunks = (samples + chunk - 1) / chunk;
  struct Acc {
    std::vector<std::size_t> hits;
    std::vector<double> sum, sum2;
  };
  std::vector<Acc> acc(chunks, Acc{std::vector<std::size_t>(ells.size(), 0), std::vector<double>(ells.size(), 0.0),
                                   std::vector<double>(ells.size(), 0.0)});
  parallel_for(chunks, [&](std::size_t c) {
    Rng rng = make_rng(seed, c);
    const std::size_t end = std::min(samples, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      auto sigma = ms.sample(rng);
      for (std::size_t k = 0; k < stats.size(); ++k) {
        const double g = stats[k].value(sigma, s);
        acc[c].hits[k] += std::abs(g - 1.0) > delta;
        acc[c].sum[k] += g;
        acc[c].sum2[k] += g * g;
      }
    }
  });
  std::vector<TailEstimate> out(ells.size());
  for (std::size_t k = 0; k < ells.size(); ++k) {
    double sum = 0.0, sum2 = 0.0;
    auto& e = out[k];
    e.ell = ells[k];
    e.samples = samples;
    for (const auto& a : acc) {
      e.hits += a.hits[k];
      sum += a.sum[k];
      sum2 += a.sum2[k];
    }
    const double n = static_cast<double>(samples);
    e.tail = static_cast<double>(e.hits) / n;
    e.ci = wilson_interval(e.hits, samples);
    e.mean_g = sum / n;
    e.mean_g_stderr = std::sqrt(std::max(0.0, sum2 / n - e.mean_g * e.mean_g) / n);
  }
  return out;
}

// Exact mu[|g_s^(l) - 1| > delta] by enumerating the level l below the root.
inline double g_ell_tail_exact(const MessageSet& ms, Spin s, int ell, double delta,
                               std::size_t cap = kMaxLevelAssignments) {
  const auto& tree = ms.tree();
  const auto& model = ms.model();
  GStatistic stat(ms, ell);
  if (ell == tree.depth() + 1) {
    Configuration c = make_configuration(tree, ms.boundary());
    return std::abs(stat.value(c, s) - 1.0) > delta ? 1.0 : 0.0;
  }
  const auto level = tree.descendants(0, ell);
  const int q = model.spin_count();
  double count = 1.0;
  for (VertexId i = 0; i < level.size(); ++i) count *= q;
  if (count > static_cast<double>(cap)) throw StateSpaceTooLarge("too many assignments of level l");
  Configuration config = make_configuration(tree, ms.boundary());
  std::vector<int> digits(level.size(), 0);
  std::vector<double> t(static_cast<std::size_t>(q));
  double tail = 0.0;
  for (;;) {
    double lz = 0.0;
    for (VertexId i = 0; i < level.size(); ++i) {
      config[level.begin + i] = static_cast<Spin>(digits[i]);
      lz += ms.log_z(level.begin + i, static_cast<Spin>(digits[i]));
    }
    if (lz != kNegInf) {
      auto lw = block_root_log_weights(model, tree, ms.boundary(), 0, ell, config);
      for (int k = 0; k < q; ++k) t[static_cast<std::size_t>(k)] = lw[static_cast<std::size_t>(k)] + lz;
      const double l = detail::log_sum_exp(t.data(), q);
      if (l != kNegInf && std::abs(stat.value(config, s) - 1.0) > delta) tail += std::exp(l - ms.log_partition());
    }
    std::size_t pos = 0;
    while (pos < digits.size() && ++digits[pos] == q) digits[pos++] = 0;
    if (pos == digits.size()) break;
  }
  return tail;
}

}  // namespace treegibbs
