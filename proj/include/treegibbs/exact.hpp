#pragma once

// Exact inference on trees.
//
// MessageSet holds, for every vertex v and spin s, the log subtree weight
//   log Z_v(s) = log sum of exp(-U - W) over configurations of T_v with sigma_v = s,
// boundary edges included. Z_v(s) = exp(-W(s)) * prod_children sum_s' exp(-U(s,s')) Z_c(s').
// A downward pass adds the log weight of everything outside T_v, giving full
// marginals. Vertices can be clamped to a spin, which conditions on any
// partial configuration (a parent spin, a level of the tree, or everything
// outside a region).

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "treegibbs/errors.hpp"
#include "treegibbs/gibbs.hpp"
#include "treegibbs/model.hpp"
#include "treegibbs/random.hpp"
#include "treegibbs/tree.hpp"

namespace treegibbs {

inline constexpr int kUnclamped = -1;

namespace detail {

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

inline double log_sum_exp(const double* x, int n) {
  double mx = kNegInf;
  for (int i = 0; i < n; ++i) mx = std::max(mx, x[i]);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  return mx + std::log(s);
}

// Normalizes log weights into probabilities; returns false when all are -inf.
inline bool normalize_log(const double* lw, int n, double* p) {
  double mx = kNegInf;
  for (int i = 0; i < n; ++i) mx = std::max(mx, lw[i]);
  if (mx == kNegInf) return false;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    p[i] = lw[i] == kNegInf ? 0.0 : std::exp(lw[i] - mx);
    s += p[i];
  }
  for (int i = 0; i < n; ++i) p[i] /= s;
  return true;
}

inline std::vector<double> normalize_log(const std::vector<double>& lw) {
  std::vector<double> p(lw.size());
  if (!normalize_log(lw.data(), static_cast<int>(lw.size()), p.data())) {
    throw FrozenContradiction("conditioning admits no valid configuration");
  }
  return p;
}

inline Spin draw(const double* p, int n, double u) {
  double acc = 0.0;
  int last = 0;
  for (int i = 0; i < n; ++i) {
    if (p[i] <= 0.0) continue;
    last = i;
    acc += p[i];
    if (u < acc) return static_cast<Spin>(i);
  }
  return static_cast<Spin>(last);
}

}  // namespace detail

class MessageSet {
 public:
  // `clamp` is empty or has one entry per vertex of T u dT (kUnclamped or a
  // spin index). Clamps on dT override the boundary condition.
  static MessageSet compute(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary,
                            std::span<const int> clamp = {}) {
    boundary.validate(model, tree);
    if (!clamp.empty() && clamp.size() != tree.total_count()) throw InvalidArgument("clamp vector has the wrong size");
    MessageSet m(model, tree, boundary);
    const int q = model.spin_count();
    const auto qs = static_cast<std::size_t>(q);
    const VertexId n = tree.internal_count();
    const VertexId total = tree.total_count();
    m.evidence_.assign(total * qs, 0.0);
    for (VertexId v = 0; v < total; ++v) {
      int c = clamp.empty() ? kUnclamped : clamp[v];
      if (c == kUnclamped && v >= n && !boundary.is_free()) c = boundary.spin(tree, v);
      if (c != kUnclamped) {
        if (c < 0 || c >= q) throw InvalidArgument("clamp spin out of range");
        for (int s = 0; s < q; ++s) m.evidence_[v * qs + static_cast<std::size_t>(s)] = s == c ? 0.0 : kNegInf;
      }
    }
    m.log_z_.assign(total * qs, kNegInf);
    m.up_.assign(total * qs, 0.0);
    for (VertexId w = n; w < total; ++w)
      for (std::size_t s = 0; s < qs; ++s) m.log_z_[w * qs + s] = m.evidence_[w * qs + s];
    for (VertexId v = n; v-- > 0;) {
      const auto ch = tree.children(v);
      if (m.has_children(v))
        for (VertexId c = ch.begin; c < ch.end; ++c) m.compute_up(c);
      for (int s = 0; s < q; ++s) {
        double lw = model.singleton_log_factor(static_cast<Spin>(s)) + m.evidence_[v * qs + static_cast<std::size_t>(s)];
        if (m.has_children(v)) {
          for (VertexId c = ch.begin; c < ch.end && lw != kNegInf; ++c) lw += m.up_[c * qs + static_cast<std::size_t>(s)];
        }
        m.log_z_[v * qs + static_cast<std::size_t>(s)] = lw;
      }
    }
    m.log_partition_ = detail::log_sum_exp(&m.log_z_[0], q);
    if (m.log_partition_ == kNegInf) {
      throw FrozenContradiction("frozen contradiction: the boundary admits no valid configuration");
    }
    m.compute_outside();
    return m;
  }

  const SpinModel& model() const { return model_; }
  const TreeTopology& tree() const { return tree_; }
  const BoundaryCondition& boundary() const { return boundary_; }
  int spin_count() const { return model_.spin_count(); }

  double log_partition() const { return log_partition_; }
  double log_z(VertexId v, Spin s) const { return log_z_[idx(v, s)]; }

  // mu*_{T_v}: the law of sigma_v in T_v with the edge to the parent erased.
  std::vector<double> subtree_marginal(VertexId v) const {
    tree_.check(v);
    return detail::normalize_log(std::vector<double>(log_z_.begin() + idx(v, 0), log_z_.begin() + idx(v, 0) + qs()));
  }

  // mu^eta_{T_v}(sigma_v = .) when the parent of v has spin `parent`.
  std::vector<double> marginal_given_parent(VertexId v, Spin parent) const {
    tree_.check(v);
    std::vector<double> lw(qs());
    for (int s = 0; s < spin_count(); ++s)
      lw[static_cast<std::size_t>(s)] = log_z_[idx(v, static_cast<Spin>(s))] + model_.pair_log_factor(parent, static_cast<Spin>(s));
    return detail::normalize_log(lw);
  }

  // Marginal of sigma_v under the full measure.
  std::vector<double> marginal(VertexId v) const {
    tree_.check(v);
    std::vector<double> lw(qs());
    for (std::size_t s = 0; s < qs(); ++s) lw[s] = out_[v * qs() + s] + log_z_[v * qs() + s];
    return detail::normalize_log(lw);
  }

  // Ising only: R_z = mu*_{T_z}(-) / mu*_{T_z}(+).
  double magnetization_ratio(VertexId z) const {
    if (spin_count() != 2) throw InvalidArgument("magnetization ratio needs a two-state model");
    return std::exp(log_z_[idx(z, 1)] - log_z_[idx(z, 0)]);
  }

  // Perfect sample from the (clamped) Gibbs measure.
  Configuration sample(Rng& rng) const {
    Configuration c = make_configuration(tree_, boundary_);
    sample_subtree(0, std::nullopt, c, rng);
    return c;
  }

  // Resamples T_x (and the part of dT below it, when clamped) given the parent spin.
  void sample_subtree(VertexId x, std::optional<Spin> parent, Configuration& out, Rng& rng) const {
    std::vector<double> p(qs());
    std::vector<double> lw(qs());
    for (int d = 0;; ++d) {
      auto range = tree_.descendants(x, d);
      if (range.size() == 0) break;
      if (tree_.is_boundary(range.begin) && boundary_.is_free()) break;
      for (VertexId v = range.begin; v < range.end; ++v) {
        std::optional<Spin> ps = d == 0 ? parent : std::optional<Spin>(out[(v - 1) / static_cast<VertexId>(tree_.branching())]);
        for (std::size_t s = 0; s < qs(); ++s) {
          lw[s] = log_z_[v * qs() + s];
          if (ps) lw[s] += model_.pair_log_factor(*ps, static_cast<Spin>(s));
        }
        if (!detail::normalize_log(lw.data(), spin_count(), p.data())) {
          throw FrozenContradiction("conditioning admits no valid configuration");
        }
        out[v] = detail::draw(p.data(), spin_count(), uniform01(rng));
      }
    }
  }

 private:
  MessageSet(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary)
      : model_(model), tree_(tree), boundary_(boundary) {}

  std::size_t qs() const { return static_cast<std::size_t>(model_.spin_count()); }
  std::size_t idx(VertexId v, Spin s) const { return static_cast<std::size_t>(v) * qs() + s; }
  bool has_children(VertexId v) const { return !(boundary_.is_free() && tree_.is_leaf(v)); }

  // up_[c](s) = log sum_s' exp(-U(s, s')) Z_c(s'): the message from c to its parent.
  void compute_up(VertexId c) {
    const int q = spin_count();
    std::vector<double> t(qs());
    for (int s = 0; s < q; ++s) {
      for (int sp = 0; sp < q; ++sp)
        t[static_cast<std::size_t>(sp)] = model_.pair_log_factor(static_cast<Spin>(s), static_cast<Spin>(sp)) + log_z_[idx(c, static_cast<Spin>(sp))];
      up_[idx(c, static_cast<Spin>(s))] = detail::log_sum_exp(t.data(), q);
    }
  }

  void compute_outside() {
    const int q = spin_count();
    const VertexId n = tree_.internal_count();
    out_.assign(tree_.total_count() * qs(), kNegInf);
    for (std::size_t s = 0; s < qs(); ++s) out_[s] = 0.0;
    std::vector<double> rest(qs());
    std::vector<double> t(qs());
    for (VertexId x = 0; x < n; ++x) {
      if (!has_children(x)) continue;
      auto ch = tree_.children(x);
      for (VertexId y = ch.begin; y < ch.end; ++y) {
        // everything attached to x except the branch through y
        for (int s = 0; s < q; ++s) {
          double lw = out_[idx(x, static_cast<Spin>(s))] + model_.singleton_log_factor(static_cast<Spin>(s)) +
                      evidence_[idx(x, static_cast<Spin>(s))];
          for (VertexId c = ch.begin; c < ch.end && lw != kNegInf; ++c)
            if (c != y) lw += up_[idx(c, static_cast<Spin>(s))];
          rest[static_cast<std::size_t>(s)] = lw;
        }
        for (int sp = 0; sp < q; ++sp) {
          for (int s = 0; s < q; ++s)
            t[static_cast<std::size_t>(s)] = rest[static_cast<std::size_t>(s)] + model_.pair_log_factor(static_cast<Spin>(s), static_cast<Spin>(sp));
          out_[idx(y, static_cast<Spin>(sp))] = detail::log_sum_exp(t.data(), q);
        }
      }
    }
  }

  SpinModel model_;
  TreeTopology tree_;
  BoundaryCondition boundary_;
  std::vector<double> evidence_;
  std::vector<double> log_z_;
  std::vector<double> up_;
  std::vector<double> out_;
  double log_partition_ = 0.0;
};

inline MessageSet upward_messages(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary) {
  return MessageSet::compute(model, tree, boundary);
}

// Marginal of z under mu_A^eta, where eta is `config` outside the region A.
inline std::vector<double> region_site_marginal(const SpinModel& model, const TreeTopology& tree,
                                                const BoundaryCondition& boundary, const Region& region,
                                                const Configuration& config, VertexId z) {
  if (!region.contains(z)) throw InvalidArgument("site is not in the region");
  std::vector<int> clamp(tree.total_count(), kUnclamped);
  for (VertexId v = 0; v < tree.total_count(); ++v) {
    if (region.contains(v)) continue;
    if (tree.is_boundary(v) && boundary.is_free()) continue;
    clamp[v] = config[v];
  }
  return MessageSet::compute(model, tree, boundary, clamp).marginal(z);
}

// Log weights over sigma_x in the block B_{x,levels} when the spins `levels`
// below x are taken from `config` (no factor for the parent of x). Under a
// free boundary a block reaching past the leaves has nothing below it.
inline std::vector<double> block_root_log_weights(const SpinModel& model, const TreeTopology& tree,
                                                  const BoundaryCondition& boundary, VertexId x, int levels,
                                                  const Configuration& config) {
  if (levels < 1) throw InvalidArgument("block needs at least one level");
  if (tree.level(x) + levels > tree.depth() + 1) throw InvalidArgument("block reaches below the boundary");
  const int q = model.spin_count();
  const auto qs = static_cast<std::size_t>(q);
  const auto b = static_cast<VertexId>(tree.branching());
  const auto clamped = tree.descendants(x, levels);
  const bool has_clamped = !(tree.is_boundary(clamped.begin) && boundary.is_free());
  std::vector<double> below;
  std::vector<double> cur;
  std::vector<double> t(qs);
  for (int d = levels - 1; d >= 0; --d) {
    auto range = tree.descendants(x, d);
    cur.assign(range.size() * qs, 0.0);
    for (VertexId v = range.begin; v < range.end; ++v) {
      const std::size_t i = v - range.begin;
      for (int s = 0; s < q; ++s) {
        double lw = model.singleton_log_factor(static_cast<Spin>(s));
        const VertexId c0 = b * v + 1;
        for (VertexId k = 0; k < b && lw != kNegInf; ++k) {
          const VertexId c = c0 + k;
          if (d == levels - 1) {
            if (has_clamped) lw += model.pair_log_factor(static_cast<Spin>(s), config[c]);
          } else {
            const std::size_t ci = (c - tree.descendants(x, d + 1).begin) * qs;
            for (int sp = 0; sp < q; ++sp)
              t[static_cast<std::size_t>(sp)] = model.pair_log_factor(static_cast<Spin>(s), static_cast<Spin>(sp)) + below[ci + static_cast<std::size_t>(sp)];
            lw += detail::log_sum_exp(t.data(), q);
          }
        }
        cur[i * qs + static_cast<std::size_t>(s)] = lw;
      }
    }
    below.swap(cur);
  }
  return below;
}

// ---- brute-force oracle ---------------------------------------------------------

struct BruteForceResult {
  double log_partition = kNegInf;
  std::vector<std::vector<double>> marginals;  // per internal vertex
  std::size_t valid_count = 0;
};

// Exhaustive depth-first enumeration over the internal vertices with pruning of
// forbidden pairs. Throws StateSpaceTooLarge after `max_visits` search nodes.
inline BruteForceResult brute_force(const SpinModel& model, const TreeTopology& tree,
                                    const BoundaryCondition& boundary, std::span<const int> clamp = {},
                                    std::size_t max_visits = std::size_t{1} << 25) {
  boundary.validate(model, tree);
  const int q = model.spin_count();
  const auto qs = static_cast<std::size_t>(q);
  const VertexId n = tree.internal_count();
  const auto b = static_cast<VertexId>(tree.branching());
  Configuration c = make_configuration(tree, boundary);
  std::vector<double> acc(n * qs, 0.0);
  double total = 0.0;
  double shift = kNegInf;
  std::size_t visits = 0;
  BruteForceResult res;

  std::function<void(VertexId, double)> rec = [&](VertexId v, double lw) {
    if (v == n) {
      if (shift == kNegInf) shift = lw;
      if (lw - shift > 500.0) {
        const double r = std::exp(shift - lw);
        total *= r;
        for (auto& a : acc) a *= r;
        shift = lw;
      }
      const double w = std::exp(lw - shift);
      total += w;
      for (VertexId u = 0; u < n; ++u) acc[u * qs + c[u]] += w;
      ++res.valid_count;
      return;
    }
    for (int s = 0; s < q; ++s) {
      if (++visits > max_visits) throw StateSpaceTooLarge("brute-force enumeration exceeds the visit cap");
      if (!clamp.empty() && clamp[v] != kUnclamped && clamp[v] != s) continue;
      const auto sp = static_cast<Spin>(s);
      double l = lw + model.singleton_log_factor(sp);
      if (v > 0) l += model.pair_log_factor(c[(v - 1) / b], sp);
      if (l == kNegInf) continue;
      if (tree.is_leaf(v) && !boundary.is_free()) {
        for (VertexId k = 1; k <= b; ++k) {
          const VertexId w = b * v + k;
          const int bs = clamp.empty() || clamp[w] == kUnclamped ? boundary.spin(tree, w) : clamp[w];
          l += model.pair_log_factor(sp, static_cast<Spin>(bs));
        }
        if (l == kNegInf) continue;
      }
      c[v] = sp;
      rec(v + 1, l);
    }
  };
  rec(0, 0.0);
  if (res.valid_count == 0) throw FrozenContradiction("frozen contradiction: the boundary admits no valid configuration");
  res.log_partition = shift + std::log(total);
  res.marginals.resize(n);
  for (VertexId u = 0; u < n; ++u) {
    res.marginals[u].resize(qs);
    for (std::size_t s = 0; s < qs; ++s) res.marginals[u][s] = acc[u * qs + s] / total;
  }
  return res;
}

}  // namespace treegibbs
