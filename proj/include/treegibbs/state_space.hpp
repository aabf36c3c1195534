#pragma once

// Explicit probability tables over the valid configurations of a tiny tree,
// and the exact functionals built on them: expectations, variances, entropies,
// and their conditional versions mu_A(f), Var_A(f), Ent_A(f).
//
// A function f is a table with one entry per state. Conditioning on the
// configuration outside a region A groups states by their spins outside A.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "treegibbs/errors.hpp"
#include "treegibbs/exact.hpp"
#include "treegibbs/model.hpp"
#include "treegibbs/tree.hpp"

namespace treegibbs {

struct Partition {
  std::vector<std::uint32_t> group_of;  // per state
  std::vector<double> group_mass;       // mu of each group
  std::size_t count() const { return group_mass.size(); }
};

class StateSpace {
 public:
  static constexpr std::size_t kDefaultCap = std::size_t{1} << 20;

  // Valid configurations of the internal vertices under `boundary`. When
  // `root_parent` is set, the root interacts with an external spin of that value
  // (this is mu^eta_{T_x} for a subtree whose parent carries eta).
  static StateSpace enumerate(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary,
                              std::optional<Spin> root_parent = std::nullopt, std::size_t cap = kDefaultCap) {
    boundary.validate(model, tree);
    StateSpace ss(model, tree, boundary, root_parent);
    const int q = model.spin_count();
    int bits = 1;
    while ((1 << bits) < q) ++bits;
    ss.bits_ = bits;
    const VertexId n = tree.internal_count();
    if (static_cast<std::size_t>(bits) * n > 64) throw StateSpaceTooLarge("state keys do not fit in 64 bits");
    const auto b = static_cast<VertexId>(tree.branching());
    std::vector<Spin> cur(n, 0);
    std::vector<double> raw;
    std::size_t visits = 0;
    std::function<void(VertexId, double, std::uint64_t)> rec = [&](VertexId v, double lw, std::uint64_t key) {
      if (v == n) {
        if (ss.keys_.size() >= cap) throw StateSpaceTooLarge("state space exceeds the exact cap");
        ss.keys_.push_back(key);
        ss.spins_.insert(ss.spins_.end(), cur.begin(), cur.end());
        raw.push_back(lw);
        return;
      }
      for (int s = 0; s < q; ++s) {
        if (++visits > 64 * cap) throw StateSpaceTooLarge("state enumeration exceeds the visit cap");
        const auto sp = static_cast<Spin>(s);
        double l = lw + model.singleton_log_factor(sp);
        if (v > 0) {
          l += model.pair_log_factor(cur[(v - 1) / b], sp);
        } else if (root_parent) {
          l += model.pair_log_factor(*root_parent, sp);
        }
        if (l == kNegInf) continue;
        if (tree.is_leaf(v) && !boundary.is_free()) {
          for (VertexId k = 1; k <= b; ++k) l += model.pair_log_factor(sp, boundary.spin(tree, b * v + k));
          if (l == kNegInf) continue;
        }
        cur[v] = sp;
        rec(v + 1, l, (key << bits) | static_cast<std::uint64_t>(s));
      }
    };
    rec(0, 0.0, 0);
    if (ss.keys_.empty()) throw FrozenContradiction("frozen contradiction: the boundary admits no valid configuration");
    const double mx = *std::max_element(raw.begin(), raw.end());
    double z = 0.0;
    for (double l : raw) z += std::exp(l - mx);
    ss.log_partition_ = mx + std::log(z);
    ss.log_weights_ = raw;
    ss.prob_.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) ss.prob_[i] = std::exp(raw[i] - ss.log_partition_);
    return ss;
  }

  const SpinModel& model() const { return model_; }
  const TreeTopology& tree() const { return tree_; }
  const BoundaryCondition& boundary() const { return boundary_; }
  std::optional<Spin> root_parent() const { return root_parent_; }

  std::size_t size() const { return keys_.size(); }
  VertexId sites() const { return tree_.internal_count(); }
  Spin spin(std::size_t i, VertexId v) const { return spins_[i * sites() + v]; }
  std::span<const Spin> spins(std::size_t i) const { return {spins_.data() + i * sites(), sites()}; }
  const std::vector<double>& probabilities() const { return prob_; }
  double probability(std::size_t i) const { return prob_[i]; }
  double log_partition() const { return log_partition_; }

  Configuration configuration(std::size_t i) const {
    Configuration c = make_configuration(tree_, boundary_);
    for (VertexId v = 0; v < sites(); ++v) c[v] = spin(i, v);
    return c;
  }

  std::uint64_t key(std::size_t i) const { return keys_[i]; }

  std::uint64_t with_spin(std::uint64_t key, VertexId v, Spin s) const {
    const int shift = bits_ * static_cast<int>(sites() - 1 - v);
    const std::uint64_t mask = ((std::uint64_t{1} << bits_) - 1) << shift;
    return (key & ~mask) | (static_cast<std::uint64_t>(s) << shift);
  }

  std::optional<std::size_t> find(std::uint64_t key) const {
    auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - keys_.begin());
  }

  // ---- functionals ----------------------------------------------------------------

  double expectation(std::span<const double> f) const {
    check(f);
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += prob_[i] * f[i];
    return s;
  }

  double variance(std::span<const double> f) const {
    const double m = expectation(f);
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += prob_[i] * (f[i] - m) * (f[i] - m);
    return s;
  }

  double entropy(std::span<const double> f) const {
    check(f);
    double m = 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      if (f[i] < 0) throw InvalidArgument("entropy needs a non-negative function");
      m += prob_[i] * f[i];
      if (f[i] > 0) s += prob_[i] * f[i] * std::log(f[i]);
    }
    return m > 0 ? std::max(0.0, s - m * std::log(m)) : 0.0;
  }

  // Groups states by their spins outside `region`.
  Partition partition(const Region& region) const {
    std::uint64_t mask = 0;
    for (VertexId v : region.vertices()) mask |= with_spin(0, v, static_cast<Spin>((1 << bits_) - 1));
    Partition p;
    p.group_of.resize(size());
    std::unordered_map<std::uint64_t, std::uint32_t> ids;
    ids.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
      auto [it, inserted] = ids.try_emplace(keys_[i] & ~mask, static_cast<std::uint32_t>(p.group_mass.size()));
      if (inserted) p.group_mass.push_back(0.0);
      p.group_of[i] = it->second;
      p.group_mass[it->second] += prob_[i];
    }
    return p;
  }

  // mu_A(f): the conditional expectation given the spins outside A.
  std::vector<double> project(std::span<const double> f, const Partition& p) const {
    check(f);
    std::vector<double> g(p.count(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) g[p.group_of[i]] += prob_[i] * f[i];
    for (std::size_t k = 0; k < g.size(); ++k) g[k] /= p.group_mass[k];
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = g[p.group_of[i]];
    return out;
  }
  std::vector<double> project(std::span<const double> f, const Region& region) const {
    return project(f, partition(region));
  }

  // Var_A(f) as a function of the outside configuration.
  std::vector<double> cond_variance(std::span<const double> f, const Partition& p) const {
    auto mean = project(f, p);
    std::vector<double> g(p.count(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) g[p.group_of[i]] += prob_[i] * (f[i] - mean[i]) * (f[i] - mean[i]);
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = g[p.group_of[i]] / p.group_mass[p.group_of[i]];
    return out;
  }
  std::vector<double> cond_variance(std::span<const double> f, const Region& region) const {
    return cond_variance(f, partition(region));
  }

  // Ent_A(f) as a function of the outside configuration.
  std::vector<double> cond_entropy(std::span<const double> f, const Partition& p) const {
    auto mean = project(f, p);
    std::vector<double> g(p.count(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      if (f[i] < 0) throw InvalidArgument("entropy needs a non-negative function");
      if (f[i] > 0) g[p.group_of[i]] += prob_[i] * f[i] * std::log(f[i]);
    }
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) {
      const double m = mean[i];
      const double e = g[p.group_of[i]] / p.group_mass[p.group_of[i]] - (m > 0 ? m * std::log(m) : 0.0);
      out[i] = std::max(0.0, e);
    }
    return out;
  }
  std::vector<double> cond_entropy(std::span<const double> f, const Region& region) const {
    return cond_entropy(f, partition(region));
  }

  // E[Var_A(f)] and E[Ent_A(f)].
  double mean_cond_variance(std::span<const double> f, const Region& region) const {
    return expectation(cond_variance(f, region));
  }
  double mean_cond_entropy(std::span<const double> f, const Region& region) const {
    return expectation(cond_entropy(f, region));
  }

  // True when f changes with the spins inside `region` for some fixed outside configuration.
  bool depends_on(std::span<const double> f, const Region& region, double tol = 1e-12) const {
    check(f);
    auto p = partition(region);
    std::vector<double> first(p.count(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < size(); ++i) {
      double& r = first[p.group_of[i]];
      if (std::isnan(r)) {
        r = f[i];
      } else if (std::abs(r - f[i]) > tol * std::max(1.0, std::abs(r))) {
        return true;
      }
    }
    return false;
  }

  // Function tables built from a callback on spin vectors.
  std::vector<double> tabulate(const std::function<double(std::span<const Spin>)>& fn) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = fn(spins(i));
    return out;
  }

  // CSV dump: one row per state, spin labels of the internal vertices joined, then the probability.
  void write_csv(std::ostream& os) const {
    os << "config,probability\n";
    os.precision(17);
    for (std::size_t i = 0; i < size(); ++i) {
      for (VertexId v = 0; v < sites(); ++v) {
        if (v > 0 && model_.spin_count() > 2) os << ' ';
        os << model_.label(spin(i, v));
      }
      os << ',' << prob_[i] << '\n';
    }
  }

 private:
  StateSpace(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary,
             std::optional<Spin> root_parent)
      : model_(model), tree_(tree), boundary_(boundary), root_parent_(root_parent) {}

  void check(std::span<const double> f) const {
    if (f.size() != size()) throw InvalidArgument("function table does not match the state space");
  }

  SpinModel model_;
  TreeTopology tree_;
  BoundaryCondition boundary_;
  std::optional<Spin> root_parent_;
  int bits_ = 1;
  std::vector<std::uint64_t> keys_;
  std::vector<Spin> spins_;
  std::vector<double> log_weights_;
  std::vector<double> prob_;
  double log_partition_ = 0.0;
};

// Random test functions: exponentiated Gaussian tables (positive).
template <class Gen>
std::vector<double> random_positive_function(std::size_t size, Gen& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> f(size);
  for (auto& v : f) v = std::exp(normal(rng));
  return f;
}

}  // namespace treegibbs
