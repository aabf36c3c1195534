#pragma once

// Monte Carlo Glauber dynamics: a uniformized heat-bath chain in continuous
// time, monotone grand coupling, a TV-at-root mixing proxy, autocorrelation
// decay rates, and the recursive down/up couplings of the kappa/gamma argument.
//
// One step picks a site uniformly from T, resamples it from the heat-bath
// conditional by inverse CDF on one uniform, and advances time by an Exp(n)
// variate, so every site is updated at rate 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "treegibbs/analytics.hpp"
#include "treegibbs/exact.hpp"
#include "treegibbs/gibbs.hpp"
#include "treegibbs/parallel.hpp"
#include "treegibbs/stats.hpp"

namespace treegibbs {

struct ChainState {
  Configuration config;
  double time = 0.0;
  std::uint64_t steps = 0;
  Rng rng;
};

class Glauber {
 public:
  Glauber(SpinModel model, TreeTopology tree, BoundaryCondition boundary)
      : model_(std::move(model)), tree_(std::move(tree)), boundary_(std::move(boundary)) {
    boundary_.validate(model_, tree_);
    b_ = static_cast<VertexId>(tree_.branching());
    n_ = tree_.internal_count();
    q_ = model_.spin_count();
    max_degree_ = tree_.branching() + 1;
    leaf_start_ = boundary_.is_free() ? tree_.level_range(tree_.depth()).begin : n_;
    up_.resize(n_);
    for (VertexId v = 1; v < n_; ++v) up_[v] = *tree_.parent(v);
    if (q_ == 2) {
      // p(spin 0) for every (degree, number of neighbours with spin 1)
      p0_.assign(static_cast<std::size_t>((max_degree_ + 1) * (max_degree_ + 1)), 0.0);
      std::vector<Spin> nb;
      double p[2];
      for (int d = 0; d <= max_degree_; ++d) {
        for (int k = 0; k <= d; ++k) {
          nb.assign(static_cast<std::size_t>(d), 0);
          std::fill(nb.begin(), nb.begin() + k, Spin{1});
          try {
            site_conditional(model_, nb, std::span<double>(p, 2));
            p0_[table(d, k)] = p[0];
          } catch (const FrozenContradiction&) {
            p0_[table(d, k)] = std::numeric_limits<double>::quiet_NaN();
          }
        }
      }
    }
  }

  const SpinModel& model() const { return model_; }
  const TreeTopology& tree() const { return tree_; }
  const BoundaryCondition& boundary() const { return boundary_; }
  VertexId sites() const { return n_; }

  ChainState start(Configuration config, std::uint64_t seed, std::uint64_t stream = 0) const {
    if (!is_valid(model_, tree_, boundary_, config)) throw InvalidArgument("chain must start from a valid configuration");
    return ChainState{std::move(config), 0.0, 0, make_rng(seed, stream)};
  }

  // Inverse-CDF draw at v in spin-index order.
  Spin resample(const Configuration& c, VertexId v, double u) const {
    if (q_ == 2) return u < p0(c, v) ? Spin{0} : Spin{1};
    Spin nb[64];
    double p[256];
    const int k = neighbor_spins(tree_, boundary_, c, v, nb);
    site_conditional(model_, std::span<const Spin>(nb, static_cast<std::size_t>(k)),
                     std::span<double>(p, static_cast<std::size_t>(q_)));
    return detail::draw(p, q_, u);
  }

  // Two-state models: probability of spin 0 at v.
  double p0(const Configuration& c, VertexId v) const {
    int d = 0, k = 0;
    if (v > 0) {
      ++d;
      k += c.spins[up_[v]];
    }
    if (v < leaf_start_) {
      const VertexId c0 = b_ * v + 1;
      for (VertexId i = 0; i < b_; ++i) k += c.spins[c0 + i];
      d += static_cast<int>(b_);
    }
    return p0_[table(d, k)];
  }

  // Probability of spin 0 at v under two configurations at once.
  void p0_pair(const Configuration& a, const Configuration& c, VertexId v, double& pa, double& pc) const {
    // branch-free: the root reads itself and free leaves read the unused dT slots, both masked out
    const int has_up = v > 0;
    const int has_down = v < leaf_start_;
    const VertexId up = up_[v];
    const VertexId c0 = b_ * v + 1;
    int sa = 0, sc = 0;
    for (VertexId i = 0; i < b_; ++i) {
      sa += a.spins[c0 + i];
      sc += c.spins[c0 + i];
    }
    const int d = has_up + has_down * static_cast<int>(b_);
    pa = p0_[table(d, has_up * a.spins[up] + has_down * sa)];
    pc = p0_[table(d, has_up * c.spins[up] + has_down * sc)];
  }

  // Multiply-high range reduction; the bias is below n / 2^64.
  VertexId pick_site(Rng& rng) const {
    return static_cast<VertexId>((static_cast<unsigned __int128>(rng()) * n_) >> 64);
  }

  double holding_time(Rng& rng) const { return -std::log1p(-uniform01(rng)) / static_cast<double>(n_); }

  void step(ChainState& s) const {
    const VertexId v = pick_site(s.rng);
    s.config.spins[v] = resample(s.config, v, uniform01(s.rng));
    s.time += holding_time(s.rng);
    ++s.steps;
  }

  void run_until(ChainState& s, double t) const {
    while (s.time < t) step(s);
  }

 private:
  std::size_t table(int d, int k) const { return static_cast<std::size_t>(d * (max_degree_ + 1) + k); }

  SpinModel model_;
  TreeTopology tree_;
  BoundaryCondition boundary_;
  VertexId b_ = 2;
  VertexId n_ = 0;
  VertexId leaf_start_ = 0;  // first site without children carrying a factor
  int q_ = 2;
  int max_degree_ = 3;
  std::vector<double> p0_;
  std::vector<VertexId> up_;
};

// ---- grand coupling ----------------------------------------------------------------

// Per-site "top" spin of the partial order: Ising orders + above -; hard-core
// uses the checkerboard order (occupied on top at even levels, empty at odd).
inline std::vector<Spin> monotone_top(const SpinModel& model, const TreeTopology& tree) {
  std::vector<Spin> top(tree.internal_count(), 0);
  switch (model.kind()) {
    case ModelKind::Ising:
      return top;
    case ModelKind::HardCore:
      for (VertexId v = 0; v < tree.internal_count(); ++v) top[v] = tree.level(v) % 2 == 0 ? 1 : 0;
      return top;
    default:
      throw NotMonotone("grand coupling needs a monotone model (Ising or hard-core); use tv_mixing_estimate instead");
  }
}

// Maximal (top = true) or minimal element of the valid configurations.
inline Configuration extremal_configuration(const Glauber& g, const std::vector<Spin>& top, bool upper) {
  const auto& tree = g.tree();
  Configuration c = make_configuration(tree, g.boundary());
  for (VertexId v = 0; v < tree.internal_count(); ++v) c[v] = upper ? top[v] : static_cast<Spin>(1 - top[v]);
  if (!g.boundary().is_free()) {
    auto leaves = tree.level_range(tree.depth());
    for (VertexId v = leaves.begin; v < leaves.end; ++v) {
      auto ch = tree.children(v);
      for (VertexId w = ch.begin; w < ch.end; ++w)
        if (!g.model().allowed(c[v], c[w])) c[v] = static_cast<Spin>(1 - c[v]);
    }
  }
  if (!is_valid(g.model(), tree, g.boundary(), c)) throw FrozenContradiction("no valid extremal configuration");
  return c;
}

struct CoalescenceRun {
  double time = 0.0;
  std::uint64_t steps = 0;
  bool coalesced = false;
  std::uint64_t order_violations = 0;
};

// Top and bottom chains driven by the same (site, uniform) sequence until they agree.
// The holding times do not affect the jump chain, so the elapsed time after K steps
// is drawn once as Gamma(K, 1)/n.
inline CoalescenceRun grand_coupling_run(const Glauber& g, std::uint64_t seed, std::uint64_t stream = 0,
                                         double max_time = std::numeric_limits<double>::infinity(),
                                         bool check_order = false) {
  if (g.model().spin_count() != 2) throw NotMonotone("grand coupling needs a two-state monotone model");
  const auto top = monotone_top(g.model(), g.tree());
  Configuration hi = extremal_configuration(g, top, true);
  Configuration lo = extremal_configuration(g, top, false);
  Rng rng = make_rng(seed, stream);
  const double n = static_cast<double>(g.sites());
  // far enough past max_time * n that Gamma(K) < max_time * n is negligible
  const double budget = std::isfinite(max_time) ? max_time * n + 12.0 * std::sqrt(max_time * n) + 50.0 : 1e300;
  std::size_t differ = 0;
  for (VertexId v = 0; v < g.sites(); ++v) differ += hi[v] != lo[v];
  CoalescenceRun r;
  const auto n32 = static_cast<std::uint64_t>(g.sites());
  while (differ > 0 && static_cast<double>(r.steps) < budget) {
    // one draw per step: site from the high 32 bits, the uniform from the low 32
    const std::uint64_t x = rng();
    const auto v = static_cast<VertexId>(((x >> 32) * n32) >> 32);
    const double u = static_cast<double>(x & 0xffffffffu) * 0x1.0p-32;
    const Spin t = top[v];
    const bool was = hi[v] != lo[v];
    double ph, pl;
    g.p0_pair(hi, lo, v, ph, pl);
    // P(top spin) under each chain; inverse CDF with the top spin first
    const double th = t == 0 ? ph : 1.0 - ph;
    const double tl = t == 0 ? pl : 1.0 - pl;
    hi.spins[v] = u < th ? t : static_cast<Spin>(1 - t);
    lo.spins[v] = u < tl ? t : static_cast<Spin>(1 - t);
    if (check_order && lo[v] == t && hi[v] != t) ++r.order_violations;
    differ = differ - was + (hi[v] != lo[v]);
    ++r.steps;
  }
  r.time = r.steps == 0 ? 0.0 : std::gamma_distribution<double>(static_cast<double>(r.steps), 1.0)(rng) / n;
  r.coalesced = differ == 0 && r.time <= max_time;
  return r;
}

struct CoalescenceSummary {
  std::vector<double> times;  // censored runs are recorded at max_time
  std::size_t censored = 0;
  double median = 0.0;
  Interval median_ci;
};

inline CoalescenceSummary grand_coupling(const Glauber& g, std::size_t replicas, std::uint64_t seed,
                                         double max_time = std::numeric_limits<double>::infinity()) {
  if (replicas == 0) throw InvalidArgument("need at least one replica");
  CoalescenceSummary s;
  s.times.resize(replicas);
  std::vector<char> done(replicas);
  parallel_for(replicas, [&](std::size_t i) {
    auto r = grand_coupling_run(g, seed, i, max_time);
    s.times[i] = r.coalesced ? r.time : max_time;
    done[i] = r.coalesced;
  });
  s.censored = static_cast<std::size_t>(std::count(done.begin(), done.end(), 0));
  if (2 * s.censored >= replicas) throw InsufficientBudget("half the replicas did not coalesce before max_time");
  s.median = median(s.times);
  s.median_ci = bootstrap_median_ci(s.times, 1000, 0.95, seed);
  return s;
}

// ---- TV distance of the root spin from its stationary law ------------------------

// Valid configuration close to "every site has spin s": top-down greedy.
inline Configuration near_constant_configuration(const Glauber& g, Spin s) {
  const auto& tree = g.tree();
  const auto& model = g.model();
  Configuration c = make_configuration(tree, g.boundary());
  const int q = model.spin_count();
  for (VertexId v = 0; v < tree.internal_count(); ++v) {
    auto ok = [&](Spin t) {
      if (v > 0 && !model.allowed(c[*tree.parent(v)], t)) return false;
      if (tree.is_leaf(v) && !g.boundary().is_free()) {
        auto ch = tree.children(v);
        for (VertexId w = ch.begin; w < ch.end; ++w)
          if (!model.allowed(t, c[w])) return false;
      }
      return true;
    };
    bool placed = false;
    for (int k = 0; k < q && !placed; ++k) {
      const auto t = static_cast<Spin>((s + k) % q);
      if (ok(t)) {
        c[v] = t;
        placed = true;
      }
    }
    if (!placed) throw FrozenContradiction("greedy start found no admissible spin");
  }
  return c;
}

struct TvMixingOptions {
  double epsilon = 0.05;
  std::size_t replicas = 10000;
  double dt = 0.05;
  double max_time = 50.0;
  std::uint64_t seed = 1;
};

struct TvMixingResult {
  bool reached = false;
  double time = std::numeric_limits<double>::infinity();
  Spin start_spin = 0;
  double noise_floor = 0.0;
  Interval tv_ci;  // at `time`, from Wilson intervals of the spin frequencies
  std::vector<double> grid;
  std::vector<double> tv;
};

// First grid time at which the empirical root law over replicas, started from
// the configuration nearest to constant s* (s* the least likely root spin), is
// within epsilon of the exact root marginal.
inline TvMixingResult tv_mixing_estimate(const Glauber& g, const TvMixingOptions& opt) {
  auto ms = MessageSet::compute(g.model(), g.tree(), g.boundary());
  const auto pi = ms.marginal(0);
  const std::size_t q = pi.size();
  const double r = static_cast<double>(opt.replicas);
  TvMixingResult res;
  for (std::size_t s = 0; s < q; ++s) res.noise_floor += 0.5 * std::sqrt(2.0 / std::numbers::pi) * std::sqrt(pi[s] * (1 - pi[s]) / r);
  if (opt.replicas == 0 || opt.epsilon < 2.0 * res.noise_floor) {
    throw InsufficientBudget("replica budget too small for the requested epsilon");
  }
  res.start_spin = static_cast<Spin>(std::min_element(pi.begin(), pi.end()) - pi.begin());
  const Configuration start = near_constant_configuration(g, res.start_spin);
  const auto points = static_cast<std::size_t>(std::floor(opt.max_time / opt.dt)) + 1;
  for (std::size_t k = 0; k < points; ++k) res.grid.push_back(static_cast<double>(k) * opt.dt);
  std::vector<Spin> roots(opt.replicas * points);
  parallel_for(opt.replicas, [&](std::size_t i) {
    ChainState c{start, 0.0, 0, make_rng(opt.seed, i)};
    for (std::size_t k = 0; k < points; ++k) {
      g.run_until(c, res.grid[k]);
      roots[i * points + k] = c.config[0];
    }
  });
  std::vector<std::size_t> counts(q);
  for (std::size_t k = 0; k < points; ++k) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < opt.replicas; ++i) ++counts[roots[i * points + k]];
    double tv = 0.0;
    for (std::size_t s = 0; s < q; ++s) tv += 0.5 * std::abs(static_cast<double>(counts[s]) / r - pi[s]);
    res.tv.push_back(tv);
    if (!res.reached && tv <= opt.epsilon) {
      res.reached = true;
      res.time = res.grid[k];
      for (std::size_t s = 0; s < q; ++s) {
        auto w = wilson_interval(counts[s], opt.replicas);
        const double near = w.contains(pi[s]) ? 0.0 : std::min(std::abs(w.low - pi[s]), std::abs(w.high - pi[s]));
        res.tv_ci.low += 0.5 * near;
        res.tv_ci.high += 0.5 * std::max(std::abs(w.low - pi[s]), std::abs(w.high - pi[s]));
      }
    }
  }
  return res;
}

// ---- stationary autocorrelation of the root spin ------------------------------------

struct AutocorrOptions {
  std::size_t replicas = 100;
  double horizon = 200.0;
  double dt = 0.05;
  double max_lag = 20.0;
  Spin spin = 0;
  std::uint64_t seed = 1;
};

struct AutocorrResult {
  double rate = 0.0;
  double rate_stderr = 0.0;
  double fit_from = 0.0;
  double fit_to = 0.0;
  std::vector<double> lags;
  std::vector<double> acov;
  std::vector<double> acov_stderr;
};

// Exponential decay rate of t -> Cov(f(sigma_0), f(sigma_t)) for f = 1{sigma_root = spin}
// under the stationary chain, fitted where the autocovariance falls from e^-1 to e^-3
// of its value at lag 0.
inline AutocorrResult autocorr_gap_estimate(const Glauber& g, const AutocorrOptions& opt) {
  if (opt.replicas < 2) throw InvalidArgument("autocorrelation needs at least two replicas");
  if (!(opt.dt > 0.0) || !(opt.max_lag > opt.dt) || !(opt.horizon > opt.max_lag)) {
    throw InvalidArgument("need 0 < dt < max_lag < horizon");
  }
  auto ms = MessageSet::compute(g.model(), g.tree(), g.boundary());
  const double m = ms.marginal(0).at(opt.spin);
  const auto points = static_cast<std::size_t>(std::floor(opt.horizon / opt.dt)) + 1;
  const auto lags = static_cast<std::size_t>(std::floor(opt.max_lag / opt.dt)) + 1;
  std::vector<std::vector<double>> per(opt.replicas, std::vector<double>(lags));
  parallel_for(opt.replicas, [&](std::size_t i) {
    Rng rng = make_rng(opt.seed, i);
    ChainState c{ms.sample(rng), 0.0, 0, std::move(rng)};
    std::vector<double> f(points);
    for (std::size_t k = 0; k < points; ++k) {
      g.run_until(c, static_cast<double>(k) * opt.dt);
      f[k] = (c.config[0] == opt.spin ? 1.0 : 0.0) - m;
    }
    const std::size_t origins = points - lags + 1;
    for (std::size_t l = 0; l < lags; ++l) {
      double s = 0.0;
      for (std::size_t k = 0; k < origins; ++k) s += f[k] * f[k + l];
      per[i][l] = s / static_cast<double>(origins);
    }
  });
  AutocorrResult res;
  std::vector<double> col(opt.replicas);
  for (std::size_t l = 0; l < lags; ++l) {
    for (std::size_t i = 0; i < opt.replicas; ++i) col[i] = per[i][l];
    res.lags.push_back(static_cast<double>(l) * opt.dt);
    res.acov.push_back(mean(col));
    res.acov_stderr.push_back(standard_error(col));
  }
  const double c0 = res.acov[0];
  if (!(c0 > 0.0)) throw InsufficientSignal("observable has no variance");
  std::vector<double> x, y;
  std::optional<std::size_t> end;
  for (std::size_t l = 0; l < lags; ++l) {
    const double c = res.acov[l];
    if (c <= 2.0 * res.acov_stderr[l]) break;
    if (c <= std::exp(-1.0) * c0) {
      x.push_back(res.lags[l]);
      y.push_back(std::log(c));
    }
    if (c <= std::exp(-3.0) * c0) {
      end = l;
      break;
    }
  }
  if (!end || x.size() < 3) throw InsufficientSignal("autocovariance hits the noise floor before three e-foldings");
  auto fit = linear_fit(x, y);
  res.rate = -fit.slope;
  res.rate_stderr = fit.slope_stderr;
  res.fit_from = x.front();
  res.fit_to = x.back();
  return res;
}

// ---- recursive couplings ------------------------------------------------------------

// Maximal coupling of two laws on {0..q-1}; the pair disagrees with probability TV(p, r).
inline std::pair<Spin, Spin> maximal_coupling(const std::vector<double>& p, const std::vector<double>& r, Rng& rng) {
  const std::size_t q = p.size();
  std::vector<double> common(q), a(q), c(q);
  double overlap = 0.0;
  for (std::size_t s = 0; s < q; ++s) {
    common[s] = std::min(p[s], r[s]);
    a[s] = p[s] - common[s];
    c[s] = r[s] - common[s];
    overlap += common[s];
  }
  const int qi = static_cast<int>(q);
  if (uniform01(rng) < overlap) {
    for (auto& v : common) v /= overlap;
    const Spin s = detail::draw(common.data(), qi, uniform01(rng));
    return {s, s};
  }
  const double rest = 1.0 - overlap;
  for (std::size_t s = 0; s < q; ++s) {
    a[s] /= rest;
    c[s] /= rest;
  }
  return {detail::draw(a.data(), qi, uniform01(rng)), detail::draw(c.data(), qi, uniform01(rng))};
}

struct HammingStats {
  int ell = 0;
  std::vector<std::uint32_t> distances;
  double mean = 0.0;
  double stderr_mean = 0.0;

  std::size_t exceed(double threshold) const {
    return static_cast<std::size_t>(
        std::count_if(distances.begin(), distances.end(), [&](std::uint32_t d) { return d > threshold; }));
  }
  double tail(double threshold) const { return static_cast<double>(exceed(threshold)) / static_cast<double>(distances.size()); }
};

// Tail bound e^{(1 - C/2e)/(l+1)} for the Hamming distance at depth l.
inline double hamming_tail_bound(double C, int ell) {
  return std::exp((1.0 - C / (2.0 * std::exp(1.0))) / (ell + 1.0));
}

// Couples mu^{s}_{T~_x} and mu^{s'}_{T~_x} (x clamped to spins 0 and 1) child by
// child with maximal couplings of the conditional laws; agreeing subtrees are merged.
// Returns the number of disagreements l levels below x for each replica.
inline HammingStats coupling_down(const MessageSet& ms, VertexId x, int ell, std::size_t replicas, std::uint64_t seed) {
  const auto& tree = ms.tree();
  tree.check(x);
  if (tree.is_boundary(x)) throw InvalidArgument("x must be an internal vertex");
  if (ell < 1 || ell >= tree.levels_below(x)) throw InvalidArgument("l exceeds the depth below x");
  if (replicas == 0) throw InvalidArgument("need at least one replica");
  const int q = ms.spin_count();
  const VertexId n = tree.internal_count();
  const auto b = static_cast<VertexId>(tree.branching());
  // conditional laws given the parent spin, for every vertex below x
  std::vector<std::vector<double>> cond(static_cast<std::size_t>(n) * static_cast<std::size_t>(q));
  const VertexId first = tree.descendants(x, 1).begin;
  for (VertexId v = first; v < n; ++v) {
    if (!tree.is_ancestor_or_self(x, v)) continue;
    for (int s = 0; s < q; ++s) {
      try {
        cond[v * static_cast<std::size_t>(q) + static_cast<std::size_t>(s)] = ms.marginal_given_parent(v, static_cast<Spin>(s));
      } catch (const FrozenContradiction&) {
      }
    }
  }
  HammingStats h;
  h.ell = ell;
  h.distances.resize(replicas);
  parallel_for(replicas, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    struct Pair {
      VertexId v;
      Spin a, c;
    };
    std::vector<Pair> cur{{x, 0, 1}}, next;
    for (int d = 1; d <= ell && !cur.empty(); ++d) {
      next.clear();
      for (const auto& p : cur) {
        for (VertexId z = b * p.v + 1; z <= b * p.v + b; ++z) {
          const auto& la = cond[z * static_cast<std::size_t>(q) + p.a];
          const auto& lc = cond[z * static_cast<std::size_t>(q) + p.c];
          if (la.empty() || lc.empty()) throw FrozenContradiction("parent spin admits no valid child spin");
          auto [sa, sc] = maximal_coupling(la, lc, rng);
          if (sa != sc) next.push_back({z, sa, sc});
        }
      }
      cur.swap(next);
    }
    h.distances[i] = static_cast<std::uint32_t>(cur.size());
  });
  std::vector<double> dv(h.distances.begin(), h.distances.end());
  h.mean = mean(dv);
  h.stderr_mean = standard_error(dv);
  return h;
}

struct DisagreementEstimate {
  std::size_t replicas = 0;
  std::size_t hits = 0;
  double probability = 0.0;
  Interval ci;
};

// Starts from a single discrepancy at w (distance l below x) and couples up the path
// to x: at each step the spin at the parent z of the current disagreement y is drawn
// from the maximal coupling of mu_A^eta and mu_A^{eta'} at z, A = B_{x,l} \ T_y. eta
// is `eta` if given, otherwise a fresh perfect sample per replica; eta' changes w to
// the next spin value.
inline DisagreementEstimate disagreement_up(const MessageSet& ms, VertexId w, VertexId x, std::size_t replicas,
                                            std::uint64_t seed, const Configuration* eta = nullptr) {
  const auto& tree = ms.tree();
  tree.check(w);
  tree.check(x);
  if (tree.is_boundary(x)) throw InvalidArgument("x must be an internal vertex");
  if (w == x || !tree.is_ancestor_or_self(x, w)) throw InvalidArgument("w must lie below x");
  if (tree.is_boundary(w) && ms.boundary().is_free()) throw InvalidArgument("a free boundary has no spins to disturb");
  if (replicas == 0) throw InvalidArgument("need at least one replica");
  const int ell = tree.level(w) - tree.level(x);
  const Region blk = block(tree, x, ell);
  std::vector<VertexId> path{w};
  while (path.back() != x) path.push_back(*tree.parent(path.back()));
  // regions[j]: B_{x,l} minus T_{path[j]}
  std::vector<Region> regions;
  for (std::size_t j = 0; j + 1 < path.size(); ++j) {
    std::vector<VertexId> keep;
    for (VertexId v : blk.vertices())
      if (!tree.is_ancestor_or_self(path[j], v)) keep.push_back(v);
    regions.emplace_back(tree, std::move(keep));
  }
  DisagreementEstimate est;
  est.replicas = replicas;
  std::vector<char> hit(replicas);
  parallel_for(replicas, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    Configuration a = eta ? *eta : ms.sample(rng);
    Configuration c = a;
    c[w] = static_cast<Spin>((a[w] + 1) % ms.spin_count());
    for (std::size_t j = 0; j + 1 < path.size(); ++j) {
      const VertexId z = path[j + 1];
      auto pa = region_site_marginal(ms.model(), tree, ms.boundary(), regions[j], a, z);
      auto pc = region_site_marginal(ms.model(), tree, ms.boundary(), regions[j], c, z);
      auto [sa, sc] = maximal_coupling(pa, pc, rng);
      if (sa == sc) return;
      a[z] = sa;
      c[z] = sc;
    }
    hit[i] = 1;
  });
  est.hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  est.probability = static_cast<double>(est.hits) / static_cast<double>(replicas);
  est.ci = wilson_interval(est.hits, replicas);
  return est;
}

}  // namespace treegibbs
