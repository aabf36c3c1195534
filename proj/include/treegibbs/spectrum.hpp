#pragma once

// Exact generator-level analysis on small trees: the heat-bath generator as a
// sparse matrix over the valid configurations, its spectral gap, Dirichlet
// forms, a numerical upper bound on the log-Sobolev constant and the exact
// mixing times T_1, T_2.
//
// S = -D^{1/2} L D^{-1/2} (D = diag(mu)) is symmetric for a reversible chain and
// carries all spectral quantities; its eigenvector for 0 is sqrt(mu).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "treegibbs/errors.hpp"
#include "treegibbs/gibbs.hpp"
#include "treegibbs/parallel.hpp"
#include "treegibbs/random.hpp"
#include "treegibbs/state_space.hpp"

namespace treegibbs {

inline constexpr std::size_t kMaxGeneratorStates = std::size_t{1} << 15;
inline constexpr std::size_t kMaxDenseStates = 2048;
inline constexpr std::size_t kMaxMixingStates = std::size_t{1} << 12;
inline constexpr std::size_t kMaxT1States = 1024;

class GeneratorMatrix {
 public:
  GeneratorMatrix(StateSpace space, std::vector<std::uint32_t> row_ptr, std::vector<std::uint32_t> col,
                  std::vector<double> rate)
      : space_(std::move(space)), row_ptr_(std::move(row_ptr)), col_(std::move(col)), rate_(std::move(rate)) {
    exit_.assign(size(), 0.0);
    sym_.resize(rate_.size());
    const auto& mu = space_.probabilities();
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        exit_[i] += rate_[k];
        sym_[k] = rate_[k] * std::sqrt(mu[i] / mu[col_[k]]);
      }
    }
  }

  const StateSpace& space() const { return space_; }
  std::size_t size() const { return space_.size(); }
  const std::vector<double>& mu() const { return space_.probabilities(); }
  std::size_t nonzeros() const { return rate_.size(); }

  // L(i, j) for i != j; the diagonal is -exit_rate(i).
  double rate(std::size_t i, std::size_t j) const {
    if (i == j) return -exit_[i];
    auto begin = col_.begin() + row_ptr_[i], end = col_.begin() + row_ptr_[i + 1];
    auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(j));
    return (it != end && *it == j) ? rate_[static_cast<std::size_t>(it - col_.begin())] : 0.0;
  }
  double exit_rate(std::size_t i) const { return exit_[i]; }

  template <class Fn>
  void for_each_transition(std::size_t i, Fn&& fn) const {
    for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) fn(static_cast<std::size_t>(col_[k]), rate_[k]);
  }

  // y = L x
  void apply(const double* x, double* y) const {
    for (std::size_t i = 0; i < size(); ++i) {
      double s = -exit_[i] * x[i];
      for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += rate_[k] * x[col_[k]];
      y[i] = s;
    }
  }

  // y = S x
  void apply_symmetric(const double* x, double* y) const {
    for (std::size_t i = 0; i < size(); ++i) {
      double s = exit_[i] * x[i];
      for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s -= sym_[k] * x[col_[k]];
      y[i] = s;
    }
  }

  Eigen::MatrixXd dense_symmetric() const {
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      s(r, r) = exit_[i];
      for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s(r, static_cast<Eigen::Index>(col_[k])) = -sym_[k];
    }
    return s;
  }

  // Largest |row sum| and largest |mu(i) L(i,j) - mu(j) L(j,i)|.
  double max_row_sum() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      double s = -exit_[i];
      for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += rate_[k];
      worst = std::max(worst, std::abs(s));
    }
    return worst;
  }
  double max_balance_violation() const {
    double worst = 0.0;
    const auto& m = mu();
    for (std::size_t i = 0; i < size(); ++i)
      for (std::uint32_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        const std::size_t j = col_[k];
        worst = std::max(worst, std::abs(m[i] * rate_[k] - m[j] * rate(j, i)));
      }
    return worst;
  }
  double min_offdiagonal() const {
    return rate_.empty() ? 0.0 : *std::min_element(rate_.begin(), rate_.end());
  }

 private:
  StateSpace space_;
  std::vector<std::uint32_t> row_ptr_;
  std::vector<std::uint32_t> col_;
  std::vector<double> rate_;
  std::vector<double> sym_;
  std::vector<double> exit_;
};

// Heat-bath generator: each site is resampled at rate 1 from its conditional law,
// so sigma -> sigma^{x,s} has rate mu(sigma_x = s | neighbours) for s != sigma_x.
inline GeneratorMatrix build_generator(const SpinModel& model, const TreeTopology& tree,
                                       const BoundaryCondition& boundary, std::size_t cap = kMaxGeneratorStates,
                                       std::optional<Spin> root_parent = std::nullopt) {
  StateSpace ss = StateSpace::enumerate(model, tree, boundary, root_parent, cap);
  if (ss.size() > std::numeric_limits<std::uint32_t>::max()) throw StateSpaceTooLarge("generator index overflow");
  const int q = model.spin_count();
  const VertexId n = tree.internal_count();
  std::vector<std::uint32_t> row_ptr{0}, col;
  std::vector<double> rate;
  Configuration config = make_configuration(tree, boundary);
  std::vector<Spin> nb(static_cast<std::size_t>(tree.branching()) + 1);
  std::vector<double> p(static_cast<std::size_t>(q));
  std::vector<std::pair<std::uint32_t, double>> row;
  for (std::size_t i = 0; i < ss.size(); ++i) {
    auto s = ss.spins(i);
    std::copy(s.begin(), s.end(), config.spins.begin());
    row.clear();
    for (VertexId v = 0; v < n; ++v) {
      int k = neighbor_spins(tree, boundary, config, v, nb.data());
      if (v == 0 && root_parent) nb[static_cast<std::size_t>(k++)] = *root_parent;
      site_conditional(model, std::span<const Spin>(nb.data(), static_cast<std::size_t>(k)), p);
      for (int t = 0; t < q; ++t) {
        if (t == config[v] || p[static_cast<std::size_t>(t)] <= 0.0) continue;
        auto j = ss.find(ss.with_spin(ss.key(i), v, static_cast<Spin>(t)));
        if (!j) throw Error("generator reached a state outside the enumerated space");
        row.emplace_back(static_cast<std::uint32_t>(*j), p[static_cast<std::size_t>(t)]);
      }
    }
    std::sort(row.begin(), row.end());
    for (const auto& [j, r] : row) {
      col.push_back(j);
      rate.push_back(r);
    }
    row_ptr.push_back(static_cast<std::uint32_t>(col.size()));
  }
  return GeneratorMatrix(std::move(ss), std::move(row_ptr), std::move(col), std::move(rate));
}

// ---- Dirichlet forms -------------------------------------------------------------

// E(f) = 1/2 sum_sigma mu(sigma) sum_sigma' L(sigma, sigma') (f(sigma') - f(sigma))^2
inline double dirichlet_form(const GeneratorMatrix& g, std::span<const double> f) {
  if (f.size() != g.size()) throw InvalidArgument("function table does not match the generator");
  double total = 0.0;
  const auto& mu = g.mu();
  for (std::size_t i = 0; i < g.size(); ++i) {
    double row = 0.0;
    g.for_each_transition(i, [&](std::size_t j, double r) { row += r * (f[j] - f[i]) * (f[j] - f[i]); });
    total += mu[i] * row;
  }
  return 0.5 * total;
}

// sum_x mu(Var_{B_{x,levels}}(f)); levels = 1 gives the heat-bath Dirichlet form.
inline double block_dirichlet(const StateSpace& ss, std::span<const double> f, int levels) {
  double total = 0.0;
  for (VertexId x = 0; x < ss.tree().internal_count(); ++x)
    total += ss.mean_cond_variance(f, block(ss.tree(), x, levels));
  return total;
}

inline double rayleigh_quotient(const GeneratorMatrix& g, std::span<const double> f) {
  const double var = g.space().variance(f);
  if (var <= 0.0) throw InvalidArgument("Rayleigh quotient of a constant function");
  return dirichlet_form(g, f) / var;
}

// ---- spectral gap ---------------------------------------------------------------

struct GapResult {
  double gap = 0.0;
  // eigenfunction in L^2(mu): mean 0, variance 1
  std::vector<double> eigenfunction;
  bool dense = true;
  int iterations = 0;
};

struct SpectralDecomposition {
  Eigen::VectorXd values;   // ascending, values[0] = 0
  Eigen::MatrixXd vectors;  // orthonormal eigenvectors of S
};

inline SpectralDecomposition spectral_decomposition(const GeneratorMatrix& g) {
  if (g.size() > kMaxMixingStates) throw StateSpaceTooLarge("full eigendecomposition above the dense cap");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.dense_symmetric());
  if (es.info() != Eigen::Success) throw ConvergenceFailure("dense eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

namespace detail {

inline std::vector<double> to_eigenfunction(const GeneratorMatrix& g, const Eigen::VectorXd& v) {
  std::vector<double> f(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = v(static_cast<Eigen::Index>(i)) / std::sqrt(g.mu()[i]);
  const double m = g.space().expectation(f);
  for (auto& x : f) x -= m;
  const double sd = std::sqrt(g.space().variance(f));
  for (auto& x : f) x /= sd;
  return f;
}

// Smallest eigenpair of S on the orthogonal complement of sqrt(mu): Lanczos with
// full reorthogonalization, restarted from the current Ritz vector.
inline GapResult lanczos_gap(const GeneratorMatrix& g, int krylov = 300, int restarts = 40, double tol = 1e-11) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::VectorXd u(n);
  for (Eigen::Index i = 0; i < n; ++i) u(i) = std::sqrt(g.mu()[static_cast<std::size_t>(i)]);
  u.normalize();
  const int k_max = static_cast<int>(std::min<Eigen::Index>(krylov, n - 1));
  Eigen::MatrixXd basis(n, k_max + 1);
  Eigen::VectorXd start(n);
  Rng rng = make_rng(0x6c616e637a6f73);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < n; ++i) start(i) = normal(rng);
  Eigen::VectorXd w(n);
  GapResult out;
  out.dense = false;
  for (int round = 0; round < restarts; ++round) {
    start -= u * u.dot(start);
    start.normalize();
    basis.col(0) = start;
    std::vector<double> alpha, beta;
    int k = 0;
    for (; k < k_max; ++k) {
      g.apply_symmetric(basis.col(k).data(), w.data());
      alpha.push_back(basis.col(k).dot(w));
      // two passes of Gram-Schmidt against sqrt(mu) and the basis
      for (int pass = 0; pass < 2; ++pass) {
        w -= u * u.dot(w);
        w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
      }
      const double b = w.norm();
      if (b < 1e-14) {
        ++k;
        break;
      }
      beta.push_back(b);
      basis.col(k + 1) = w / b;
    }
    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const double theta = es.eigenvalues()(0);
    const Eigen::VectorXd y = es.eigenvectors().col(0);
    Eigen::VectorXd ritz = basis.leftCols(m) * y;
    ritz.normalize();
    g.apply_symmetric(ritz.data(), w.data());
    const double residual = (w - theta * ritz).norm();
    out.iterations += m;
    out.gap = theta;
    if (residual <= tol * std::max(1.0, std::abs(theta)) || m < k_max) {
      out.eigenfunction = to_eigenfunction(g, ritz);
      return out;
    }
    start = ritz;
  }
  throw ConvergenceFailure("Lanczos did not converge to the spectral gap");
}

}  // namespace detail

// Smallest positive eigenvalue of -L. Dense symmetric solver up to
// kMaxDenseStates states, Lanczos above.
inline GapResult spectral_gap(const GeneratorMatrix& g) {
  if (g.size() < 2) throw InvalidArgument("spectral gap needs at least two states");
  GapResult out;
  if (g.size() <= kMaxDenseStates) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.dense_symmetric());
    if (es.info() != Eigen::Success) throw ConvergenceFailure("dense eigensolver failed");
    out.gap = es.eigenvalues()(1);
    out.eigenfunction = detail::to_eigenfunction(g, es.eigenvectors().col(1));
  } else {
    out = detail::lanczos_gap(g);
  }
  if (out.gap < 1e-12) throw ReducibleChain("generator has a repeated zero eigenvalue");
  return out;
}

// ---- mixing times --------------------------------------------------------------

namespace detail {

// sup_sigma ||h_t^sigma - 1||_2 from the eigendecomposition.
inline double l2_distance(const SpectralDecomposition& sd, const std::vector<double>& mu, double t) {
  const auto n = sd.values.size();
  double worst = 0.0;
  Eigen::VectorXd decay(n);
  for (Eigen::Index k = 0; k < n; ++k) decay(k) = k == 0 ? 0.0 : std::exp(-2.0 * t * sd.values(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = sd.vectors.row(i).cwiseAbs2().dot(decay);
    worst = std::max(worst, s / mu[static_cast<std::size_t>(i)]);
  }
  return std::sqrt(worst);
}

// sup_sigma ||h_t^sigma - 1||_1 = sup_sigma sum_sigma' |P_t(sigma, sigma') - mu(sigma')|.
inline double l1_distance(const SpectralDecomposition& sd, const std::vector<double>& mu, double t) {
  const auto n = sd.values.size();
  Eigen::VectorXd decay(n);
  for (Eigen::Index k = 0; k < n; ++k) decay(k) = k == 0 ? 0.0 : std::exp(-t * sd.values(k));
  const Eigen::MatrixXd m = sd.vectors * decay.asDiagonal() * sd.vectors.transpose();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    const double si = std::sqrt(mu[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < n; ++j) s += std::abs(m(i, j)) * std::sqrt(mu[static_cast<std::size_t>(j)]) / si;
    worst = std::max(worst, s);
  }
  return worst;
}

}  // namespace detail

// T_p = inf{t : sup_sigma ||h_t^sigma - 1||_p <= threshold}, p in {1, 2}, by
// bisection in t to 1e-6.
inline double mixing_time_exact(const GeneratorMatrix& g, const SpectralDecomposition& sd, int p,
                                double threshold = std::exp(-1.0)) {
  if (p != 1 && p != 2) throw InvalidArgument("mixing time needs p = 1 or p = 2");
  if (p == 1 && g.size() > kMaxT1States) throw StateSpaceTooLarge("T_1 needs the full transition matrix; state space too large");
  auto dist = [&](double t) { return p == 1 ? detail::l1_distance(sd, g.mu(), t) : detail::l2_distance(sd, g.mu(), t); };
  if (dist(0.0) <= threshold) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (dist(hi) > threshold) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e9) throw ConvergenceFailure("mixing time exceeds 1e9");
  }
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (dist(mid) > threshold ? lo : hi) = mid;
  }
  return hi;
}

inline double mixing_time_exact(const GeneratorMatrix& g, int p, double threshold = std::exp(-1.0)) {
  return mixing_time_exact(g, spectral_decomposition(g), p, threshold);
}

// ---- log-Sobolev ----------------------------------------------------------------

// Bernoulli(p) constant with Ent(f) <= alpha(p) Var(sqrt f) for f on {0,1};
// alpha(1/2) = 2 is the continuous extension.
inline double bernoulli_alpha(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("bernoulli_alpha needs 0 < p < 1");
  if (std::abs(p - 0.5) < 1e-7) {
    // log(p/(1-p)) / (2p-1) = 2 (1 + (2p-1)^2/3 + ...)
    const double d = 2.0 * p - 1.0;
    return 2.0 * (1.0 + d * d / 3.0);
  }
  return std::log(p / (1.0 - p)) / (2.0 * p - 1.0);
}

struct LogSobolevOptions {
  int restarts = 8;
  int iterations = 400;
  std::uint64_t seed = 1;
};

struct LogSobolevResult {
  double value = 0.0;       // min(best_found, gap / 2)
  double best_found = 0.0;  // best E(g)/Ent(g^2) over the explicit candidates
  double half_gap = 0.0;
  std::vector<double> best_function;  // f = g^2
};

namespace detail {

struct SobolevEval {
  double ratio = std::numeric_limits<double>::infinity();
  double ent = 0.0;
};

inline SobolevEval sobolev_ratio(const GeneratorMatrix& g, const std::vector<double>& x) {
  std::vector<double> f(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) f[i] = x[i] * x[i];
  SobolevEval e;
  e.ent = g.space().entropy(f);
  if (e.ent < 1e-14) return e;
  e.ratio = dirichlet_form(g, x) / e.ent;
  return e;
}

// Gradient descent on R(g) = E(g) / Ent(g^2) in the L^2(mu) metric, with
// backtracking and renormalization to mu(g^2) = 1.
inline SobolevEval sobolev_descent(const GeneratorMatrix& g, std::vector<double>& x, int iterations) {
  const auto& mu = g.mu();
  const std::size_t n = g.size();
  auto normalize = [&](std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += mu[i] * v[i] * v[i];
    const double c = 1.0 / std::sqrt(s);
    for (auto& t : v) t *= c;
  };
  normalize(x);
  SobolevEval cur = sobolev_ratio(g, x);
  if (!std::isfinite(cur.ratio)) return cur;
  std::vector<double> lx(n), grad(n), trial(n);
  double step = 1.0;
  for (int it = 0; it < iterations; ++it) {
    g.apply(x.data(), lx.data());
    double gnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sq = x[i] * x[i];
      const double dent = sq > 0 ? 2.0 * x[i] * std::log(sq) : 0.0;  // mu(g^2) = 1
      grad[i] = (-2.0 * lx[i] - cur.ratio * dent) / cur.ent;
      gnorm += mu[i] * grad[i] * grad[i];
    }
    if (gnorm < 1e-24) break;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] - step * grad[i];
      normalize(trial);
      const SobolevEval e = sobolev_ratio(g, trial);
      if (std::isfinite(e.ratio) && e.ratio <= cur.ratio - 1e-4 * step * gnorm) {
        x.swap(trial);
        cur = e;
        step *= 2.0;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return cur;
}

}  // namespace detail

// Upper bound on c_sob = inf_{f >= 0} E(sqrt f)/Ent(f): multi-start descent from
// perturbations of the gap eigenfunction, single-site indicators and random
// positive tables. The infimum never exceeds gap/2 (limit of 1 + eps*v along
// the gap eigenfunction), so the reported value is min(best_found, gap/2).
inline LogSobolevResult log_sobolev_upper(const GeneratorMatrix& g, const GapResult& gap,
                                          const LogSobolevOptions& opt = {}) {
  if (g.size() > kMaxMixingStates) throw StateSpaceTooLarge("log-Sobolev search above the state cap");
  const std::size_t n = g.size();
  std::vector<std::vector<double>> starts;
  for (double eps : {0.3, -0.3, 0.8, -0.8}) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::max(1e-3, 1.0 + eps * gap.eigenfunction[i]);
    starts.push_back(std::move(x));
  }
  // product-measure optimum at zero coupling: functions of a single spin
  const auto& ss = g.space();
  for (VertexId v : {VertexId{0}, ss.sites() - 1}) {
    for (Spin s = 0; s < static_cast<Spin>(ss.model().spin_count()); ++s) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = ss.spin(i, v) == s ? 1.5 : 1.0;
      starts.push_back(std::move(x));
    }
  }
  for (int r = 0; r < opt.restarts; ++r) {
    Rng rng = make_rng(opt.seed, static_cast<std::uint64_t>(r));
    starts.push_back(random_positive_function(n, rng, 0.5));
  }
  std::vector<detail::SobolevEval> evals(starts.size());
  parallel_for(starts.size(), [&](std::size_t k) { evals[k] = detail::sobolev_descent(g, starts[k], opt.iterations); });
  LogSobolevResult out;
  out.half_gap = 0.5 * gap.gap;
  out.best_found = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < starts.size(); ++k) {
    if (evals[k].ratio < out.best_found) {
      out.best_found = evals[k].ratio;
      out.best_function.resize(n);
      for (std::size_t i = 0; i < n; ++i) out.best_function[i] = starts[k][i] * starts[k][i];
    }
  }
  if (!std::isfinite(out.best_found)) throw ConvergenceFailure("every log-Sobolev restart degenerated");
  out.value = std::min(out.best_found, out.half_gap);
  return out;
}

}  // namespace treegibbs
