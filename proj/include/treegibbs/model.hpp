#pragma once

// Nearest-neighbour spin systems and the single-site heat-bath kernel.
//
// A model is a finite spin set {0, ..., q-1} with a symmetric pair potential
// U(s, s') and a singleton potential W(s). The Gibbs weight of a configuration
// on a region is exp(-sum_edges U - sum_sites W). Infinite pair potentials
// (hard constraints) are represented by Energy::forbidden() rather than by a
// large finite number, so validity is decided exactly.
//
// Spin encodings:
//   Ising      index 0 = "+" (+1), index 1 = "-" (-1); U = -beta*s*s', W = -beta*h*s
//   hard-core  index 0 = "0" (empty), index 1 = "1" (occupied); U(1,1) forbidden,
//              other U = 0, W(1) = -ln(lambda)
//   Potts      index k = colour "k+1"; U(s,s') = -beta*delta (ferro) or +beta*delta
//              (antiferro), W = 0
//   colourings antiferromagnetic Potts at beta = infinity: U(s,s) forbidden
//
// The Potts convention with q = 2 differs from the Ising convention by an
// additive constant per edge and a rescaling beta -> beta/2; every conditional
// probability of Potts(q = 2, 2*beta) equals the Ising one at beta.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "treegibbs/config.hpp"
#include "treegibbs/errors.hpp"

namespace treegibbs {

using Spin = std::uint8_t;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class Energy {
 public:
  constexpr Energy() = default;
  constexpr explicit Energy(double value) : value_(value) {}

  static constexpr Energy forbidden() {
    Energy e;
    e.forbidden_ = true;
    return e;
  }

  constexpr bool is_forbidden() const { return forbidden_; }
  constexpr double value() const { return value_; }

  // log of the Boltzmann factor exp(-U); -inf when forbidden.
  double log_factor() const { return forbidden_ ? kNegInf : -value_; }

  friend constexpr bool operator==(const Energy& a, const Energy& b) {
    return a.forbidden_ == b.forbidden_ && (a.forbidden_ || a.value_ == b.value_);
  }

 private:
  double value_ = 0.0;
  bool forbidden_ = false;
};

enum class ModelKind { Ising, HardCore, Potts, Colorings };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Ising: return "ising";
    case ModelKind::HardCore: return "hardcore";
    case ModelKind::Potts: return "potts";
    case ModelKind::Colorings: return "colorings";
  }
  return "unknown";
}

// The generating parameters of a model; only the fields relevant to `kind` are meaningful.
struct ModelParams {
  ModelKind kind = ModelKind::Ising;
  double beta = 0.0;
  double h = 0.0;
  double lambda = 1.0;
  int q = 2;
  bool antiferro = false;
};

class SpinModel {
 public:
  SpinModel(int spin_count, std::vector<Energy> pair, std::vector<double> singleton, ModelParams params,
            std::vector<std::string> labels)
      : q_(spin_count),
        pair_(std::move(pair)),
        singleton_(std::move(singleton)),
        params_(params),
        labels_(std::move(labels)) {
    if (q_ < 2 || q_ > 255) throw InvalidArgument("spin count must lie in [2, 255]");
    const auto q = static_cast<std::size_t>(q_);
    if (pair_.size() != q * q || singleton_.size() != q || labels_.size() != q) {
      throw InvalidArgument("potential tables do not match the spin count");
    }
    bool any_finite = false;
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = 0; b < q; ++b) {
        if (!(pair_[a * q + b] == pair_[b * q + a])) throw InvalidArgument("pair potential must be symmetric");
        if (!pair_[a * q + b].is_forbidden()) any_finite = true;
      }
      if (!std::isfinite(singleton_[a])) throw InvalidArgument("singleton potential must be finite");
    }
    if (!any_finite) throw InvalidArgument("every spin pair is forbidden");
    pair_log_.resize(q * q);
    for (std::size_t i = 0; i < q * q; ++i) pair_log_[i] = pair_[i].log_factor();
    singleton_log_.resize(q);
    for (std::size_t s = 0; s < q; ++s) singleton_log_[s] = -singleton_[s];
  }

  int spin_count() const { return q_; }
  const ModelParams& params() const { return params_; }
  ModelKind kind() const { return params_.kind; }

  Energy pair(Spin a, Spin b) const { return pair_[index(a, b)]; }
  double singleton(Spin s) const { return singleton_[s]; }

  double pair_log_factor(Spin a, Spin b) const { return pair_log_[index(a, b)]; }
  double singleton_log_factor(Spin s) const { return singleton_log_[s]; }
  bool allowed(Spin a, Spin b) const { return !pair_[index(a, b)].is_forbidden(); }

  bool has_hard_constraints() const {
    return std::any_of(pair_.begin(), pair_.end(), [](const Energy& e) { return e.is_forbidden(); });
  }

  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(Spin s) const { return labels_.at(s); }

  std::optional<Spin> spin_of_label(std::string_view label) const {
    for (std::size_t s = 0; s < labels_.size(); ++s) {
      if (labels_[s] == label) return static_cast<Spin>(s);
    }
    return std::nullopt;
  }

  // +1 / -1 for Ising spins.
  int ising_sign(Spin s) const { return s == 0 ? 1 : -1; }

 private:
  std::size_t index(Spin a, Spin b) const { return static_cast<std::size_t>(a) * static_cast<std::size_t>(q_) + b; }

  int q_;
  std::vector<Energy> pair_;
  std::vector<double> singleton_;
  ModelParams params_;
  std::vector<std::string> labels_;
  std::vector<double> pair_log_;
  std::vector<double> singleton_log_;
};

namespace detail {

inline void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be finite");
}

}  // namespace detail

inline SpinModel make_ising(double beta, double h) {
  detail::require_finite(beta, "beta");
  detail::require_finite(h, "h");
  if (beta < 0) throw InvalidArgument("beta must be non-negative");
  const double sign[2] = {1.0, -1.0};
  std::vector<Energy> pair;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) pair.emplace_back(-beta * sign[a] * sign[b]);
  std::vector<double> single{-beta * h * sign[0], -beta * h * sign[1]};
  ModelParams params{ModelKind::Ising, beta, h, 1.0, 2, false};
  return SpinModel(2, std::move(pair), std::move(single), params, {"+", "-"});
}

inline SpinModel make_hardcore(double lambda) {
  detail::require_finite(lambda, "lambda");
  if (lambda <= 0) throw InvalidArgument("lambda must be positive");
  std::vector<Energy> pair{Energy(0.0), Energy(0.0), Energy(0.0), Energy::forbidden()};
  std::vector<double> single{0.0, -std::log(lambda)};
  ModelParams params{ModelKind::HardCore, 0.0, 0.0, lambda, 2, false};
  return SpinModel(2, std::move(pair), std::move(single), params, {"0", "1"});
}

namespace detail {

inline std::vector<std::string> colour_labels(int q) {
  std::vector<std::string> labels;
  for (int k = 1; k <= q; ++k) labels.push_back(std::to_string(k));
  return labels;
}

}  // namespace detail

inline SpinModel make_potts(int q, double beta, bool antiferro) {
  if (q < 2 || q > 255) throw InvalidArgument("Potts model needs 2 <= q <= 255");
  detail::require_finite(beta, "beta");
  if (beta < 0) throw InvalidArgument("beta must be non-negative");
  const auto qs = static_cast<std::size_t>(q);
  std::vector<Energy> pair(qs * qs, Energy(0.0));
  for (std::size_t s = 0; s < qs; ++s) pair[s * qs + s] = Energy(antiferro ? beta : -beta);
  ModelParams params{ModelKind::Potts, beta, 0.0, 1.0, q, antiferro};
  return SpinModel(q, std::move(pair), std::vector<double>(qs, 0.0), params, detail::colour_labels(q));
}

// Antiferromagnetic Potts at zero temperature: the uniform measure on proper colourings.
inline SpinModel make_colorings(int q) {
  if (q < 2 || q > 255) throw InvalidArgument("colourings need 2 <= q <= 255");
  const auto qs = static_cast<std::size_t>(q);
  std::vector<Energy> pair(qs * qs, Energy(0.0));
  for (std::size_t s = 0; s < qs; ++s) pair[s * qs + s] = Energy::forbidden();
  ModelParams params{ModelKind::Colorings, std::numeric_limits<double>::infinity(), 0.0, 1.0, q, true};
  return SpinModel(q, std::move(pair), std::vector<double>(qs, 0.0), params, detail::colour_labels(q));
}

// Heat-bath conditional of one site given its neighbours' spins:
// p(s) proportional to exp(-W(s) - sum_nb U(s, nb)). Writes into `out` (size q).
inline void site_conditional(const SpinModel& model, std::span<const Spin> neighbors, std::span<double> out) {
  const int q = model.spin_count();
  double max_log = kNegInf;
  for (int s = 0; s < q; ++s) {
    const auto spin = static_cast<Spin>(s);
    double lw = model.singleton_log_factor(spin);
    for (Spin nb : neighbors) lw += model.pair_log_factor(spin, nb);
    out[static_cast<std::size_t>(s)] = lw;
    max_log = std::max(max_log, lw);
  }
  if (max_log == kNegInf) throw FrozenContradiction("frozen contradiction: every spin value is forbidden at this site");
  double total = 0.0;
  for (int s = 0; s < q; ++s) {
    auto& v = out[static_cast<std::size_t>(s)];
    v = v == kNegInf ? 0.0 : std::exp(v - max_log);
    total += v;
  }
  for (int s = 0; s < q; ++s) out[static_cast<std::size_t>(s)] /= total;
}

inline std::vector<double> site_conditional(const SpinModel& model, std::span<const Spin> neighbors) {
  std::vector<double> out(static_cast<std::size_t>(model.spin_count()));
  site_conditional(model, neighbors, out);
  return out;
}

// ---- descriptors -------------------------------------------------------------

inline SpinModel make_model(const ModelParams& p) {
  switch (p.kind) {
    case ModelKind::Ising: return make_ising(p.beta, p.h);
    case ModelKind::HardCore: return make_hardcore(p.lambda);
    case ModelKind::Potts: return make_potts(p.q, p.beta, p.antiferro);
    case ModelKind::Colorings: return make_colorings(p.q);
  }
  throw InvalidArgument("unknown model kind");
}

inline ModelParams model_params_from_config(const ConfigBlock& cfg) {
  ModelParams p;
  const auto name = cfg.get_string("model");
  if (name == "ising") {
    p.kind = ModelKind::Ising;
    p.beta = cfg.get_double("beta");
    p.h = cfg.get_double("h", 0.0);
  } else if (name == "hardcore") {
    p.kind = ModelKind::HardCore;
    p.lambda = cfg.get_double("lambda");
  } else if (name == "potts") {
    p.kind = ModelKind::Potts;
    p.q = static_cast<int>(cfg.get_int("q"));
    p.beta = cfg.get_double("beta");
    p.antiferro = cfg.get_bool("antiferro", false);
  } else if (name == "colorings") {
    p.kind = ModelKind::Colorings;
    p.q = static_cast<int>(cfg.get_int("q"));
    p.antiferro = true;
  } else {
    throw InvalidArgument("unknown model `" + name + "` (expected ising|hardcore|potts|colorings)");
  }
  return p;
}

inline SpinModel model_from_config(const ConfigBlock& cfg) { return make_model(model_params_from_config(cfg)); }

inline ConfigBlock to_config(const ModelParams& p) {
  ConfigBlock cfg;
  cfg.set("model", std::string(to_string(p.kind)));
  switch (p.kind) {
    case ModelKind::Ising:
      cfg.set("beta", p.beta);
      cfg.set("h", p.h);
      break;
    case ModelKind::HardCore:
      cfg.set("lambda", p.lambda);
      break;
    case ModelKind::Potts:
      cfg.set("q", p.q);
      cfg.set("beta", p.beta);
      cfg.set("antiferro", p.antiferro);
      break;
    case ModelKind::Colorings:
      cfg.set("q", p.q);
      break;
  }
  return cfg;
}

}  // namespace treegibbs
