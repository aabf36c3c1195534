// treegibbs command line.
//
//   treegibbs <scenario> [--config PATH] [--seed N] [--out DIR]
//   treegibbs phase --b 2 --q 3
//   treegibbs spectrum --model ising --beta 1.2 --b 2 --depth 2 --boundary plus
//   treegibbs mixing --model ising --beta 0.6 --b 2 --depth 2 --boundary free
//   treegibbs simulate --scenario coalescence --depth 5 --replicas 1000
//
// Exit status: 0 all pass flags hold, 1 some flag failed, 2 bad input or runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "treegibbs/treegibbs.hpp"

using namespace treegibbs;
using treegibbs::detail::cell;

namespace {

struct ModelArgs {
  std::string model = "ising";
  double beta = 1.0;
  double h = 0.0;
  double lambda = 1.0;
  int q = 3;
  bool antiferro = false;
  int b = 2;
  int depth = 2;
  std::string boundary = "plus";

  void add(CLI::App* app) {
    // --h is the field, so help is long-only here
    app->set_help_flag("--help", "print this help message and exit");
    app->add_option("--model", model, "ising | hardcore | potts | colorings")->capture_default_str();
    app->add_option("--beta", beta, "inverse temperature")->capture_default_str();
    app->add_option("--h", h, "external field (Ising)")->capture_default_str();
    app->add_option("--lambda", lambda, "activity (hard-core)")->capture_default_str();
    app->add_option("--q", q, "number of spin values (Potts, colorings)")->capture_default_str();
    app->add_flag("--antiferro", antiferro, "antiferromagnetic Potts");
    app->add_option("--b", b, "branching factor")->capture_default_str();
    app->add_option("--depth", depth, "tree depth")->capture_default_str();
    app->add_option("--boundary", boundary, "free | plus | minus | even | odd | color:K | frozen[:K] | file:PATH")
        ->capture_default_str();
  }

  SpinModel make() const {
    ConfigBlock c;
    c.set("model", model);
    c.set("beta", beta);
    c.set("h", h);
    c.set("lambda", lambda);
    c.set("q", q);
    c.set("antiferro", antiferro);
    return model_from_config(c);
  }
};

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

int run_scenario(const std::string& scenario, const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out) {
  ConfigBlock user = config_path.empty() ? ConfigBlock{} : ConfigBlock::load(config_path);
  auto cfg = ExperimentConfig::make(scenario, user, seed, out);
  auto r = run(cfg);
  write_result(r, out);
  for (const auto& [name, ok] : r.flags) std::printf("%-36s %s\n", name.c_str(), ok ? "pass" : "FAIL");
  std::printf("%s: %zu rows, hash %s, %.2f s -> %s\n", scenario.c_str(), r.rows.size(), r.config_hash.c_str(),
              r.wall_seconds, (std::filesystem::path(out) / (scenario + ".csv")).string().c_str());
  return r.passed() ? 0 : 1;
}

int run_phase(const std::vector<int>& bs, int q) {
  std::printf("b,q,beta0,beta1,lambda0,hardcore_cycle_onset,potts_beta1,potts_beta0_upper\n");
  for (int b : bs) {
    auto cv = critical_values(b, q);
    std::printf("%s\n", join({cell(b), cell(q), cell(cv.beta0), cell(cv.beta1), cell(cv.lambda0),
                              cell(hardcore_cycle_onset(b)), cell(cv.potts_beta1), cell(cv.potts_beta0_upper)})
                            .c_str());
  }
  return 0;
}

int run_spectrum(const ModelArgs& a) {
  const auto model = a.make();
  const auto tree = TreeTopology::build(a.b, a.depth);
  const auto bc = parse_boundary(a.boundary, model, tree);
  auto g = build_generator(model, tree, bc);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double gap = nan, csob = nan, t1 = nan, t2 = nan;
  if (g.size() >= 2) {
    auto gr = spectral_gap(g);
    gap = gr.gap;
    if (g.size() <= kMaxMixingStates) {
      csob = log_sobolev_upper(g, gr).value;
      auto sd = spectral_decomposition(g);
      t2 = mixing_time_exact(g, sd, 2);
      if (g.size() <= kMaxT1States) t1 = mixing_time_exact(g, sd, 1);
    }
  }
  std::printf("model,b,depth,beta,h,lambda,q,boundary,n,states,gap,csob_upper,T1,T2\n");
  std::printf("%s\n", join({a.model, cell(a.b), cell(a.depth), cell(a.beta), cell(a.h), cell(a.lambda), cell(a.q),
                            a.boundary, cell(static_cast<std::size_t>(tree.internal_count())), cell(g.size()), cell(gap),
                            cell(csob), cell(t1), cell(t2)})
                          .c_str());
  return 0;
}

int run_mixing(const ModelArgs& a, int ell_max, int functions, std::uint64_t seed) {
  const auto model = a.make();
  const auto tree = TreeTopology::build(a.b, a.depth);
  const auto bc = parse_boundary(a.boundary, model, tree);
  const auto cc = coupling_constants(model, tree, bc);
  MixingOptions opt;
  opt.ell_max = ell_max;
  opt.functions = functions;
  opt.seed = seed;
  opt.contraction = cc.gamma * cc.kappa * a.b;
  bool ok = true;
  std::printf("x,ell,eta,eps_vm,eps_vm_sampled,eps_em_sampled,bound_predicted,duality_ok,bound_ok\n");
  for (const auto& r : mixing_reports(model, tree, bc, opt)) {
    const std::string eta = r.parent ? model.label(*r.parent) : "none";
    std::printf("%s\n", join({cell(static_cast<std::size_t>(r.x)), cell(r.ell), eta, cell(r.eps_vm), cell(r.eps_vm_sampled),
                              cell(r.eps_em_sampled), cell(r.bound_predicted), cell(r.duality_ok), cell(r.bound_ok)})
                            .c_str());
    ok = ok && r.duality_ok && r.bound_ok;
  }
  return ok ? 0 : 1;
}

struct SimArgs {
  std::string scenario = "coalescence";
  std::size_t replicas = 1000;
  std::uint64_t seed = 1;
  double max_time = std::numeric_limits<double>::infinity();
  double epsilon = 0.25;
  double dt = 0.05;
  double horizon = 200.0;
  double max_lag = 20.0;
  int ell = 2;
  std::string summary_path;
};

int run_simulate(const ModelArgs& a, const SimArgs& s) {
  const auto model = a.make();
  const auto tree = TreeTopology::build(a.b, a.depth);
  const auto bc = parse_boundary(a.boundary, model, tree);
  nlohmann::ordered_json j;
  j["scenario"] = s.scenario;
  j["replicas"] = s.replicas;
  j["seed"] = s.seed;
  auto num = treegibbs::detail::num;
  if (s.scenario == "coalescence") {
    Glauber g(model, tree, bc);
    std::vector<double> times;
    std::size_t censored = 0;
    std::printf("replica,time,steps,coalesced\n");
    for (std::size_t i = 0; i < s.replicas; ++i) {
      auto r = grand_coupling_run(g, s.seed, i, s.max_time);
      std::printf("%zu,%s,%llu,%s\n", i, cell(r.time).c_str(), static_cast<unsigned long long>(r.steps), cell(r.coalesced).c_str());
      times.push_back(r.coalesced ? r.time : s.max_time);
      censored += !r.coalesced;
    }
    j["censored"] = censored;
    if (2 * censored >= s.replicas) throw InsufficientBudget("half the replicas did not coalesce before max_time");
    auto ci = bootstrap_median_ci(times, 1000, 0.95, s.seed);
    j["median"] = median(times);
    j["median_ci"] = {ci.low, ci.high};
    j["mean"] = censored == 0 ? num(mean(times)) : nlohmann::ordered_json(nullptr);
  } else if (s.scenario == "tvmix") {
    Glauber g(model, tree, bc);
    TvMixingOptions o;
    o.epsilon = s.epsilon;
    o.replicas = s.replicas;
    o.dt = s.dt;
    o.max_time = std::isfinite(s.max_time) ? s.max_time : 50.0;
    o.seed = s.seed;
    auto r = tv_mixing_estimate(g, o);
    std::printf("time,tv\n");
    for (std::size_t k = 0; k < r.grid.size(); ++k) std::printf("%s,%s\n", cell(r.grid[k]).c_str(), cell(r.tv[k]).c_str());
    j["epsilon"] = s.epsilon;
    j["reached"] = r.reached;
    j["time"] = num(r.time);
    j["start_spin"] = model.label(r.start_spin);
    j["noise_floor"] = r.noise_floor;
    j["tv_ci"] = {num(r.tv_ci.low), num(r.tv_ci.high)};
  } else if (s.scenario == "autocorr") {
    Glauber g(model, tree, bc);
    AutocorrOptions o;
    o.replicas = s.replicas;
    o.horizon = s.horizon;
    o.dt = s.dt;
    o.max_lag = s.max_lag;
    o.seed = s.seed;
    auto r = autocorr_gap_estimate(g, o);
    std::printf("lag,acov,acov_stderr\n");
    for (std::size_t k = 0; k < r.lags.size(); ++k)
      std::printf("%s\n", join({cell(r.lags[k]), cell(r.acov[k]), cell(r.acov_stderr[k])}).c_str());
    j["rate"] = r.rate;
    j["rate_stderr"] = r.rate_stderr;
    j["fit_window"] = {r.fit_from, r.fit_to};
  } else if (s.scenario == "coupledown") {
    auto ms = MessageSet::compute(model, tree, bc);
    auto h = coupling_down(ms, 0, s.ell, s.replicas, s.seed);
    std::printf("replica,distance\n");
    for (std::size_t i = 0; i < h.distances.size(); ++i) std::printf("%zu,%u\n", i, h.distances[i]);
    const auto cc = coupling_constants(model, tree, bc);
    j["ell"] = s.ell;
    j["mean"] = h.mean;
    j["stderr"] = h.stderr_mean;
    j["kappa_b_pow"] = std::pow(cc.kappa * a.b, s.ell);
  } else if (s.scenario == "coupleup") {
    auto ms = MessageSet::compute(model, tree, bc);
    const VertexId w = tree.descendants(0, s.ell).begin;
    auto e = disagreement_up(ms, w, 0, s.replicas, s.seed);
    std::printf("w,x,replicas,hits,probability,ci_low,ci_high\n");
    std::printf("%s\n", join({cell(static_cast<std::size_t>(w)), "0", cell(e.replicas), cell(e.hits), cell(e.probability),
                              cell(e.ci.low), cell(e.ci.high)})
                            .c_str());
    const auto cc = coupling_constants(model, tree, bc);
    j["ell"] = s.ell;
    j["probability"] = e.probability;
    j["ci"] = {e.ci.low, e.ci.high};
    j["gamma_pow"] = std::pow(cc.gamma, s.ell);
  } else {
    throw InvalidArgument("unknown simulate scenario `" + s.scenario + "`");
  }
  const auto text = j.dump(2);
  if (s.summary_path.empty()) {
    std::cerr << text << '\n';
  } else {
    std::ofstream(s.summary_path) << text << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact and Monte Carlo analysis of Glauber dynamics on b-ary trees"};
  app.require_subcommand(1);

  std::string config_path, out = ".";
  std::uint64_t seed = 1;
  for (const auto& name : scenario_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " scenario");
    sub->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "base seed (overrides the config)");
    sub->add_option("--out", out, "output directory")->capture_default_str();
  }

  std::vector<int> phase_b{2};
  int phase_q = 3;
  auto* phase = app.add_subcommand("phase", "critical-value table as CSV");
  phase->add_option("--b", phase_b, "branching factors")->capture_default_str();
  phase->add_option("--q", phase_q, "Potts colours")->capture_default_str();

  ModelArgs spec_args;
  auto* spectrum = app.add_subcommand("spectrum", "spectral gap, log-Sobolev bound and mixing times");
  spec_args.add(spectrum);

  ModelArgs mix_args;
  int ell_max = 2, functions = 50;
  auto* mixing = app.add_subcommand("mixing", "variance/entropy mixing constants per (x, l, eta)");
  mix_args.add(mixing);
  mixing->add_option("--ell-max", ell_max)->capture_default_str();
  mixing->add_option("--functions", functions, "random test functions per point")->capture_default_str();
  mixing->add_option("--seed", seed)->capture_default_str();

  ModelArgs sim_model;
  SimArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimators");
  sim_model.add(simulate);
  simulate->add_option("--scenario", sim.scenario)
      ->check(CLI::IsMember({"coalescence", "tvmix", "autocorr", "coupledown", "coupleup"}))
      ->capture_default_str();
  simulate->add_option("--replicas", sim.replicas)->capture_default_str();
  simulate->add_option("--seed", sim.seed)->capture_default_str();
  simulate->add_option("--max-time", sim.max_time, "censoring time (coalescence), horizon (tvmix)");
  simulate->add_option("--epsilon", sim.epsilon)->capture_default_str();
  simulate->add_option("--dt", sim.dt)->capture_default_str();
  simulate->add_option("--horizon", sim.horizon)->capture_default_str();
  simulate->add_option("--max-lag", sim.max_lag)->capture_default_str();
  simulate->add_option("--ell", sim.ell)->capture_default_str();
  simulate->add_option("--summary", sim.summary_path, "write the JSON summary here instead of stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    auto* sub = app.get_subcommands().front();
    const auto name = sub->get_name();
    if (name == "phase") return run_phase(phase_b, phase_q);
    if (name == "spectrum") return run_spectrum(spec_args);
    if (name == "mixing") return run_mixing(mix_args, ell_max, functions, seed);
    if (name == "simulate") return run_simulate(sim_model, sim);
    std::optional<std::uint64_t> s;
    if (sub->count("--seed")) s = seed;
    return run_scenario(name, config_path, s, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
