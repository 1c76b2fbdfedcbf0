#include "commands.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "ddopt/error.hpp"
#include "ddopt/ga.hpp"
#include "ddopt/metrics.hpp"
#include "ddopt/sequence.hpp"
#include "ddopt/sweep.hpp"

namespace ddopt::cli {

namespace {

using nlohmann::json;

std::string sig6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void check_keys(const json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw UsageError(what + ": expected a JSON object");
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw UsageError(what + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("option ") + key + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Single-sequence commands (simulate, heff)
// ---------------------------------------------------------------------------

struct Single {
  Sequence seq;
  SystemModel sys;
  PulseModel model;
  Precision precision = Precision::Double;
  std::uint64_t seed = 0;
};

Single resolve_single(const json& c) {
  check_keys(c, {"seq", "seq_text", "model", "J", "beta", "tau_d", "tau_p", "epsilon", "seed", "n_spins",
                 "precision", "system"},
             "simulate");
  Single s;
  s.model.kind = PulseModel::parse_kind(get_or<std::string>(c, "model", "ideal"));
  const double tau_p = get_or(c, "tau_p", 0.0);
  const double epsilon = get_or(c, "epsilon", 0.0);
  if (tau_p != 0.0 && !s.model.has_width()) throw UsageError("--tau-p is not meaningful for the " + s.model.name() + " model");
  if (epsilon != 0.0 && !s.model.has_flip_error()) {
    throw UsageError("--epsilon is not meaningful for the " + s.model.name() + " model");
  }
  s.model.tau_p = tau_p;
  s.model.epsilon = epsilon;
  s.model.validate();
  s.precision = parse_precision(get_or<std::string>(c, "precision", "double"));

  const bool named = c.contains("seq") && !c.at("seq").is_null();
  const bool text = c.contains("seq_text") && !c.at("seq_text").is_null();
  if (named == text) throw UsageError("give exactly one of --seq and --seq-file");
  const std::optional<double> tau_d =
      c.contains("tau_d") && !c.at("tau_d").is_null() ? std::optional(c.at("tau_d").get<double>()) : std::nullopt;
  if (named) {
    s.seq = make_named(c.at("seq").get<std::string>(), tau_d.value_or(0.1));
  } else {
    s.seq = parse_sequence_text(c.at("seq_text").get<std::string>(), "file");
    if (tau_d) s.seq = with_tau_d(s.seq, *tau_d);
  }
  if (!cyclic_ok(s.seq)) {
    throw UsageError("sequence violates the cyclic condition: the product of its ideal pulses is not "
                     "proportional to the identity");
  }

  if (c.contains("system") && !c.at("system").is_null()) {
    s.sys = io::system_from_json(c.at("system"));
  } else {
    BathSpec spec;
    spec.seed = get_or(c, "seed", std::uint64_t{0});
    spec.n_spins = get_or(c, "n_spins", 4);
    spec.J = get_or(c, "J", 1e-3);
    spec.beta = get_or(c, "beta", 1e-6);
    s.sys = make_system(spec);
  }
  s.seed = s.sys.spec.seed;
  return s;
}

json dimensionless(const Single& s) {
  const double tau_d = s.seq.min_interval();
  json j{{"J_tau_d", s.sys.spec.J * tau_d}, {"beta_tau_d", s.sys.spec.beta * tau_d}};
  if (s.model.has_width()) j["J_tau_p"] = s.sys.spec.J * s.model.tau_p;
  if (s.model.has_flip_error()) j["epsilon"] = s.model.epsilon;
  return j;
}

std::uint64_t cmd_simulate(const json& config, const Context& ctx, io::RunManifest& m) {
  const Single s = resolve_single(config);
  const DistanceReport r = evaluate(s.seq, s.sys, s.model, s.precision);
  json out = io::report_to_json(r);
  out["sequence"] = to_text(s.seq);
  out["pulses"] = s.seq.pulse_count();
  out["model"] = s.model.name();
  out["precision"] = std::string(to_string(s.precision));
  out["system"] = io::system_to_json(s.sys, false);
  out["dimensionless"] = dimensionless(s);
  io::write_json_file(ctx.out_dir / "simulate.json", out);
  m.outputs.push_back("simulate.json");
  if (ctx.out) {
    *ctx.out << "D = " << sig6(r.D) << "\nq = " << sig6(r.q) << "\ntau_c = " << sig6(r.tau_c) << " ns\n"
             << "J*tau_d = " << sig6(out["dimensionless"]["J_tau_d"].get<double>())
             << ", beta*tau_d = " << sig6(out["dimensionless"]["beta_tau_d"].get<double>()) << "\n";
  }
  return s.seed;
}

std::uint64_t cmd_heff(const json& config, const Context& ctx, io::RunManifest& m) {
  const Single s = resolve_single(config);
  const Propagator p = propagate(s.seq, s.sys, s.model);
  const EffHamReport h = effective_error_hamiltonian(p);

  // Channel norms of the error Hamiltonian itself, for reference.
  std::array<double, 3> reference{};
  for (int mu = 1; mu <= 3; ++mu) {
    const CMatrix sm = linalg::kron(linalg::pauli(mu), linalg::identity(s.sys.d_b));
    reference[static_cast<std::size_t>(mu - 1)] =
        linalg::sup_norm(0.5 * linalg::partial_trace_system(sm * s.sys.h_err, s.sys.d_s, s.sys.d_b));
  }
  const auto dominant = std::max_element(h.channel_norms.begin(), h.channel_norms.end()) - h.channel_norms.begin();
  const char* names[] = {"x", "y", "z"};
  json out{{"sequence", to_text(s.seq)},
           {"tau_c", p.tau_c},
           {"channel_norms", {{"x", h.channel_norms[0]}, {"y", h.channel_norms[1]}, {"z", h.channel_norms[2]}}},
           {"bath_norm", h.bath_norm},
           {"err_norm", h.err_norm},
           {"dominant_channel", names[dominant]},
           {"h_err_channel_norms", {{"x", reference[0]}, {"y", reference[1]}, {"z", reference[2]}}},
           {"system", io::system_to_json(s.sys, false)},
           {"dimensionless", dimensionless(s)}};
  io::write_json_file(ctx.out_dir / "heff.json", out);
  m.outputs.push_back("heff.json");
  if (ctx.out) {
    *ctx.out << "channel norms (rad/ns): x = " << sig6(h.channel_norms[0]) << ", y = " << sig6(h.channel_norms[1])
             << ", z = " << sig6(h.channel_norms[2]) << "\n"
             << "H_err channel norms:    x = " << sig6(reference[0]) << ", y = " << sig6(reference[1])
             << ", z = " << sig6(reference[2]) << "\n"
             << "bath norm = " << sig6(h.bath_norm) << ", error norm = " << sig6(h.err_norm)
             << ", dominant channel = " << names[dominant] << "\n";
  }
  return s.seed;
}

// ---------------------------------------------------------------------------
// Search and sweeps
// ---------------------------------------------------------------------------

std::uint64_t cmd_optimize(const json& config, const Context& ctx, io::RunManifest& m) {
  ga::GAConfig cfg = config.get<ga::GAConfig>();
  cfg.jobs = ctx.jobs;
  m.config = cfg;
  const ga::GAResult r = ga::run_ga(cfg);

  std::ostringstream history;
  ga::write_history_csv(history, r);
  io::write_text_file(ctx.out_dir / "optimize_history.csv", history.str());

  std::ostringstream ledger;
  for (std::size_t k = 0; k < r.level_bests.size(); ++k) {
    ledger << "# level " << r.level_bests[k].first << " q=" << format_double(r.level_best_q[k]) << "\n"
           << to_text(r.level_bests[k].second) << "\n";
  }
  ledger << "# best q=" << format_double(r.best_q) << "\n" << to_text(r.best) << "\n";
  io::write_text_file(ctx.out_dir / "optimize_best.seq", ledger.str());

  json summary{{"best", to_text(r.best)}, {"best_q", r.best_q}, {"evaluations", r.evaluations}};
  io::write_json_file(ctx.out_dir / "optimize.json", summary);
  m.outputs.insert(m.outputs.end(), {"optimize_history.csv", "optimize_best.seq", "optimize.json"});
  if (ctx.out) *ctx.out << "best q = " << sig6(r.best_q) << "\n" << to_text(r.best) << "\n";
  return cfg.seed;
}

sweep::SweepPlan plan_from(const json& config, const Context& ctx) {
  sweep::SweepPlan plan = config.get<sweep::SweepPlan>();
  plan.jobs = ctx.jobs;
  return plan;
}

sweep::SweepPlan resolved_plan(const json& config, const Context& ctx, io::RunManifest& m) {
  sweep::SweepPlan plan = plan_from(config, ctx);
  m.config = plan;
  return plan;
}

std::uint64_t cmd_sweep(const json& config, const Context& ctx, io::RunManifest& m) {
  const sweep::SweepPlan plan = resolved_plan(config, ctx, m);
  std::ostringstream csv;
  sweep::write_sweep_csv(csv, sweep::sweep_1d(plan));
  io::write_text_file(ctx.out_dir / "sweep.csv", csv.str());
  m.outputs.push_back("sweep.csv");
  if (ctx.out) *ctx.out << csv.str();
  return plan.seed;
}

std::uint64_t cmd_landscape(const json& config, const Context& ctx, io::RunManifest& m) {
  const sweep::SweepPlan plan = resolved_plan(config, ctx, m);
  std::ostringstream csv;
  sweep::write_landscape_csv(csv, plan, sweep::landscape_2d(plan));
  io::write_text_file(ctx.out_dir / "landscape.csv", csv.str());
  m.outputs.push_back("landscape.csv");
  if (ctx.out) *ctx.out << csv.str();
  return plan.seed;
}

std::uint64_t cmd_compare(const json& config, const Context& ctx, io::RunManifest& m) {
  const sweep::SweepPlan plan = resolved_plan(config, ctx, m);
  std::ostringstream csv;
  sweep::write_compare_csv(csv, sweep::compare(plan));
  io::write_text_file(ctx.out_dir / "compare.csv", csv.str());
  m.outputs.push_back("compare.csv");
  if (ctx.out) *ctx.out << csv.str();
  return plan.seed;
}

std::vector<std::pair<double, double>> points_from(const json& j, const char* key) {
  try {
    return j.at(key).get<std::vector<std::pair<double, double>>>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("fit: ") + key + ": " + e.what());
  }
}

json fit_json(const ScalingFit& f) {
  return json{{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}, {"n_points", f.n_points}};
}

std::uint64_t cmd_fit(const json& config, const Context& ctx, io::RunManifest& m) {
  check_keys(config, {"sequence", "points", "j_points"}, "fit");
  const auto points = points_from(config, "points");
  const ScalingFit f = fit_scaling(points);
  json out{{"sequence", config.value("sequence", std::string())}, {"fit", fit_json(f)}};
  if (config.contains("j_points")) {
    const ScalingFit fj = fit_scaling(points_from(config, "j_points"));
    const Exponents e = extract_exponents(f, fj);
    out["j_fit"] = fit_json(fj);
    out["exponents"] = json{{"N", e.N}, {"n_J", e.n_J}, {"n_beta", e.n_beta}};
  }
  io::write_json_file(ctx.out_dir / "fit.json", out);
  m.outputs.push_back("fit.json");
  if (ctx.out) {
    *ctx.out << "slope = " << sig6(f.slope) << ", intercept = " << sig6(f.intercept)
             << ", r^2 = " << sig6(f.r_squared) << ", points = " << f.n_points << "\n";
    if (out.contains("exponents")) {
      *ctx.out << "N = " << sig6(out["exponents"]["N"].get<double>())
               << ", n_J = " << sig6(out["exponents"]["n_J"].get<double>())
               << ", n_beta = " << sig6(out["exponents"]["n_beta"].get<double>()) << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Command-line parsing
// ---------------------------------------------------------------------------

struct PhysicsFlags {
  std::string seq, seq_file, model = "ideal", precision = "double", system_file;
  double J = 1e-3, beta = 1e-6, tau_p = 0.0, epsilon = 0.0;
  std::optional<double> tau_d;
  std::uint64_t seed = 0;
  int n_spins = 4;

  void add(CLI::App* app) {
    app->add_option("--seq", seq, "Named sequence, e.g. xy4, ga8a:X,Y, cdd3, qdd3, 4xrga4");
    app->add_option("--seq-file", seq_file, "Sequence text file of interval_ns:LABEL tokens");
    app->add_option("--model", model, "Pulse model: ideal, finite-width, flip-angle, fw-flip-angle")
        ->capture_default_str();
    app->add_option("--J", J, "Error Hamiltonian strength (rad/ns)")->capture_default_str();
    app->add_option("--beta", beta, "Pure-bath strength (rad/ns)")->capture_default_str();
    app->add_option("--tau-d", tau_d, "Minimum pulse interval (ns); default 0.1 for named sequences");
    app->add_option("--tau-p", tau_p, "Pulse width (ns), width models only");
    app->add_option("--epsilon", epsilon, "Fractional flip-angle error, flip-angle models only");
    app->add_option("--seed", seed, "Bath realization seed")->capture_default_str();
    app->add_option("--n-spins", n_spins, "Bath spins")->capture_default_str();
    app->add_option("--precision", precision, "double or quad (zero-width models)")->capture_default_str();
    app->add_option("--system", system_file, "System JSON file; overrides --seed, --n-spins, --J, --beta");
  }

  json config() const {
    json c{{"model", model}, {"J", J}, {"beta", beta}, {"tau_p", tau_p}, {"epsilon", epsilon},
           {"seed", seed}, {"n_spins", n_spins}, {"precision", precision}};
    if (tau_d) c["tau_d"] = *tau_d;
    if (!seq.empty()) c["seq"] = seq;
    if (!seq_file.empty()) c["seq_text"] = io::read_text_file(seq_file);
    if (!system_file.empty()) c["system"] = io::read_json_file(system_file);
    return c;
  }
};

std::vector<std::pair<double, double>> csv_points(const std::string& path, const std::string& sequence) {
  std::istringstream in(io::read_text_file(path));
  return sweep::read_sweep_points(in, sequence);
}

}  // namespace

std::filesystem::path resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DDOPT_OUT_DIR"); env && *env) return env;
  return ".";
}

io::RunManifest run(const std::string& command, const nlohmann::json& config, const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  io::RunManifest m;
  m.command = command;
  m.config = config;
  if (command == "simulate") {
    m.seed = cmd_simulate(config, ctx, m);
  } else if (command == "heff") {
    m.seed = cmd_heff(config, ctx, m);
  } else if (command == "optimize") {
    m.seed = cmd_optimize(config, ctx, m);
  } else if (command == "sweep") {
    m.seed = cmd_sweep(config, ctx, m);
  } else if (command == "landscape") {
    m.seed = cmd_landscape(config, ctx, m);
  } else if (command == "compare") {
    m.seed = cmd_compare(config, ctx, m);
  } else if (command == "fit") {
    m.seed = cmd_fit(config, ctx, m);
  } else {
    throw UsageError("unknown command '" + command + "'");
  }
  m.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  io::write_json_file(ctx.out_dir / (command + ".manifest.json"), io::manifest_to_json(m));
  return m;
}

int main_entry(int argc, const char* const* argv) {
  CLI::App app{"Dynamical decoupling sequence simulator and optimizer.\n"
               "Units: strengths J, beta in rad/ns; times tau_d, tau_p, tau_c in ns."};
  app.name("ddopt");
  app.require_subcommand(1);
  std::string out_flag;
  int jobs = 1;
  app.add_option("--out-dir", out_flag, "Output directory (default $DDOPT_OUT_DIR or .)");
  app.add_option("--jobs", jobs, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);

  std::string command;
  json config;
  std::function<json()> build;

  PhysicsFlags sim_flags;
  auto* sim = app.add_subcommand("simulate", "Propagate one sequence and report D, q and tau_c");
  sim->fallthrough();
  sim_flags.add(sim);
  sim->callback([&] { command = "simulate"; build = [&] { return sim_flags.config(); }; });

  PhysicsFlags heff_flags;
  auto* heff = app.add_subcommand("heff", "Extract the effective error Hamiltonian of one cycle");
  heff->fallthrough();
  heff_flags.add(heff);
  heff->callback([&] { command = "heff"; build = [&] { return heff_flags.config(); }; });

  std::string ga_file;
  auto* opt = app.add_subcommand("optimize", "Run the genetic search from a JSON config");
  opt->fallthrough();
  opt->add_option("config", ga_file, "GA config JSON")->required();
  opt->callback([&] { command = "optimize"; build = [&] { return io::read_json_file(ga_file); }; });

  std::string sweep_file, landscape_file;
  auto* sw = app.add_subcommand("sweep", "1-D parameter sweep from a JSON plan");
  sw->fallthrough();
  sw->add_option("plan", sweep_file, "Sweep plan JSON")->required();
  sw->callback([&] { command = "sweep"; build = [&] { return io::read_json_file(sweep_file); }; });
  auto* ls = app.add_subcommand("landscape", "2-D optimal-sequence landscape from a JSON plan");
  ls->fallthrough();
  ls->add_option("plan", landscape_file, "Landscape plan JSON")->required();
  ls->callback([&] { command = "landscape"; build = [&] { return io::read_json_file(landscape_file); }; });

  std::string compare_plan;
  std::vector<std::string> compare_seqs;
  PhysicsFlags cmp_flags;
  int cmp_seeds = 10;
  auto* cmp = app.add_subcommand("compare", "Rank sequences at fixed parameters");
  cmp->fallthrough();
  cmp->add_option("--plan", compare_plan, "Plan JSON with fixed parameters and sequences");
  cmp->add_option("--seq", compare_seqs, "Sequence to compare (repeatable)");
  cmp->add_option("--model", cmp_flags.model, "Pulse model")->capture_default_str();
  cmp->add_option("--J", cmp_flags.J, "rad/ns")->capture_default_str();
  cmp->add_option("--beta", cmp_flags.beta, "rad/ns")->capture_default_str();
  cmp->add_option("--tau-d", cmp_flags.tau_d, "Minimum pulse interval (ns), default 0.1");
  cmp->add_option("--tau-p", cmp_flags.tau_p, "Pulse width (ns)");
  cmp->add_option("--epsilon", cmp_flags.epsilon, "Flip-angle error");
  cmp->add_option("--seed", cmp_flags.seed, "First bath seed")->capture_default_str();
  cmp->add_option("--n-seeds", cmp_seeds, "Bath realizations")->capture_default_str();
  cmp->add_option("--n-spins", cmp_flags.n_spins, "Bath spins")->capture_default_str();
  cmp->add_option("--precision", cmp_flags.precision, "double or quad")->capture_default_str();
  cmp->callback([&] {
    command = "compare";
    build = [&] {
      if (!compare_plan.empty()) {
        if (!compare_seqs.empty()) throw UsageError("give either --plan or --seq, not both");
        return io::read_json_file(compare_plan);
      }
      json fixed{{"J", cmp_flags.J}, {"beta", cmp_flags.beta}, {"tau_d", cmp_flags.tau_d.value_or(0.1)}};
      PulseModel probe;
      probe.kind = PulseModel::parse_kind(cmp_flags.model);
      if (cmp_flags.tau_p != 0.0 && !probe.has_width()) {
        throw UsageError("--tau-p is not meaningful for the " + probe.name() + " model");
      }
      if (cmp_flags.epsilon != 0.0 && !probe.has_flip_error()) {
        throw UsageError("--epsilon is not meaningful for the " + probe.name() + " model");
      }
      if (probe.has_width()) fixed["tau_p"] = cmp_flags.tau_p;
      if (probe.has_flip_error()) fixed["epsilon"] = cmp_flags.epsilon;
      return json{{"fixed", fixed},        {"sequences", compare_seqs},      {"model", cmp_flags.model},
                  {"n_seeds", cmp_seeds},  {"seed", cmp_flags.seed},         {"n_spins", cmp_flags.n_spins},
                  {"precision", cmp_flags.precision}};
    };
  });

  std::string fit_csv, fit_seq, fit_j_csv;
  auto* fit = app.add_subcommand("fit", "Fit log10 D against log10 x from sweep CSV output");
  fit->fallthrough();
  fit->add_option("--csv", fit_csv, "Sweep CSV (x axis as swept)")->required();
  fit->add_option("--sequence", fit_seq, "Sequence column value to fit")->required();
  fit->add_option("--j-csv", fit_j_csv, "Optional J-sweep CSV; adds N, n_J, n_beta");
  fit->callback([&] {
    command = "fit";
    build = [&] {
      json c{{"sequence", fit_seq}, {"points", csv_points(fit_csv, fit_seq)}};
      if (!fit_j_csv.empty()) c["j_points"] = csv_points(fit_j_csv, fit_seq);
      return c;
    };
  });

  std::string manifest_file;
  auto* rep = app.add_subcommand("replay", "Re-run a command from its manifest");
  rep->fallthrough();
  rep->add_option("manifest", manifest_file, "Manifest JSON written by an earlier run")->required();
  rep->callback([&] {
    command = "replay";
    build = [&] { return io::read_json_file(manifest_file); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    Context ctx;
    ctx.out_dir = resolve_out_dir(out_flag);
    ctx.jobs = jobs;
    ctx.out = &std::cout;
    json c = build();
    if (command == "replay") {
      const io::RunManifest m = io::manifest_from_json(c);
      run(m.command, m.config, ctx);
    } else {
      run(command, c, ctx);
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int main_entry(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return main_entry(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ddopt::cli
