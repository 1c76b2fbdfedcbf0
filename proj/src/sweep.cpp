#include "ddopt/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "ddopt/error.hpp"
#include "ddopt/parallel.hpp"
#include "ddopt/sequence.hpp"

namespace ddopt::sweep {

namespace {

const std::set<std::string, std::less<>> kParams = {
    "tau_d", "tau_c", "J", "beta", "tau_p", "epsilon", "tau_p_over_tau_d", "tau_p_over_tau_c", "J_over_beta"};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        out.back() += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

std::string number_or_empty(const CellResult& c, double v) { return c.ok() ? format_double(v) : std::string(); }

PulseModel model_for(PulseModel::Kind kind, const CellParams& p) {
  PulseModel m;
  m.kind = kind;
  if (m.has_width()) m.tau_p = p.tau_p;
  if (m.has_flip_error()) m.epsilon = p.epsilon;
  return m;
}

// Bath realizations with unit strengths, rescaled per cell.
class Baths {
 public:
  explicit Baths(const SweepPlan& plan) : systems_(static_cast<std::size_t>(plan.n_seeds)) {
    parallel_for(systems_.size(), plan.jobs, [&](std::size_t k) {
      systems_[k] = make_system(BathSpec{plan.n_spins, plan.seed + k, 1.0, 1.0});
    });
  }
  const SystemModel& operator[](std::size_t k) const { return systems_[k]; }
  std::size_t size() const { return systems_.size(); }

 private:
  std::vector<SystemModel> systems_;
};

struct Job {
  std::string sequence;
  CellParams params;
};

// Evaluates every job on every seed and reduces per job in input order.
std::vector<CellResult> run_jobs(const SweepPlan& plan, const std::vector<Job>& jobs) {
  const Baths baths(plan);
  const std::size_t n_seeds = baths.size();
  struct Slot {
    double D = 0.0;
    double tau_c = 0.0;
    std::string error;
  };
  std::vector<CellResult> out(jobs.size());
  std::vector<Slot> slots(jobs.size() * n_seeds);

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    CellResult& c = out[j];
    c.sequence = jobs[j].sequence;
    const PulseModel model = model_for(plan.model, jobs[j].params);
    const std::optional<double> tau_d =
        jobs[j].params.tau_d ? jobs[j].params.tau_d : tau_d_for_cycle(jobs[j].sequence, jobs[j].params, model);
    if (!tau_d) {
      c.reason = "infeasible: pulses exceed the cycle time";
      continue;
    }
    c.tau_d = *tau_d;
    c.pulses = make_named(jobs[j].sequence, 1.0).pulse_count();
  }

  parallel_for(slots.size(), plan.jobs, [&](std::size_t i) {
    const std::size_t j = i / n_seeds;
    const std::size_t k = i % n_seeds;
    if (!out[j].ok()) return;
    try {
      const CellParams& p = jobs[j].params;
      const Sequence seq = make_named(jobs[j].sequence, out[j].tau_d);
      const SystemModel sys = rescaled(baths[k], p.J, p.beta);
      const DistanceReport r = evaluate(seq, sys, model_for(plan.model, p), plan.precision);
      slots[i].D = r.D;
      slots[i].tau_c = r.tau_c;
    } catch (const NumericalError& e) {
      slots[i].error = e.what();
    }
  });

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    CellResult& c = out[j];
    if (!c.ok()) continue;
    for (std::size_t k = 0; k < n_seeds; ++k) {
      const Slot& s = slots[j * n_seeds + k];
      if (!s.error.empty()) {
        c.reason = "numerical: " + s.error;
        c.D.clear();
        break;
      }
      c.D.push_back(s.D);
      c.tau_c = s.tau_c;
    }
    if (!c.ok()) continue;
    if (std::any_of(c.D.begin(), c.D.end(), [](double d) { return d <= 0.0; })) {
      c.D_mean = 0.0;
      c.log10_stderr = 0.0;
      continue;
    }
    const double n = static_cast<double>(c.D.size());
    double mean = 0.0;
    for (double d : c.D) mean += std::log10(d);
    mean /= n;
    double var = 0.0;
    for (double d : c.D) var += (std::log10(d) - mean) * (std::log10(d) - mean);
    c.D_mean = std::pow(10.0, mean);
    c.log10_stderr = c.D.size() > 1 ? std::sqrt(var / (n - 1.0)) / std::sqrt(n) : 0.0;
  }
  return out;
}

std::map<std::string, double> with_axes(const SweepPlan& plan, const std::vector<double>& point) {
  std::map<std::string, double> v = plan.fixed;
  for (std::size_t a = 0; a < point.size(); ++a) v[plan.axes[a].param] = point[a];
  return v;
}

}  // namespace

Axis Axis::log_grid(std::string param, double lo, double hi, int per_decade) {
  if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi)) {
    throw UsageError("axis " + param + ": need 0 < lo <= hi");
  }
  if (per_decade < 1) throw UsageError("axis " + param + ": points per decade must be positive");
  Axis a{std::move(param), {}};
  const double decades = std::log10(hi / lo);
  const int n = std::max(1, static_cast<int>(std::lround(decades * per_decade)) + 1);
  if (n == 1) return Axis{a.param, {lo}};
  for (int k = 0; k < n; ++k) a.values.push_back(std::pow(10.0, std::log10(lo) + decades * k / (n - 1)));
  a.values.front() = lo;
  a.values.back() = hi;
  return a;
}

CellParams resolve(const std::map<std::string, double>& values) {
  CellParams p;
  for (const auto& [name, v] : values) {
    if (!kParams.contains(name)) throw UsageError("unknown sweep parameter '" + name + "'");
    if (!std::isfinite(v)) throw UsageError("parameter " + name + " must be finite");
  }
  auto has = [&](const char* n) { return values.contains(n); };
  if (has("tau_d") && has("tau_c")) throw UsageError("set either tau_d or tau_c, not both");
  if (has("J") && has("J_over_beta")) throw UsageError("set either J or J_over_beta, not both");
  const int tau_p_sources = has("tau_p") + has("tau_p_over_tau_d") + has("tau_p_over_tau_c");
  if (tau_p_sources > 1) throw UsageError("set at most one of tau_p, tau_p_over_tau_d, tau_p_over_tau_c");

  if (has("beta")) p.beta = values.at("beta");
  if (has("J")) p.J = values.at("J");
  if (has("J_over_beta")) p.J = values.at("J_over_beta") * p.beta;
  if (has("epsilon")) p.epsilon = values.at("epsilon");
  if (has("tau_c")) {
    p.tau_c = values.at("tau_c");
    if (!(*p.tau_c > 0.0)) throw UsageError("tau_c must be positive");
  } else {
    p.tau_d = has("tau_d") ? values.at("tau_d") : 0.1;
    if (!(*p.tau_d > 0.0)) throw UsageError("tau_d must be positive");
  }
  if (has("tau_p")) p.tau_p = values.at("tau_p");
  if (has("tau_p_over_tau_d")) {
    if (!p.tau_d) throw UsageError("tau_p_over_tau_d needs a fixed tau_d");
    p.tau_p = values.at("tau_p_over_tau_d") * *p.tau_d;
  }
  if (has("tau_p_over_tau_c")) {
    if (!p.tau_c) throw UsageError("tau_p_over_tau_c needs a fixed tau_c");
    p.tau_p = values.at("tau_p_over_tau_c") * *p.tau_c;
  }
  if (p.J < 0.0 || p.beta < 0.0 || p.tau_p < 0.0) throw UsageError("J, beta and tau_p must be nonnegative");
  return p;
}

std::optional<double> tau_d_for_cycle(const std::string& sequence, const CellParams& p, const PulseModel& model) {
  if (!p.tau_c) throw UsageError("tau_d_for_cycle: no cycle time set");
  const Sequence unit = make_named(sequence, 1.0);
  const double m_d = unit.free_time();
  const double m_p = model.has_width() ? static_cast<double>(unit.size()) : 0.0;
  const double tau_d = (*p.tau_c - m_p * p.tau_p) / m_d;
  if (!(tau_d > 0.0) || !std::isfinite(tau_d)) return std::nullopt;
  return tau_d;
}

void SweepPlan::validate(std::size_t expected_axes) const {
  if (axes.size() != expected_axes) {
    throw UsageError("plan needs " + std::to_string(expected_axes) + " axes, got " + std::to_string(axes.size()));
  }
  if (sequences.empty()) throw UsageError("plan lists no sequences");
  if (n_seeds < 1) throw UsageError("n_seeds must be at least 1");
  if (jobs < 1) throw UsageError("jobs must be at least 1");
  BathSpec{n_spins, seed, 1.0, 1.0}.validate();
  std::vector<double> first;
  for (const Axis& a : axes) {
    if (!kParams.contains(a.param)) throw UsageError("unknown sweep parameter '" + a.param + "'");
    if (fixed.contains(a.param)) throw UsageError("parameter " + a.param + " is both swept and fixed");
    if (a.values.empty()) throw UsageError("axis " + a.param + " has no values");
    for (double v : a.values) {
      if (!(v > 0.0) || !std::isfinite(v)) throw UsageError("axis " + a.param + " values must be positive");
    }
    first.push_back(a.values.front());
  }
  if (axes.size() == 2 && axes[0].param == axes[1].param) throw UsageError("both axes sweep " + axes[0].param);

  const auto values = with_axes(*this, first);
  const CellParams p = resolve(values);
  PulseModel probe;
  probe.kind = model;
  const bool width_param = values.contains("tau_p") || values.contains("tau_p_over_tau_d") ||
                           values.contains("tau_p_over_tau_c");
  if (width_param && !probe.has_width()) {
    throw UsageError("tau_p is not meaningful for the " + probe.name() + " model");
  }
  if (values.contains("epsilon") && !probe.has_flip_error()) {
    throw UsageError("epsilon is not meaningful for the " + probe.name() + " model");
  }
  if (probe.has_width() && !width_param) throw UsageError("the " + probe.name() + " model needs tau_p");
  if (precision == Precision::Quad && probe.has_width()) {
    throw UsageError("quad precision supports the ideal and flip-angle models only");
  }
  model_for(model, p).validate();
  for (const std::string& s : sequences) (void)make_named(s, 1.0);
}

void to_json(nlohmann::json& j, const SweepPlan& p) {
  PulseModel probe;
  probe.kind = p.model;
  nlohmann::json axes = nlohmann::json::array();
  for (const Axis& a : p.axes) axes.push_back({{"param", a.param}, {"values", a.values}});
  j = nlohmann::json{{"axes", axes},
                     {"fixed", p.fixed},
                     {"sequences", p.sequences},
                     {"model", probe.name()},
                     {"n_seeds", p.n_seeds},
                     {"seed", p.seed},
                     {"n_spins", p.n_spins},
                     {"precision", std::string(to_string(p.precision))}};
}

void from_json(const nlohmann::json& j, SweepPlan& p) {
  static const std::set<std::string> known = {"axes",    "fixed",   "sequences", "model", "n_seeds",
                                              "seed",    "n_spins", "precision", "jobs"};
  if (!j.is_object()) throw UsageError("plan: expected a JSON object");
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw UsageError("plan: unknown key '" + item.key() + "'");
  }
  try {
    p = SweepPlan{};
    if (j.contains("axes")) {
      for (const auto& a : j.at("axes")) {
        const std::string param = a.at("param").get<std::string>();
        if (a.contains("values")) {
          p.axes.push_back({param, a.at("values").get<std::vector<double>>()});
        } else {
          p.axes.push_back(Axis::log_grid(param, a.at("lo").get<double>(), a.at("hi").get<double>(),
                                          a.value("per_decade", 6)));
        }
      }
    }
    if (j.contains("fixed")) p.fixed = j.at("fixed").get<std::map<std::string, double>>();
    if (j.contains("sequences")) p.sequences = j.at("sequences").get<std::vector<std::string>>();
    p.model = PulseModel::parse_kind(j.value("model", std::string("ideal")));
    p.n_seeds = j.value("n_seeds", p.n_seeds);
    p.seed = j.value("seed", p.seed);
    p.n_spins = j.value("n_spins", p.n_spins);
    p.precision = parse_precision(j.value("precision", std::string("double")));
    p.jobs = j.value("jobs", p.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("plan: ") + e.what());
  }
}

std::vector<SweepRow> sweep_1d(const SweepPlan& plan) {
  plan.validate(1);
  std::vector<Job> jobs;
  std::vector<double> xs;
  for (double x : plan.axes[0].values) {
    const CellParams p = resolve(with_axes(plan, {x}));
    for (const std::string& s : plan.sequences) {
      jobs.push_back({s, p});
      xs.push_back(x);
    }
  }
  std::vector<CellResult> cells = run_jobs(plan, jobs);
  std::vector<SweepRow> rows;
  rows.reserve(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) rows.push_back({xs[k], std::move(cells[k])});
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "x,sequence,D_mean,log10_D_stderr,n_seeds,tau_d,tau_c,reason\n";
  for (const SweepRow& r : rows) {
    const CellResult& c = r.cell;
    os << format_double(r.x) << ',' << csv_field(c.sequence) << ',' << number_or_empty(c, c.D_mean) << ','
       << number_or_empty(c, c.log10_stderr) << ',' << c.D.size() << ',' << format_double(c.tau_d) << ','
       << number_or_empty(c, c.tau_c) << ',' << csv_field(c.reason) << '\n';
  }
}

std::vector<LandscapeCell> landscape_2d(const SweepPlan& plan) {
  plan.validate(2);
  std::vector<Job> jobs;
  std::vector<LandscapeCell> out;
  for (double y : plan.axes[1].values) {
    for (double x : plan.axes[0].values) {
      const CellParams p = resolve(with_axes(plan, {x, y}));
      for (const std::string& s : plan.sequences) jobs.push_back({s, p});
      out.push_back({x, y, {}, 0.0, {}});
    }
  }
  std::vector<CellResult> cells = run_jobs(plan, jobs);
  const std::size_t n = plan.sequences.size();
  for (std::size_t c = 0; c < out.size(); ++c) {
    LandscapeCell& cell = out[c];
    const CellResult* best = nullptr;
    for (std::size_t s = 0; s < n; ++s) {
      cell.cells.push_back(std::move(cells[c * n + s]));
    }
    for (const CellResult& r : cell.cells) {
      if (!r.ok()) continue;
      if (!best || r.D_mean < best->D_mean || (r.D_mean == best->D_mean && r.pulses < best->pulses)) best = &r;
    }
    if (best) {
      cell.winner = best->sequence;
      cell.D = best->D_mean;
    }
  }
  return out;
}

void write_landscape_csv(std::ostream& os, const SweepPlan& plan, const std::vector<LandscapeCell>& cells) {
  os << "x,y,winner,D_best";
  for (const std::string& s : plan.sequences) os << ',' << csv_field("D_" + s);
  os << '\n';
  for (const LandscapeCell& c : cells) {
    os << format_double(c.x) << ',' << format_double(c.y) << ',' << csv_field(c.winner) << ','
       << (c.winner.empty() ? std::string() : format_double(c.D));
    for (const CellResult& r : c.cells) os << ',' << number_or_empty(r, r.D_mean);
    os << '\n';
  }
}

std::vector<CompareRow> compare(const SweepPlan& plan) {
  plan.validate(0);
  const CellParams p = resolve(plan.fixed);
  std::vector<Job> jobs;
  for (const std::string& s : plan.sequences) jobs.push_back({s, p});
  std::vector<CellResult> cells = run_jobs(plan, jobs);
  std::vector<CompareRow> rows;
  for (CellResult& c : cells) {
    const double q = c.ok() ? fitness_from_distance(c.D_mean) : 0.0;
    rows.push_back({std::move(c), q});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CompareRow& a, const CompareRow& b) {
    if (a.cell.ok() != b.cell.ok()) return a.cell.ok();
    return a.cell.D_mean < b.cell.D_mean;
  });
  return rows;
}

void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "rank,sequence,D_mean,q,log10_D_stderr,pulses,tau_d,tau_c,reason\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const CellResult& c = rows[k].cell;
    os << k + 1 << ',' << csv_field(c.sequence) << ',' << number_or_empty(c, c.D_mean) << ','
       << number_or_empty(c, rows[k].q) << ',' << number_or_empty(c, c.log10_stderr) << ',' << c.pulses << ','
       << format_double(c.tau_d) << ',' << number_or_empty(c, c.tau_c) << ',' << csv_field(c.reason) << '\n';
  }
}

std::vector<std::pair<double, double>> read_sweep_points(std::istream& is, const std::string& sequence) {
  std::string line;
  if (!std::getline(is, line)) throw UsageError("sweep CSV is empty");
  const auto header = split_csv_line(line);
  auto column = [&](const char* name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw UsageError(std::string("sweep CSV has no '") + name + "' column");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cx = column("x"), cs = column("sequence"), cd = column("D_mean");
  std::vector<std::pair<double, double>> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw UsageError("malformed sweep CSV row: " + line);
    if (f[cs] != sequence || f[cd].empty()) continue;
    try {
      out.emplace_back(std::stod(f[cx]), std::stod(f[cd]));
    } catch (const std::exception&) {
      throw UsageError("malformed number in sweep CSV row: " + line);
    }
  }
  return out;
}

}  // namespace ddopt::sweep
