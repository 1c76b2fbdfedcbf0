#include "ddopt/sequence.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include "ddopt/error.hpp"
#include "ddopt/pauli_frame.hpp"

namespace ddopt {

std::size_t Sequence::interval_count() const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const Step& s) { return s.interval > 0.0; }));
}

std::size_t Sequence::pulse_count() const {
  return static_cast<std::size_t>(std::count_if(
      steps.begin(), steps.end(), [](const Step& s) { return s.pulse != PulseLabel::I; }));
}

double Sequence::free_time() const {
  double total = 0.0;
  for (const Step& s : steps) total += s.interval;
  return total;
}

double Sequence::min_interval() const {
  double best = 0.0;
  for (const Step& s : steps) {
    if (s.interval > 0.0 && (best == 0.0 || s.interval < best)) best = s.interval;
  }
  return best;
}

std::vector<PulseLabel> Sequence::labels() const {
  std::vector<PulseLabel> out;
  out.reserve(steps.size());
  for (const Step& s : steps) out.push_back(s.pulse);
  return out;
}

void validate(const Sequence& seq) {
  if (seq.steps.empty()) throw UsageError("sequence has no steps");
  for (std::size_t k = 0; k < seq.steps.size(); ++k) {
    const double x = seq.steps[k].interval;
    if (!std::isfinite(x) || x < 0.0) {
      throw UsageError("step " + std::to_string(k) + " has an invalid interval");
    }
  }
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

std::string to_text(const Sequence& seq) {
  std::string out;
  for (std::size_t k = 0; k < seq.steps.size(); ++k) {
    if (k) out += ' ';
    out += format_double(seq.steps[k].interval);
    out += ':';
    out += to_string(seq.steps[k].pulse);
  }
  return out;
}

Sequence parse_sequence_text(std::string_view text, std::string name) {
  Sequence seq;
  seq.name = std::move(name);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char c = text[pos];
    if (c == '#') {
      while (pos < text.size() && text[pos] != '\n') ++pos;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
      continue;
    }
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end])) &&
           text[end] != '#') {
      ++end;
    }
    const std::string_view token = text.substr(pos, end - pos);
    pos = end;

    const auto colon = token.find(':');
    if (colon == std::string_view::npos) {
      throw UsageError("sequence token '" + std::string(token) + "' is not of the form interval:LABEL");
    }
    Step step;
    const std::string_view num = token.substr(0, colon);
    const auto res = std::from_chars(num.data(), num.data() + num.size(), step.interval);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size() || !std::isfinite(step.interval) ||
        step.interval < 0.0) {
      throw UsageError("sequence token '" + std::string(token) + "' has an invalid interval");
    }
    try {
      step.pulse = parse_label(token.substr(colon + 1));
    } catch (const UsageError&) {
      throw UsageError("sequence token '" + std::string(token) + "' has an unknown pulse label");
    }
    seq.steps.push_back(step);
  }
  if (seq.steps.empty()) throw UsageError("sequence text contains no steps");
  const double m = seq.min_interval();
  seq.tau_d = m > 0.0 ? m : 1.0;
  return seq;
}

// ---------------------------------------------------------------------------
// Ideal-pulse algebra
// ---------------------------------------------------------------------------

PauliOp ideal_product(const Sequence& seq) {
  PauliOp total;
  for (const Step& s : seq.steps) total = ideal_pulse(s.pulse) * total;
  return total;
}

bool cyclic_ok(const Sequence& seq) { return ideal_product(seq).proportional_to_identity(); }

PulseLabel pauli_merge(PulseLabel p, PulseLabel q) {
  return label_for((ideal_pulse(p) * ideal_pulse(q)).axis, false);
}

// ---------------------------------------------------------------------------
// Structural operations
// ---------------------------------------------------------------------------

namespace {

// Appends `pulse` directly after the last step of `steps` (no free time).
void attach_pulse(std::vector<Step>& steps, PulseLabel pulse, MergeMode mode) {
  if (pulse == PulseLabel::I) return;
  Step& last = steps.back();
  if (last.pulse == PulseLabel::I) {
    last.pulse = pulse;
  } else if (mode == MergeMode::Pauli) {
    // Time order: `last` first, then `pulse`.
    last.pulse = pauli_merge(pulse, last.pulse);
  } else {
    steps.push_back({0.0, pulse});
  }
}

}  // namespace

Sequence concatenate(const Sequence& outer, const Sequence& inner, MergeMode mode) {
  validate(outer);
  validate(inner);
  if (!cyclic_ok(outer)) throw UsageError("concatenate: outer sequence is not cyclic");
  if (!cyclic_ok(inner)) throw UsageError("concatenate: inner sequence is not cyclic");
  if (!(outer.tau_d > 0.0)) throw UsageError("concatenate: outer tau_d must be positive");

  Sequence out;
  out.tau_d = inner.tau_d;
  out.name = outer.name + "[" + inner.name + "]";
  for (const Step& s : outer.steps) {
    if (s.interval > 0.0) {
      const double scale = s.interval / outer.tau_d;
      for (const Step& t : inner.steps) out.steps.push_back({t.interval * scale, t.pulse});
      attach_pulse(out.steps, s.pulse, mode);
    } else if (out.steps.empty()) {
      out.steps.push_back(s);
    } else {
      attach_pulse(out.steps, s.pulse, mode);
    }
  }
  return out;
}

Sequence repeat(const Sequence& seq, int n) {
  if (n < 1) throw UsageError("repeat: count must be >= 1");
  Sequence out;
  out.tau_d = seq.tau_d;
  out.name = n == 1 ? seq.name : std::to_string(n) + "x" + seq.name;
  for (int k = 0; k < n; ++k) out.steps.insert(out.steps.end(), seq.steps.begin(), seq.steps.end());
  return out;
}

Sequence with_tau_d(const Sequence& seq, double tau_d) {
  if (!(tau_d > 0.0) || !std::isfinite(tau_d)) throw UsageError("tau_d must be positive");
  Sequence out = seq;
  const double scale = tau_d / seq.tau_d;
  for (Step& s : out.steps) s.interval *= scale;
  out.tau_d = tau_d;
  return out;
}

Sequence with_free_time(const Sequence& seq, double total) {
  const double current = seq.free_time();
  if (!(current > 0.0)) throw UsageError("with_free_time: sequence has no free evolution");
  if (!(total > 0.0) || !std::isfinite(total)) throw UsageError("with_free_time: total must be positive");
  Sequence out = seq;
  const double scale = total / current;
  for (Step& s : out.steps) s.interval *= scale;
  out.tau_d = seq.tau_d * scale;
  return out;
}

// ---------------------------------------------------------------------------
// Named families
// ---------------------------------------------------------------------------

namespace families {

namespace {

PulseLabel bar(L p) { return label_for(axis_of(p), !is_barred(p)); }

Sequence fixed(std::initializer_list<L> pulses, std::string name) {
  Sequence seq;
  seq.name = std::move(name);
  for (L p : pulses) seq.steps.push_back({1.0, p});
  return seq;
}

Sequence named(Sequence seq, std::string name) {
  seq.name = std::move(name);
  return seq;
}

// Appends `b` after `a`, with `pulse` applied between them.
Sequence joined(const Sequence& a, PulseLabel pulse, const Sequence& b, PulseLabel tail,
                std::string name) {
  Sequence out;
  out.name = std::move(name);
  out.steps = a.steps;
  attach_pulse(out.steps, pulse, MergeMode::Pauli);
  out.steps.insert(out.steps.end(), b.steps.begin(), b.steps.end());
  attach_pulse(out.steps, tail, MergeMode::Pauli);
  return out;
}

}  // namespace

Sequence free_evolution() { return fixed({L::I}, "free"); }

Sequence cpmg(L p) { return fixed({p, p}, "cpmg"); }
Sequence ga4(L p1, L p2) { return fixed({p1, p2, p1, p2}, "ga4"); }
Sequence xy4() { return named(ga4(L::X, L::Y), "xy4"); }
Sequence ga8a(L p1, L p2) { return fixed({p1, p2, p1, L::I, p1, p2, p1, L::I}, "ga8a"); }

Sequence ga8b(L p1, L p2, L p3) {
  const Sequence half = fixed({p1, p2, p1, p2}, "ga4");
  return joined(half, p3, half, p3, "ga8b");
}

Sequence ga16a(L p1, L p2, L p3) {
  const Sequence a = ga8a(p1, p2);
  return joined(a, p3, a, p3, "ga16a");
}

Sequence ga16b(L p1, L p2) { return named(concatenate(ga4(p1, p2), ga4(p1, p2)), "ga16b"); }
Sequence ga32a(L p1, L p2) { return named(concatenate(ga4(p1, p2), ga8a(p1, p2)), "ga32a"); }
Sequence ga32b(L p1, L p2) { return named(concatenate(ga8a(p1, p2), ga4(p1, p2)), "ga32b"); }
Sequence ga64a(L p1, L p2) { return named(concatenate(ga8a(p1, p2), ga8a(p1, p2)), "ga64a"); }
Sequence ga64b(L p1, L p2, L p3) {
  return named(concatenate(ga8b(p1, p2, p3), ga8b(p1, p2, p3)), "ga64b");
}
Sequence ga64c(L p1, L p2) { return named(concatenate(ga4(p1, p2), ga16b(p1, p2)), "ga64c"); }
Sequence ga256a(L p1, L p2) { return named(concatenate(ga4(p1, p2), ga64a(p1, p2)), "ga256a"); }
Sequence ga256b(L p1, L p2, L p3) {
  return named(concatenate(ga8b(p1, p2, p3), ga32a(p1, p2)), "ga256b");
}
Sequence ga256c(L p1, L p2) { return named(concatenate(ga4(p1, p2), ga64c(p1, p2)), "ga256c"); }

Sequence ga8a_power(int q, L p1, L p2) {
  if (q < 0) throw UsageError("concatenation level must be >= 0");
  Sequence seq = free_evolution();
  for (int k = 0; k < q; ++k) seq = concatenate(ga8a(p1, p2), seq);
  return named(std::move(seq), "ga8a_q" + std::to_string(q));
}

Sequence rga2(L p) { return fixed({p, bar(p)}, "rga2"); }
Sequence rga4(L p1, L p2) { return fixed({p1, bar(p2), p1, bar(p2)}, "rga4"); }
Sequence rga4p(L p1, L p2) { return fixed({p1, bar(p2), bar(p1), bar(p2)}, "rga4p"); }
Sequence rga8a(L p1, L p2) {
  return fixed({p1, bar(p2), p1, L::I, bar(p1), p2, bar(p1), L::I}, "rga8a");
}
Sequence rga8ap(L p1, L p2) {
  return fixed({p1, bar(p2), p1, L::I, p1, bar(p2), p1, L::I}, "rga8ap");
}
Sequence rga8b(L p1, L p2) { return named(concatenate(rga2(p1), rga4(p1, p2)), "rga8b"); }
Sequence rga8c(L p1, L p2) { return fixed({p1, p2, p1, p2, p2, p1, p2, p1}, "rga8c"); }

Sequence rga16a(L p1, L p2, L p3) {
  const Sequence a = rga8a(p1, p2);
  return joined(a, p3, a, bar(p3), "rga16a");
}
Sequence rga16ap(L p1, L p2, L p3) {
  const Sequence a = rga8ap(p1, p2);
  return joined(a, p3, a, p3, "rga16ap");
}
Sequence rga16bp(L p1, L p2) { return named(concatenate(rga4(p1, p2), rga4p(p1, p2)), "rga16bp"); }
Sequence rga16bpp(L p1, L p2) {
  return named(concatenate(rga4p(p1, p2), rga4p(p1, p2)), "rga16bpp");
}
Sequence rga32a(L p1, L p2) { return named(concatenate(rga4(p1, p2), rga8a(p1, p2)), "rga32a"); }
Sequence rga32c(L p1, L p2) { return named(concatenate(rga8c(p1, p2), rga4(p1, p2)), "rga32c"); }
Sequence rga64a(L p1, L p2) { return named(concatenate(rga8a(p1, p2), rga8a(p1, p2)), "rga64a"); }
Sequence rga64c(L p1, L p2) { return named(concatenate(rga8c(p1, p2), rga8c(p1, p2)), "rga64c"); }
Sequence rga256a(L p1, L p2) {
  return named(concatenate(rga4(p1, p2), rga64a(p1, p2)), "rga256a");
}
Sequence rga256c(L p1, L p2) {
  return named(concatenate(rga4(p1, p2), rga64c(p1, p2)), "rga256c");
}

Sequence rga8a_power(int q, L p1, L p2) {
  if (q < 0) throw UsageError("concatenation level must be >= 0");
  Sequence seq = free_evolution();
  for (int k = 0; k < q; ++k) seq = concatenate(rga8a(p1, p2), seq);
  return named(std::move(seq), "rga8a_q" + std::to_string(q));
}

Sequence cdd(int r, L p1, L p2) {
  if (r < 0) throw UsageError("CDD level must be >= 0");
  Sequence seq = free_evolution();
  for (int k = 0; k < r; ++k) seq = concatenate(rga4p(p1, p2), seq);
  return named(std::move(seq), "cdd" + std::to_string(r));
}

std::vector<double> udd_lambdas(int m) {
  if (m < 1) throw UsageError("UDD order must be >= 1");
  auto t = [m](int k) {
    const double s = std::sin(k * std::numbers::pi / (2.0 * m + 2.0));
    return s * s;
  };
  const double t1 = t(1);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m) + 1);
  for (int k = 1; k <= m + 1; ++k) {
    // The sequence is symmetric; mirroring keeps the two end intervals
    // exactly equal to 1.
    const int j = std::min(k, m + 2 - k);
    out.push_back((t(j) - t(j - 1)) / t1);
  }
  return out;
}

Sequence udd(int m, L g) {
  if (g == L::I) throw UsageError("UDD generator must be a pulse");
  const std::vector<double> lambda = udd_lambdas(m);
  Sequence seq;
  seq.name = "udd" + std::to_string(m);
  for (int k = 0; k < m; ++k) seq.steps.push_back({lambda[static_cast<std::size_t>(k)], g});
  seq.steps.push_back({lambda.back(), m % 2 == 1 ? g : L::I});
  return seq;
}

Sequence qdd(int m1, int m2, L g1, L g2) {
  if (axis_of(g1) == axis_of(g2)) throw UsageError("QDD generators must be different axes");
  return named(concatenate(udd(m2, g2), udd(m1, g1)),
               "qdd" + std::to_string(m1) + "_" + std::to_string(m2));
}

}  // namespace families

// ---------------------------------------------------------------------------
// make_named
// ---------------------------------------------------------------------------

namespace {

using families::L;

struct FamilyEntry {
  int arity;           // number of pulse parameters accepted
  bool distinct;       // P1 != P2 required
  std::function<Sequence(const std::vector<L>&)> build;
};

const std::map<std::string, FamilyEntry, std::less<>>& family_table() {
  namespace f = families;
  static const std::map<std::string, FamilyEntry, std::less<>> table = {
      {"free", {0, false, [](const auto&) { return f::free_evolution(); }}},
      {"cpmg", {1, false, [](const auto& p) { return f::cpmg(p[0]); }}},
      {"xy4", {0, false, [](const auto&) { return f::xy4(); }}},
      {"ga4", {2, true, [](const auto& p) { return f::ga4(p[0], p[1]); }}},
      {"ga8a", {2, true, [](const auto& p) { return f::ga8a(p[0], p[1]); }}},
      {"ga8b", {3, true, [](const auto& p) { return f::ga8b(p[0], p[1], p[2]); }}},
      {"ga16a", {3, true, [](const auto& p) { return f::ga16a(p[0], p[1], p[2]); }}},
      {"ga16b", {2, true, [](const auto& p) { return f::ga16b(p[0], p[1]); }}},
      {"ga32a", {2, true, [](const auto& p) { return f::ga32a(p[0], p[1]); }}},
      {"ga32b", {2, true, [](const auto& p) { return f::ga32b(p[0], p[1]); }}},
      {"ga64a", {2, true, [](const auto& p) { return f::ga64a(p[0], p[1]); }}},
      {"ga64b", {3, true, [](const auto& p) { return f::ga64b(p[0], p[1], p[2]); }}},
      {"ga64c", {2, true, [](const auto& p) { return f::ga64c(p[0], p[1]); }}},
      {"ga256a", {2, true, [](const auto& p) { return f::ga256a(p[0], p[1]); }}},
      {"ga256b", {3, true, [](const auto& p) { return f::ga256b(p[0], p[1], p[2]); }}},
      {"ga256c", {2, true, [](const auto& p) { return f::ga256c(p[0], p[1]); }}},
      {"rga2", {1, false, [](const auto& p) { return f::rga2(p[0]); }}},
      {"rga4", {2, true, [](const auto& p) { return f::rga4(p[0], p[1]); }}},
      {"rga4p", {2, true, [](const auto& p) { return f::rga4p(p[0], p[1]); }}},
      {"rga8a", {2, true, [](const auto& p) { return f::rga8a(p[0], p[1]); }}},
      {"rga8ap", {2, true, [](const auto& p) { return f::rga8ap(p[0], p[1]); }}},
      {"rga8b", {2, true, [](const auto& p) { return f::rga8b(p[0], p[1]); }}},
      {"rga8c", {2, true, [](const auto& p) { return f::rga8c(p[0], p[1]); }}},
      {"rga16a", {3, true, [](const auto& p) { return f::rga16a(p[0], p[1], p[2]); }}},
      {"rga16ap", {3, true, [](const auto& p) { return f::rga16ap(p[0], p[1], p[2]); }}},
      {"rga16bp", {2, true, [](const auto& p) { return f::rga16bp(p[0], p[1]); }}},
      {"rga16bpp", {2, true, [](const auto& p) { return f::rga16bpp(p[0], p[1]); }}},
      {"rga32a", {2, true, [](const auto& p) { return f::rga32a(p[0], p[1]); }}},
      {"rga32c", {2, true, [](const auto& p) { return f::rga32c(p[0], p[1]); }}},
      {"rga64a", {2, true, [](const auto& p) { return f::rga64a(p[0], p[1]); }}},
      {"rga64c", {2, true, [](const auto& p) { return f::rga64c(p[0], p[1]); }}},
      {"rga256a", {2, true, [](const auto& p) { return f::rga256a(p[0], p[1]); }}},
      {"rga256c", {2, true, [](const auto& p) { return f::rga256c(p[0], p[1]); }}},
  };
  return table;
}

std::optional<int> parse_uint(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 0) return std::nullopt;
  return v;
}

std::vector<L> parse_params(std::string_view text, std::string_view spec) {
  std::vector<L> out;
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    const std::string_view tok = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
    L label;
    try {
      label = parse_label(tok);
    } catch (const UsageError&) {
      throw UsageError("sequence '" + std::string(spec) + "': unknown pulse '" + std::string(tok) + "'");
    }
    out.push_back(label);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

void require_unbarred_pulses(const std::vector<L>& params, std::string_view spec) {
  for (L p : params) {
    if (p == L::I || is_barred(p)) {
      throw UsageError("sequence '" + std::string(spec) + "': family pulses must be X, Y or Z");
    }
  }
}

Sequence build_named(std::string_view name, std::vector<L> params, std::string_view spec) {
  auto fill = [&](std::size_t arity, std::initializer_list<L> defaults) {
    if (params.size() > arity) {
      throw UsageError("sequence '" + std::string(spec) + "': too many pulse parameters");
    }
    std::vector<L> d(defaults);
    for (std::size_t k = params.size(); k < arity; ++k) params.push_back(d[k]);
  };

  if (const auto& table = family_table(); table.contains(name)) {
    const FamilyEntry& entry = table.find(name)->second;
    require_unbarred_pulses(params, spec);
    const bool third_defaults_to_first = name != "ga16a";
    if (params.size() > static_cast<std::size_t>(entry.arity)) {
      throw UsageError("sequence '" + std::string(spec) + "': too many pulse parameters");
    }
    if (params.size() < 1 && entry.arity >= 1) params.push_back(L::X);
    if (params.size() < 2 && entry.arity >= 2) {
      params.push_back(params[0] == L::Y ? L::X : L::Y);
    }
    if (params.size() < 3 && entry.arity >= 3) {
      params.push_back(third_defaults_to_first ? params[0]
                                               : label_for(6 - axis_of(params[0]) - axis_of(params[1])));
    }
    if (entry.distinct && params[0] == params[1]) {
      throw UsageError("sequence '" + std::string(spec) + "': requires P1 != P2");
    }
    return entry.build(params);
  }

  auto numeric_suffix = [&](std::string_view prefix) -> std::optional<std::string_view> {
    if (name.size() > prefix.size() && name.substr(0, prefix.size()) == prefix) {
      return name.substr(prefix.size());
    }
    return std::nullopt;
  };

  if (auto rest = numeric_suffix("ga8a_q")) {
    const auto q = parse_uint(*rest);
    if (!q) throw UsageError("sequence '" + std::string(spec) + "': bad concatenation level");
    require_unbarred_pulses(params, spec);
    fill(2, {L::X, L::Y});
    if (params[0] == params[1]) throw UsageError("sequence '" + std::string(spec) + "': requires P1 != P2");
    return families::ga8a_power(*q, params[0], params[1]);
  }
  if (auto rest = numeric_suffix("rga8a_q")) {
    const auto q = parse_uint(*rest);
    if (!q) throw UsageError("sequence '" + std::string(spec) + "': bad concatenation level");
    require_unbarred_pulses(params, spec);
    fill(2, {L::X, L::Y});
    if (params[0] == params[1]) throw UsageError("sequence '" + std::string(spec) + "': requires P1 != P2");
    return families::rga8a_power(*q, params[0], params[1]);
  }
  if (auto rest = numeric_suffix("cdd")) {
    const auto r = parse_uint(*rest);
    if (!r) throw UsageError("sequence '" + std::string(spec) + "': bad CDD level");
    require_unbarred_pulses(params, spec);
    fill(2, {L::X, L::Y});
    if (params[0] == params[1]) throw UsageError("sequence '" + std::string(spec) + "': requires P1 != P2");
    return families::cdd(*r, params[0], params[1]);
  }
  if (auto rest = numeric_suffix("udd")) {
    const auto m = parse_uint(*rest);
    if (!m || *m < 1) throw UsageError("sequence '" + std::string(spec) + "': bad UDD order");
    fill(1, {L::X});
    if (params[0] == L::I) throw UsageError("sequence '" + std::string(spec) + "': generator must be a pulse");
    return families::udd(*m, params[0]);
  }
  if (auto rest = numeric_suffix("qdd")) {
    const auto underscore = rest->find('_');
    std::optional<int> m1, m2;
    if (underscore == std::string_view::npos) {
      m1 = m2 = parse_uint(*rest);
    } else {
      m1 = parse_uint(rest->substr(0, underscore));
      m2 = parse_uint(rest->substr(underscore + 1));
    }
    if (!m1 || !m2 || *m1 < 1 || *m2 < 1) {
      throw UsageError("sequence '" + std::string(spec) + "': bad QDD orders");
    }
    fill(2, {L::Z, L::X});
    return families::qdd(*m1, *m2, params[0], params[1]);
  }
  throw UsageError("unknown sequence family '" + std::string(name) + "'");
}

}  // namespace

std::vector<std::string> named_families() {
  std::vector<std::string> out;
  for (const auto& [name, entry] : family_table()) out.push_back(name);
  for (const char* extra : {"cdd<r>", "udd<M>", "qdd<M>", "qdd<M1>_<M2>", "ga8a_q<q>", "rga8a_q<q>"}) {
    out.emplace_back(extra);
  }
  return out;
}

Sequence make_named(std::string_view spec, double tau_d) {
  std::string_view body = spec;
  int copies = 1;
  // Optional "<n>x" repeat prefix.
  std::size_t digits = 0;
  while (digits < body.size() && std::isdigit(static_cast<unsigned char>(body[digits]))) ++digits;
  if (digits > 0 && digits + 1 < body.size() && body[digits] == 'x') {
    const auto n = parse_uint(body.substr(0, digits));
    if (!n || *n < 1) throw UsageError("sequence '" + std::string(spec) + "': bad repeat count");
    copies = *n;
    body = body.substr(digits + 1);
  }

  const auto colon = body.find(':');
  const std::string_view name = body.substr(0, colon);
  const std::vector<L> params =
      colon == std::string_view::npos ? std::vector<L>{} : parse_params(body.substr(colon + 1), spec);
  Sequence seq = build_named(name, params, spec);
  if (copies > 1) seq = repeat(seq, copies);
  seq = with_tau_d(seq, tau_d);
  seq.name = std::string(spec);
  return seq;
}

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

CMatrix Propagator::unitary() const {
  CMatrix near = deviation;
  near.diagonal().array() += Complex{1.0, 0.0};
  return pauli_left(frame, near, d_b);
}

Propagator propagate(const Sequence& seq, const SystemModel& sys, const PulseModel& model) {
  validate(seq);
  model.validate();
  for (const Step& s : seq.steps) {
    if (!executable(s.pulse, model)) {
      throw UsageError("pulse '" + std::string(to_string(s.pulse)) + "' is not available in the " +
                       model.name() + " model");
    }
  }

  const Eigen::Index dim = sys.dim();
  std::array<std::optional<PulseFactor>, kAllLabels.size()> pulses;
  std::map<double, CMatrix> free_cache;

  Propagator out;
  out.d_b = sys.d_b;
  out.deviation = CMatrix::Zero(dim, dim);

  // U_k = T_k (I + A_k) with T_k the running ideal frame. A step adds the
  // factor I + E in the lab frame, i.e. I + T^dagger E T in the toggling frame.
  for (const Step& s : seq.steps) {
    auto& slot = pulses[static_cast<std::size_t>(s.pulse)];
    if (!slot) slot = pulse_factor(s.pulse, model, sys);
    const PulseFactor& pf = *slot;

    const CMatrix* free_dev = nullptr;
    if (s.interval > 0.0) {
      auto it = free_cache.find(s.interval);
      if (it == free_cache.end()) {
        it = free_cache.emplace(s.interval, linalg::herm_expm_minus_identity(*sys.h0_eigen, s.interval))
                 .first;
      }
      free_dev = &it->second;
    }

    std::optional<CMatrix> step_dev;
    if (free_dev && pf.deviation) {
      step_dev = *pf.deviation + *free_dev + (*pf.deviation) * (*free_dev);
    } else if (free_dev) {
      step_dev = *free_dev;
    } else if (pf.deviation) {
      step_dev = *pf.deviation;
    }

    if (step_dev) {
      const CMatrix g = pauli_conjugate(out.frame, *step_dev, sys.d_b);
      out.deviation = g + out.deviation + g * out.deviation;
    }
    out.frame = pf.frame * out.frame;
    out.tau_c += s.interval + pf.elapsed;
  }
  return out;
}

PulseUnitary propagate_unitary(const Sequence& seq, const SystemModel& sys, const PulseModel& model) {
  const Propagator p = propagate(seq, sys, model);
  return {p.unitary(), p.tau_c};
}

}  // namespace ddopt
