#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ddopt/linalg.hpp"
#include "ddopt/model.hpp"

namespace ddopt {

/// Free evolution for `interval` ns followed by `pulse`.
struct Step {
  double interval = 0.0;
  PulseLabel pulse = PulseLabel::I;

  friend bool operator==(const Step&, const Step&) = default;
};

/// Steps in time order: steps.front() is applied first.
struct Sequence {
  std::vector<Step> steps;
  double tau_d = 1.0;  // minimum interval, ns
  std::string name;

  std::size_t size() const { return steps.size(); }
  /// Number of steps with a nonzero free interval.
  std::size_t interval_count() const;
  /// Number of steps whose pulse is not I.
  std::size_t pulse_count() const;
  double free_time() const;
  /// Smallest nonzero interval (0 if there is none).
  double min_interval() const;
  std::vector<PulseLabel> labels() const;
};

/// Throws UsageError unless the sequence has steps and finite, nonnegative intervals.
void validate(const Sequence& seq);

// ---------------------------------------------------------------------------
// Text format: whitespace-separated `interval_ns:LABEL` tokens, `#` comments.
// ---------------------------------------------------------------------------

std::string to_text(const Sequence& seq);
Sequence parse_sequence_text(std::string_view text, std::string name = {});
/// Shortest decimal string that parses back to exactly `x`.
std::string format_double(double x);

// ---------------------------------------------------------------------------
// Ideal-pulse algebra
// ---------------------------------------------------------------------------

/// Ordered product of the ideal pulses, last applied leftmost.
PauliOp ideal_product(const Sequence& seq);
/// True when the ideal pulse product is proportional to the identity.
bool cyclic_ok(const Sequence& seq);
/// Unbarred label whose ideal operator equals p*q up to a phase.
PulseLabel pauli_merge(PulseLabel p, PulseLabel q);

// ---------------------------------------------------------------------------
// Structural operations
// ---------------------------------------------------------------------------

/// How two pulses that end up adjacent are handled. Pauli replaces them by
/// their product label; BackToBack keeps both with a zero interval between.
/// Identity pulses are always absorbed.
enum class MergeMode { Pauli, BackToBack };

/// Replaces every nonzero free interval x of `outer` with one full cycle of
/// `inner`, its intervals scaled by x / outer.tau_d. The outer pulse then
/// follows the inner cycle's last pulse with no free time in between.
Sequence concatenate(const Sequence& outer, const Sequence& inner,
                     MergeMode mode = MergeMode::Pauli);
/// n cycles of `seq` back to back.
Sequence repeat(const Sequence& seq, int n);
/// All intervals multiplied by tau_d / seq.tau_d.
Sequence with_tau_d(const Sequence& seq, double tau_d);
/// All intervals multiplied so that they sum to `total` ns.
Sequence with_free_time(const Sequence& seq, double total);

// ---------------------------------------------------------------------------
// Named families. Every constructor returns unit intervals (tau_d = 1);
// make_named rescales.
// ---------------------------------------------------------------------------

namespace families {

using L = PulseLabel;

Sequence free_evolution();
Sequence cpmg(L p = L::X);
Sequence ga4(L p1 = L::X, L p2 = L::Y);
Sequence xy4();
Sequence ga8a(L p1 = L::X, L p2 = L::Y);
Sequence ga8b(L p1 = L::X, L p2 = L::Y, L p3 = L::X);
Sequence ga16a(L p1 = L::X, L p2 = L::Y, L p3 = L::Z);
Sequence ga16b(L p1 = L::X, L p2 = L::Y);
Sequence ga32a(L p1 = L::X, L p2 = L::Y);
Sequence ga32b(L p1 = L::X, L p2 = L::Y);
Sequence ga64a(L p1 = L::X, L p2 = L::Y);
Sequence ga64b(L p1 = L::X, L p2 = L::Y, L p3 = L::X);
Sequence ga64c(L p1 = L::X, L p2 = L::Y);
Sequence ga256a(L p1 = L::X, L p2 = L::Y);
Sequence ga256b(L p1 = L::X, L p2 = L::Y, L p3 = L::X);
Sequence ga256c(L p1 = L::X, L p2 = L::Y);
/// GA8a concatenated into itself q times; q = 0 is free evolution.
Sequence ga8a_power(int q, L p1 = L::X, L p2 = L::Y);

Sequence rga2(L p = L::X);
Sequence rga4(L p1 = L::X, L p2 = L::Y);
Sequence rga4p(L p1 = L::X, L p2 = L::Y);
Sequence rga8a(L p1 = L::X, L p2 = L::Y);
Sequence rga8ap(L p1 = L::X, L p2 = L::Y);
Sequence rga8b(L p1 = L::X, L p2 = L::Y);
Sequence rga8c(L p1 = L::X, L p2 = L::Y);
Sequence rga16a(L p1 = L::X, L p2 = L::Y, L p3 = L::X);
Sequence rga16ap(L p1 = L::X, L p2 = L::Y, L p3 = L::X);
Sequence rga16bp(L p1 = L::X, L p2 = L::Y);
Sequence rga16bpp(L p1 = L::X, L p2 = L::Y);
Sequence rga32a(L p1 = L::X, L p2 = L::Y);
Sequence rga32c(L p1 = L::X, L p2 = L::Y);
Sequence rga64a(L p1 = L::X, L p2 = L::Y);
Sequence rga64c(L p1 = L::X, L p2 = L::Y);
Sequence rga256a(L p1 = L::X, L p2 = L::Y);
Sequence rga256c(L p1 = L::X, L p2 = L::Y);
Sequence rga8a_power(int q, L p1 = L::X, L p2 = L::Y);

/// Concatenated DD of level r; cdd(0) is free evolution and cdd(1) equals rga4p.
Sequence cdd(int r, L p1 = L::X, L p2 = L::Y);

/// Normalized UDD interval lengths (t_k - t_{k-1}) / t_1 for k = 1..M+1.
std::vector<double> udd_lambdas(int m);
/// UDD of order M in generator g; the shortest interval is 1.
Sequence udd(int m, L g = L::X);
/// UDD_{m2}(g2) with each free period filled by UDD_{m1}(g1).
Sequence qdd(int m1, int m2, L g1 = L::Z, L g2 = L::X);

}  // namespace families

/// Builds a sequence from `[Nx]family[:P1,P2,...]`, e.g. "ga8a:X,Y", "cdd3",
/// "udd7:Z", "qdd3", "qdd1_3:Z,X", "rga8a_q2", "4xrga4". Intervals are scaled
/// so the shortest one equals tau_d.
Sequence make_named(std::string_view spec, double tau_d = 1.0);
/// Family names accepted by make_named (without numeric suffixes).
std::vector<std::string> named_families();

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

/// U = frame * (I + deviation), where frame is the exact product of the ideal
/// pulse operators and the deviation holds everything else.
struct Propagator {
  PauliOp frame;
  CMatrix deviation;
  double tau_c = 0.0;
  Eigen::Index d_b = 0;

  CMatrix unitary() const;
};

Propagator propagate(const Sequence& seq, const SystemModel& sys, const PulseModel& model);
/// Dense propagator plus cycle time.
PulseUnitary propagate_unitary(const Sequence& seq, const SystemModel& sys,
                               const PulseModel& model);

}  // namespace ddopt
