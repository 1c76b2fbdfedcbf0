#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddopt/linalg.hpp"

namespace ddopt {

// ---------------------------------------------------------------------------
// Pulse labels and ideal Pauli algebra
// ---------------------------------------------------------------------------

/// Pulse alphabet; the `b` variants are the 180-degree phase-reversed pulses.
enum class PulseLabel : std::uint8_t { I, X, Y, Z, Xb, Yb, Zb };

inline constexpr std::array<PulseLabel, 7> kAllLabels = {
    PulseLabel::I,  PulseLabel::X,  PulseLabel::Y, PulseLabel::Z,
    PulseLabel::Xb, PulseLabel::Yb, PulseLabel::Zb};

/// Pauli axis of a label: 0 for I, 1..3 for x, y, z.
int axis_of(PulseLabel label);
bool is_barred(PulseLabel label);
PulseLabel label_for(int axis, bool barred = false);
PulseLabel unbarred(PulseLabel label);
std::string_view to_string(PulseLabel label);
/// Parses I, X, Y, Z, Xb, Yb, Zb. Throws UsageError on anything else.
PulseLabel parse_label(std::string_view token);

/// i^phase * sigma^axis, closed under multiplication without rounding.
struct PauliOp {
  int axis = 0;
  int phase = 0;  // power of i, mod 4

  CMatrix matrix() const;
  bool proportional_to_identity() const { return axis == 0; }
  friend PauliOp operator*(PauliOp lhs, PauliOp rhs);
  friend bool operator==(PauliOp, PauliOp) = default;
};

/// Zero-width pi pulse: X -> -i sigma^x, Xb -> +i sigma^x, I -> identity.
PauliOp ideal_pulse(PulseLabel label);

// ---------------------------------------------------------------------------
// Bath and system Hamiltonian
// ---------------------------------------------------------------------------

struct BathSpec {
  int n_spins = 4;
  std::uint64_t seed = 0;
  double J = 1e-3;     // rad/ns, sup-norm of the error Hamiltonian
  double beta = 1e-6;  // rad/ns, sup-norm of the pure-bath Hamiltonian

  void validate() const;
};

/// B_mu for mu in {I, x, y, z}, each 2^n_spins dimensional.
struct BathOperators {
  std::array<CMatrix, 4> b;
};

/// Coefficient c^mu_{alpha beta, ij} used to build B_mu.
using CoefficientFn = std::function<double(int mu, int i, int j, int alpha, int beta)>;

/// Uniform [0, 1) coefficient from a counter-based stream keyed by
/// (seed, mu, i, j, alpha, beta); independent of evaluation order.
double bath_coefficient(std::uint64_t seed, int mu, int i, int j, int alpha, int beta);

BathOperators build_bath_operators(const BathSpec& spec);
BathOperators build_bath_operators(const BathSpec& spec, const CoefficientFn& coefficient);

/// H0 = H_err + I_S (x) H_B with sup_norm(H_err) = J and sup_norm(H_B) = beta.
/// Immutable once assembled.
struct SystemModel {
  BathSpec spec;
  Eigen::Index d_s = 2;
  Eigen::Index d_b = 0;
  CMatrix h_err;       // d_s*d_b
  CMatrix h_b;         // d_b, bath-only
  CMatrix h_b_full;    // I_S (x) h_b
  CMatrix h0;          // h_err + h_b_full
  // Unit-norm shapes of the error and bath terms; rescaling them by (J, beta)
  // reproduces h_err and h_b.
  CMatrix err_shape;
  CMatrix bath_shape;
  std::shared_ptr<const linalg::Eigensystem> h0_eigen;

  Eigen::Index dim() const { return d_s * d_b; }
};

SystemModel assemble(const BathSpec& spec, const BathOperators& raw);
/// build_bath_operators followed by assemble.
SystemModel make_system(const BathSpec& spec);
/// Same bath realization with new strengths.
SystemModel rescaled(const SystemModel& sys, double J, double beta);
/// System from stored unit-norm shapes (err_shape on d_s*d_b, bath_shape on
/// d_b), scaled to spec.J and spec.beta. Used to replay saved models exactly.
SystemModel from_shapes(const BathSpec& spec, const CMatrix& err_shape, const CMatrix& bath_shape);

// ---------------------------------------------------------------------------
// Pulse models
// ---------------------------------------------------------------------------

struct PulseModel {
  enum class Kind { Ideal, FiniteWidth, FlipAngle, FiniteWidthFlipAngle };

  Kind kind = Kind::Ideal;
  double tau_p = 0.0;    // ns
  double epsilon = 0.0;  // fractional rotation error, sign selects over/under

  static PulseModel ideal() { return {}; }
  static PulseModel finite_width(double tau_p) { return {Kind::FiniteWidth, tau_p, 0.0}; }
  static PulseModel flip_angle(double epsilon) { return {Kind::FlipAngle, 0.0, epsilon}; }
  static PulseModel finite_width_flip_angle(double tau_p, double epsilon) {
    return {Kind::FiniteWidthFlipAngle, tau_p, epsilon};
  }

  bool has_width() const {
    return kind == Kind::FiniteWidth || kind == Kind::FiniteWidthFlipAngle;
  }
  bool has_flip_error() const {
    return kind == Kind::FlipAngle || kind == Kind::FiniteWidthFlipAngle;
  }
  void validate() const;
  std::string name() const;
  /// Accepts ideal, finite-width, flip-angle, fw-flip-angle.
  static Kind parse_kind(std::string_view name);
};

/// Search alphabet of a model.
std::vector<PulseLabel> pulse_set(const PulseModel& model);
/// Labels a model can execute: the search alphabet plus barred labels under
/// Ideal (global phase) and I under FlipAngle (no pulse).
bool executable(PulseLabel label, const PulseModel& model);

/// A pulse split as (ideal Pauli frame) * (I + deviation). The deviation is
/// empty when the pulse is exactly its ideal operator.
struct PulseFactor {
  PauliOp frame;
  std::optional<CMatrix> deviation;
  double elapsed = 0.0;
};
PulseFactor pulse_factor(PulseLabel label, const PulseModel& model, const SystemModel& sys);

struct PulseUnitary {
  CMatrix unitary;
  double elapsed = 0.0;
};
PulseUnitary pulse_unitary(PulseLabel label, const PulseModel& model, const SystemModel& sys);

}  // namespace ddopt
