#include "ddopt/model.hpp"

#include <cmath>
#include <numbers>

#include "ddopt/error.hpp"
#include "ddopt/pauli_frame.hpp"

namespace ddopt {

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

int axis_of(PulseLabel label) {
  switch (label) {
    case PulseLabel::I: return 0;
    case PulseLabel::X:
    case PulseLabel::Xb: return 1;
    case PulseLabel::Y:
    case PulseLabel::Yb: return 2;
    case PulseLabel::Z:
    case PulseLabel::Zb: return 3;
  }
  return 0;
}

bool is_barred(PulseLabel label) {
  return label == PulseLabel::Xb || label == PulseLabel::Yb || label == PulseLabel::Zb;
}

PulseLabel label_for(int axis, bool barred) {
  switch (axis) {
    case 0: return PulseLabel::I;
    case 1: return barred ? PulseLabel::Xb : PulseLabel::X;
    case 2: return barred ? PulseLabel::Yb : PulseLabel::Y;
    case 3: return barred ? PulseLabel::Zb : PulseLabel::Z;
    default: throw UsageError("label_for: axis out of range");
  }
}

PulseLabel unbarred(PulseLabel label) { return label_for(axis_of(label), false); }

std::string_view to_string(PulseLabel label) {
  switch (label) {
    case PulseLabel::I: return "I";
    case PulseLabel::X: return "X";
    case PulseLabel::Y: return "Y";
    case PulseLabel::Z: return "Z";
    case PulseLabel::Xb: return "Xb";
    case PulseLabel::Yb: return "Yb";
    case PulseLabel::Zb: return "Zb";
  }
  return "?";
}

PulseLabel parse_label(std::string_view token) {
  for (PulseLabel l : kAllLabels) {
    if (to_string(l) == token) return l;
  }
  throw UsageError("unknown pulse label '" + std::string(token) + "'");
}

CMatrix PauliOp::matrix() const {
  static const Complex powers[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return powers[phase & 3] * linalg::pauli(axis);
}

PauliOp operator*(PauliOp lhs, PauliOp rhs) {
  PauliOp out;
  out.phase = lhs.phase + rhs.phase;
  if (lhs.axis == 0) {
    out.axis = rhs.axis;
  } else if (rhs.axis == 0) {
    out.axis = lhs.axis;
  } else if (lhs.axis == rhs.axis) {
    out.axis = 0;
  } else {
    out.axis = 6 - lhs.axis - rhs.axis;
    // sigma^x sigma^y = i sigma^z and cyclic; the reverse order gives -i.
    const bool cyclic = (rhs.axis - lhs.axis + 3) % 3 == 1;
    out.phase += cyclic ? 1 : 3;
  }
  out.phase &= 3;
  return out;
}

PauliOp ideal_pulse(PulseLabel label) {
  const int axis = axis_of(label);
  if (axis == 0) return {};
  return {axis, is_barred(label) ? 1 : 3};
}

// ---------------------------------------------------------------------------
// Bath
// ---------------------------------------------------------------------------

void BathSpec::validate() const {
  if (n_spins < 2 || n_spins > 6) throw UsageError("n_spins must be in [2, 6]");
  if (!(J >= 0.0) || !std::isfinite(J)) throw UsageError("J must be finite and >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw UsageError("beta must be finite and >= 0");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double bath_coefficient(std::uint64_t seed, int mu, int i, int j, int alpha, int beta) {
  const std::uint64_t key = (static_cast<std::uint64_t>(mu) << 24) |
                            (static_cast<std::uint64_t>(i) << 16) |
                            (static_cast<std::uint64_t>(j) << 8) |
                            (static_cast<std::uint64_t>(alpha) << 4) |
                            static_cast<std::uint64_t>(beta);
  const std::uint64_t h = splitmix64(splitmix64(seed) ^ splitmix64(key + 0x632be59bd9b4e019ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

BathOperators build_bath_operators(const BathSpec& spec) {
  const std::uint64_t seed = spec.seed;
  return build_bath_operators(spec, [seed](int mu, int i, int j, int a, int b) {
    return bath_coefficient(seed, mu, i, j, a, b);
  });
}

BathOperators build_bath_operators(const BathSpec& spec, const CoefficientFn& coefficient) {
  spec.validate();
  const int n = spec.n_spins;
  const Eigen::Index d_b = Eigen::Index{1} << n;

  // Two-site Pauli products are shared by all four B_mu.
  std::array<std::array<CMatrix, 4>, 4> pair_ops;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) pair_ops[a][b] = linalg::kron(linalg::pauli(a), linalg::pauli(b));
  }

  BathOperators out;
  for (auto& m : out.b) m = CMatrix::Zero(d_b, d_b);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int sites[2] = {i, j};
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          std::array<double, 4> c{};
          bool any = false;
          for (int mu = 0; mu < 4; ++mu) {
            c[mu] = coefficient(mu, i, j, a, b);
            any = any || c[mu] != 0.0;
          }
          if (!any) continue;
          const CMatrix term = linalg::embed(pair_ops[a][b], sites, n);
          for (int mu = 0; mu < 4; ++mu) {
            if (c[mu] != 0.0) out.b[mu] += c[mu] * term;
          }
        }
      }
    }
  }
  return out;
}

namespace {

void finish(SystemModel& sys) {
  sys.h_err = sys.spec.J * sys.err_shape;
  sys.h_b = sys.spec.beta * sys.bath_shape;
  sys.h_b_full = linalg::kron(linalg::identity(sys.d_s), sys.h_b);
  sys.h0 = sys.h_err + sys.h_b_full;
  sys.h0_eigen = std::make_shared<const linalg::Eigensystem>(linalg::hermitian_eigensystem(sys.h0));
}

}  // namespace

SystemModel assemble(const BathSpec& spec, const BathOperators& raw) {
  spec.validate();
  const Eigen::Index d_b = raw.b[0].rows();
  if (d_b != (Eigen::Index{1} << spec.n_spins)) {
    throw UsageError("assemble: bath operator dimension does not match n_spins");
  }

  SystemModel sys;
  sys.spec = spec;
  sys.d_b = d_b;

  CMatrix err_raw = CMatrix::Zero(2 * d_b, 2 * d_b);
  for (int mu = 1; mu < 4; ++mu) err_raw += linalg::kron(linalg::pauli(mu), raw.b[mu]);
  // The all-identity part of B_I is a global phase.
  const Complex mean = raw.b[0].trace() / static_cast<double>(d_b);
  const CMatrix bath_raw = raw.b[0] - mean * linalg::identity(d_b);

  const double err_norm = linalg::sup_norm(err_raw);
  const double bath_norm = linalg::sup_norm(bath_raw);
  if (spec.J > 0.0 && err_norm == 0.0) {
    throw UsageError("assemble: error Hamiltonian vanishes but J > 0 was requested");
  }
  if (spec.beta > 0.0 && bath_norm == 0.0) {
    throw UsageError("assemble: bath Hamiltonian vanishes but beta > 0 was requested");
  }
  sys.err_shape = err_norm > 0.0 ? CMatrix(err_raw / err_norm) : err_raw;
  sys.bath_shape = bath_norm > 0.0 ? CMatrix(bath_raw / bath_norm) : bath_raw;
  sys.err_shape = linalg::symmetrized(sys.err_shape);
  sys.bath_shape = linalg::symmetrized(sys.bath_shape);
  finish(sys);
  return sys;
}

SystemModel make_system(const BathSpec& spec) { return assemble(spec, build_bath_operators(spec)); }

SystemModel rescaled(const SystemModel& sys, double J, double beta) {
  SystemModel out;
  out.spec = sys.spec;
  out.spec.J = J;
  out.spec.beta = beta;
  out.spec.validate();
  if (J > 0.0 && sys.err_shape.isZero(0.0)) throw UsageError("rescaled: error Hamiltonian vanishes");
  if (beta > 0.0 && sys.bath_shape.isZero(0.0)) throw UsageError("rescaled: bath Hamiltonian vanishes");
  out.d_s = sys.d_s;
  out.d_b = sys.d_b;
  out.err_shape = sys.err_shape;
  out.bath_shape = sys.bath_shape;
  finish(out);
  return out;
}

SystemModel from_shapes(const BathSpec& spec, const CMatrix& err_shape, const CMatrix& bath_shape) {
  spec.validate();
  const Eigen::Index d_b = Eigen::Index{1} << spec.n_spins;
  if (err_shape.rows() != 2 * d_b || err_shape.cols() != 2 * d_b || bath_shape.rows() != d_b ||
      bath_shape.cols() != d_b) {
    throw UsageError("from_shapes: matrix dimensions do not match n_spins");
  }
  SystemModel base;
  base.spec = spec;
  base.d_b = d_b;
  base.err_shape = linalg::symmetrized(err_shape);
  base.bath_shape = linalg::symmetrized(bath_shape);
  return rescaled(base, spec.J, spec.beta);
}

// ---------------------------------------------------------------------------
// Pulse models
// ---------------------------------------------------------------------------

void PulseModel::validate() const {
  if (has_width() && !(tau_p > 0.0 && std::isfinite(tau_p))) {
    throw UsageError("pulse model: tau_p must be > 0");
  }
  if (has_flip_error() && !(epsilon > -1.0 && epsilon < 1.0)) {
    throw UsageError("pulse model: epsilon must lie in (-1, 1)");
  }
}

std::string PulseModel::name() const {
  switch (kind) {
    case Kind::Ideal: return "ideal";
    case Kind::FiniteWidth: return "finite-width";
    case Kind::FlipAngle: return "flip-angle";
    case Kind::FiniteWidthFlipAngle: return "fw-flip-angle";
  }
  return "?";
}

PulseModel::Kind PulseModel::parse_kind(std::string_view name) {
  if (name == "ideal") return Kind::Ideal;
  if (name == "finite-width") return Kind::FiniteWidth;
  if (name == "flip-angle") return Kind::FlipAngle;
  if (name == "fw-flip-angle") return Kind::FiniteWidthFlipAngle;
  throw UsageError("unknown pulse model '" + std::string(name) +
                   "' (expected ideal, finite-width, flip-angle, fw-flip-angle)");
}

std::vector<PulseLabel> pulse_set(const PulseModel& model) {
  using L = PulseLabel;
  switch (model.kind) {
    case PulseModel::Kind::Ideal: return {L::I, L::X, L::Y, L::Z};
    case PulseModel::Kind::FlipAngle: return {L::X, L::Y, L::Z, L::Xb, L::Yb, L::Zb};
    case PulseModel::Kind::FiniteWidth:
    case PulseModel::Kind::FiniteWidthFlipAngle:
      return {kAllLabels.begin(), kAllLabels.end()};
  }
  return {};
}

bool executable(PulseLabel, const PulseModel&) {
  // Every model executes the full alphabet (see pulse_set for the search
  // alphabet); kept as a hook for future restricted models.
  return true;
}

PulseFactor pulse_factor(PulseLabel label, const PulseModel& model, const SystemModel& sys) {
  model.validate();
  const int axis = axis_of(label);
  const double sign = is_barred(label) ? -1.0 : 1.0;
  PulseFactor out;
  out.frame = ideal_pulse(label);

  switch (model.kind) {
    case PulseModel::Kind::Ideal:
      return out;

    case PulseModel::Kind::FlipAngle: {
      if (axis == 0 || model.epsilon == 0.0) return out;
      // (ideal)^dagger * exp(-i (pi/2)(1+eps) s sigma) = exp(-i s (pi eps / 2) sigma)
      const double theta = sign * 0.5 * std::numbers::pi * model.epsilon;
      const double half = std::sin(0.5 * theta);
      const CMatrix small = Complex{-2.0 * half * half, 0.0} * linalg::pauli(0) +
                            Complex{0.0, -std::sin(theta)} * linalg::pauli(axis);
      out.deviation = linalg::kron(small, linalg::identity(sys.d_b));
      return out;
    }

    case PulseModel::Kind::FiniteWidth:
    case PulseModel::Kind::FiniteWidthFlipAngle: {
      out.elapsed = model.tau_p;
      if (axis == 0) {
        out.deviation = linalg::herm_expm_minus_identity(*sys.h0_eigen, model.tau_p);
        return out;
      }
      const double flip = model.kind == PulseModel::Kind::FiniteWidthFlipAngle ? model.epsilon : 0.0;
      const double amplitude = 0.5 * std::numbers::pi / model.tau_p * (1.0 + flip);
      const CMatrix drive =
          sign * amplitude * linalg::kron(linalg::pauli(axis), linalg::identity(sys.d_b));
      const CMatrix p = linalg::herm_expm(drive + sys.h0, model.tau_p);
      CMatrix dev = pauli_left(inverse(out.frame), p, sys.d_b);
      dev.diagonal().array() -= Complex{1.0, 0.0};
      out.deviation = std::move(dev);
      return out;
    }
  }
  return out;
}

PulseUnitary pulse_unitary(PulseLabel label, const PulseModel& model, const SystemModel& sys) {
  const PulseFactor f = pulse_factor(label, model, sys);
  CMatrix near = linalg::identity(sys.dim());
  if (f.deviation) near += *f.deviation;
  return {pauli_left(f.frame, near, sys.d_b), f.elapsed};
}

}  // namespace ddopt
