// Quad-precision propagation for the zero-width pulse models. Distances of
// high-order sequences fall far below what double precision can resolve
// (rounding leaves a floor near 1e-16 times the toggling-frame deviation),
// so the deviation is carried in 113-bit arithmetic instead.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>

#include <boost/multiprecision/complex128.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/float128.hpp>

#include "ddopt/error.hpp"
#include "ddopt/metrics.hpp"
#include "ddopt/pauli_frame.hpp"

namespace ddopt {

namespace {

using Real = boost::multiprecision::float128;
using QComplex = boost::multiprecision::complex128;
using QMatrix = Eigen::Matrix<QComplex, Eigen::Dynamic, Eigen::Dynamic>;

QMatrix to_quad(const CMatrix& m) {
  QMatrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(r, c) = QComplex(m(r, c).real(), m(r, c).imag());
  }
  return out;
}

Real abs2(const QComplex& z) {
  const Real re = z.real();
  const Real im = z.imag();
  return re * re + im * im;
}

Real frobenius(const QMatrix& m) {
  Real s = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) s += abs2(m(r, c));
  }
  return sqrt(s);
}

// Columns of the double-precision eigenvectors, re-orthonormalized in quad
// precision. The propagation then uses H' = V diag(w) V^dagger exactly,
// which differs from H0 only at the 1e-16 relative level.
QMatrix orthonormal_basis(const CMatrix& v) {
  QMatrix q = to_quad(v);
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index k = 0; k < q.cols(); ++k) {
      for (Eigen::Index j = 0; j < k; ++j) {
        QComplex proj(0);
        for (Eigen::Index r = 0; r < q.rows(); ++r) proj += conj(q(r, j)) * q(r, k);
        for (Eigen::Index r = 0; r < q.rows(); ++r) q(r, k) -= proj * q(r, j);
      }
      Real n = 0;
      for (Eigen::Index r = 0; r < q.rows(); ++r) n += abs2(q(r, k));
      const Real inv = 1 / sqrt(n);
      for (Eigen::Index r = 0; r < q.rows(); ++r) q(r, k) *= QComplex(inv);
    }
  }
  return q;
}

// exp(-i theta) - 1 without cancellation.
QComplex expm1_phase(const Real& theta) {
  const Real s = sin(theta / 2);
  return QComplex(-2 * s * s, -sin(theta));
}

QMatrix kron_identity(const QMatrix& small, Eigen::Index d_b) {
  QMatrix out = QMatrix::Zero(small.rows() * d_b, small.cols() * d_b);
  for (Eigen::Index r = 0; r < small.rows(); ++r) {
    for (Eigen::Index c = 0; c < small.cols(); ++c) {
      for (Eigen::Index k = 0; k < d_b; ++k) out(r * d_b + k, c * d_b + k) = small(r, c);
    }
  }
  return out;
}

std::optional<QMatrix> flip_deviation(PulseLabel label, const PulseModel& model, Eigen::Index d_b) {
  const int axis = axis_of(label);
  if (model.kind != PulseModel::Kind::FlipAngle || axis == 0 || model.epsilon == 0.0) {
    return std::nullopt;
  }
  const Real pi = boost::math::constants::pi<Real>();
  const Real theta = (is_barred(label) ? -1 : 1) * pi * Real(model.epsilon) / 2;
  const Real half = sin(theta / 2);
  const CMatrix& sigma = linalg::pauli(axis);
  QMatrix small(2, 2);
  for (Eigen::Index r = 0; r < 2; ++r) {
    for (Eigen::Index c = 0; c < 2; ++c) {
      // -2 sin^2(theta/2) I - i sin(theta) sigma
      const QComplex s(sigma(r, c).real(), sigma(r, c).imag());
      small(r, c) = QComplex(0, -1) * QComplex(sin(theta)) * s;
      if (r == c) small(r, c) += QComplex(-2 * half * half);
    }
  }
  return kron_identity(small, d_b);
}

// polar(I + x) - I through the binomial series of (I + s)^{-1/2}.
std::optional<QMatrix> polar_minus_identity(const QMatrix& x) {
  const QMatrix s = x + x.adjoint() + x.adjoint() * x;
  if (frobenius(s) > Real(0.5)) return std::nullopt;
  QMatrix g = QMatrix::Zero(s.rows(), s.cols());
  QMatrix power = QMatrix::Identity(s.rows(), s.cols());
  Real coeff = 1;
  for (int n = 1; n < 400; ++n) {
    coeff *= -Real(2 * n - 1) / Real(2 * n);
    power = power * s;
    const QMatrix term = QComplex(coeff) * power;
    g += term;
    if (frobenius(term) < Real(1e-40)) break;
  }
  return QMatrix(x + g + x * g);
}

// A run of steps as frame times (I + dev); an absent dev means zero.
struct Block {
  PauliOp frame;
  std::optional<QMatrix> dev;
};

// `first` followed by `second`.
Block compose(const Block& first, const Block& second, Eigen::Index d_b) {
  Block out;
  out.frame = second.frame * first.frame;
  if (!second.dev) {
    out.dev = first.dev;
  } else {
    const QMatrix g = pauli_conjugate(first.frame, *second.dev, d_b);
    out.dev = first.dev ? QMatrix(g + *first.dev + g * *first.dev) : g;
  }
  return out;
}

}  // namespace

DistanceReport evaluate_quad(const Sequence& seq, const SystemModel& sys, const PulseModel& model) {
  validate(seq);
  model.validate();
  if (model.has_width()) {
    throw UsageError("quad precision supports the ideal and flip-angle pulse models only");
  }

  const Eigen::Index d_b = sys.d_b;
  const Eigen::Index dim = sys.dim();
  const QMatrix basis = orthonormal_basis(sys.h0_eigen->vectors);
  const RVector& w = sys.h0_eigen->values;

  std::map<double, QMatrix> free_cache;
  std::map<PulseLabel, std::optional<QMatrix>> pulse_cache;

  auto step_block = [&](const Step& s) {
    auto pit = pulse_cache.find(s.pulse);
    if (pit == pulse_cache.end()) pit = pulse_cache.emplace(s.pulse, flip_deviation(s.pulse, model, d_b)).first;
    const std::optional<QMatrix>& pulse_dev = pit->second;

    const QMatrix* free_dev = nullptr;
    if (s.interval > 0.0) {
      auto it = free_cache.find(s.interval);
      if (it == free_cache.end()) {
        QMatrix scaled = basis;
        for (Eigen::Index k = 0; k < dim; ++k) {
          scaled.col(k) *= expm1_phase(Real(w(k)) * Real(s.interval));
        }
        it = free_cache.emplace(s.interval, QMatrix(scaled * basis.adjoint())).first;
      }
      free_dev = &it->second;
    }

    Block b;
    b.frame = ideal_pulse(s.pulse);
    if (free_dev && pulse_dev) {
      b.dev = *pulse_dev + *free_dev + (*pulse_dev) * (*free_dev);
    } else if (free_dev) {
      b.dev = *free_dev;
    } else if (pulse_dev) {
      b.dev = *pulse_dev;
    }
    return b;
  };

  // Concatenated sequences repeat long runs of identical steps, so aligned
  // halves are memoized by their step content.
  std::unordered_map<std::string, Block> memo;
  auto key_of = [&](std::size_t lo, std::size_t hi) {
    std::string key;
    key.reserve((hi - lo) * (sizeof(double) + 1));
    for (std::size_t i = lo; i < hi; ++i) {
      const Step& s = seq.steps[i];
      key.append(reinterpret_cast<const char*>(&s.interval), sizeof(double));
      key.push_back(static_cast<char>(s.pulse));
    }
    return key;
  };
  auto build = [&](auto&& self, std::size_t lo, std::size_t hi) -> Block {
    if (hi - lo == 1) return step_block(seq.steps[lo]);
    std::string key = key_of(lo, hi);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const std::size_t mid = lo + (hi - lo) / 2;
    Block out = compose(self(self, lo, mid), self(self, mid, hi), d_b);
    memo.emplace(std::move(key), out);
    return out;
  };

  Block total;
  if (!seq.steps.empty()) total = build(build, 0, seq.steps.size());
  const PauliOp frame = total.frame;
  const QMatrix a = total.dev ? *total.dev : QMatrix(QMatrix::Zero(dim, dim));
  double tau_c = 0.0;
  for (const Step& s : seq.steps) tau_c += s.interval;

  DistanceReport report;
  report.tau_c = tau_c;
  std::optional<QMatrix> y;
  if (frame.proportional_to_identity()) {
    const QMatrix x = QComplex(0.5) * (a.topLeftCorner(d_b, d_b) + a.bottomRightCorner(d_b, d_b));
    y = polar_minus_identity(x);
  }
  if (!y) {
    // Far from the identity the double-precision evaluation is accurate.
    Propagator p;
    p.frame = frame;
    p.d_b = d_b;
    p.tau_c = tau_c;
    p.deviation = CMatrix(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        p.deviation(r, c) = Complex(static_cast<double>(a(r, c).real()), static_cast<double>(a(r, c).imag()));
      }
    }
    report.D = distance(p);
  } else {
    QMatrix residual = a;
    residual.topLeftCorner(d_b, d_b) -= *y;
    residual.bottomRightCorner(d_b, d_b) -= *y;
    const Real d = frobenius(residual) / sqrt(Real(2 * dim));
    report.D = std::min(static_cast<double>(d), 1.0);
  }
  report.q = fitness_from_distance(report.D);
  return report;
}

}  // namespace ddopt
