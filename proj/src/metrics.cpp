#include "ddopt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddopt/error.hpp"
#include "ddopt/pauli_frame.hpp"

namespace ddopt {

double fitness_from_distance(double D) { return -std::log10(std::max(D, kDistanceFloor)); }

namespace {

void check_dims(const CMatrix& u, const CMatrix& g, Eigen::Index d_s, Eigen::Index d_b) {
  if (d_s < 1 || d_b < 1) throw UsageError("distance: dimensions must be positive");
  if (u.rows() != d_s * d_b || u.cols() != d_s * d_b) {
    throw UsageError("distance: U does not have dimension d_s * d_b");
  }
  if (g.rows() != d_s || g.cols() != d_s) throw UsageError("distance: G does not have dimension d_s");
}

// U (G^dagger (x) I_B)
CMatrix relative_to_target(const CMatrix& u, const CMatrix& g, Eigen::Index d_b) {
  return u * linalg::kron(g.adjoint(), linalg::identity(d_b));
}

}  // namespace

double distance_closed_form(const CMatrix& u, const CMatrix& g, Eigen::Index d_s, Eigen::Index d_b) {
  check_dims(u, g, d_s, d_b);
  const CMatrix gamma = linalg::partial_trace_system(relative_to_target(u, g, d_b), d_s, d_b);
  const double ratio = linalg::trace_norm(gamma) / static_cast<double>(d_s * d_b);
  return std::sqrt(std::max(0.0, 1.0 - ratio));
}

double distance(const CMatrix& u, const CMatrix& g, Eigen::Index d_s, Eigen::Index d_b) {
  check_dims(u, g, d_s, d_b);
  const CMatrix m = relative_to_target(u, g, d_b);
  const CMatrix phi = linalg::polar_unitary(linalg::partial_trace_system(m, d_s, d_b));
  const CMatrix residual = m - linalg::kron(linalg::identity(d_s), phi);
  const double d = residual.norm() / std::sqrt(2.0 * static_cast<double>(d_s * d_b));
  return std::min(d, 1.0);
}

double distance(const Propagator& p) {
  const Eigen::Index d_b = p.d_b;
  const Eigen::Index dim = p.deviation.rows();
  const Eigen::Index d_s = dim / d_b;
  if (!p.frame.proportional_to_identity()) {
    return distance(p.unitary(), linalg::identity(d_s), d_s, d_b);
  }
  // The frame is a global phase. With U ~ I + A the optimal bath unitary is
  // polar(I + X), X = Tr_S(A) / d_s, and the residual is A - I (x) (Phi - I).
  const CMatrix x = linalg::partial_trace_system(p.deviation, d_s, d_b) / static_cast<double>(d_s);
  if (linalg::sup_norm(x) > 0.5) {
    return distance(p.unitary(), linalg::identity(d_s), d_s, d_b);
  }
  const CMatrix y = linalg::polar_unitary_minus_identity(x);
  const CMatrix residual = p.deviation - linalg::kron(linalg::identity(d_s), y);
  const double d = residual.norm() / std::sqrt(2.0 * static_cast<double>(dim));
  return std::min(d, 1.0);
}

std::string_view to_string(Precision p) { return p == Precision::Quad ? "quad" : "double"; }

Precision parse_precision(std::string_view name) {
  if (name == "double") return Precision::Double;
  if (name == "quad") return Precision::Quad;
  throw UsageError("unknown precision '" + std::string(name) + "' (expected double or quad)");
}

DistanceReport evaluate(const Sequence& seq, const SystemModel& sys, const PulseModel& model,
                        Precision precision) {
  if (precision == Precision::Quad) return evaluate_quad(seq, sys, model);
  const Propagator p = propagate(seq, sys, model);
  DistanceReport r;
  r.D = distance(p);
  r.q = fitness_from_distance(r.D);
  r.tau_c = p.tau_c;
  return r;
}

double decoupling_order(double D, double J, double beta, double tau_c) {
  const double x = (J + beta) * tau_c;
  if (!(x > 0.0 && x < 1.0)) throw UsageError("decoupling_order: requires 0 < (J + beta) tau_c < 1");
  if (!(D > 0.0 && D < 1.0)) throw UsageError("decoupling_order: requires 0 < D < 1");
  return std::log10(D) / std::log10(x) - 1.0;
}

namespace {

EffHamReport decompose(CMatrix h, Eigen::Index d_s, Eigen::Index d_b) {
  EffHamReport r;
  const double half = 0.5;
  for (int mu = 1; mu <= 3; ++mu) {
    const CMatrix sm = linalg::kron(linalg::pauli(mu).adjoint(), linalg::identity(d_b));
    const CMatrix b = half * linalg::partial_trace_system(sm * h, d_s, d_b);
    r.channel_norms[static_cast<std::size_t>(mu - 1)] = linalg::sup_norm(b);
  }
  const CMatrix b_i = linalg::partial_trace_system(h, d_s, d_b) / static_cast<double>(d_s);
  const Complex mean = b_i.trace() / static_cast<double>(d_b);
  r.bath_norm = linalg::sup_norm(b_i - mean * linalg::identity(d_b));
  r.err_norm = linalg::sup_norm(h - linalg::kron(linalg::identity(d_s), b_i));
  r.h_eff = std::move(h);
  return r;
}

void check_tau(double tau_c) {
  if (!(tau_c > 0.0) || !std::isfinite(tau_c)) {
    throw UsageError("effective_error_hamiltonian: tau_c must be positive");
  }
}

}  // namespace

EffHamReport effective_error_hamiltonian(const CMatrix& u, double tau_c, Eigen::Index d_s,
                                         Eigen::Index d_b) {
  check_tau(tau_c);
  if (u.rows() != d_s * d_b || u.cols() != d_s * d_b) {
    throw UsageError("effective_error_hamiltonian: dimension mismatch");
  }
  const Complex tr = u.trace();
  const Complex phase = std::abs(tr) > 0.0 ? std::conj(tr) / std::abs(tr) : Complex{1.0, 0.0};
  const CMatrix h = linalg::unitary_logm(phase * u) / tau_c;
  return decompose(h, d_s, d_b);
}

EffHamReport effective_error_hamiltonian(const Propagator& p) {
  check_tau(p.tau_c);
  const Eigen::Index d_s = p.deviation.rows() / p.d_b;
  if (!p.frame.proportional_to_identity()) {
    return effective_error_hamiltonian(p.unitary(), p.tau_c, d_s, p.d_b);
  }
  const CMatrix h = linalg::unitary_logm_near_identity(p.deviation) / p.tau_c;
  return decompose(h, d_s, p.d_b);
}

ScalingFit fit_scaling(std::span<const std::pair<double, double>> points) {
  if (points.size() < 4) throw UsageError("fit_scaling: need at least 4 points");
  std::vector<double> lx, ly;
  lx.reserve(points.size());
  ly.reserve(points.size());
  for (const auto& [x, d] : points) {
    if (!(x > 0.0) || !(d > 0.0) || !std::isfinite(x) || !std::isfinite(d)) {
      throw UsageError("fit_scaling: all values must be positive and finite");
    }
    lx.push_back(std::log10(x));
    ly.push_back(std::log10(d));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
    syy += (ly[k] - my) * (ly[k] - my);
  }
  if (sxx < 1e-20) throw UsageError("fit_scaling: x values span no range");

  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.n_points = static_cast<int>(lx.size());
  double ss_res = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    const double r = ly[k] - (fit.intercept + fit.slope * lx[k]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

Exponents extract_exponents(const ScalingFit& tau_d_fit, const ScalingFit& J_fit) {
  Exponents e;
  e.N = tau_d_fit.slope - 1.0;
  e.n_J = J_fit.slope;
  e.n_beta = tau_d_fit.slope - J_fit.slope;
  return e;
}

}  // namespace ddopt
