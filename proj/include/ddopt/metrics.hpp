#pragma once

#include <array>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "ddopt/linalg.hpp"
#include "ddopt/model.hpp"
#include "ddopt/sequence.hpp"

namespace ddopt {

/// Distances below this are treated as exact when converted to fitness.
inline constexpr double kDistanceFloor = 1e-15;

struct DistanceReport {
  double D = 0.0;
  double q = 0.0;  // -log10(max(D, kDistanceFloor))
  double tau_c = 0.0;
};

double fitness_from_distance(double D);

/// sqrt(1 - ||Tr_S[U (G^dagger (x) I)]||_tr / (d_s d_b)), clamped at 0.
double distance_closed_form(const CMatrix& u, const CMatrix& g, Eigen::Index d_s, Eigen::Index d_b);

/// min over unitary Phi of ||U - G (x) Phi||_F / sqrt(2 d_s d_b), evaluated at
/// the optimal Phi. Equal to distance_closed_form but keeps relative precision
/// when D is tiny.
double distance(const CMatrix& u, const CMatrix& g, Eigen::Index d_s, Eigen::Index d_b);

/// Distance of a cycle propagator from identity on the system, computed from
/// the propagator's deviation so that D well below 1e-8 stays resolved.
double distance(const Propagator& p);

/// Arithmetic used for propagation. Quad carries the propagator deviation in
/// 113-bit floating point so that D down to roughly 1e-34 is resolved; it
/// supports the zero-width (ideal and flip-angle) pulse models.
enum class Precision { Double, Quad };
std::string_view to_string(Precision p);
/// Accepts "double" and "quad".
Precision parse_precision(std::string_view name);

/// Propagates the sequence and measures it against the system identity.
DistanceReport evaluate(const Sequence& seq, const SystemModel& sys, const PulseModel& model,
                        Precision precision = Precision::Double);
DistanceReport evaluate_quad(const Sequence& seq, const SystemModel& sys, const PulseModel& model);

/// N = log10(D) / log10((J + beta) tau_c) - 1.
double decoupling_order(double D, double J, double beta, double tau_c);

struct EffHamReport {
  std::array<double, 3> channel_norms{};  // sup norms of the x, y, z bath operators
  double bath_norm = 0.0;                 // traceless part of the identity channel
  double err_norm = 0.0;                  // sup norm of H - I (x) B_I
  CMatrix h_eff;                          // full effective Hamiltonian, global phase removed
};

/// H = i log(U) / tau_c decomposed into Pauli channels. The global phase of U
/// is removed first, which only shifts the identity component.
EffHamReport effective_error_hamiltonian(const CMatrix& u, double tau_c, Eigen::Index d_s,
                                         Eigen::Index d_b);
/// Same from a propagator; uses the deviation directly when the frame is
/// proportional to the identity.
EffHamReport effective_error_hamiltonian(const Propagator& p);

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
};

/// Least-squares line through (log10 x, log10 D).
ScalingFit fit_scaling(std::span<const std::pair<double, double>> points);

struct Exponents {
  double N = 0.0;
  double n_J = 0.0;
  double n_beta = 0.0;
};

/// N + 1 is the tau_d slope, n_J the J slope in the chosen regime, and
/// n_beta = N + 1 - n_J.
Exponents extract_exponents(const ScalingFit& tau_d_fit, const ScalingFit& J_fit);

}  // namespace ddopt
