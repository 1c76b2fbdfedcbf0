#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ddopt/error.hpp"
#include "ddopt/metrics.hpp"
#include "ddopt/sequence.hpp"

namespace {

using namespace ddopt;
namespace fam = ddopt::families;

CMatrix random_hermitian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMatrix a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = Complex(g(rng), g(rng));
  return 0.5 * (a + a.adjoint());
}

CMatrix random_unitary(int n, std::mt19937_64& rng, double scale = 1.0) {
  CMatrix h = random_hermitian(n, rng);
  return linalg::herm_expm(h, scale / linalg::sup_norm(h));
}

SystemModel system_for(std::uint64_t seed, double J, double beta, int n = 4) {
  BathSpec s;
  s.n_spins = n;
  s.seed = seed;
  s.J = J;
  s.beta = beta;
  return make_system(s);
}

TEST(Distance, FactorizedUnitaryIsZero) {
  std::mt19937_64 rng(1);
  const CMatrix g = random_unitary(2, rng), phi = random_unitary(4, rng);
  const CMatrix u = linalg::kron(g, phi);
  EXPECT_LT(distance(u, g, 2, 4), 1e-7);
  EXPECT_LT(distance_closed_form(u, g, 2, 4), 1e-7);
}

TEST(Distance, OrthogonalCaseIsOne) {
  const CMatrix u = linalg::kron(Complex(0, -1) * linalg::pauli(1), linalg::identity(4));
  EXPECT_NEAR(distance(u, linalg::identity(2), 2, 4), 1.0, 1e-14);
  EXPECT_NEAR(distance_closed_form(u, linalg::identity(2), 2, 4), 1.0, 1e-14);
}

TEST(Distance, ClosedFormBoundsSampledObjective) {
  std::mt19937_64 rng(2);
  const CMatrix u = random_unitary(4, rng, 2.0), g = linalg::identity(2);
  const double d = distance_closed_form(u, g, 2, 2);
  for (int k = 0; k < 2000; ++k) {
    const CMatrix phi = random_unitary(2, rng, 3.0);
    const double obj = (u - linalg::kron(g, phi)).norm() / std::sqrt(8.0);
    ASSERT_LE(d, obj + 1e-12);
  }
  // The polar factor of the reduced block attains the bound.
  const CMatrix m = linalg::partial_trace_system(u, 2, 2);
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const CMatrix phi = svd.matrixU() * svd.matrixV().adjoint();
  EXPECT_NEAR((u - linalg::kron(g, phi)).norm() / std::sqrt(8.0), d, 1e-12);
  EXPECT_NEAR(distance(u, g, 2, 2), d, 1e-12);
}

TEST(Distance, InvariantUnderPhaseAndBathRotation) {
  std::mt19937_64 rng(3);
  const CMatrix u = random_unitary(8, rng, 0.3), g = linalg::identity(2);
  const CMatrix v = random_unitary(4, rng);
  const double d = distance(u, g, 2, 4);
  EXPECT_NEAR(distance(std::polar(1.0, 0.7) * u, g, 2, 4), d, 1e-12);
  EXPECT_NEAR(distance(u * linalg::kron(linalg::identity(2), v), g, 2, 4), d, 1e-12);
  EXPECT_GE(d, 0.0);
  EXPECT_LE(d, 1.0);
}

TEST(Distance, RejectsDimensionMismatch) {
  EXPECT_THROW(distance(linalg::identity(8), linalg::identity(2), 2, 2), UsageError);
}

TEST(Distance, PropagatorRouteMatchesDenseRoute) {
  const SystemModel sys = system_for(4, 1e-3, 1e-6);
  for (const char* name : {"xy4", "ga8a", "rga8a", "cpmg", "qdd1"}) {
    const Propagator p = propagate(make_named(name, 1.0), sys, PulseModel::flip_angle(0.05));
    const double dense = distance(p.unitary(), linalg::identity(2), 2, sys.d_b);
    const double fast = distance(p);
    EXPECT_NEAR(fast, dense, 1e-12 + 1e-6 * dense) << name;
  }
}

TEST(Fitness, FloorAndLog) {
  EXPECT_DOUBLE_EQ(fitness_from_distance(1e-3), 3.0);
  EXPECT_DOUBLE_EQ(fitness_from_distance(0.0), 15.0);
  EXPECT_DOUBLE_EQ(fitness_from_distance(1e-20), 15.0);
}

TEST(Evaluate, QuadAgreesWithDoubleWhereBothResolve) {
  const SystemModel sys = system_for(2, 1e-3, 1e-6);
  for (const char* name : {"xy4", "ga8a", "cdd2"}) {
    const Sequence s = make_named(name, 0.1);
    const DistanceReport d = evaluate(s, sys, PulseModel::ideal());
    const DistanceReport q = evaluate(s, sys, PulseModel::ideal(), Precision::Quad);
    EXPECT_NEAR(q.D / d.D, 1.0, 1e-3) << name;
    EXPECT_EQ(q.tau_c, d.tau_c);
  }
  EXPECT_THROW(evaluate(fam::xy4(), sys, PulseModel::finite_width(1e-3), Precision::Quad), UsageError);
  EXPECT_EQ(parse_precision("quad"), Precision::Quad);
  EXPECT_THROW(parse_precision("long"), UsageError);
}

TEST(Evaluate, QuadResolvesDeepSuppression) {
  const SystemModel sys = system_for(0, 1e-3, 1e-6);
  const double d = evaluate(fam::ga64a(), sys, PulseModel::ideal(), Precision::Quad).D;
  EXPECT_GT(d, 0.0);
  EXPECT_LT(d, 1e-18);
}

TEST(DecouplingOrder, InvertsThePowerLaw) {
  const double x = 1e-3 * 0.4;
  EXPECT_NEAR(decoupling_order(x * x, 1e-3, 0.0, 0.4), 1.0, 1e-12);
  EXPECT_NEAR(decoupling_order(std::pow(x, 6), 1e-3, 0.0, 0.4), 5.0, 1e-12);
}

TEST(DecouplingOrder, XY4IsFirstOrderLocally) {
  // The single-point formula carries the log of the O(1e-2) prefactor, so the
  // order is read from the local exponent around J tau_d = 1e-4.
  const SystemModel sys = system_for(0, 1e-3, 1e-6);
  const DistanceReport a = evaluate(with_tau_d(fam::xy4(), 0.1), sys, PulseModel::ideal());
  const DistanceReport b = evaluate(with_tau_d(fam::xy4(), 0.1 / 3), sys, PulseModel::ideal());
  const double local = std::log(a.D / b.D) / std::log(a.tau_c / b.tau_c) - 1.0;
  EXPECT_NEAR(local, 1.0, 0.3);
  const double single = decoupling_order(a.D, 1e-3, 1e-6, a.tau_c);
  EXPECT_GT(single, 1.0);
  EXPECT_LT(single, 2.0);
}

TEST(EffectiveHamiltonian, PureBathEvolution) {
  const SystemModel sys = system_for(1, 1e-3, 1e-2);
  const double tc = 2.0;
  const CMatrix u = linalg::herm_expm(sys.h_b_full, tc);
  const EffHamReport r = effective_error_hamiltonian(u, tc, 2, sys.d_b);
  for (double c : r.channel_norms) EXPECT_LT(c, 1e-13);
  EXPECT_NEAR(r.bath_norm, 1e-2, 1e-12);
}

TEST(EffectiveHamiltonian, SingleChannel) {
  std::mt19937_64 rng(5);
  CMatrix b = random_hermitian(4, rng);
  b -= (b.trace() / 4.0) * linalg::identity(4);
  b *= 0.01 / linalg::sup_norm(b);
  const double tc = 1.5;
  const CMatrix u = linalg::herm_expm(linalg::kron(linalg::pauli(1), b), tc);
  const EffHamReport r = effective_error_hamiltonian(u, tc, 2, 4);
  EXPECT_NEAR(r.channel_norms[0], 0.01, 1e-12);
  EXPECT_LT(r.channel_norms[1], 1e-13);
  EXPECT_LT(r.channel_norms[2], 1e-13);
}

TEST(EffectiveHamiltonian, XY4ErrorIsFirstOrderInTau) {
  const SystemModel sys = system_for(0, 1e-3, 1e-6);
  std::vector<std::pair<double, double>> pts;
  for (double tau : {0.1, 0.2, 0.5, 1.0, 2.0}) {
    const EffHamReport r = effective_error_hamiltonian(propagate(with_tau_d(fam::xy4(), tau), sys, PulseModel::ideal()));
    pts.emplace_back(tau, r.err_norm);
  }
  EXPECT_NEAR(fit_scaling(pts).slope, 1.0, 0.1);
}

TEST(EffectiveHamiltonian, ConsistentWithDistanceBound) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SystemModel sys = system_for(seed, 1e-3, 1e-6);
    for (const char* name : {"xy4", "ga8a", "cdd1", "rga8c"}) {
      const Propagator p = propagate(make_named(name, 0.5), sys, PulseModel::ideal());
      const EffHamReport r = effective_error_hamiltonian(p);
      const double eta = std::max({r.channel_norms[0], r.channel_norms[1], r.channel_norms[2]});
      const double bound = (std::exp(std::sqrt(3.0) * eta * p.tau_c) - 1.0) / std::sqrt(2.0) * (1 + 1e-6);
      EXPECT_LE(distance(p), bound) << name << " seed " << seed;
    }
  }
}

TEST(FitScaling, ExactPowerLawAndConstant) {
  std::vector<std::pair<double, double>> cube, flat;
  for (double x : {0.1, 0.3, 1.0, 3.0, 10.0}) {
    cube.emplace_back(x, 2.5 * x * x * x);
    flat.emplace_back(x, 4e-7);
  }
  const ScalingFit f = fit_scaling(cube);
  EXPECT_NEAR(f.slope, 3.0, 1e-9);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(f.intercept, std::log10(2.5), 1e-9);
  EXPECT_EQ(f.n_points, 5);
  EXPECT_NEAR(fit_scaling(flat).slope, 0.0, 1e-12);
}

TEST(FitScaling, RejectsDegenerateInput) {
  const std::vector<std::pair<double, double>> same{{1, 1}, {1, 2}, {1, 3}, {1, 4}};
  const std::vector<std::pair<double, double>> few{{1, 1}, {2, 2}, {3, 3}};
  const std::vector<std::pair<double, double>> neg{{1, 1}, {2, -2}, {3, 3}, {4, 4}};
  EXPECT_THROW(fit_scaling(same), UsageError);
  EXPECT_THROW(fit_scaling(few), UsageError);
  EXPECT_THROW(fit_scaling(neg), UsageError);
}

TEST(FitScaling, XY4TauSweepIsQuadratic) {
  std::vector<std::pair<double, double>> pts;
  for (int k = 0; k <= 8; ++k) {
    const double tau = 0.1 * std::pow(10.0, k / 4.0);
    double log_sum = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      log_sum += std::log(evaluate(with_tau_d(fam::xy4(), tau), system_for(seed, 1e-3, 1e-6), PulseModel::ideal()).D);
    }
    pts.emplace_back(tau, std::exp(log_sum / 10));
  }
  EXPECT_NEAR(fit_scaling(pts).slope, 2.0, 0.2);
}

TEST(Exponents, SyntheticPowerLaw) {
  std::vector<std::pair<double, double>> tau_pts, j_pts;
  const double J = 1e-3, beta = 1e-5;
  for (double x : {1e-2, 1e-1, 1.0, 10.0}) {
    tau_pts.emplace_back(x, J * J * beta * x * x * x);
    j_pts.emplace_back(x * J, (x * J) * (x * J) * beta);
  }
  const Exponents e = extract_exponents(fit_scaling(tau_pts), fit_scaling(j_pts));
  EXPECT_NEAR(e.N, 2.0, 1e-9);
  EXPECT_NEAR(e.n_J, 2.0, 1e-9);
  EXPECT_NEAR(e.n_beta, 1.0, 1e-9);
}

TEST(Exponents, GA4InStrongCouplingRegime) {
  const double J = 1e-3, beta = 1e-6;
  std::vector<std::pair<double, double>> tau_pts, j_pts;
  for (double tau : {0.1, 0.3, 1.0, 3.0}) tau_pts.emplace_back(tau, evaluate(with_tau_d(fam::ga4(), tau), system_for(0, J, beta), PulseModel::ideal()).D);
  for (double j : {1e-4, 3e-4, 1e-3, 3e-3}) j_pts.emplace_back(j, evaluate(with_tau_d(fam::ga4(), 0.1), system_for(0, j, j * 1e-3), PulseModel::ideal()).D);
  const Exponents e = extract_exponents(fit_scaling(tau_pts), fit_scaling(j_pts));
  EXPECT_NEAR(e.N, 1.0, 0.2);
  EXPECT_NEAR(e.n_J, 2.0, 0.2);
  EXPECT_NEAR(e.n_beta, 0.0, 0.3);
}

}  // namespace
