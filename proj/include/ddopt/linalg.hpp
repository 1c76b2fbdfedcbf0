#pragma once

#include <complex>
#include <span>

#include <Eigen/Dense>

namespace ddopt {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

namespace linalg {

/// Entrywise tolerance (relative to the largest entry) below which a matrix
/// is accepted as Hermitian and symmetrized.
inline constexpr double kHermitianTol = 1e-12;
/// Unitarity tolerance accepted by the matrix logarithm.
inline constexpr double kUnitaryTol = 1e-10;
/// Minimum distance of any eigenphase from the branch cut at +-pi.
inline constexpr double kBranchMargin = 1e-6;

/// The four Pauli matrices indexed 0=I, 1=x, 2=y, 3=z.
const CMatrix& pauli(int index);

CMatrix identity(Eigen::Index dim);
CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Places `op` (2^k x 2^k for k = sites.size()) on the given sites of an
/// n_spins register; site 0 is the leftmost Kronecker factor and the first
/// listed site maps to the leftmost factor of `op`.
CMatrix embed(const CMatrix& op, std::span<const int> sites, int n_spins);

/// Returns (A + A^dagger)/2, throwing UsageError if A is not Hermitian to
/// kHermitianTol relative to its largest entry.
CMatrix symmetrized(const CMatrix& a);

/// Spectral decomposition of a Hermitian matrix, H = V diag(w) V^dagger.
struct Eigensystem {
  RVector values;
  CMatrix vectors;
};
Eigensystem hermitian_eigensystem(const CMatrix& h);

/// exp(-i H t) through the eigendecomposition of H.
CMatrix herm_expm(const CMatrix& h, double t);
/// exp(-i H t) - I, accurate when H t is small.
CMatrix herm_expm_minus_identity(const Eigensystem& es, double t);

/// Principal Hermitian logarithm: returns H with herm_expm(H, 1) == U.
/// Throws BranchAmbiguityError if an eigenphase is within kBranchMargin of
/// +-pi and UsageError if U is not unitary.
CMatrix unitary_logm(const CMatrix& u);
/// Same as unitary_logm(I + a) but works directly on the deviation `a`, which
/// keeps full relative precision when the eigenphases are tiny.
CMatrix unitary_logm_near_identity(const CMatrix& a);

double sup_norm(const CMatrix& a);
double trace_norm(const CMatrix& a);
RVector singular_values(const CMatrix& a);

/// Tr_S over the first (system) tensor factor of a (d_s*d_b)-dim operator.
CMatrix partial_trace_system(const CMatrix& m, Eigen::Index d_s, Eigen::Index d_b);

/// Polar factor W V^dagger of a square matrix with SVD W S V^dagger.
CMatrix polar_unitary(const CMatrix& a);
/// polar_unitary(I + x) - I computed without cancellation for small x.
CMatrix polar_unitary_minus_identity(const CMatrix& x);

}  // namespace linalg
}  // namespace ddopt
