#include "ddopt/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "ddopt/error.hpp"

namespace ddopt::linalg {

namespace {

std::array<CMatrix, 4> make_paulis() {
  const Complex i{0.0, 1.0};
  std::array<CMatrix, 4> p;
  for (auto& m : p) m = CMatrix::Zero(2, 2);
  p[0] << 1, 0, 0, 1;
  p[1] << 0, 1, 1, 0;
  p[2] << 0, -i, i, 0;
  p[3] << 1, 0, 0, -1;
  return p;
}

double max_abs(const CMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

void require_square(const CMatrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw UsageError(std::string(what) + ": matrix must be square");
  }
}

}  // namespace

const CMatrix& pauli(int index) {
  static const std::array<CMatrix, 4> paulis = make_paulis();
  return paulis.at(static_cast<std::size_t>(index));
}

CMatrix identity(Eigen::Index dim) { return CMatrix::Identity(dim, dim); }

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
    }
  }
  return out;
}

CMatrix embed(const CMatrix& op, std::span<const int> sites, int n_spins) {
  const int k = static_cast<int>(sites.size());
  if (n_spins < 1 || n_spins > 16) throw UsageError("embed: n_spins out of range");
  if (k == 0 || k > n_spins) throw UsageError("embed: bad number of sites");
  const Eigen::Index sub_dim = Eigen::Index{1} << k;
  if (op.rows() != sub_dim || op.cols() != sub_dim) {
    throw UsageError("embed: operator dimension does not match the number of sites");
  }
  unsigned used = 0;
  for (int s : sites) {
    if (s < 0 || s >= n_spins) throw UsageError("embed: site index out of range");
    if (used & (1u << s)) throw UsageError("embed: repeated site index");
    used |= 1u << s;
  }

  // Bit position of site s inside a basis index (site 0 is most significant).
  auto bit_of = [n_spins](int s) { return n_spins - 1 - s; };

  std::vector<int> rest_bits;
  for (int s = 0; s < n_spins; ++s) {
    if (!(used & (1u << s))) rest_bits.push_back(bit_of(s));
  }
  auto compose = [&](Eigen::Index rest, Eigen::Index sub) {
    Eigen::Index idx = 0;
    for (std::size_t b = 0; b < rest_bits.size(); ++b) {
      if (rest & (Eigen::Index{1} << b)) idx |= Eigen::Index{1} << rest_bits[b];
    }
    for (int q = 0; q < k; ++q) {
      // First listed site is the most significant bit of the sub-index.
      if (sub & (Eigen::Index{1} << (k - 1 - q))) idx |= Eigen::Index{1} << bit_of(sites[q]);
    }
    return idx;
  };

  const Eigen::Index dim = Eigen::Index{1} << n_spins;
  CMatrix out = CMatrix::Zero(dim, dim);
  const Eigen::Index n_rest = Eigen::Index{1} << rest_bits.size();
  for (Eigen::Index rest = 0; rest < n_rest; ++rest) {
    for (Eigen::Index a = 0; a < sub_dim; ++a) {
      const Eigen::Index row = compose(rest, a);
      for (Eigen::Index b = 0; b < sub_dim; ++b) {
        if (op(a, b) != Complex{}) out(row, compose(rest, b)) = op(a, b);
      }
    }
  }
  return out;
}

CMatrix symmetrized(const CMatrix& a) {
  require_square(a, "symmetrized");
  const double scale = max_abs(a);
  const double asym = max_abs(a - a.adjoint());
  if (asym > kHermitianTol * scale) {
    throw UsageError("matrix is not Hermitian (max |A - A^dagger| = " + std::to_string(asym) + ")");
  }
  return (a + a.adjoint()) * 0.5;
}

Eigensystem hermitian_eigensystem(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(symmetrized(h));
  if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

CMatrix herm_expm(const CMatrix& h, double t) {
  const Eigensystem es = hermitian_eigensystem(h);
  Eigen::VectorXcd phases(es.values.size());
  for (Eigen::Index k = 0; k < phases.size(); ++k) {
    phases(k) = std::polar(1.0, -es.values(k) * t);
  }
  return es.vectors * phases.asDiagonal() * es.vectors.adjoint();
}

CMatrix herm_expm_minus_identity(const Eigensystem& es, double t) {
  Eigen::VectorXcd d(es.values.size());
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    const double theta = es.values(k) * t;
    const double s = std::sin(0.5 * theta);
    d(k) = Complex{-2.0 * s * s, -std::sin(theta)};
  }
  return es.vectors * d.asDiagonal() * es.vectors.adjoint();
}

namespace {

CMatrix log_from_schur(const CMatrix& z, const Eigen::VectorXd& phases) {
  for (Eigen::Index k = 0; k < phases.size(); ++k) {
    if (std::abs(phases(k)) > std::numbers::pi - kBranchMargin) {
      throw BranchAmbiguityError(
          "eigenphase within branch margin of +-pi; Magnus expansion may not converge, "
          "reduce the cycle time");
    }
  }
  // U = exp(-i H)  =>  eigenvalues of H are minus the eigenphases.
  const CMatrix h = z * (-phases).cast<Complex>().asDiagonal() * z.adjoint();
  return (h + h.adjoint()) * 0.5;
}

}  // namespace

CMatrix unitary_logm(const CMatrix& u) {
  require_square(u, "unitary_logm");
  const CMatrix gram = u.adjoint() * u - identity(u.rows());
  if (max_abs(gram) > kUnitaryTol) throw UsageError("unitary_logm: input is not unitary");
  Eigen::ComplexSchur<CMatrix> schur(u);
  if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition failed");
  const CMatrix& t = schur.matrixT();
  Eigen::VectorXd phases(t.rows());
  for (Eigen::Index k = 0; k < t.rows(); ++k) phases(k) = std::arg(t(k, k));
  return log_from_schur(schur.matrixU(), phases);
}

CMatrix unitary_logm_near_identity(const CMatrix& a) {
  require_square(a, "unitary_logm_near_identity");
  Eigen::ComplexSchur<CMatrix> schur(a);
  if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition failed");
  const CMatrix& t = schur.matrixT();
  Eigen::VectorXd phases(t.rows());
  for (Eigen::Index k = 0; k < t.rows(); ++k) {
    const Complex ev = t(k, k);
    phases(k) = std::atan2(ev.imag(), 1.0 + ev.real());
  }
  return log_from_schur(schur.matrixU(), phases);
}

RVector singular_values(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a);
  return svd.singularValues();
}

double sup_norm(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a).maxCoeff();
}

double trace_norm(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a).sum();
}

CMatrix partial_trace_system(const CMatrix& m, Eigen::Index d_s, Eigen::Index d_b) {
  if (d_s < 1 || d_b < 1 || m.rows() != d_s * d_b || m.cols() != d_s * d_b) {
    throw UsageError("partial_trace_system: dimension mismatch");
  }
  CMatrix out = CMatrix::Zero(d_b, d_b);
  for (Eigen::Index s = 0; s < d_s; ++s) out += m.block(s * d_b, s * d_b, d_b, d_b);
  return out;
}

CMatrix polar_unitary(const CMatrix& a) {
  require_square(a, "polar_unitary");
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

CMatrix polar_unitary_minus_identity(const CMatrix& x) {
  require_square(x, "polar_unitary_minus_identity");
  // (I+x)^dagger (I+x) = I + s with s Hermitian; the polar factor is
  // (I+x)(I+s)^{-1/2}, and (I+s)^{-1/2} - I is evaluated spectrally.
  const CMatrix s = x + x.adjoint() + x.adjoint() * x;
  Eigen::SelfAdjointEigenSolver<CMatrix> solver((s + s.adjoint()) * 0.5);
  if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver failed");
  Eigen::VectorXd g(solver.eigenvalues().size());
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double ev = solver.eigenvalues()(k);
    if (ev <= -1.0 + 1e-12) throw NumericalError("polar factor undefined for singular matrix");
    const double r = std::sqrt(1.0 + ev);
    g(k) = -ev / (r * (1.0 + r));
  }
  const CMatrix y = solver.eigenvectors() * g.cast<Complex>().asDiagonal() *
                    solver.eigenvectors().adjoint();
  return x + y + x * y;
}

}  // namespace ddopt::linalg
