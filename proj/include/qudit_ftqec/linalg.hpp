#ifndef QUDIT_FTQEC_LINALG_HPP
#define QUDIT_FTQEC_LINALG_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace qftqec {

using cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I1{0.0, 1.0};

// GHz (energy/h) -> angular frequency in rad/s
inline constexpr double ghz_to_rad = 2.0 * pi * 1e9;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline MatC kron(const MatC& a, const MatC& b) {
  MatC out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline double max_abs(const MatC& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline bool is_unitary(const MatC& u, double tol) {
  if (u.rows() != u.cols()) return false;
  return max_abs(u.adjoint() * u - MatC::Identity(u.rows(), u.cols())) < tol;
}

// first component above tol made real positive
inline void fix_phase(Eigen::Ref<VecC> v, double tol = 1e-10) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double a = std::abs(v(i));
    if (a > tol) {
      v *= std::conj(v(i)) / a;
      v(i) = a;
      return;
    }
  }
}

struct HermEig {
  VecR values;
  MatC vectors;
};

// ascending eigenvalues, fixed phase per column
inline HermEig herm_eig(const MatC& h) {
  Eigen::SelfAdjointEigenSolver<MatC> es(h);
  if (es.info() != Eigen::Success) throw Error("eigensolver did not converge");
  HermEig out{es.eigenvalues(), es.eigenvectors()};
  for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) fix_phase(out.vectors.col(j));
  return out;
}

inline MatC expm_herm(const MatC& h, cplx factor) {
  // exp(factor * h) for Hermitian h
  auto e = herm_eig(h);
  VecC d = (factor * e.values.cast<cplx>()).array().exp();
  return e.vectors * d.asDiagonal() * e.vectors.adjoint();
}

// Pauli-type 2x2 helpers
inline MatC pauli_x() { MatC m(2, 2); m << 0, 1, 1, 0; return m; }
inline MatC pauli_y() { MatC m(2, 2); m << 0, -I1, I1, 0; return m; }
inline MatC pauli_z() { MatC m(2, 2); m << 1, 0, 0, -1; return m; }

// the six cardinal states |0>,|1>,|+>,|->,|+i>,|-i>
inline std::vector<VecC> cardinal_states() {
  const double s = 1.0 / std::sqrt(2.0);
  std::vector<VecC> out(6, VecC::Zero(2));
  out[0] << 1, 0;
  out[1] << 0, 1;
  out[2] << s, s;
  out[3] << s, -s;
  out[4] << s, s * I1;
  out[5] << s, -s * I1;
  return out;
}

// 1 - <psi|rho|psi>/... computed without cancellation: sum over an orthonormal
// complement of psi.  rho need not be normalized; the caller adds lost trace.
inline double complement_weight(const MatC& rho, const VecC& psi) {
  const Eigen::Index n = psi.size();
  Eigen::HouseholderQR<MatC> qr(psi);
  MatC q = qr.householderQ() * MatC::Identity(n, n);
  MatC c = q.rightCols(n - 1);
  return (c.adjoint() * rho * c).trace().real();
}

}  // namespace qftqec

#endif
