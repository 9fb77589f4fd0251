#ifndef QUDIT_FTQEC_ET_COMPILER_HPP
#define QUDIT_FTQEC_ET_COMPILER_HPP

#include "code_synthesis.hpp"

#include <Eigen/Eigenvalues>

namespace qftqec {

// R(theta, phi) = exp[-i (cos(phi) Y - sin(phi) X) theta / 2]
inline MatC planar_rotation(double theta, double phi) {
  MatC n = std::cos(phi) * pauli_y() - std::sin(phi) * pauli_x();
  return std::cos(theta / 2) * MatC::Identity(2, 2) - I1 * std::sin(theta / 2) * n;
}

// generator of the rotation, continuous in theta (valid beyond the log branch)
inline MatC planar_axis(double phi) { return std::cos(phi) * pauli_y() - std::sin(phi) * pauli_x(); }

// B (G x I_K) B^+ plus identity on the complement of span(B)
inline MatC embed_logical(const MatC& G, const ErrorBasis& eb) {
  if (G.rows() != 2 || !is_unitary(G, 1e-12)) throw Error("embed_logical: G must be a 2x2 unitary");
  const MatC& B = eb.vectors;
  const auto d = B.rows();
  MatC gk = kron(G, MatC::Identity(eb.K, eb.K));
  return B * gk * B.adjoint() + (MatC::Identity(d, d) - B * B.adjoint());
}

// qudit (slow) x ancilla (fast): |l,k>|0> -> |l,k>|k>, |l,k>|k> -> -|l,k>|0>
inline MatC cu_unitary(const ErrorBasis& eb, int K) {
  if (K != eb.K) throw Error("cu_unitary: ancilla dimension must equal K");
  const int n = 2 * K * K;
  MatC w = MatC::Identity(n, n);
  auto ix = [&](int l, int k, int a) { return (l * K + k) * K + a; };
  for (int l = 0; l < 2; ++l)
    for (int k = 1; k < K; ++k) {
      int i0 = ix(l, k, 0), ik = ix(l, k, k);
      w.col(i0).setZero();
      w.col(ik).setZero();
      w(ik, i0) = 1.0;
      w(i0, ik) = -1.0;
    }
  MatC bb = kron(eb.vectors, MatC::Identity(K, K));
  const auto dk = bb.rows();
  return bb * w * bb.adjoint() + (MatC::Identity(dk, dk) - bb * bb.adjoint());
}

// V|l,k> = |l,0>, V|l,0> = -|l,k>; identity otherwise
inline MatC recovery_unitary(const ErrorBasis& eb, int k) {
  const auto d = eb.vectors.rows();
  if (k < 0 || k >= eb.K) throw Error("recovery_unitary: syndrome out of range");
  if (k == 0) return MatC::Identity(d, d);
  const int n = 2 * eb.K;
  MatC w = MatC::Identity(n, n);
  for (int l = 0; l < 2; ++l) {
    int a = eb.col(l, 0), b = eb.col(l, k);
    w.col(a).setZero();
    w.col(b).setZero();
    w(a, b) = 1.0;
    w(b, a) = -1.0;
  }
  const MatC& B = eb.vectors;
  return B * w * B.adjoint() + (MatC::Identity(d, d) - B * B.adjoint());
}

// real plane rotation taking eigenstate `ground` onto |0,0>
inline MatC prep_unitary(const ErrorBasis& eb, int ground = 0) {
  const auto d = eb.vectors.rows();
  VecC g = VecC::Zero(d);
  g(ground) = 1.0;
  VecC t = eb.vectors.col(eb.col(0, 0));
  cplx ov = g.dot(t);
  if (std::abs(ov) < 1e-12) throw Error("prep_unitary: ground state orthogonal to |0,0>");
  t *= std::conj(ov) / std::abs(ov);  // make <g|t> real positive
  double c = std::min(1.0, std::abs(ov));
  VecC v = t - c * g;
  double s = v.norm();
  if (s < 1e-14) return MatC::Identity(d, d);
  v /= s;
  double th = std::atan2(s, c);
  // exp(th (|v><g| - |g><v|)) restricted to span{g, v}
  MatC u = MatC::Identity(d, d) - g * g.adjoint() - v * v.adjoint();
  u += std::cos(th) * (g * g.adjoint() + v * v.adjoint()) + std::sin(th) * (v * g.adjoint() - g * v.adjoint());
  return u;
}

struct GeneratorOptions {
  double unitary_tol = 1e-10;
  double roundtrip_tol = 1e-9;
};

// H = i log V with eigenphases in (-pi, pi], eigenvalue -1 -> pi
inline MatC generator_of(const MatC& V, GeneratorOptions opt = {}) {
  if (!is_unitary(V, opt.unitary_tol)) throw Error("generator_of: input is not unitary");
  Eigen::ComplexSchur<MatC> cs(V);
  if (cs.info() != Eigen::Success) throw Error("generator_of: Schur decomposition failed");
  const MatC& z = cs.matrixU();
  const MatC& t = cs.matrixT();
  const auto n = V.rows();
  VecC ph(n);
  for (Eigen::Index m = 0; m < n; ++m) {
    double a = -std::arg(t(m, m));  // exp(-i a) = eigenvalue
    if (a < -pi + 1e-9) a += 2 * pi;
    ph(m) = a;
  }
  MatC h = z * ph.asDiagonal() * z.adjoint();
  h = 0.5 * (h + h.adjoint()).eval();
  double res = max_abs(expm_herm(h, -I1) - V);
  if (res > opt.roundtrip_tol)
    throw Error("generator_of: reconstruction residual " + std::to_string(res));
  return h;
}

struct Pulse {
  int m = 0, n = 0;
  double theta = 0;  // area, rad
  double phi = 0;    // rad, (-pi, pi]
  double omega = 0;  // transition angular frequency, rad/s
};

struct PulseSchedule {
  std::vector<Pulse> pulses;
  double tau = 0;       // s
  double rabi_max = 0;  // rad/s
  double min_gap_difference = std::numeric_limits<double>::infinity();  // rad/s
  bool distinguishable = true;
};

struct ScheduleOptions {
  double diag_tol = 1e-9;
  double zero_tol = 1e-12;
  double linewidth = 0;  // rad/s; 0 -> 1/tau
};

inline double max_offdiag_area(const MatC& h) {
  double a = 0;
  for (Eigen::Index m = 0; m < h.rows(); ++m)
    for (Eigen::Index n = m + 1; n < h.cols(); ++n) a = std::max(a, 2 * std::abs(h(m, n)));
  return a;
}

inline double max_diag(const MatC& h) { return h.rows() ? h.diagonal().cwiseAbs().maxCoeff() : 0.0; }

inline double schedule_duration(const MatC& h, double rabi_max) {
  if (!(rabi_max > 0)) throw Error("rabi_max must be positive");
  return max_offdiag_area(h) / rabi_max;
}

// energies in GHz, indexed like the rows of h
inline PulseSchedule schedule_pulses(const MatC& h, const VecR& energies, double rabi_max, ScheduleOptions opt = {}) {
  if (!(rabi_max > 0)) throw Error("rabi_max must be positive");
  if (energies.size() != h.rows()) throw Error("schedule_pulses: energy list size mismatch");
  if (max_diag(h) > opt.diag_tol) throw Error("schedule_pulses: generator has a nonzero diagonal");
  PulseSchedule ps;
  ps.rabi_max = rabi_max;
  for (Eigen::Index m = 0; m < h.rows(); ++m)
    for (Eigen::Index n = m + 1; n < h.cols(); ++n) {
      double a = std::abs(h(m, n));
      if (a <= opt.zero_tol) continue;
      Pulse p;
      p.m = static_cast<int>(m);
      p.n = static_cast<int>(n);
      p.theta = 2 * a;
      p.phi = std::arg(h(m, n));
      if (p.phi <= -pi) p.phi += 2 * pi;
      p.omega = (energies(n) - energies(m)) * ghz_to_rad;
      ps.pulses.push_back(p);
    }
  for (const auto& p : ps.pulses) ps.tau = std::max(ps.tau, p.theta / rabi_max);
  for (std::size_t a = 0; a < ps.pulses.size(); ++a)
    for (std::size_t b = a + 1; b < ps.pulses.size(); ++b)
      ps.min_gap_difference =
          std::min(ps.min_gap_difference, std::abs(std::abs(ps.pulses[a].omega) - std::abs(ps.pulses[b].omega)));
  double lw = opt.linewidth > 0 ? opt.linewidth : (ps.tau > 0 ? 1.0 / ps.tau : 0.0);
  ps.distinguishable = ps.pulses.size() < 2 || ps.min_gap_difference > lw;
  return ps;
}

}  // namespace qftqec

#endif
