#ifndef QUDIT_FTQEC_DEPHASING_HPP
#define QUDIT_FTQEC_DEPHASING_HPP

#include "linalg.hpp"

#include <algorithm>
#include <numeric>

namespace qftqec {

struct DephasingSpec {
  MatR C;                // C_kk'^zz over sites, 1/s
  double t2_ref = 1e-6;  // s
};

using RateMatrix = MatR;  // gamma_ij in 1/s, zero diagonal

// gamma_ij = sum_kk' C_kk' (Z_ik Z_ik' + Z_jk Z_jk' - 2 Z_ik Z_jk')
inline RateMatrix compute_rates(const MatR& Z, const MatR& C) {
  if (C.rows() != Z.cols() || C.cols() != Z.cols()) throw Error("C dimensions do not match site count");
  MatR a = Z * C * Z.transpose();
  const auto d = Z.rows();
  RateMatrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = a(i, i) + a(j, j) - 2.0 * a(i, j);
  g = 0.5 * (g + g.transpose()).eval();
  for (Eigen::Index i = 0; i < d; ++i) {
    g(i, i) = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (g(i, j) < -1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()))
        throw Error("negative dephasing rate: C is unphysical");
      g(i, j) = std::max(0.0, g(i, j));
    }
  }
  return g;
}

inline RateMatrix compute_rates(const MatR& Z, const DephasingSpec& spec) { return compute_rates(Z, spec.C); }

// reference spin-1/2 with Z = -+1/2 on every site of the contracted C: gamma_ref = sum C
inline double reference_rate(const MatR& C) { return C.sum(); }

inline DephasingSpec calibrate_to_t2(const DephasingSpec& spec) {
  if (!(spec.t2_ref > 0)) throw Error("t2_ref must be positive");
  double ref = reference_rate(spec.C);
  if (!(ref > 0)) throw Error("C produces no dephasing on the reference spin");
  DephasingSpec out = spec;
  out.C *= (1.0 / spec.t2_ref) / ref;
  return out;
}

inline MatC apply_dephasing(const MatC& rho, const RateMatrix& gamma, double t) {
  if (t < 0) throw Error("negative dephasing time");
  if (rho.rows() != gamma.rows() || rho.cols() != gamma.cols()) throw Error("rho/gamma size mismatch");
  MatC out = rho.cwiseProduct((-gamma * t).array().exp().matrix().cast<cplx>());
  return out;
}

struct KrausSet {
  std::vector<VecC> ops;  // diagonals of E_k
  double t_snapshot = 0.0;

  int size() const { return static_cast<int>(ops.size()); }
  int dim() const { return ops.empty() ? 0 : static_cast<int>(ops.front().size()); }
  double norm(int k) const { return ops[k].cwiseAbs().maxCoeff(); }
  MatC matrix(int k) const { return ops[k].asDiagonal(); }
};

inline MatC apply_kraus(const KrausSet& ks, const MatC& rho) {
  MatC out = MatC::Zero(rho.rows(), rho.cols());
  for (const auto& e : ks.ops) out += e.asDiagonal() * rho * e.conjugate().asDiagonal();
  return out;
}

struct KrausOptions {
  double cutoff = 1e-14;
  double psd_tol = 1e-10;
  double check_tol = 1e-10;
};

inline KrausSet kraus_decompose(const RateMatrix& gamma, double t, KrausOptions opt = {}) {
  if (!(t > 0)) throw Error("Kraus snapshot time must be positive");
  MatR lam = (-gamma * t).array().exp().matrix();
  Eigen::SelfAdjointEigenSolver<MatR> es(lam);
  if (es.info() != Eigen::Success) throw Error("Lambda eigensolver failed");
  if (es.eigenvalues().minCoeff() < -opt.psd_tol) throw Error("decoherence matrix is not PSD");

  const auto d = gamma.rows();
  KrausSet ks;
  ks.t_snapshot = t;
  std::vector<std::pair<double, VecC>> items;
  for (Eigen::Index m = d - 1; m >= 0; --m) {
    double w = es.eigenvalues()(m);
    if (w < opt.cutoff) continue;
    VecC v = es.eigenvectors().col(m).cast<cplx>();
    fix_phase(v);
    VecC e = std::sqrt(w) * v;
    items.emplace_back(e.cwiseAbs().maxCoeff(), e);
  }
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (auto& it : items) ks.ops.push_back(std::move(it.second));

  VecR comp = VecR::Zero(d);
  MatC recon = MatC::Zero(d, d);
  for (const auto& e : ks.ops) {
    comp += e.cwiseAbs2();
    recon += e * e.adjoint();
  }
  if ((comp.array() - 1.0).abs().maxCoeff() > opt.check_tol) throw Error("Kraus completeness check failed");
  if (max_abs(recon - lam.cast<cplx>()) > opt.check_tol) throw Error("Kraus channel reproduction failed");
  return ks;
}

}  // namespace qftqec

#endif
