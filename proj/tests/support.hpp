#ifndef QUDIT_FTQEC_TESTS_SUPPORT_HPP
#define QUDIT_FTQEC_TESTS_SUPPORT_HPP

#include "qudit_ftqec/qudit_ftqec.hpp"

#include <limits>
#include <map>
#include <mutex>
#include <random>

namespace qftqec::testing {

inline const RunConfig& default_run() {
  static const RunConfig rc = load_run_config(default_model_path());
  return rc;
}

inline const Spectrum& default_spectrum() {
  static const Spectrum sp = solve_spectrum(default_run().model.topology);
  return sp;
}

inline double default_rabi() {
  static const double r = calibrate_rabi(default_spectrum(), default_run().model);
  return r;
}

// compiled Ni7 code per d, built once per test binary
inline const CompiledCode& default_code(int d) {
  static std::mutex mu;
  static std::map<int, CompiledCode> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(d);
  if (it == cache.end())
    it = cache.emplace(d, prepare_code(default_spectrum(), default_run().model, d, default_rabi())).first;
  return it->second;
}

inline MatC random_density(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  MatC a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  MatC r = a * a.adjoint();
  return r / r.trace().real();
}

inline MatC random_unitary(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  MatC a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  Eigen::HouseholderQR<MatC> qr(a);
  MatC q = qr.householderQ() * MatC::Identity(n, n);
  MatC r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) q.col(i) *= std::polar(1.0, std::arg(r(i, i)));
  return q;
}

// physical rates: gamma_ij = sum_k c_k (z_ik - z_jk)^2 with random profiles
inline MatR random_rates(int d, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.5, 1.5), c(0.0, 1.0);
  const int sites = 3;
  MatR z(d, sites);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < sites; ++k) z(i, k) = u(rng);
  VecR w(sites);
  for (int k = 0; k < sites; ++k) w(k) = c(rng) * scale;
  MatR g = MatR::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < sites; ++k) g(i, j) += w(k) * (z(i, k) - z(j, k)) * (z(i, k) - z(j, k));
  return g;
}

// dense Liouvillian on column-stacked vec(rho): -i(I x H - H^T x I) - diag(vec gamma)
inline MatC dense_liouvillian(const MatC& h, const MatR& gamma) {
  const auto n = h.rows();
  MatC id = MatC::Identity(n, n);
  MatC l = -I1 * (kron(id, h) - kron(h.transpose(), id));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) l(j * n + i, j * n + i) -= gamma(i, j);
  return l;
}

inline MatC dense_evolve(const MatC& rho, const MatC& h, const MatR& gamma, double t) {
  const auto n = rho.rows();
  MatC l = dense_liouvillian(h, gamma) * t;
  MatC p = l.exp();
  VecC v = Eigen::Map<const VecC>(rho.data(), n * n);
  VecC out = p * v;
  return Eigen::Map<MatC>(out.data(), n, n);
}

// KL mismatch from dense operator products, independent of the solver's row form
inline double dense_residual(const CodeWords& cw, const KrausSet& ks, int K) {
  VecC w0 = cw.word(0), w1 = cw.word(1);
  double r = 0;
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j) {
      MatC m = ks.matrix(k).adjoint() * ks.matrix(j);
      r = std::max({r, std::abs(w0.dot(m * w0) - w1.dot(m * w1)), std::abs(w0.dot(m * w1))});
    }
  return r;
}

// exhaustive d=4 mesh over both simplices and all three partitions
inline double mesh_best(const KrausSet& ks, int K, double step) {
  double best = std::numeric_limits<double>::infinity();
  const std::vector<std::pair<std::vector<int>, std::vector<int>>> parts = {
      {{0, 1}, {2, 3}}, {{0, 2}, {1, 3}}, {{0, 3}, {1, 2}}};
  const int n = static_cast<int>(std::lround(1 / step));
  for (const auto& [s0, s1] : parts)
    for (int a = 0; a <= n; ++a)
      for (int b = 0; b <= n; ++b) {
        CodeWords cw;
        cw.support0 = s0;
        cw.support1 = s1;
        double x = a * step, y = b * step;
        cw.amp0 = (VecR(2) << std::sqrt(x), std::sqrt(1 - x)).finished();
        cw.amp1 = (VecR(2) << std::sqrt(y), std::sqrt(1 - y)).finished();
        best = std::min(best, kl_residual(cw, ks, K));
      }
  return best;
}

}  // namespace qftqec::testing

#endif
