#ifndef QUDIT_FTQEC_LINDBLAD_HPP
#define QUDIT_FTQEC_LINDBLAD_HPP

#include "dephasing.hpp"

#include <map>
#include <optional>
#include <unsupported/Eigen/MatrixFunctions>

namespace qftqec {

enum class Scheme { rk4, taylor };

struct IntegratorConfig {
  Scheme scheme = Scheme::taylor;
  double dt_cap = 0.05;          // max dt * ||L|| for RK4
  long long n_max = 20'000'000;  // RK4 step cap
  double taylor_step = 1.0;      // max h * ||L|| per Taylor step
  double taylor_tol = 1e-18;
  int taylor_max_terms = 80;
  double trace_tol = 1e-9;
  double positivity_tol = 1e-8;  // relative to the trace
  double positivity_abs = 1e-12;  // floor for small branch states carved out of a unit-trace parent
  int positivity_max_dim = 128;  // skip the eigenvalue check above this size
  bool blocked = true;           // exact per-block propagation when the generator factorizes
  int blocked_max_active = 24;
};

// Full Hamiltonian = I_rest (x) h_active + diag(h_diag); h_active acts on the
// fastest-varying tensor factor.  Units rad/s; gamma in 1/s.
struct EvolutionSegment {
  MatC h_active;
  VecR h_diag;
  MatR gamma;
  double duration = 0;
};

namespace detail {

struct Liouvillian {
  const EvolutionSegment& seg;
  Eigen::Index n, a;
  bool has_active, has_diag;

  explicit Liouvillian(const EvolutionSegment& s)
      : seg(s), n(s.gamma.rows()), a(s.h_active.rows()),
        has_active(s.h_active.size() > 0 && max_abs(s.h_active) > 0),
        has_diag(s.h_diag.size() > 0 && s.h_diag.cwiseAbs().maxCoeff() > 0) {
    if (has_active && n % a != 0) throw Error("segment: active block does not divide the dimension");
    if (has_diag && s.h_diag.size() != n) throw Error("segment: diagonal size mismatch");
  }

  // out = -i[H, rho] - gamma o rho, rho Hermitian
  void apply(const MatC& rho, MatC& out) const {
    MatC x = MatC::Zero(n, n);
    if (has_active) {
      Eigen::Map<const MatC> r(rho.data(), a, n * n / a);
      Eigen::Map<MatC> xm(x.data(), a, n * n / a);
      xm.noalias() = seg.h_active * r;
    }
    if (has_diag) x += seg.h_diag.asDiagonal() * rho;
    out = -I1 * (x - x.adjoint());
    out -= seg.gamma.cast<cplx>().cwiseProduct(rho);
  }

  double norm_bound() const {
    double h = 0;
    if (has_active) h += herm_eig(seg.h_active).values.cwiseAbs().maxCoeff();
    if (has_diag) h += seg.h_diag.cwiseAbs().maxCoeff();
    double g = seg.gamma.size() ? seg.gamma.maxCoeff() : 0.0;
    return 2 * h + g;
  }
};

inline void hermitize(MatC& m) { m = 0.5 * (m + m.adjoint()).eval(); }

}  // namespace detail

inline MatC free_decay(const MatC& rho, const RateMatrix& gamma, double t) { return apply_dephasing(rho, gamma, t); }

inline void check_density(const MatC& rho, double trace_ref, const IntegratorConfig& cfg) {
  if (rho.rows() <= cfg.positivity_max_dim && trace_ref > 0) {
    double mn = herm_eig(rho).values.minCoeff();
    if (mn < -std::max(cfg.positivity_tol * trace_ref, cfg.positivity_abs)) throw Error("positivity violation: min eigenvalue " + std::to_string(mn));
  }
}

namespace detail {

// rho blocks (r, r') of size a x a evolve independently when gamma = gamma_rest (+) gamma_a and the
// diagonal part depends on r only through a few classes
struct BlockPlan {
  Eigen::Index a = 0, r = 0;
  MatR gamma_rest;
  std::vector<int> cls;
  std::vector<MatC> P;  // class pair (c, c') at c * nc + c'
  int nc = 0;
};

inline std::optional<BlockPlan> plan_blocks(const EvolutionSegment& seg, const IntegratorConfig& cfg) {
  const Eigen::Index n = seg.gamma.rows(), a = seg.h_active.rows();
  if (!cfg.blocked || a == 0 || a > cfg.blocked_max_active || n == a || n % a != 0) return std::nullopt;
  BlockPlan bp;
  bp.a = a;
  bp.r = n / a;
  const MatR ga = seg.gamma.topLeftCorner(a, a);
  bp.gamma_rest.resize(bp.r, bp.r);
  const double tol = 1e-12 * std::max(seg.gamma.maxCoeff(), 1e-300);
  for (Eigen::Index r1 = 0; r1 < bp.r; ++r1)
    for (Eigen::Index r2 = 0; r2 < bp.r; ++r2) {
      double g = seg.gamma(r1 * a, r2 * a);
      bp.gamma_rest(r1, r2) = g;
      for (Eigen::Index j = 0; j < a; ++j)
        for (Eigen::Index i = 0; i < a; ++i)
          if (std::abs(seg.gamma(r1 * a + i, r2 * a + j) - g - ga(i, j)) > tol) return std::nullopt;
    }
  std::map<std::vector<double>, int> classes;
  std::vector<VecR> diag;
  for (Eigen::Index r = 0; r < bp.r; ++r) {
    std::vector<double> f(a, 0.0);
    if (seg.h_diag.size()) for (Eigen::Index i = 0; i < a; ++i) f[i] = seg.h_diag(r * a + i);
    auto [it, fresh] = classes.emplace(f, static_cast<int>(diag.size()));
    if (fresh) diag.push_back(Eigen::Map<const VecR>(f.data(), a));
    bp.cls.push_back(it->second);
  }
  bp.nc = static_cast<int>(diag.size());
  if (bp.nc > 8) return std::nullopt;
  const MatC id = MatC::Identity(a, a);
  VecC gvec = Eigen::Map<const VecR>(ga.data(), a * a).cast<cplx>();
  for (int c1 = 0; c1 < bp.nc; ++c1)
    for (int c2 = 0; c2 < bp.nc; ++c2) {
      MatC h1 = seg.h_active + MatC(diag[c1].cast<cplx>().asDiagonal());
      MatC h2 = seg.h_active + MatC(diag[c2].cast<cplx>().asDiagonal());
      MatC l = -I1 * (kron(id, h1) - kron(h2.transpose(), id));
      l.diagonal() -= gvec;
      bp.P.push_back((l * seg.duration).exp());
    }
  return bp;
}

}  // namespace detail

// Reusable propagator for one segment.
class SegmentPropagator {
 public:
  SegmentPropagator(EvolutionSegment seg, IntegratorConfig cfg = {}) : seg_(std::move(seg)), cfg_(cfg) {
    const auto n = seg_.gamma.rows();
    if (seg_.gamma.cols() != n) throw Error("evolve_segment: gamma not square");
    if (seg_.duration < 0) throw Error("evolve_segment: negative duration");
    if (seg_.duration > 0 && seg_.h_active.size() && max_abs(seg_.h_active) > 0) plan_ = detail::plan_blocks(seg_, cfg_);
  }

  bool blocked() const { return plan_.has_value(); }

  MatC apply(const MatC& rho0) const {
    const auto n = rho0.rows();
    if (rho0.cols() != n || seg_.gamma.rows() != n) throw Error("evolve_segment: dimension mismatch");
    if (seg_.duration == 0) return rho0;
    if (!plan_) return integrate(rho0);
    const auto& bp = *plan_;
    const Eigen::Index a = bp.a, R = bp.r;
    MatC out(n, n);
    for (int c1 = 0; c1 < bp.nc; ++c1)
      for (int c2 = 0; c2 < bp.nc; ++c2) {
        std::vector<std::pair<Eigen::Index, Eigen::Index>> idx;
        for (Eigen::Index r1 = 0; r1 < R; ++r1)
          if (bp.cls[r1] == c1)
            for (Eigen::Index r2 = 0; r2 < R; ++r2)
              if (bp.cls[r2] == c2) idx.emplace_back(r1, r2);
        if (idx.empty()) continue;
        MatC m(a * a, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t q = 0; q < idx.size(); ++q)
          Eigen::Map<MatC>(m.col(q).data(), a, a) = rho0.block(idx[q].first * a, idx[q].second * a, a, a);
        MatC y = bp.P[c1 * bp.nc + c2] * m;
        for (std::size_t q = 0; q < idx.size(); ++q) {
          double damp = std::exp(-bp.gamma_rest(idx[q].first, idx[q].second) * seg_.duration);
          out.block(idx[q].first * a, idx[q].second * a, a, a) = damp * Eigen::Map<MatC>(y.col(q).data(), a, a);
        }
      }
    detail::hermitize(out);
    return finish(rho0, std::move(out));
  }

 private:
  EvolutionSegment seg_;
  IntegratorConfig cfg_;
  std::optional<detail::BlockPlan> plan_;

  MatC finish(const MatC& rho0, MatC rho) const {
    const cplx tr0 = rho0.trace();
    const cplx tr = rho.trace();
    if (std::abs(tr - tr0) > cfg_.trace_tol * std::max(1.0, std::abs(tr0)))
      throw Error("evolve_segment: trace drift " + std::to_string(std::abs(tr - tr0)));
    if (std::abs(tr) > 0) rho *= tr0 / tr;
    check_density(rho, std::abs(tr0), cfg_);
    return rho;
  }

  MatC integrate(const MatC& rho0) const;
};

inline MatC SegmentPropagator::integrate(const MatC& rho0) const {
  const EvolutionSegment& seg = seg_;
  const IntegratorConfig& cfg = cfg_;
  const auto n = rho0.rows();
  detail::Liouvillian L(seg);
  MatC rho = rho0;
  detail::hermitize(rho);

  if (!L.has_active) {
    // diagonal generator: exact
    MatC f(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        double dh = L.has_diag ? seg.h_diag(i) - seg.h_diag(j) : 0.0;
        f(i, j) = std::exp(cplx(-seg.gamma(i, j), -dh) * seg.duration);
      }
    return rho.cwiseProduct(f);
  }

  const double lnorm = L.norm_bound();
  MatC k1, k2, k3, k4, tmp;
  if (cfg.scheme == Scheme::rk4) {
    long long steps = std::max<long long>(1, static_cast<long long>(std::ceil(seg.duration * lnorm / cfg.dt_cap)));
    if (steps > cfg.n_max) throw Error("evolve_segment: RK4 step count exceeds n_max");
    const double dt = seg.duration / static_cast<double>(steps);
    for (long long s = 0; s < steps; ++s) {
      L.apply(rho, k1);
      tmp = rho + 0.5 * dt * k1;
      L.apply(tmp, k2);
      tmp = rho + 0.5 * dt * k2;
      L.apply(tmp, k3);
      tmp = rho + dt * k3;
      L.apply(tmp, k4);
      rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      detail::hermitize(rho);
    }
  } else {
    long long steps =
        std::max<long long>(1, static_cast<long long>(std::ceil(seg.duration * lnorm / cfg.taylor_step)));
    const double h = seg.duration / static_cast<double>(steps);
    MatC term, next;
    for (long long s = 0; s < steps; ++s) {
      term = rho;
      MatC acc = rho;
      const double scale = max_abs(rho);
      int m = 1;
      for (; m <= cfg.taylor_max_terms; ++m) {
        L.apply(term, next);
        term = (h / m) * next;
        acc += term;
        if (max_abs(term) <= cfg.taylor_tol * scale) break;
      }
      if (m > cfg.taylor_max_terms) throw Error("evolve_segment: Taylor series did not converge");
      rho = std::move(acc);
      detail::hermitize(rho);
    }
  }

  return finish(rho0, std::move(rho));
}

inline MatC evolve_segment(const MatC& rho0, const EvolutionSegment& seg, const IntegratorConfig& cfg = {}) {
  return SegmentPropagator(seg, cfg).apply(rho0);
}

}  // namespace qftqec

#endif
