#include "support.hpp"

#include <gtest/gtest.h>

using namespace qftqec;
using namespace qftqec::testing;

namespace {

MatC random_hermitian(int n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> nd;
  MatC a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  return scale * 0.5 * (a + a.adjoint());
}

EvolutionSegment segment(const MatC& h, const MatR& g, double t) {
  EvolutionSegment s;
  s.h_active = h;
  s.gamma = g;
  s.duration = t;
  return s;
}

IntegratorConfig rk4(double dt_cap) {
  IntegratorConfig c;
  c.scheme = Scheme::rk4;
  c.dt_cap = dt_cap;
  c.blocked = false;
  return c;
}

}  // namespace

TEST(Lindblad, IdleSegments) {
  std::mt19937_64 rng(1);
  MatC rho = random_density(5, rng);
  EvolutionSegment s = segment(MatC(), MatR::Zero(5, 5), 1e-6);
  EXPECT_LT(max_abs(evolve_segment(rho, s) - rho), 1e-15);

  MatR g = random_rates(5, rng, 1e6);
  s.gamma = g;
  EXPECT_LT(max_abs(evolve_segment(rho, s) - apply_dephasing(rho, g, 1e-6)), 1e-8);
  EXPECT_LT(max_abs(free_decay(rho, g, 1e-6) - apply_dephasing(rho, g, 1e-6)), 1e-15);
  EXPECT_THROW(free_decay(rho, g, -1.0), Error);
}

TEST(Lindblad, PiPulseSwap) {
  const double omega = 2 * pi * 10e6, tau = pi / omega;
  MatC h = MatC::Zero(3, 3);
  h(0, 2) = h(2, 0) = omega / 2;
  MatC rho = MatC::Zero(3, 3);
  rho(0, 0) = 1;
  MatR g = MatR::Zero(3, 3);
  MatC exact = dense_evolve(rho, h, g, tau);
  for (auto cfg : {IntegratorConfig{}, rk4(0.01)}) {
    MatC out = evolve_segment(rho, segment(h, g, tau), cfg);
    EXPECT_GT(out(2, 2).real(), 1 - 1e-8);
    EXPECT_LT(max_abs(out - exact), 1e-8);
  }
}

TEST(Lindblad, DrivenDephasingAgainstDenseExponential) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    MatC h = random_hermitian(6, rng, 3e7);
    MatR g = random_rates(6, rng, 2e6);
    MatC rho = random_density(6, rng);
    const double t = 1.3e-7;
    MatC want = dense_evolve(rho, h, g, t);
    for (auto cfg : {IntegratorConfig{}, rk4(0.02)}) {
      MatC out = evolve_segment(rho, segment(h, g, t), cfg);
      EXPECT_LT(max_abs(out - want), 1e-8);
      EXPECT_LT(std::abs(out.trace() - rho.trace()), 1e-9);
      EXPECT_LT(max_abs(out - out.adjoint()), 1e-12);
      EXPECT_GT(herm_eig(out).values.minCoeff(), -1e-8);
    }
  }
}

TEST(Lindblad, BlockedPropagatorMatchesDense) {
  // rest factor (3 levels, two diagonal classes) x active factor (4 levels)
  std::mt19937_64 rng(4);
  MatC ha = random_hermitian(4, rng, 2e7);
  MatR g = product_rates({random_rates(3, rng, 1e6), random_rates(4, rng, 1e6)});
  VecR hd(12);
  for (int r = 0; r < 3; ++r)
    for (int a = 0; a < 4; ++a) hd(r * 4 + a) = (r == 1 ? 1.5e7 : 0.0) * (a % 2);
  EvolutionSegment s = segment(ha, g, 2e-7);
  s.h_diag = hd;
  MatC full = kron(MatC::Identity(3, 3), ha) + MatC(hd.cast<cplx>().asDiagonal());
  MatC rho = random_density(12, rng);
  MatC want = dense_evolve(rho, full, g, 2e-7);

  SegmentPropagator blocked(s);
  EXPECT_TRUE(blocked.blocked());
  EXPECT_LT(max_abs(blocked.apply(rho) - want), 1e-10);
  IntegratorConfig plain;
  plain.blocked = false;
  SegmentPropagator taylor(s, plain);
  EXPECT_FALSE(taylor.blocked());
  EXPECT_LT(max_abs(taylor.apply(rho) - want), 1e-10);
}

TEST(Lindblad, Rk4ConvergenceOrder) {
  std::mt19937_64 rng(8);
  MatC h = random_hermitian(8, rng, 1.0);
  MatR g = random_rates(8, rng, 0.3);
  MatC rho = random_density(8, rng);
  const double t = 2.0;
  MatC want = dense_evolve(rho, h, g, t);
  IntegratorConfig c1 = rk4(0.4), c2 = rk4(0.2);
  c1.positivity_tol = c2.positivity_tol = 1;
  c1.trace_tol = c2.trace_tol = 1e-3;
  double e1 = max_abs(evolve_segment(rho, segment(h, g, t), c1) - want);
  double e2 = max_abs(evolve_segment(rho, segment(h, g, t), c2) - want);
  EXPECT_GT(e1 / e2, 12.0);
  EXPECT_LT(e1 / e2, 20.0);
}

TEST(Lindblad, CommutingDriveHasNoEffect) {
  std::mt19937_64 rng(9);
  MatC h = random_hermitian(4, rng, 5e7);
  MatR g = random_rates(4, rng, 1e6);
  MatC mixed = MatC::Identity(4, 4) / 4.0;
  EXPECT_LT(max_abs(evolve_segment(mixed, segment(h, g, 1e-7)) - free_decay(mixed, g, 1e-7)), 1e-12);

  // diagonal drive on a state diagonal in the same basis
  EvolutionSegment s;
  s.h_diag = (VecR(4) << 1e7, -2e7, 3e7, 0).finished();
  s.gamma = g;
  s.duration = 1e-7;
  MatC diag = MatC::Zero(4, 4);
  diag.diagonal() << 0.1, 0.2, 0.3, 0.4;
  EXPECT_LT(max_abs(evolve_segment(diag, s) - free_decay(diag, g, 1e-7)), 1e-15);
}

TEST(Lindblad, StepCapAndShapeErrors) {
  std::mt19937_64 rng(10);
  MatC h = random_hermitian(3, rng, 1e9);
  MatC rho = random_density(3, rng);
  IntegratorConfig c = rk4(0.05);
  c.n_max = 10;
  EXPECT_THROW(evolve_segment(rho, segment(h, MatR::Zero(3, 3), 1e-6), c), Error);
  EXPECT_THROW(evolve_segment(rho, segment(h, MatR::Zero(4, 4), 1e-6)), Error);
  EXPECT_THROW(evolve_segment(rho, segment(h, MatR::Zero(3, 3), -1.0)), Error);
}
