#include "support.hpp"

#include <gtest/gtest.h>

using namespace qftqec;
using namespace qftqec::testing;

namespace {

const SwitchArchitecture& arch4() {
  static const SwitchArchitecture a = build_architecture(default_code(4), default_run().sw);
  return a;
}

double wrap(double x) { return std::remainder(x, 2 * pi); }

}  // namespace

TEST(TwoQubit, ConditionalShiftStructure) {
  const auto& a = arch4();
  VecR h = conditional_shift(a);
  auto m1 = membership(a.q1), m2 = membership(a.q2), ms = membership(a.sw);
  const int d = 4;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int s = 0; s < d; ++s) {
        double v = h((i * d + j) * d + s);
        if (m1[i] && m2[j] && ms[s])
          EXPECT_EQ(v, a.lambda);
        else
          EXPECT_EQ(v, 0.0);
      }
  SwitchArchitecture off = a;
  off.lambda = 0;
  EXPECT_EQ(conditional_shift(off).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TwoQubit, ScheduleIsResolvedAndClosed) {
  const auto& a = arch4();
  const auto& s = a.schedule;
  ASSERT_FALSE(s.empty());
  EXPECT_GE(a.lambda * s.tau, default_run().sw.resolve_factor);
  EXPECT_LE(s.omega * a.drive_area, a.rabi_max * (1 + 1e-12));
  const double w = 2 * pi / s.tau;
  EXPECT_NEAR(std::hypot(s.omega, s.delta), w * s.loops_target, 1e-6 * w);
  EXPECT_NEAR(std::hypot(s.omega, s.delta - a.lambda), w * s.loops_other, 1e-6 * w);
}

TEST(TwoQubit, ControlledPhaseAtZeroDephasing) {
  const auto& a = arch4();
  auto amp = conditional_amplitudes(a);
  for (const auto& c : amp) EXPECT_GT(std::abs(c), 1 - 1e-4);
  const double ref = std::arg(amp[0]);
  EXPECT_LT(std::abs(wrap(std::arg(amp[1]) - ref)), 1e-3);
  EXPECT_LT(std::abs(wrap(std::arg(amp[2]) - ref)), 1e-3);
  EXPECT_LT(std::abs(wrap(std::arg(amp[3]) - ref - a.phi)), 1e-2);
}

TEST(TwoQubit, GateOracleAndSwitchReturn) {
  const auto& a = arch4();
  // dense exponential of the joint generator versus the block propagator
  const MatR zero = MatR::Zero(a.dim(), a.dim());
  EvolutionSegment seg = cphase_segment(a, zero);
  MatC full = kron(MatC::Identity(16, 16), seg.h_active) + MatC(seg.h_diag.cast<cplx>().asDiagonal());
  MatC u = expm_herm(full, cplx(0, -seg.duration));
  SegmentPropagator prop(seg);
  MatC g = cphase_target(a.phi);
  double worst = 1, excitation = 0;
  for (const VecC& psi : two_qubit_inputs()) {
    MatC rho = encode_two_qubit(a, psi);
    MatC out = prop.apply(rho);
    EXPECT_LT(max_abs(out - u * rho * u.adjoint()), 1e-9);
    MatC rl = decode_two_qubit(out, a);
    VecC t = g * psi;
    worst = std::min(worst, (t.adjoint() * rl * t)(0, 0).real());
    // switch population left on its l=1 support
    auto ms = membership(a.sw);
    for (int i = 0; i < a.dim(); ++i)
      if (ms[i % a.sw.d]) excitation = std::max(excitation, out(i, i).real());
  }
  EXPECT_GT(worst, 1 - 1e-4);
  EXPECT_LT(excitation, 1e-4);
}

TEST(TwoQubit, ZeroPhaseIsIdentity) {
  SwitchConfig cfg = default_run().sw;
  cfg.phi = 0;
  SwitchArchitecture a = build_architecture(default_code(4), cfg);
  EXPECT_TRUE(a.schedule.empty());
  for (const auto& c : conditional_amplitudes(a)) EXPECT_GT(std::norm(c), 1 - 1e-6);
}

TEST(TwoQubit, UnreachablePhase) {
  SwitchConfig cfg = default_run().sw;
  EXPECT_THROW(semi_resonant_schedule(cfg.lambda_GHz * ghz_to_rad, pi, 1.0, cfg), Error);
  EXPECT_THROW(semi_resonant_schedule(0.0, pi, 1e9, cfg), Error);
}

TEST(TwoQubit, NoiselessCycle) {
  CycleReport r = run_two_qubit_cycle(arch4(), 1e15);
  EXPECT_LT(r.E_e, 1e-4);
  ASSERT_EQ(r.fidelity_per_state.size(), 16u);
  for (double f : r.fidelity_per_state) EXPECT_GT(f, 1 - 1e-4);
}

TEST(TwoQubit, BareBaselineArchitecture) {
  SwitchArchitecture b = build_baseline_architecture(default_rabi(), default_run().sw);
  EXPECT_EQ(b.dim(), 8);
  auto amp = conditional_amplitudes(b);
  const double ref = std::arg(amp[0]);
  EXPECT_LT(std::abs(wrap(std::arg(amp[3]) - ref - pi)), 1e-2);
  CycleReport hi = run_two_qubit_cycle(b, 1e-5), lo = run_two_qubit_cycle(b, 1e-4);
  EXPECT_GT(hi.E_e, lo.E_e);
}

TEST(TwoQubit, PermuteFactorsRoundTrip) {
  std::mt19937_64 rng(12);
  MatC rho = random_density(24, rng);
  std::vector<int> dims{2, 3, 4}, order{2, 0, 1};
  MatC p = permute_factors(rho, dims, order);
  MatC back = permute_factors(p, {4, 2, 3}, inverse_order(order));
  EXPECT_EQ(max_abs(back - rho), 0.0);
  // against kron on a product state
  MatC a = random_density(2, rng), b = random_density(3, rng), c = random_density(4, rng);
  EXPECT_LT(max_abs(permute_factors(kron(kron(a, b), c), dims, order) - kron(kron(c, a), b)), 1e-15);
}
