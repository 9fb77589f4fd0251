#include "support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace qftqec;
using namespace qftqec::testing;

namespace {

const ErrorBasis& basis(int d) { return default_code(d).code.basis; }

// V in the error-basis coordinates (l,k)
MatC in_basis(const MatC& v, const ErrorBasis& eb) { return eb.vectors.adjoint() * v * eb.vectors; }

double off_block(const MatC& m, const MatC& target) { return (m - target).norm(); }

bool in_support(int i, const std::vector<int>& s) { return std::find(s.begin(), s.end(), i) != s.end(); }

}  // namespace

TEST(EtCompiler, EmbedLogical) {
  const ErrorBasis& eb = basis(4);
  EXPECT_LT(max_abs(embed_logical(MatC::Identity(2, 2), eb) - MatC::Identity(4, 4)), 1e-14);

  MatC v = embed_logical(pauli_z(), eb);
  const auto& w = default_code(4).code.words;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      cplx want = i != j ? 0.0 : (in_support(i, w.support0) ? 1.0 : -1.0);
      EXPECT_NEAR(std::abs(v(i, j) - want), 0, 1e-12);
    }

  MatC g = planar_rotation(pi / 2, pi);
  EXPECT_LT(max_abs(in_basis(embed_logical(g, eb), eb) - kron(g, MatC::Identity(2, 2))), 1e-12);
  MatC bad = MatC::Identity(2, 2) * 1.1;
  EXPECT_THROW(embed_logical(bad, eb), Error);
}

TEST(EtCompiler, ControlledUnitary) {
  for (int d : {4, 6}) {
    const ErrorBasis& eb = basis(d);
    const int K = eb.K;
    MatC v = cu_unitary(eb, K);
    EXPECT_TRUE(is_unitary(v, 1e-12));
    MatC a0 = MatC::Zero(K, 1);
    a0(0) = 1;
    for (int l = 0; l < 2; ++l) {
      VecC in0 = kron(eb.vectors.col(eb.col(l, 0)), a0);
      EXPECT_LT((v * in0 - in0).norm(), 1e-12);
      for (int k = 1; k < K; ++k) {
        VecC in = kron(eb.vectors.col(eb.col(l, k)), a0);
        MatC ak = MatC::Zero(K, 1);
        ak(k) = 1;
        EXPECT_LT((v * in - kron(eb.vectors.col(eb.col(l, k)), ak)).norm(), 1e-12);
        EXPECT_LT((v * (v * in) + in).norm(), 1e-12);
      }
    }
    EXPECT_LT(max_diag(generator_of(v)), 1e-9);
    EXPECT_THROW(cu_unitary(eb, K + 1), Error);
  }
}

TEST(EtCompiler, Recovery) {
  const ErrorBasis& eb = basis(6);
  EXPECT_LT(max_abs(recovery_unitary(eb, 0) - MatC::Identity(6, 6)), 1e-15);
  const auto& w = default_code(6).code.words;
  for (int k = 1; k < eb.K; ++k) {
    MatC v = recovery_unitary(eb, k);
    for (int l = 0; l < 2; ++l) {
      EXPECT_LT((v * eb.vectors.col(eb.col(l, k)) - eb.vectors.col(eb.col(l, 0))).norm(), 1e-12);
      EXPECT_LT((v * eb.vectors.col(eb.col(l, 0)) + eb.vectors.col(eb.col(l, k))).norm(), 1e-12);
    }
    VecC out = v * eb.vectors.col(eb.col(0, k));
    double p0 = 0;
    for (int i : w.support0) p0 += std::norm(out(i));
    EXPECT_NEAR(p0, 1.0, 1e-12);
    MatC m = in_basis(v, eb);
    EXPECT_EQ(m.block(0, eb.K, eb.K, eb.K).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(m.block(eb.K, 0, eb.K, eb.K).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LT(max_diag(generator_of(v)), 1e-9);
  }
  EXPECT_THROW(recovery_unitary(eb, eb.K), Error);
}

TEST(EtCompiler, RecoveryScheduleForD4) {
  const auto& cc = default_code(4);
  PulseSchedule ps = schedule_pulses(cc.recovery[1].generator, cc.code.energies, cc.rabi_max);
  ASSERT_EQ(ps.pulses.size(), 2u);
  const auto& w = cc.code.words;
  std::set<int> seen;
  for (const auto& p : ps.pulses) {
    bool both0 = in_support(p.m, w.support0) && in_support(p.n, w.support0);
    bool both1 = in_support(p.m, w.support1) && in_support(p.n, w.support1);
    EXPECT_TRUE(both0 || both1);
    seen.insert(both0 ? 0 : 1);
  }
  EXPECT_EQ(seen.size(), 2u);
}

TEST(EtCompiler, GeneratorBranch) {
  EXPECT_LT(max_abs(generator_of(MatC::Identity(3, 3))), 1e-15);
  MatC z = pauli_z();
  MatC h = generator_of(z);
  EXPECT_NEAR(std::abs(h(0, 0)), 0, 1e-14);
  EXPECT_NEAR(std::abs(h(1, 1) - pi), 0, 1e-14);
  EXPECT_NEAR(std::abs(h(0, 1)), 0, 1e-14);

  const ErrorBasis& eb = basis(4);
  MatC v = embed_logical(planar_rotation(2 * pi, 0), eb);
  EXPECT_LT(max_abs(expm_herm(generator_of(v), -I1) - v), 1e-9);

  MatC bad = MatC::Identity(2, 2);
  bad(0, 1) = 0.1;
  EXPECT_THROW(generator_of(bad), Error);
}

TEST(EtCompiler, GeneratorRoundTripRandom) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> dim(2, 16);
  for (int t = 0; t < 200; ++t) {
    MatC v = random_unitary(dim(rng), rng);
    MatC h = generator_of(v);
    EXPECT_LT(max_abs(h - h.adjoint()), 1e-12);
    EXPECT_LT(max_abs(expm_herm(h, -I1) - v), 1e-9);
  }
}

TEST(EtCompiler, SchedulePulses) {
  VecR e = (VecR(3) << 0.0, 1.0, 2.5).finished();
  PulseSchedule empty = schedule_pulses(MatC::Zero(3, 3), e, 1e7);
  EXPECT_TRUE(empty.pulses.empty());
  EXPECT_EQ(empty.tau, 0.0);

  MatC h = MatC::Zero(3, 3);
  h(0, 1) = std::polar(pi / 4, pi / 2);
  h(1, 0) = std::conj(h(0, 1));
  PulseSchedule one = schedule_pulses(h, e, 2e7);
  ASSERT_EQ(one.pulses.size(), 1u);
  EXPECT_NEAR(one.pulses[0].theta, pi / 2, 1e-14);
  EXPECT_NEAR(one.pulses[0].phi, pi / 2, 1e-14);
  EXPECT_NEAR(one.pulses[0].omega, ghz_to_rad, 1e-3);
  EXPECT_NEAR(one.tau, (pi / 2) / 2e7, 1e-20);

  MatC dg = h;
  dg(2, 2) = 0.1;
  EXPECT_THROW(schedule_pulses(dg, e, 1e7), Error);
  EXPECT_THROW(schedule_pulses(h, e, 0.0), Error);
}

TEST(EtCompiler, PlanarPulseConnectivityD4) {
  const auto& cc = default_code(4);
  CompiledOp op = cc.gate(pi / 2, pi);
  PulseSchedule ps = schedule_pulses(op.generator, cc.code.energies, cc.rabi_max);
  ASSERT_EQ(ps.pulses.size(), 4u);
  const auto& w = cc.code.words;
  for (const auto& p : ps.pulses)
    EXPECT_TRUE((in_support(p.m, w.support0) && in_support(p.n, w.support1)) ||
                (in_support(p.m, w.support1) && in_support(p.n, w.support0)));
  // calibration gate takes 90 ns
  EXPECT_NEAR(ps.tau, 90e-9, 1e-15);
  json j = to_json(ps);
  EXPECT_EQ(j.at("pulses").size(), 4u);
  EXPECT_NEAR(j.at("tau_s").get<double>(), ps.tau, 1e-20);
}

TEST(EtCompiler, ErrorTransparentBlocks) {
  for (int d : {4, 6, 8}) {
    const ErrorBasis& eb = basis(d);
    for (auto [th, ph] : paper_gate_set()) {
      CompiledOp op = compile_planar(eb, th, ph, default_code(d).rabi_max);
      MatC u = expm_herm(op.generator, -I1);
      MatC want = kron(planar_rotation(th, ph), MatC::Identity(eb.K, eb.K));
      EXPECT_LT(off_block(in_basis(u, eb), want), 1e-9) << "d=" << d;
      EXPECT_LT(max_diag(op.generator), 1e-9);
    }
  }
}

TEST(EtCompiler, SequentialCompositionMatchesProduct) {
  const ErrorBasis& eb = basis(6);
  MatC u = MatC::Identity(6, 6);
  for (auto [th, ph] : {std::pair{pi / 2, 0.0}, {pi / 2, pi / 2}, {pi / 2, 0.0}})
    u = expm_herm(compile_planar(eb, th, ph, 1.0).generator, -I1) * u;
  MatC g = planar_rotation(pi / 2, 0) * planar_rotation(pi / 2, pi / 2) * planar_rotation(pi / 2, 0);
  MatC want = embed_logical(g, eb);
  cplx ov = (want.adjoint() * u).trace() / 6.0;
  EXPECT_GT(std::norm(ov), 1 - 1e-9);
}
