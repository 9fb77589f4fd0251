#ifndef QUDIT_FTQEC_PROTOCOL_HPP
#define QUDIT_FTQEC_PROTOCOL_HPP

#include "et_compiler.hpp"
#include "lindblad.hpp"
#include "spin_model.hpp"

#include <array>
#include <functional>
#include <optional>

namespace qftqec {

// ---------------------------------------------------------------- model

struct ModelConfig {
  SpinTopology topology;
  MatR C;                 // uncalibrated C_kk'; rescaled to t2_ref
  double t2_ref = 1e-6;   // s, calibration and code-synthesis coherence time
  double tau_ref = 90e-9; // s, d=4 calibration gate duration
  double calib_theta = pi / 2, calib_phi = pi;
  double snapshot = 0;    // s; 0 -> compiled gate duration
  double rabi_max = 0;    // rad/s; 0 -> calibrate on d=4
  BasisOptions basis;
  KrausOptions kraus;
  CodeSynthesisOptions synthesis;
};

struct QuditCode {
  int d = 0, K = 0;
  VecR energies;      // GHz, selected levels
  VecR spin_labels;
  MatR Z;
  RateMatrix g1;      // rates at T2 = 1 s; gamma(T2) = g1 / T2
  KrausSet kraus;
  CodeWords words;
  ErrorBasis basis;

  RateMatrix rates(double t2) const { return g1 / t2; }
};

struct Spectrum {
  SpinTopology topology;
  EigenSystem eig;
};

inline Spectrum solve_spectrum(const SpinTopology& topo) { return {topo, diagonalize(build_hamiltonian(topo))}; }

// hook for cached code-word solves; empty -> solve_codewords
using CodeSolver = std::function<CodeWords(const KrausSet&, int K, int d)>;

inline QuditCode build_code(const Spectrum& sp, const ModelConfig& cfg, int d, double snapshot,
                            const CodeSolver& solver = {}) {
  QuditCode c;
  c.d = d;
  c.K = d / 2;
  QuditBasis qb = select_qudit_basis(sp.eig, sp.topology, d, cfg.basis);
  c.energies.resize(d);
  for (int i = 0; i < d; ++i) c.energies(i) = sp.eig.energies(qb.indices[i]);
  c.spin_labels = qb.spin_labels;
  c.Z = sz_diagonal_elements(sp.eig, sp.topology, qb);
  DephasingSpec cal = calibrate_to_t2({cfg.C, cfg.t2_ref});
  c.g1 = compute_rates(c.Z, cal) * cfg.t2_ref;
  c.kraus = kraus_decompose(c.rates(cfg.t2_ref), snapshot, cfg.kraus);
  c.words = solver ? solver(c.kraus, c.K, d) : solve_codewords(c.kraus, c.K, d, cfg.synthesis);
  c.basis = build_error_basis(c.words, c.kraus, c.K);
  return c;
}

// ---------------------------------------------------------------- compilation

struct CompiledOp {
  MatC generator;  // dimensionless pulse areas
  double tau = 0;  // s

  EvolutionSegment segment(const MatR& gamma) const {
    EvolutionSegment s;
    if (tau > 0) s.h_active = generator / tau;
    s.gamma = gamma;
    s.duration = tau;
    return s;
  }
};

inline CompiledOp compile_unitary(const MatC& V, double rabi_max) {
  MatC h = generator_of(V);
  return {h, schedule_duration(h, rabi_max)};
}

inline CompiledOp compile_planar(const ErrorBasis& eb, double theta, double phi, double rabi_max) {
  return compile_unitary(embed_logical(planar_rotation(theta, phi), eb), rabi_max);
}

struct CompiledCode {
  QuditCode code;
  double rabi_max = 0;
  CompiledOp cu;
  std::vector<CompiledOp> recovery;  // index k; recovery[0] empty
  CompiledOp prep;

  int d() const { return code.d; }
  int K() const { return code.K; }
  CompiledOp gate(double theta, double phi) const { return compile_planar(code.basis, theta, phi, rabi_max); }
};

inline CompiledCode compile_code(QuditCode code, double rabi_max) {
  CompiledCode cc;
  cc.rabi_max = rabi_max;
  cc.cu = compile_unitary(cu_unitary(code.basis, code.K), rabi_max);
  cc.recovery.resize(code.K);
  for (int k = 1; k < code.K; ++k) cc.recovery[k] = compile_unitary(recovery_unitary(code.basis, k), rabi_max);
  cc.prep = compile_unitary(prep_unitary(code.basis, 0), rabi_max);
  cc.code = std::move(code);
  return cc;
}

// Omega_max such that the d=4 calibration gate takes tau_ref
inline double calibrate_rabi(const Spectrum& sp, const ModelConfig& cfg, const CodeSolver& solver = {}) {
  if (cfg.rabi_max > 0) return cfg.rabi_max;
  QuditCode c4 = build_code(sp, cfg, 4, cfg.snapshot > 0 ? cfg.snapshot : cfg.tau_ref, solver);
  MatC h = generator_of(embed_logical(planar_rotation(cfg.calib_theta, cfg.calib_phi), c4.basis));
  return max_offdiag_area(h) / cfg.tau_ref;
}

// code at snapshot t = tau of the compiled calibration gate (one fixed-point pass)
inline CompiledCode prepare_code(const Spectrum& sp, const ModelConfig& cfg, int d, double rabi_max,
                                 const CodeSolver& solver = {}) {
  if (cfg.snapshot > 0) return compile_code(build_code(sp, cfg, d, cfg.snapshot, solver), rabi_max);
  QuditCode c = build_code(sp, cfg, d, cfg.tau_ref, solver);
  double tau = compile_planar(c.basis, cfg.calib_theta, cfg.calib_phi, rabi_max).tau;
  if (std::abs(tau - cfg.tau_ref) > 1e-12 * cfg.tau_ref) c = build_code(sp, cfg, d, tau, solver);
  return compile_code(std::move(c), rabi_max);
}

// ---------------------------------------------------------------- rates

inline MatR uniform_rates(int n, double gamma) {
  MatR g = MatR::Constant(n, n, gamma);
  g.diagonal().setZero();
  return g;
}

// kron-sum of per-factor rates, first factor slowest
inline MatR product_rates(const std::vector<MatR>& f) {
  MatR out = MatR::Zero(1, 1);
  for (const auto& g : f) {
    const auto a = out.rows(), b = g.rows();
    MatR next(a * b, a * b);
    for (Eigen::Index i = 0; i < a; ++i)
      for (Eigen::Index j = 0; j < a; ++j) next.block(i * b, j * b, b, b) = g.array() + out(i, j);
    out = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------- measurement

struct MeasurementModel {
  double p_m = 0.0;
  int n_rep = 1;

  void validate() const {
    if (!(p_m >= 0 && p_m < 1)) throw Error("p_m must be in [0, 1)");
    if (n_rep < 1 || n_rep % 2 == 0) throw Error("n_rep must be odd and >= 1");
  }
};

// C[k][m] = P(report m | true k); repeats independent, majority vote, ties -> lowest index
inline MatR confusion_matrix(int K, const MeasurementModel& mm) {
  mm.validate();
  MatR c = MatR::Zero(K, K);
  if (K == 1) {
    c(0, 0) = 1;
    return c;
  }
  const double wrong = mm.p_m / (K - 1);
  std::vector<int> seq(mm.n_rep, 0), cnt(K);
  for (;;) {
    std::fill(cnt.begin(), cnt.end(), 0);
    for (int s : seq) ++cnt[s];
    int vote = static_cast<int>(std::max_element(cnt.begin(), cnt.end()) - cnt.begin());
    for (int k = 0; k < K; ++k) {
      double p = 1;
      for (int s : seq) p *= (s == k) ? 1 - mm.p_m : wrong;
      c(k, vote) += p;
    }
    int pos = 0;
    while (pos < mm.n_rep && ++seq[pos] == K) seq[pos++] = 0;
    if (pos == mm.n_rep) break;
  }
  return c;
}

// ---------------------------------------------------------------- protocol steps

struct ProtocolOptions {
  MeasurementModel measurement;
  double t2_anc = 0;  // s; 0 -> same as the qudit T2
  enum class Readout { summed, block } readout = Readout::summed;
  bool noisy_prep = false;
  double prune = 1e-12;
  double acceptance_floor = 1e-3;
  IntegratorConfig integrator;
};

inline MatC apply_logical_gate(const MatC& rho, const CompiledCode& cc, double theta, double phi, double t2,
                               const IntegratorConfig& ic = {}) {
  CompiledOp op = cc.gate(theta, phi);
  return evolve_segment(rho, op.segment(cc.code.rates(t2)), ic);
}

struct Branch {
  int k = 0;           // reported syndrome
  double probability = 0;
  MatC state;          // normalized, ancilla traced out
};

inline MatR joint_rates(const QuditCode& code, double t2, double t2_anc) {
  return product_rates({code.rates(t2), uniform_rates(code.K, 1.0 / (t2_anc > 0 ? t2_anc : t2))});
}

// branches over the true syndrome, before misassignment (unnormalized)
inline std::vector<MatC> stabilize_raw(const MatC& rho, const CompiledCode& cc, double t2, double t2_anc,
                                       const IntegratorConfig& ic) {
  const int d = cc.d(), K = cc.K();
  MatC anc = MatC::Zero(K, K);
  anc(0, 0) = 1;
  MatC joint = kron(rho, anc);
  joint = evolve_segment(joint, cc.cu.segment(joint_rates(cc.code, t2, t2_anc)), ic);
  std::vector<MatC> out(K, MatC(d, d));
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) out[k](i, j) = joint(i * K + k, j * K + k);
  return out;
}

inline std::vector<MatC> misassign(const std::vector<MatC>& raw, const MatR& conf) {
  const int K = static_cast<int>(raw.size());
  std::vector<MatC> rep(K, MatC::Zero(raw[0].rows(), raw[0].cols()));
  for (int m = 0; m < K; ++m)
    for (int k = 0; k < K; ++k)
      if (conf(k, m) > 0) rep[m] += conf(k, m) * raw[k];
  return rep;
}

inline std::vector<Branch> stabilize_and_measure(const MatC& rho, const CompiledCode& cc, double t2,
                                                 const ProtocolOptions& opt = {}) {
  auto raw = stabilize_raw(rho, cc, t2, opt.t2_anc, opt.integrator);
  auto rep = misassign(raw, confusion_matrix(cc.K(), opt.measurement));
  std::vector<Branch> out;
  double total = 0;
  for (int m = 0; m < cc.K(); ++m) {
    double p = rep[m].trace().real();
    total += p;
    if (p < opt.prune) continue;
    out.push_back({m, p, rep[m] / p});
  }
  if (std::abs(total - rho.trace().real()) > 1e-9) throw Error("branch weights do not sum to the input trace");
  return out;
}

inline MatC recover(const MatC& rho, const CompiledCode& cc, int k, double t2, const IntegratorConfig& ic = {}) {
  if (k == 0) return rho;
  return evolve_segment(rho, cc.recovery.at(k).segment(cc.code.rates(t2)), ic);
}

struct Decoded {
  MatC block;         // <l,0|rho|l',0>
  MatC summed;        // sum_k <l,k|rho|l',k>
  double leakage = 0; // trace(rho) - trace(block)
  double outside = 0; // population outside span of the error basis
  std::array<double, 2> support{0, 0};
};

inline Decoded decode(const MatC& rho, const CompiledCode& cc) {
  const ErrorBasis& eb = cc.code.basis;
  const int K = eb.K;
  MatC r = eb.vectors.adjoint() * rho * eb.vectors;
  Decoded out;
  out.block = MatC::Zero(2, 2);
  out.summed = MatC::Zero(2, 2);
  for (int l = 0; l < 2; ++l)
    for (int m = 0; m < 2; ++m) {
      out.block(l, m) = r(eb.col(l, 0), eb.col(m, 0));
      for (int k = 0; k < K; ++k) out.summed(l, m) += r(eb.col(l, k), eb.col(m, k));
    }
  const double tr = rho.trace().real();
  out.leakage = tr - out.block.trace().real();
  out.outside = tr - r.trace().real();
  if (out.outside < 0 && out.outside > -1e-13) out.outside = 0;
  for (int i : cc.code.words.support0) out.support[0] += rho(i, i).real();
  for (int i : cc.code.words.support1) out.support[1] += rho(i, i).real();
  return out;
}

inline MatC encode_state(const CompiledCode& cc, const VecC& psi) {
  const auto& eb = cc.code.basis;
  VecC v = psi(0) * eb.vectors.col(eb.col(0, 0)) + psi(1) * eb.vectors.col(eb.col(1, 0));
  return v * v.adjoint();
}

// prep: ground -> |0,0>, logical measurement keeps l=0, stabilization keeps k=0
inline std::pair<MatC, double> encode(const CompiledCode& cc, double t2, const ProtocolOptions& opt = {}) {
  const int d = cc.d();
  MatC rho = MatC::Zero(d, d);
  rho(0, 0) = 1;
  rho = evolve_segment(rho, cc.prep.segment(cc.code.rates(t2)), opt.integrator);
  MatC p0 = MatC::Zero(d, d);
  for (int i : cc.code.words.support0) p0(i, i) = 1;
  rho = p0 * rho * p0;
  double acc = rho.trace().real();
  auto raw = stabilize_raw(rho, cc, t2, opt.t2_anc, opt.integrator);
  auto rep = misassign(raw, confusion_matrix(cc.K(), opt.measurement));
  rho = rep[0];
  acc = rho.trace().real();
  if (acc < opt.acceptance_floor) throw Error("encode: acceptance probability below floor");
  return {rho / acc, acc};
}

struct CycleReport {
  std::vector<double> syndrome_distribution;
  std::vector<double> fidelity_per_state;
  double F_e = 1, E_e = 0;
  double acceptance = 1;
  double leakage = 0;
  double tau_gate = 0, tau_cu = 0;
};

// E = 1 - F^2 from the mean infidelity without cancellation
inline double error_from_infidelity(double delta) { return delta * (2.0 - delta); }

inline std::array<std::pair<double, double>, 6> cardinal_preparations() {
  return {{{0, 0}, {pi, 0}, {pi / 2, 0}, {pi / 2, pi}, {pi / 2, pi / 2}, {pi / 2, -pi / 2}}};
}

// gate + stabilize + measure + recover, syndrome branches merged
inline CycleReport entanglement_error(const CompiledCode& cc, double theta, double phi, double t2,
                                      const ProtocolOptions& opt = {}) {
  const int K = cc.K();
  const auto& ic = opt.integrator;
  const MatR gam = cc.code.rates(t2);
  const MatR conf = confusion_matrix(K, opt.measurement);
  const CompiledOp gate = cc.gate(theta, phi);
  const MatC G = planar_rotation(theta, phi);
  const auto states = cardinal_states();
  const auto preps = cardinal_preparations();

  CycleReport rep;
  rep.tau_gate = gate.tau;
  rep.tau_cu = cc.cu.tau;
  rep.syndrome_distribution.assign(K, 0.0);
  double delta_sum = 0, leak = 0, acc_sum = 0;
  std::optional<std::pair<MatC, double>> enc;
  if (opt.noisy_prep) enc = encode(cc, t2, opt);

  for (std::size_t s = 0; s < states.size(); ++s) {
    MatC rho;
    if (enc) {
      auto [th, ph] = preps[s];
      CompiledOp p = cc.gate(th, ph);
      rho = th == 0 ? enc->first : evolve_segment(enc->first, p.segment(gam), ic);
      acc_sum += enc->second;
    } else {
      rho = encode_state(cc, states[s]);
      acc_sum += 1;
    }
    rho = evolve_segment(rho, gate.segment(gam), ic);
    auto raw = stabilize_raw(rho, cc, t2, opt.t2_anc, ic);
    auto branches = misassign(raw, conf);
    MatC out = MatC::Zero(cc.d(), cc.d());
    for (int m = 0; m < K; ++m) {
      double w = branches[m].trace().real();
      rep.syndrome_distribution[m] += w / states.size();
      if (w < opt.prune) continue;
      out += recover(branches[m], cc, m, t2, ic);
    }
    Decoded dec = decode(out, cc);
    const MatC& rl = opt.readout == ProtocolOptions::Readout::summed ? dec.summed : dec.block;
    VecC target = G * states[s];
    double lost = out.trace().real() - rl.trace().real();
    double delta = complement_weight(rl, target) + lost;
    rep.fidelity_per_state.push_back(1 - delta);
    delta_sum += delta;
    leak += dec.leakage;
  }
  double dbar = delta_sum / states.size();
  rep.F_e = 1 - dbar;
  rep.E_e = error_from_infidelity(dbar);
  rep.leakage = leak / states.size();
  rep.acceptance = acc_sum / states.size();
  return rep;
}

// ---------------------------------------------------------------- baseline

// spin-1/2, gamma_01 = 1/T2, duration theta / (rabi_max * ratio)
inline CycleReport baseline_report(double theta, double phi, double t2, double rabi_max, double ratio = 1.0,
                                   const IntegratorConfig& ic = {}) {
  const double tau = theta / (rabi_max * ratio);
  EvolutionSegment seg;
  seg.gamma = uniform_rates(2, 1.0 / t2);
  seg.duration = tau;
  if (tau > 0) seg.h_active = (theta / 2) * planar_axis(phi) / tau;
  const SegmentPropagator prop(seg, ic);
  const MatC G = planar_rotation(theta, phi);
  CycleReport rep;
  rep.tau_gate = tau;
  rep.syndrome_distribution = {1.0};
  double delta = 0;
  for (const auto& psi : cardinal_states()) {
    MatC rho = prop.apply(psi * psi.adjoint());
    double dl = complement_weight(rho, G * psi) + (1.0 - rho.trace().real());
    rep.fidelity_per_state.push_back(1 - dl);
    delta += dl;
  }
  double dbar = delta / 6.0;
  rep.F_e = 1 - dbar;
  rep.E_e = error_from_infidelity(dbar);
  return rep;
}

inline double uncorrected_baseline(double theta, double phi, double t2, double rabi_max, double ratio = 1.0,
                                   const IntegratorConfig& ic = {}) {
  return baseline_report(theta, phi, t2, rabi_max, ratio, ic).E_e;
}

// leading-order phase-flip probability of an idle spin over tau
inline double dephasing_flip_probability(double tau, double t2) { return 0.5 * (1 - std::exp(-tau / t2)); }

}  // namespace qftqec

#endif
