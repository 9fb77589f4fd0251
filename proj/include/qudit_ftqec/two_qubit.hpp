#ifndef QUDIT_FTQEC_TWO_QUBIT_HPP
#define QUDIT_FTQEC_TWO_QUBIT_HPP

#include "protocol.hpp"

namespace qftqec {

// One encoded unit (or a bare qubit when K = 1 and basis = I).
struct Unit {
  int d = 2, K = 1;
  MatC basis;               // d x 2K error basis, column l*K + k
  std::vector<int> support1;
  MatR g1;                  // rates at T2 = 1 s
  bool corrected = false;
  CompiledOp cu;
  std::vector<CompiledOp> recovery;

  MatR rates(double t2) const { return g1 / t2; }
};

inline Unit unit_from_code(const CompiledCode& cc) {
  Unit u;
  u.d = cc.d();
  u.K = cc.K();
  u.basis = cc.code.basis.vectors;
  u.support1 = cc.code.words.support1;
  u.g1 = cc.code.g1;
  u.corrected = true;
  u.cu = cc.cu;
  u.recovery = cc.recovery;
  return u;
}

inline Unit bare_qubit() {
  Unit u;
  u.basis = MatC::Identity(2, 2);
  u.support1 = {1};
  u.g1 = uniform_rates(2, 1.0);
  return u;
}

struct SwitchConfig {
  int unit_d = 4;
  double lambda_GHz = 0.01;
  double phi = pi;
  double rabi_ratio_baseline = 1.0;
  double resolve_factor = 10.0;  // lambda * tau lower bound
  int max_loops = 9;
  int max_windings = 64;
};

struct CPhaseSchedule {
  double tau = 0;     // s
  double omega = 0;   // rad/s, logical Rabi frequency
  double delta = 0;   // rad/s, detuning of the |1_L 1_L>-conditioned transition
  int loops_target = 1, loops_other = 0;
  bool empty() const { return tau == 0; }
};

struct SwitchArchitecture {
  Unit q1, q2, sw;
  double lambda = 0;    // rad/s
  double phi = 0;
  double rabi_max = 0;  // rad/s, physical per-transition cap
  double drive_area = 1;  // max |(B (Y x I) B^+)_mn|
  CPhaseSchedule schedule;

  std::array<int, 3> dims() const { return {q1.d, q2.d, sw.d}; }
  int dim() const { return q1.d * q2.d * sw.d; }
};

// drive on the switch: every (l,k) pair rotated identically about Y
inline MatC switch_drive(const Unit& sw) {
  return sw.basis * kron(pauli_y(), MatC::Identity(sw.K, sw.K)) * sw.basis.adjoint();
}

inline std::vector<char> membership(const Unit& u) {
  std::vector<char> m(u.d, 0);
  for (int i : u.support1) m[i] = 1;
  return m;
}

// lambda N1 x P_exc x N2, diagonal over (q1, q2, s)
inline VecR conditional_shift(const SwitchArchitecture& a) {
  auto m1 = membership(a.q1), m2 = membership(a.q2), ms = membership(a.sw);
  VecR h(a.dim());
  int idx = 0;
  for (int i = 0; i < a.q1.d; ++i)
    for (int j = 0; j < a.q2.d; ++j)
      for (int s = 0; s < a.sw.d; ++s) h(idx++) = a.lambda * m1[i] * m2[j] * ms[s];
  return h;
}

// Closed loops: Omega^2 + delta^2 = (w m_t)^2 on the target sector, Omega^2 + (delta - lambda)^2 = (w m_o)^2
// elsewhere, w = 2 pi / tau. Relative phase -lambda tau / 2 + (m_t - m_o) pi = phi.
inline CPhaseSchedule semi_resonant_schedule(double lambda, double phi, double omega_cap, const SwitchConfig& cfg) {
  if (!(lambda > 0)) throw Error("switch coupling lambda must be positive");
  double p = std::remainder(phi, 2 * pi);
  if (std::abs(p) < 1e-12) return {};
  CPhaseSchedule best;
  best.tau = std::numeric_limits<double>::infinity();
  const int mt = 1;
  for (int n = 1; n <= cfg.max_windings; ++n) {
    double tau = (2 * pi * n - 2 * p) / lambda;
    if (tau <= 0 || lambda * tau < cfg.resolve_factor || tau >= best.tau) continue;
    double w = 2 * pi / tau;
    for (int mo = 1; mo <= cfg.max_loops; ++mo) {
      if (((mt - mo - n) % 2 + 2) % 2 != 0) continue;
      double delta = (lambda * lambda - w * w * (mo * mo - mt * mt)) / (2 * lambda);
      double om2 = w * w * mt * mt - delta * delta;
      if (om2 <= 0) continue;
      double om = std::sqrt(om2);
      if (om > omega_cap * (1 + 1e-12)) continue;
      best = {tau, om, delta, mt, mo};
      break;
    }
  }
  if (!std::isfinite(best.tau)) throw Error("controlled phase unreachable within drive and detuning limits");
  return best;
}

inline SwitchArchitecture build_architecture(Unit q1, Unit q2, Unit sw, double rabi_max, const SwitchConfig& cfg) {
  SwitchArchitecture a;
  a.q1 = std::move(q1);
  a.q2 = std::move(q2);
  a.sw = std::move(sw);
  a.lambda = cfg.lambda_GHz * ghz_to_rad;
  a.phi = cfg.phi;
  a.rabi_max = rabi_max;
  MatC drv = switch_drive(a.sw);
  a.drive_area = max_offdiag_area(drv) / 2;  // max |M_mn|
  if (a.sw.K == 1 && a.sw.d == 2) a.drive_area = 1;
  a.schedule = semi_resonant_schedule(a.lambda, a.phi, rabi_max / a.drive_area, cfg);
  if (!a.schedule.empty() && a.lambda * a.schedule.tau < cfg.resolve_factor)
    throw Error("conditional transition not resolved from unconditional ones");
  return a;
}

inline SwitchArchitecture build_architecture(const CompiledCode& cc, const SwitchConfig& cfg) {
  Unit u = unit_from_code(cc);
  return build_architecture(u, u, u, cc.rabi_max, cfg);
}

inline SwitchArchitecture build_baseline_architecture(double rabi_max, const SwitchConfig& cfg) {
  return build_architecture(bare_qubit(), bare_qubit(), bare_qubit(), rabi_max * cfg.rabi_ratio_baseline, cfg);
}

inline EvolutionSegment cphase_segment(const SwitchArchitecture& a, const MatR& gamma) {
  EvolutionSegment seg;
  seg.gamma = gamma;
  seg.duration = a.schedule.tau;
  if (a.schedule.empty()) return seg;
  seg.h_active = (a.schedule.omega / 2) * switch_drive(a.sw);
  auto ms = membership(a.sw);
  VecR frame(a.dim());
  for (Eigen::Index i = 0; i < frame.size(); ++i) frame(i) = ms[i % a.sw.d] * (a.schedule.delta - a.lambda);
  seg.h_diag = frame + conditional_shift(a);
  return seg;
}

// ---------------------------------------------------------------- state plumbing

// out(i, j) = rho(p[i], p[j]) with factors reordered by `order`
inline MatC permute_factors(const MatC& rho, const std::vector<int>& dims, const std::vector<int>& order) {
  const int f = static_cast<int>(dims.size());
  std::vector<int> nd(f);
  for (int i = 0; i < f; ++i) nd[i] = dims[order[i]];
  std::vector<long> stride(f, 1);
  for (int i = f - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];
  const long n = rho.rows();
  std::vector<long> p(n);
  std::vector<int> digit(f, 0);
  for (long i = 0; i < n; ++i) {
    long old = 0;
    for (int k = 0; k < f; ++k) old += digit[k] * stride[order[k]];
    p[i] = old;
    for (int k = f - 1; k >= 0 && ++digit[k] == nd[k]; --k) digit[k] = 0;
  }
  MatC out(n, n);
  for (long j = 0; j < n; ++j)
    for (long i = 0; i < n; ++i) out(i, j) = rho(p[i], p[j]);
  return out;
}

inline std::vector<int> inverse_order(const std::vector<int>& order) {
  std::vector<int> inv(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) inv[order[i]] = static_cast<int>(i);
  return inv;
}

// stabilize, measure and recover one unit; other units idle under dephasing.
// Propagators are built once and reused over input states.
class UnitCorrector {
 public:
  UnitCorrector(const SwitchArchitecture& a, int which, double t2, const ProtocolOptions& opt) : opt_(opt) {
    const std::array<const Unit*, 3> units{&a.q1, &a.q2, &a.sw};
    const Unit& u = *units[which];
    active_ = u.corrected && u.K > 1;
    if (!active_) return;
    K_ = u.K;
    dims_ = {a.q1.d, a.q2.d, a.sw.d};
    for (int i = 0; i < 3; ++i)
      if (i != which) order_.push_back(i);
    order_.push_back(which);
    std::vector<MatR> rates;
    for (int i : order_) rates.push_back(units[i]->rates(t2));
    const MatR g_sys = product_rates(rates);
    rates.push_back(uniform_rates(K_, 1.0 / (opt.t2_anc > 0 ? opt.t2_anc : t2)));
    cu_.emplace(u.cu.segment(product_rates(rates)), opt.integrator);
    rec_.resize(K_);
    for (int m = 1; m < K_; ++m) rec_[m].emplace(u.recovery[m].segment(g_sys), opt.integrator);
    conf_ = confusion_matrix(K_, opt.measurement);
  }

  MatC operator()(const MatC& rho, std::vector<double>* syndromes = nullptr) const {
    if (!active_) return rho;
    MatC r = permute_factors(rho, dims_, order_);
    const long n = r.rows();
    MatC anc = MatC::Zero(K_, K_);
    anc(0, 0) = 1;
    MatC joint = cu_->apply(kron(r, anc));
    std::vector<MatC> raw(K_, MatC(n, n));
    for (int k = 0; k < K_; ++k)
      for (long j = 0; j < n; ++j)
        for (long i = 0; i < n; ++i) raw[k](i, j) = joint(i * K_ + k, j * K_ + k);
    auto rep = misassign(raw, conf_);
    MatC out = MatC::Zero(n, n);
    for (int m = 0; m < K_; ++m) {
      double w = rep[m].trace().real();
      if (syndromes) syndromes->push_back(w);
      if (w < opt_.prune) continue;
      out += m == 0 ? rep[m] : rec_[m]->apply(rep[m]);
    }
    return permute_factors(out, {dims_[order_[0]], dims_[order_[1]], dims_[order_[2]]}, inverse_order(order_));
  }

 private:
  ProtocolOptions opt_;
  bool active_ = false;
  int K_ = 1;
  std::vector<int> dims_, order_;
  std::optional<SegmentPropagator> cu_;
  std::vector<std::optional<SegmentPropagator>> rec_;
  MatR conf_;
};

inline MatC logical_isometry(const Unit& u) {
  MatC v(u.d, 2);
  v.col(0) = u.basis.col(0);
  v.col(1) = u.basis.col(u.K);
  return v;
}

// 4x4 logical state: neighbors summed over k, switch restricted to l = 0 summed over k
inline MatC decode_two_qubit(const MatC& rho, const SwitchArchitecture& a) {
  MatC v = kron(kron(a.q1.basis, a.q2.basis), a.sw.basis.leftCols(a.sw.K));
  MatC r = v.adjoint() * rho * v;
  const int K1 = a.q1.K, K2 = a.q2.K, Ks = a.sw.K;
  auto ix = [&](int l1, int k1, int l2, int k2, int ks) { return ((l1 * K1 + k1) * 2 * K2 + l2 * K2 + k2) * Ks + ks; };
  MatC out = MatC::Zero(4, 4);
  for (int l1 = 0; l1 < 2; ++l1)
    for (int l2 = 0; l2 < 2; ++l2)
      for (int m1 = 0; m1 < 2; ++m1)
        for (int m2 = 0; m2 < 2; ++m2)
          for (int k1 = 0; k1 < K1; ++k1)
            for (int k2 = 0; k2 < K2; ++k2)
              for (int ks = 0; ks < Ks; ++ks)
                out(l1 * 2 + l2, m1 * 2 + m2) += r(ix(l1, k1, l2, k2, ks), ix(m1, k1, m2, k2, ks));
  return out;
}

inline MatC cphase_target(double phi) {
  MatC u = MatC::Identity(4, 4);
  u(3, 3) = std::exp(I1 * phi);
  return u;
}

inline std::vector<VecC> two_qubit_inputs() {
  auto c = cardinal_states();
  std::array<VecC, 4> set{c[0], c[1], c[2], c[4]};  // 0, 1, +, +i
  std::vector<VecC> out;
  for (const auto& a : set)
    for (const auto& b : set) out.push_back(kron(a, b));
  return out;
}

inline MatC encode_two_qubit(const SwitchArchitecture& a, const VecC& psi) {
  VecC v = kron(kron(logical_isometry(a.q1), logical_isometry(a.q2)), logical_isometry(a.sw).col(0)) * psi;
  return v * v.adjoint();
}

inline MatR joint_rates(const SwitchArchitecture& a, double t2) {
  return product_rates({a.q1.rates(t2), a.q2.rates(t2), a.sw.rates(t2)});
}

inline CycleReport run_two_qubit_cycle(const SwitchArchitecture& a, double t2, const ProtocolOptions& opt = {}) {
  const MatR gam = joint_rates(a, t2);
  const SegmentPropagator gate(cphase_segment(a, gam), opt.integrator);
  std::vector<UnitCorrector> ec;
  for (int u = 0; u < 3; ++u) ec.emplace_back(a, u, t2, opt);
  const MatC G = cphase_target(a.phi);
  const auto inputs = two_qubit_inputs();
  CycleReport rep;
  rep.tau_gate = a.schedule.tau;
  double delta_sum = 0, leak = 0;
  std::vector<double> synd;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    MatC rho = gate.apply(encode_two_qubit(a, inputs[s]));
    std::vector<double> local;
    for (const auto& c : ec) rho = c(rho, &local);
    if (synd.empty()) synd.assign(local.size(), 0.0);
    for (std::size_t i = 0; i < local.size(); ++i) synd[i] += local[i] / inputs.size();
    MatC rl = decode_two_qubit(rho, a);
    double lost = rho.trace().real() - rl.trace().real();
    double delta = complement_weight(rl, G * inputs[s]) + lost;
    rep.fidelity_per_state.push_back(1 - delta);
    delta_sum += delta;
    leak += lost;
  }
  rep.syndrome_distribution = synd;
  double dbar = delta_sum / inputs.size();
  rep.F_e = 1 - dbar;
  rep.E_e = error_from_infidelity(dbar);
  rep.leakage = leak / inputs.size();
  return rep;
}

// gamma = 0 diagonal amplitudes <ll'|U|ll'> on the code space, switch in |0_L>
inline std::array<cplx, 4> conditional_amplitudes(const SwitchArchitecture& a) {
  std::array<cplx, 4> out{};
  const MatR zero = MatR::Zero(a.dim(), a.dim());
  EvolutionSegment seg = cphase_segment(a, zero);
  MatC v = kron(kron(logical_isometry(a.q1), logical_isometry(a.q2)), logical_isometry(a.sw).col(0));
  MatC u = seg.duration > 0 ? expm_herm(kron(MatC::Identity(a.q1.d * a.q2.d, a.q1.d * a.q2.d), seg.h_active) +
                                            MatC(seg.h_diag.cast<cplx>().asDiagonal()),
                                        cplx(0, -seg.duration))
                            : MatC::Identity(a.dim(), a.dim());
  MatC l = v.adjoint() * u * v;
  for (int i = 0; i < 4; ++i) out[i] = l(i, i);
  return out;
}

}  // namespace qftqec

#endif
