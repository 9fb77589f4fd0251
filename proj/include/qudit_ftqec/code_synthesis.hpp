#ifndef QUDIT_FTQEC_CODE_SYNTHESIS_HPP
#define QUDIT_FTQEC_CODE_SYNTHESIS_HPP

#include "dephasing.hpp"
#include "nnls.hpp"

#include <optional>

namespace qftqec {

struct CodeWords {
  std::vector<int> support0, support1;  // qudit level indices
  VecR amp0, amp1;                      // real, nonnegative, unit norm
  int K = 1;
  double kl_residual = 0.0;
  std::size_t partitions_scanned = 0;

  int d() const { return static_cast<int>(support0.size() + support1.size()); }

  VecC word(int l) const {
    VecC v = VecC::Zero(d());
    const auto& s = l == 0 ? support0 : support1;
    const auto& a = l == 0 ? amp0 : amp1;
    for (std::size_t i = 0; i < s.size(); ++i) v(s[i]) = a(static_cast<Eigen::Index>(i));
    return v;
  }
};

// max over k,j < K of the Eq. 1a mismatch and the |<0|E_k^+ E_j|1>| overlap
inline double kl_residual(const CodeWords& cw, const KrausSet& ks, int K) {
  if (K > ks.size()) throw Error("kl_residual: K exceeds number of Kraus operators");
  VecC w0 = cw.word(0), w1 = cw.word(1);
  double r = 0;
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j) {
      VecC ekj = ks.ops[k].conjugate().cwiseProduct(ks.ops[j]);
      cplx a = w0.dot(ekj.cwiseProduct(w0));
      cplx b = w1.dot(ekj.cwiseProduct(w1));
      cplx c = w0.dot(ekj.cwiseProduct(w1));
      r = std::max({r, std::abs(a - b), std::abs(c)});
    }
  return r;
}

struct CodeSynthesisOptions {
  double threshold = 1e-8;
  double norm_weight = 1e3;  // weight of the normalization rows
  double uniform_pull = 1e-6;
};

struct CodeSynthesisError : Error {
  CodeWords best;
  CodeSynthesisError(const std::string& what, CodeWords b) : Error(what), best(std::move(b)) {}
};

namespace detail {

inline bool next_combination(std::vector<int>& c, int n) {
  const int k = static_cast<int>(c.size());
  for (int i = k - 1; i >= 0; --i) {
    if (c[i] < n - k + i) {
      ++c[i];
      for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Solve the best code of one partition (S0, S1) given the stacked KL rows. reg > 0 adds rows
// reg * (x_i - 1/h) that pull populations toward uniform, selecting interior solutions.
inline CodeWords solve_partition(const MatR& rows, const std::vector<int>& s0, const std::vector<int>& s1,
                                 const KrausSet& ks, int K, double mu, double reg = 0.0) {
  const int h = static_cast<int>(s0.size());
  const auto m = rows.rows();
  const int extra = reg > 0 ? 2 * h : 0;
  MatR a = MatR::Zero(m + 2 + extra, 2 * h);
  VecR b = VecR::Zero(m + 2 + extra);
  for (int i = 0; i < h; ++i) {
    a.block(0, i, m, 1) = rows.col(s0[i]);
    a.block(0, h + i, m, 1) = -rows.col(s1[i]);
    a(m, i) = mu;
    a(m + 1, h + i) = mu;
  }
  b(m) = mu;
  b(m + 1) = mu;
  for (int i = 0; i < extra; ++i) {
    a(m + 2 + i, i) = reg;
    b(m + 2 + i) = reg / h;
  }
  VecR x = nnls(a, b);
  VecR p = x.head(h), q = x.tail(h);
  CodeWords cw;
  cw.K = K;
  cw.support0 = s0;
  cw.support1 = s1;
  if (p.sum() <= 0 || q.sum() <= 0) {
    cw.amp0 = VecR::Constant(h, 1.0 / std::sqrt(h));
    cw.amp1 = cw.amp0;
    cw.kl_residual = std::numeric_limits<double>::infinity();
    return cw;
  }
  cw.amp0 = (p / p.sum()).cwiseSqrt();
  cw.amp1 = (q / q.sum()).cwiseSqrt();
  cw.kl_residual = kl_residual(cw, ks, K);
  return cw;
}

// K independent error images need at least K populated levels per word
inline bool supports_k_errors(const CodeWords& cw, int K, double pop_floor = 1e-12) {
  auto count = [&](const VecR& a) { return static_cast<int>((a.array().square() > pop_floor).count()); };
  return count(cw.amp0) >= K && count(cw.amp1) >= K;
}

inline CodeWords solve_codewords(const KrausSet& ks, int K, int d, CodeSynthesisOptions opt = {}) {
  if (d % 2 != 0 || d < 2) throw Error("solve_codewords: d must be even");
  if (K < 1 || K > d / 2) throw Error("solve_codewords: need 1 <= K <= d/2");
  if (ks.dim() != d) throw Error("solve_codewords: Kraus dimension mismatch");
  if (K > ks.size()) throw Error("solve_codewords: fewer Kraus operators than K");

  // rows (k <= j), real and imaginary parts of M_i^{kj} = conj(E_k,ii) E_j,ii
  std::vector<VecR> rv;
  for (int k = 0; k < K; ++k)
    for (int j = k; j < K; ++j) {
      VecC mkj = ks.ops[k].conjugate().cwiseProduct(ks.ops[j]);
      rv.push_back(mkj.real());
      if (j != k) rv.push_back(mkj.imag());
    }
  MatR rows(static_cast<Eigen::Index>(rv.size()), d);
  for (std::size_t r = 0; r < rv.size(); ++r) rows.row(static_cast<Eigen::Index>(r)) = rv[r].transpose();

  // homogeneous rows: unit scaling keeps exact solutions and exposes the weak-error rows to the active set
  MatR scaled = rows;
  for (Eigen::Index r = 0; r < scaled.rows(); ++r) {
    double m = scaled.row(r).cwiseAbs().maxCoeff();
    if (m > 0) scaled.row(r) /= m;
  }

  // solutions populating fewer than K levels rank after every proper code
  const double degenerate = 1.0;
  const int h = d / 2;
  std::vector<int> c(h);
  for (int i = 0; i < h; ++i) c[i] = i;
  CodeWords best;
  best.kl_residual = std::numeric_limits<double>::infinity();
  std::size_t scanned = 0;
  do {
    if (c[0] != 0) break;  // index 0 fixed in S0; lexicographic order keeps these first
    std::vector<int> s1;
    for (int i = 0, j = 0; i < d; ++i) {
      if (j < h && c[j] == i) {
        ++j;
        continue;
      }
      s1.push_back(i);
    }
    ++scanned;
    // candidates: scaled rows, raw rows, scaled rows with a weak pull to uniform populations
    std::optional<CodeWords> pick;
    for (auto cand : {solve_partition(scaled, c, s1, ks, K, opt.norm_weight),
                      solve_partition(rows, c, s1, ks, K, opt.norm_weight),
                      solve_partition(scaled, c, s1, ks, K, opt.norm_weight, opt.uniform_pull)}) {
      if (!supports_k_errors(cand, K)) cand.kl_residual = std::max(cand.kl_residual, degenerate);
      if (!pick || cand.kl_residual < pick->kl_residual) pick = std::move(cand);
    }
    if (pick->kl_residual < best.kl_residual - 1e-15) best = std::move(*pick);
  } while (detail::next_combination(c, d));
  best.partitions_scanned = scanned;
  if (!(best.kl_residual < opt.threshold))
    throw CodeSynthesisError("no partition satisfies the KL conditions (best residual " +
                                 std::to_string(best.kl_residual) + ")",
                             best);
  return best;
}

struct ErrorBasis {
  MatC vectors;  // d x 2K, column l*K + k
  int K = 1;

  int d() const { return static_cast<int>(vectors.rows()); }
  int col(int l, int k) const { return l * K + k; }
};

inline ErrorBasis build_error_basis(const CodeWords& cw, const KrausSet& ks, int K, double floor = 1e-10) {
  if (K > ks.size()) throw Error("error-space collapse: K exceeds the Kraus set");
  const int d = cw.d();
  ErrorBasis eb;
  eb.K = K;
  eb.vectors = MatC::Zero(d, 2 * K);
  for (int l = 0; l < 2; ++l) {
    VecC w = cw.word(l);
    for (int k = 0; k < K; ++k) {
      VecC v = ks.ops[k].cwiseProduct(w);
      for (int pass = 0; pass < 2; ++pass)
        for (int kk = 0; kk < k; ++kk) {
          auto u = eb.vectors.col(eb.col(l, kk));
          v -= u.dot(v) * u;
        }
      double n = v.norm();
      if (n < floor)
        throw Error("error-space collapse at l=" + std::to_string(l) + ", k=" + std::to_string(k));
      eb.vectors.col(eb.col(l, k)) = v / n;
    }
  }
  return eb;
}

inline MatC stabilizer_observable(const ErrorBasis& eb, const std::vector<double>& lambdas) {
  if (static_cast<int>(lambdas.size()) != eb.K) throw Error("stabilizer: need K eigenvalues");
  for (std::size_t a = 0; a < lambdas.size(); ++a)
    for (std::size_t b = a + 1; b < lambdas.size(); ++b)
      if (lambdas[a] == lambdas[b]) throw Error("stabilizer: duplicate eigenvalue");
  const int d = eb.d();
  MatC s = MatC::Zero(d, d);
  for (int l = 0; l < 2; ++l)
    for (int k = 0; k < eb.K; ++k) {
      auto v = eb.vectors.col(eb.col(l, k));
      s += lambdas[k] * v * v.adjoint();
    }
  return s;
}

}  // namespace qftqec

#endif
