#ifndef QUDIT_FTQEC_SPIN_MODEL_HPP
#define QUDIT_FTQEC_SPIN_MODEL_HPP

#include "linalg.hpp"

#include <algorithm>
#include <set>
#include <utility>

namespace qftqec {

struct Coupling {
  int i = 0, j = 0;
  double value = 0.0;  // GHz
};

// Sites carry spin s_i; energies in GHz, B in tesla along z.
struct SpinTopology {
  std::vector<double> spins;
  std::vector<Coupling> J;
  std::vector<Coupling> D;  // axial (s_i x s_j)_z only
  std::vector<double> g;
  double B = 0.0;
  double bohr_magneton = 13.99624493;  // GHz/T
  std::size_t dim_cap = 4096;

  int sites() const { return static_cast<int>(spins.size()); }

  std::vector<int> local_dims() const {
    std::vector<int> d;
    for (double s : spins) d.push_back(static_cast<int>(std::lround(2 * s + 1)));
    return d;
  }

  std::size_t dim() const {
    std::size_t n = 1;
    for (int d : local_dims()) n *= static_cast<std::size_t>(d);
    return n;
  }

  void validate() const {
    if (spins.empty()) throw Error("topology has no sites");
    for (double s : spins) {
      double twice = 2 * s;
      if (s <= 0 || std::abs(twice - std::round(twice)) > 1e-12)
        throw Error("spin quantum numbers must be positive half-integers");
    }
    if (g.size() != spins.size()) throw Error("g list length differs from site count");
    // overflow-safe cap check
    std::size_t n = 1;
    for (int d : local_dims()) {
      n *= static_cast<std::size_t>(d);
      if (n > dim_cap) throw Error("Hilbert dimension exceeds cap " + std::to_string(dim_cap));
    }
    auto check = [&](const std::vector<Coupling>& list, const char* name) {
      std::set<std::pair<int, int>> seen;
      for (const auto& c : list) {
        if (c.i == c.j) throw Error(std::string(name) + " coupling with i == j");
        if (c.i < 0 || c.j < 0 || c.i >= sites() || c.j >= sites())
          throw Error(std::string(name) + " coupling site out of range");
        auto key = std::minmax(c.i, c.j);
        if (!seen.insert(key).second) throw Error(std::string(name) + " pair listed twice");
      }
    };
    check(J, "J");
    check(D, "D");
  }
};

namespace detail {

// mixed-radix product basis, site 0 slowest, local index a <-> m = a - s
struct ProductBasis {
  std::vector<int> dims;
  std::vector<std::size_t> stride;
  std::vector<double> spin;
  std::size_t n = 1;

  explicit ProductBasis(const SpinTopology& t) : dims(t.local_dims()), spin(t.spins) {
    stride.assign(dims.size(), 1);
    for (int k = static_cast<int>(dims.size()) - 2; k >= 0; --k) stride[k] = stride[k + 1] * dims[k + 1];
    for (int d : dims) n *= static_cast<std::size_t>(d);
  }
  int local(std::size_t state, int site) const {
    return static_cast<int>((state / stride[site]) % dims[site]);
  }
  double m(std::size_t state, int site) const { return local(state, site) - spin[site]; }
};

inline double raise_coeff(double s, double m) { return std::sqrt(s * (s + 1) - m * (m + 1)); }
inline double lower_coeff(double s, double m) { return std::sqrt(s * (s + 1) - m * (m - 1)); }

}  // namespace detail

// H = sum J s_i.s_j + sum D (s_i x s_j)_z + muB B sum g s_i^z, GHz
inline MatC build_hamiltonian(const SpinTopology& topo) {
  topo.validate();
  detail::ProductBasis pb(topo);
  const auto n = static_cast<Eigen::Index>(pb.n);
  MatC h = MatC::Zero(n, n);

  // (s_i x s_j)_z = (i/2)(s_i^+ s_j^- - s_i^- s_j^+)
  struct Pair { int i, j; double jv, dv; };
  std::vector<Pair> pairs;
  for (const auto& c : topo.J) pairs.push_back({c.i, c.j, c.value, 0.0});
  for (const auto& c : topo.D) {
    auto it = std::find_if(pairs.begin(), pairs.end(), [&](const Pair& p) {
      return (p.i == c.i && p.j == c.j) || (p.i == c.j && p.j == c.i);
    });
    double dv = c.value;
    if (it == pairs.end()) {
      pairs.push_back({c.i, c.j, 0.0, dv});
    } else {
      // D_ji = -D_ij
      it->dv += (it->i == c.i) ? dv : -dv;
    }
  }

  for (std::size_t s = 0; s < pb.n; ++s) {
    double diag = 0.0;
    for (int k = 0; k < topo.sites(); ++k) diag += topo.bohr_magneton * topo.B * topo.g[k] * pb.m(s, k);
    for (const auto& p : pairs) {
      double mi = pb.m(s, p.i), mj = pb.m(s, p.j);
      diag += p.jv * mi * mj;
      if (mi < pb.spin[p.i] - 1e-9 && mj > -pb.spin[p.j] + 1e-9) {
        std::size_t t = s + pb.stride[p.i] - pb.stride[p.j];
        cplx v = cplx(0.5 * p.jv, 0.5 * p.dv) * detail::raise_coeff(pb.spin[p.i], mi) *
                 detail::lower_coeff(pb.spin[p.j], mj);
        h(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) += v;
        h(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) += std::conj(v);
      }
    }
    h(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) += diag;
  }
  return h;
}

struct EigenSystem {
  VecR energies;  // ascending, GHz
  MatC vectors;   // columns |d_i> in the product basis
  int dim = 0;
};

inline EigenSystem diagonalize(const MatC& h) {
  if (max_abs(h - h.adjoint()) > 1e-12 * std::max(1.0, max_abs(h)))
    throw Error("diagonalize: matrix is not Hermitian");
  auto e = herm_eig(h);
  return {e.values, e.vectors, static_cast<int>(h.rows())};
}

// <v|S_tot^2|v> = |S^+ v|^2 + <S_z^2> + <S_z>
inline double total_spin_squared(const SpinTopology& topo, const VecC& v) {
  detail::ProductBasis pb(topo);
  VecC up = VecC::Zero(v.size());
  double sz = 0, sz2 = 0;
  for (std::size_t s = 0; s < pb.n; ++s) {
    cplx a = v(static_cast<Eigen::Index>(s));
    double mt = 0;
    for (int k = 0; k < topo.sites(); ++k) {
      double m = pb.m(s, k);
      mt += m;
      if (m < pb.spin[k] - 1e-9)
        up(static_cast<Eigen::Index>(s + pb.stride[k])) += detail::raise_coeff(pb.spin[k], m) * a;
    }
    double w = std::norm(a);
    sz += w * mt;
    sz2 += w * mt * mt;
  }
  return up.squaredNorm() + sz2 + sz;
}

inline double spin_from_s2(double s2) { return 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * std::max(0.0, s2))); }

struct QuditBasis {
  std::vector<int> indices;
  int d = 0;
  VecR spin_labels;
};

struct BasisOptions {
  bool gap_check = true;
  double gap_fraction = 0.1;  // of mean adjacent spacing inside the selected set
};

inline QuditBasis select_qudit_basis(const EigenSystem& eig, const SpinTopology& topo, int d,
                                     BasisOptions opt = {}) {
  if (d % 2 != 0) throw Error("qudit dimension must be even");
  if (d < 4 || d > eig.dim) throw Error("qudit dimension out of range");
  QuditBasis b;
  b.d = d;
  for (int i = 0; i < d; ++i) b.indices.push_back(i);
  if (opt.gap_check && d < eig.dim) {
    double mean_spacing = (eig.energies(d - 1) - eig.energies(0)) / (d - 1);
    double gap = eig.energies(d) - eig.energies(d - 1);
    if (gap < opt.gap_fraction * mean_spacing)
      throw Error("gap check: state " + std::to_string(d) + " is not separated from the selected set");
  }
  b.spin_labels.resize(d);
  for (int i = 0; i < d; ++i)
    b.spin_labels(i) = spin_from_s2(total_spin_squared(topo, eig.vectors.col(b.indices[i])));
  return b;
}

// Z[i][k] = <d_i| s_k^z |d_i>
inline MatR sz_diagonal_elements(const EigenSystem& eig, const SpinTopology& topo, const QuditBasis& basis) {
  detail::ProductBasis pb(topo);
  MatR z = MatR::Zero(basis.d, topo.sites());
  for (int i = 0; i < basis.d; ++i) {
    const auto col = eig.vectors.col(basis.indices[i]);
    for (std::size_t s = 0; s < pb.n; ++s) {
      double w = std::norm(col(static_cast<Eigen::Index>(s)));
      if (w == 0.0) continue;
      for (int k = 0; k < topo.sites(); ++k) z(i, k) += w * pb.m(s, k);
    }
  }
  return z;
}

// dense single-site operator s_k^a embedded in the product space (tests, diagnostics)
inline MatC site_operator(const SpinTopology& topo, int site, char axis) {
  detail::ProductBasis pb(topo);
  const auto n = static_cast<Eigen::Index>(pb.n);
  MatC op = MatC::Zero(n, n);
  for (std::size_t s = 0; s < pb.n; ++s) {
    double m = pb.m(s, site);
    auto si = static_cast<Eigen::Index>(s);
    if (axis == 'z') {
      op(si, si) = m;
      continue;
    }
    if (m < pb.spin[site] - 1e-9) {
      auto ti = static_cast<Eigen::Index>(s + pb.stride[site]);
      double c = detail::raise_coeff(pb.spin[site], m);
      // s^x = (s^+ + s^-)/2, s^y = (s^+ - s^-)/2i
      if (axis == 'x') {
        op(ti, si) += 0.5 * c;
        op(si, ti) += 0.5 * c;
      } else {
        op(ti, si) += cplx(0, -0.5) * c;
        op(si, ti) += cplx(0, 0.5) * c;
      }
    }
  }
  return op;
}

}  // namespace qftqec

#endif
