#pragma once
#include "pwrse/bspline.hpp"
#include "pwrse/constants.hpp"
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwrse::spectrum {

struct GridSpec {
  int N = 28;
  int k = 9;
  double R = 0.0; // units 1/m_e
  basis::GridScheme scheme = basis::GridScheme::Exponential;
  double gamma = 10.0;
};

// Point-nucleus Dirac eigenvalue (rest mass included), units of m_e.
inline double sommerfeld_energy(double Z, int n, int kappa) {
  const double za = Z * consts::alpha;
  const double g = std::sqrt(double(kappa) * kappa - za * za);
  const double x = za / (n - std::abs(kappa) + g);
  return 1.0 / std::sqrt(1.0 + x * x);
}

struct SpuriousStateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Channel {
  int kappa = 0;
  Eigen::VectorXd E;      // ascending
  Eigen::MatrixXd CG, CF; // spline coefficients, one column per state
};

//==============================================================================
// Finite pseudospectrum of the radial Dirac operator.  Large component in
// order-k clamped splines, small component in order-(k+1) splines on the same
// breakpoints, both with the first and last function removed.  The split
// order keeps the kappa > 0 channels free of spurious gap states; a detector
// verifies that on every solve.
class SpectrumSet {
public:
  double Z = 0.0; // 0 = free spectrum
  GridSpec grid;
  basis::SplineBasis bb;  // order k; also carries the quadrature mesh
  basis::BSplineSet fset; // order k+1
  int nG = 0, nF = 0;
  std::map<int, Channel> channels;
  Eigen::MatrixXd S_GG, S_FF;
  // level-0 node tables of the kept basis functions, shared by assembly and
  // by downstream state evaluation
  Eigen::MatrixXd BG, BGd, BF, BFd; // [nodes x nfun]

  const Channel &channel(int kappa) const {
    auto it = channels.find(kappa);
    if (it == channels.end())
      throw std::runtime_error("spectrum missing kappa channel " +
                               std::to_string(kappa) +
                               " (increase partial-wave budget coverage)");
    return it->second;
  }

  int nstates() const { return nG + nF; }

  bool grid_equal(const SpectrumSet &o) const {
    return grid.N == o.grid.N && grid.k == o.grid.k && grid.R == o.grid.R &&
           grid.scheme == o.grid.scheme && grid.gamma == o.grid.gamma;
  }
};

inline double overlap(const SpectrumSet &A, int ka, int ia,
                      const SpectrumSet &B, int kb, int ib) {
  if (!A.grid_equal(B))
    throw std::invalid_argument("overlap: mismatched radial bases");
  if (ka != kb)
    return 0.0;
  const auto &ca = A.channel(ka);
  const auto &cb = B.channel(kb);
  return ca.CG.col(ia).dot(A.S_GG * cb.CG.col(ib)) +
         ca.CF.col(ia).dot(A.S_FF * cb.CF.col(ib));
}

//==============================================================================
namespace detail {

// Check one solved channel for pathologies of the finite basis.
inline void check_channel(double Z, int kappa, const Eigen::VectorXd &E) {
  const double m = 1.0;
  if (Z <= 0.0) {
    for (int i = 0; i < E.size(); ++i)
      if (std::abs(E[i]) < m * (1.0 - 1.0e-3))
        throw SpuriousStateError("free spectrum state inside the mass gap, "
                                 "kappa=" +
                                 std::to_string(kappa));
    return;
  }
  // bound case: nothing below the channel's physical ground state, and no
  // near-degenerate doubling among gap states
  const int nmin = kappa < 0 ? -kappa : kappa + 1;
  const double e0 = sommerfeld_energy(Z, nmin, kappa);
  double prev = -10.0;
  for (int i = 0; i < E.size(); ++i) {
    const double e = E[i];
    if (e <= -m * (1.0 - 1.0e-6))
      continue;
    if (e >= m)
      break;
    if (e < e0 - 1.0e-5 * m)
      throw SpuriousStateError("state below channel ground level, kappa=" +
                               std::to_string(kappa));
    if (e - prev < 1.0e-9 * m)
      throw SpuriousStateError("near-degenerate doubled state, kappa=" +
                               std::to_string(kappa));
    prev = e;
  }
}

} // namespace detail

//==============================================================================
// Basis, node tables and overlap matrices without any eigensolve; channels
// are filled in by solve_channels or by a cache load.
inline SpectrumSet prepare_set(double Z, const GridSpec &g) {
  SpectrumSet S;
  S.Z = Z;
  S.grid = g;
  S.bb = basis::SplineBasis(g.N, g.k, g.R, g.scheme, g.gamma);
  S.fset = basis::BSplineSet(g.k + 1, S.bb.bs.breaks);

  const int nfunG = S.bb.nfun();      // N + k - 2
  const int nfunF = S.fset.nfun;      // N + k - 1
  S.nG = nfunG - 2;
  S.nF = nfunF - 2;

  const int nodes = int(S.bb.qx.size());
  S.BG.setZero(nodes, S.nG);
  S.BGd.setZero(nodes, S.nG);
  S.BF.setZero(nodes, S.nF);
  S.BFd.setZero(nodes, S.nF);
  double v[32], d[32];
  for (int t = 0; t < nodes; ++t) {
    const double x = S.bb.qx[t];
    int first = S.bb.bs.eval(x, v, d);
    for (int r = 0; r < g.k; ++r) {
      const int f = first + r - 1; // kept index: drop function 0
      if (f >= 0 && f < S.nG) {
        S.BG(t, f) = v[r];
        S.BGd(t, f) = d[r];
      }
    }
    first = S.fset.eval(x, v, d);
    for (int r = 0; r < g.k + 1; ++r) {
      const int f = first + r - 1;
      if (f >= 0 && f < S.nF) {
        S.BF(t, f) = v[r];
        S.BFd(t, f) = d[r];
      }
    }
  }

  Eigen::Map<const Eigen::VectorXd> w(S.bb.qw.data(), nodes);
  S.S_GG = S.BG.transpose() * w.asDiagonal() * S.BG;
  S.S_FF = S.BF.transpose() * w.asDiagonal() * S.BF;
  return S;
}

inline void solve_channels(SpectrumSet &S, const std::vector<int> &kappas) {
  const int nodes = int(S.bb.qx.size());
  Eigen::Map<const Eigen::VectorXd> w(S.bb.qw.data(), nodes);
  Eigen::Map<const Eigen::VectorXd> x(S.bb.qx.data(), nodes);
  Eigen::VectorXd winv_r = w.array() / x.array(); // w/r; nodes exclude r=0
  Eigen::VectorXd wV = -S.Z * consts::alpha * winv_r;

  const Eigen::MatrixXd H_GG_base =
      S.BG.transpose() * wV.asDiagonal() * S.BG + S.S_GG;
  const Eigen::MatrixXd H_FF_base =
      S.BF.transpose() * wV.asDiagonal() * S.BF - S.S_FF;

  const int dim = S.nG + S.nF;
  Eigen::MatrixXd H(dim, dim), Smat(dim, dim);
  Smat.setZero();
  Smat.topLeftCorner(S.nG, S.nG) = S.S_GG;
  Smat.bottomRightCorner(S.nF, S.nF) = S.S_FF;

  for (int kappa : kappas) {
    if (S.channels.count(kappa))
      continue;
    // H_GF = int G_i (-F_j' + (kappa/r) F_j) dr
    Eigen::MatrixXd H_GF =
        -S.BG.transpose() * w.asDiagonal() * S.BFd +
        double(kappa) * (S.BG.transpose() * winv_r.asDiagonal() * S.BF);
    H.topLeftCorner(S.nG, S.nG) = H_GG_base;
    H.bottomRightCorner(S.nF, S.nF) = H_FF_base;
    H.topRightCorner(S.nG, S.nF) = H_GF;
    H.bottomLeftCorner(S.nF, S.nG) = H_GF.transpose();

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Smat);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("eigensolver failed, kappa=" +
                               std::to_string(kappa));

    Channel ch;
    ch.kappa = kappa;
    ch.E = es.eigenvalues();
    ch.CG = es.eigenvectors().topRows(S.nG);
    ch.CF = es.eigenvectors().bottomRows(S.nF);
    detail::check_channel(S.Z, kappa, ch.E);
    S.channels.emplace(kappa, std::move(ch));
  }
}

inline SpectrumSet solve_spectrum(double Z, const GridSpec &g,
                                  const std::vector<int> &kappas) {
  SpectrumSet S = prepare_set(Z, g);
  solve_channels(S, kappas);
  return S;
}

// Index of the channel's lowest positive-energy gap state (the 1s for
// kappa = -1 of the bound spectrum).
inline int lowest_bound_index(const Channel &ch) {
  for (int i = 0; i < ch.E.size(); ++i)
    if (ch.E[i] > 0.5 && ch.E[i] < 1.0 - 1.0e-12)
      return i;
  throw std::runtime_error("no bound state found in channel");
}

} // namespace pwrse::spectrum
