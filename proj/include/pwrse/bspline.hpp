#pragma once
#include "pwrse/gauss.hpp"
#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwrse::basis {

enum class GridScheme { Exponential, Linear };

inline std::string scheme_name(GridScheme s) {
  return s == GridScheme::Exponential ? "exp" : "lin";
}

// t_j = R (e^{g u} - 1)/(e^g - 1), u = j/(N-1); g -> 0 recovers linear
inline std::vector<double> make_breakpoints(GridScheme s, int N, double R,
                                            double gamma) {
  std::vector<double> t(N);
  for (int j = 0; j < N; ++j) {
    double u = double(j) / (N - 1);
    if (s == GridScheme::Linear || gamma < 1.0e-12)
      t[j] = R * u;
    else
      t[j] = R * std::expm1(gamma * u) / std::expm1(gamma);
  }
  t.front() = 0.0;
  t.back() = R;
  return t;
}

//==============================================================================
// Clamped B-spline set of given order on shared breakpoints.
// Function count follows the standard convention nfun = N + order - 2.
class BSplineSet {
public:
  int order = 0;
  std::vector<double> breaks;
  std::vector<double> knots; // clamped, size N + 2*order - 2
  int nfun = 0;

  BSplineSet() = default;
  BSplineSet(int k, std::vector<double> brk) : order(k), breaks(std::move(brk)) {
    const int N = int(breaks.size());
    if (k < 2)
      throw std::invalid_argument("spline order must be >= 2");
    if (N < k)
      throw std::invalid_argument("need at least as many grid points as order");
    knots.resize(N + 2 * k - 2);
    for (int i = 0; i < k; ++i)
      knots[i] = breaks.front();
    for (int j = 1; j < N - 1; ++j)
      knots[k - 1 + j] = breaks[j];
    for (int i = 0; i < k; ++i)
      knots[N + k - 2 + i] = breaks.back();
    nfun = N + k - 2;
  }

  int ncells() const { return int(breaks.size()) - 1; }

  int find_cell(double x) const {
    int c = int(std::upper_bound(breaks.begin(), breaks.end(), x) -
                breaks.begin()) -
            1;
    return std::clamp(c, 0, ncells() - 1);
  }

  // Values and first derivatives of the `order` splines that can be nonzero
  // at x (function indices first..first+order-1).  Returns `first`.
  int eval(double x, double *val, double *der) const {
    const int k = order;
    const int c = find_cell(x);
    const int i = k - 1 + c; // knot interval: knots[i] <= x < knots[i+1]
    double left[32], right[32], Nk[32], Nkm1[32];
    assert(k < 32);
    Nk[0] = 1.0;
    Nkm1[0] = 1.0;
    for (int j = 1; j < k; ++j) {
      left[j] = x - knots[i + 1 - j];
      right[j] = knots[i + j] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        double tmp = Nk[r] / (right[r + 1] + left[j - r]);
        Nk[r] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      Nk[j] = saved;
      if (j == k - 2)
        for (int r = 0; r < k - 1; ++r)
          Nkm1[r] = Nk[r];
    }
    const int first = c; // = i - k + 1 in function indexing
    for (int r = 0; r < k; ++r) {
      val[r] = Nk[r];
      // B'_f = (k-1) [ N_{f,k-1}/(t_{f+k-1}-t_f) - N_{f+1,k-1}/(t_{f+k}-t_{f+1}) ]
      // order-(k-1) values Nkm1[] hold functions first+1 .. first+k-1
      double a = 0.0, b = 0.0;
      int f = first + r;
      if (r > 0) {
        double dt = knots[f + k - 1] - knots[f];
        if (dt > 0.0)
          a = Nkm1[r - 1] / dt;
      }
      if (r < k - 1) {
        double dt = knots[f + k] - knots[f + 1];
        if (dt > 0.0)
          b = Nkm1[r] / dt;
      }
      der[r] = (k - 1) * (a - b);
    }
    return first;
  }
};

//==============================================================================
// Line + upper-triangle Gauss nodes for one cell at a refinement level.
// Level 0: one segment of q0 points.  Level J>=1: 2^J segments of 8 points.
// Triangle inner nodes live on (x_g, segment_hi); the lower triangle of a
// 2D cell integral is recovered by swapping the roles of the two factors.
struct LevelNodes {
  static constexpr int qin = 8; // inner nodes per outer node
  int nseg = 0, q = 0;
  std::vector<double> x, w;   // [nseg*q]
  std::vector<double> ty, tw; // [nseg*q*qin]
  int nline() const { return nseg * q; }
  int ntri() const { return nseg * q * qin; }
};

inline LevelNodes make_level_nodes(double lo, double hi, int level, int q0) {
  LevelNodes L;
  L.nseg = 1 << level;
  L.q = (level == 0) ? q0 : 8;
  const auto &gl = quad::legendre(L.q);
  const auto &gi = quad::legendre(LevelNodes::qin);
  const int q = L.q, qi = LevelNodes::qin;
  L.x.resize(L.nseg * q);
  L.w.resize(L.nseg * q);
  L.ty.resize(L.nseg * q * qi);
  L.tw.resize(L.nseg * q * qi);
  const double h = (hi - lo) / L.nseg;
  for (int s = 0; s < L.nseg; ++s) {
    const double a = lo + s * h, b = a + h;
    for (int g = 0; g < q; ++g) {
      const double xg = 0.5 * (a + b) + 0.5 * h * gl.x[g];
      L.x[s * q + g] = xg;
      L.w[s * q + g] = 0.5 * h * gl.w[g];
      const double hi2 = b - xg;
      for (int j = 0; j < qi; ++j) {
        L.ty[(s * q + g) * qi + j] = xg + 0.5 * hi2 * (1.0 + gi.x[j]);
        L.tw[(s * q + g) * qi + j] = 0.5 * hi2 * gi.w[j];
      }
    }
  }
  return L;
}

// Phase budget a q-point Gauss segment resolves to ~1e-12; empirical fit.
inline double phase_budget(int q) { return 0.55 * q - 1.2; }

inline int level_for(double dh, int q0, int max_level) {
  if (dh <= phase_budget(q0))
    return 0;
  int J = int(std::ceil(std::log2(dh / phase_budget(8))));
  return std::clamp(J, 1, max_level);
}

//==============================================================================
class SplineBasis {
public:
  int N = 0, k = 0;
  double R = 0.0, gamma = 0.0;
  GridScheme scheme = GridScheme::Exponential;
  BSplineSet bs;
  int q0 = 0;                 // quadrature points per cell (k+3)
  std::vector<double> qx, qw; // level-0 line nodes, [cell*q0 + g]

  SplineBasis() = default;
  SplineBasis(int N_, int k_, double R_, GridScheme s, double gamma_)
      : N(N_), k(k_), R(R_), gamma(gamma_), scheme(s) {
    if (R <= 0.0)
      throw std::invalid_argument("box radius must be positive");
    if (N < k)
      throw std::invalid_argument("grid points must be >= spline order");
    bs = BSplineSet(k, make_breakpoints(s, N, R, gamma));
    q0 = k + 3;
    const int nc = bs.ncells();
    qx.resize(nc * q0);
    qw.resize(nc * q0);
    const auto &gl = quad::legendre(q0);
    for (int c = 0; c < nc; ++c) {
      const double a = bs.breaks[c], b = bs.breaks[c + 1];
      for (int g = 0; g < q0; ++g) {
        qx[c * q0 + g] = 0.5 * (a + b) + 0.5 * (b - a) * gl.x[g];
        qw[c * q0 + g] = 0.5 * (b - a) * gl.w[g];
      }
    }
  }

  int ncells() const { return bs.ncells(); }
  int nfun() const { return bs.nfun; }
  double cell_width(int c) const { return bs.breaks[c + 1] - bs.breaks[c]; }

  // Value/derivative of every basis function at r (dense, mostly zero).
  void evaluate(double r, std::vector<double> &val,
                std::vector<double> &der) const {
    if (r < 0.0 || r > R)
      throw std::invalid_argument("evaluate: r outside interval [0, R]");
    val.assign(nfun(), 0.0);
    der.assign(nfun(), 0.0);
    double v[32], d[32];
    int first = bs.eval(r, v, d);
    for (int r2 = 0; r2 < k; ++r2) {
      val[first + r2] = v[r2];
      der[first + r2] = d[r2];
    }
  }

  template <class F> double integrate(F &&f, int c0, int c1) const {
    double s = 0.0;
    for (int c = c0; c <= c1; ++c)
      for (int g = 0; g < q0; ++g)
        s += qw[c * q0 + g] * f(qx[c * q0 + g]);
    return s;
  }
  template <class F> double integrate(F &&f) const {
    return integrate(std::forward<F>(f), 0, ncells() - 1);
  }
};

inline SplineBasis build_basis(int N, int k, double R,
                               GridScheme s = GridScheme::Exponential,
                               double gamma = 10.0) {
  return SplineBasis(N, k, R, s, gamma);
}

} // namespace pwrse::basis
