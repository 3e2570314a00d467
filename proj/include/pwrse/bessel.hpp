#pragma once
#include <cassert>
#include <cmath>
#include <vector>

namespace pwrse::bessel {

// j_l and n_l for l = 0..L at one argument.  Negative x via parity:
// j_l(-x) = (-1)^l j_l(x), n_l(-x) = (-1)^{l+1} n_l(x).
// j: upward recurrence for x >= L (oscillatory regime, neutral), otherwise
// Miller downward normalized on j_0 (or j_1 near a j_0 zero); series for
// small x.  n: upward recurrence, stable everywhere.
struct JN {
  std::vector<double> j, n;
};

inline double j_series(int l, double x) {
  // x^l/(2l+1)!! * sum_m (-x^2/2)^m / (m! (2l+3)(2l+5)...(2l+2m+1))
  double df = 1.0;
  for (int i = 3; i <= 2 * l + 1; i += 2)
    df *= i;
  double pref = 1.0;
  for (int i = 0; i < l; ++i) {
    pref *= x;
    if (pref < 1.0e-290 / df * 1.0e-10)
      return 0.0;
  }
  pref /= df;
  double term = 1.0, sum = 1.0;
  const double x2 = x * x;
  for (int m = 1; m < 60; ++m) {
    term *= -x2 / (2.0 * m * (2.0 * (l + m) + 1.0));
    sum += term;
    if (std::abs(term) < 1.0e-17 * std::abs(sum))
      break;
  }
  return pref * sum;
}

inline void sph_jn(int L, double x_in, JN &out) {
  out.j.assign(L + 1, 0.0);
  out.n.assign(L + 1, 0.0);
  const double ax = std::abs(x_in);
  assert(ax > 0.0);
  const double s = std::sin(ax), c = std::cos(ax);

  // n_l up
  double n0 = -c / ax;
  out.n[0] = n0;
  if (L >= 1) {
    double n1 = -c / (ax * ax) - s / ax;
    out.n[1] = n1;
    for (int l = 2; l <= L; ++l) {
      double n2 = (2.0 * l - 1.0) / ax * n1 - n0;
      if (n2 < -1.0e300)
        n2 = -1.0e300;
      n0 = n1;
      n1 = n2;
      out.n[l] = n2;
    }
  }

  if (ax < 0.1) {
    for (int l = 0; l <= L; ++l)
      out.j[l] = j_series(l, ax);
  } else if (ax >= L) {
    double j0 = s / ax;
    out.j[0] = j0;
    if (L >= 1) {
      double j1 = s / (ax * ax) - c / ax;
      out.j[1] = j1;
      for (int l = 2; l <= L; ++l) {
        double j2 = (2.0 * l - 1.0) / ax * j1 - j0;
        j0 = j1;
        j1 = j2;
        out.j[l] = j2;
      }
    }
  } else {
    const int ltop = L + 15 + int(std::sqrt(40.0 * L));
    double jp = 0.0, jc = 1.0e-300;
    for (int l = ltop; l > L; --l) {
      double jm = (2.0 * l + 1.0) / ax * jc - jp;
      jp = jc;
      jc = jm;
      if (std::abs(jc) > 1.0e250) {
        jc *= 1.0e-250;
        jp *= 1.0e-250;
      }
    }
    for (int l = L; l >= 0; --l) {
      out.j[l] = jc;
      double jm = (2.0 * l + 1.0) / ax * jc - jp;
      jp = jc;
      jc = jm;
      if (std::abs(jc) > 1.0e250) {
        jc *= 1.0e-250;
        jp *= 1.0e-250;
        for (int m = l; m <= L; ++m)
          out.j[m] *= 1.0e-250;
      }
    }
    const double j0_true = s / ax;
    double scale;
    if (std::abs(j0_true) > 1.0e-2 / ax && out.j[0] != 0.0) {
      scale = j0_true / out.j[0];
    } else {
      const double j1_true = s / (ax * ax) - c / ax;
      scale = j1_true / out.j[1];
    }
    for (int l = 0; l <= L; ++l)
      out.j[l] *= scale;
  }

  if (x_in < 0.0) {
    for (int l = 0; l <= L; ++l) {
      if (l % 2 == 1)
        out.j[l] = -out.j[l];
      if (l % 2 == 0)
        out.n[l] = -out.n[l];
    }
  }
}

// f'_l = f_{l-1} - (l+1)/x f_l for f = j or n; needs f.size() > max(1, l).
inline double deriv(const std::vector<double> &f, int l, double x) {
  if (l == 0)
    return -f[1];
  return f[l - 1] - (l + 1) / x * f[l];
}

} // namespace pwrse::bessel
