#pragma once
#include "pwrse/constants.hpp"
#include "pwrse/selfenergy.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pwrse::sese {

// Limit of a partial-wave sequence from its even and odd partial sums.  The
// last three points of each parity are fit to a + b/(L+1) + c/(L+1)^2 and
// read off at 1/(L+1) = 0; the quoted value is the mean of the two limits and
// the error half their spread.  Short sequences fall back to lower order.
struct SeriesFit {
  double value = 0, err = 0;
  std::vector<double> even_sums, odd_sums;
};

namespace detail {

inline double tail_limit(const std::vector<std::pair<double, double>> &pts) {
  const int n = int(pts.size());
  if (n == 0)
    throw std::invalid_argument("empty partial-sum sequence");
  if (n == 1)
    return pts[0].second;
  if (n == 2) {
    const double u1 = 1.0 / pts[n - 2].first, u2 = 1.0 / pts[n - 1].first;
    const double b = (pts[n - 2].second - pts[n - 1].second) / (u1 - u2);
    return pts[n - 1].second - b * u2;
  }
  const double u1 = 1.0 / pts[n - 3].first, u2 = 1.0 / pts[n - 2].first,
               u3 = 1.0 / pts[n - 1].first;
  const double s1 = pts[n - 3].second, s2 = pts[n - 2].second,
               s3 = pts[n - 1].second;
  return s1 * (u2 * u3) / ((u1 - u2) * (u1 - u3)) +
         s2 * (u1 * u3) / ((u2 - u1) * (u2 - u3)) +
         s3 * (u1 * u2) / ((u3 - u1) * (u3 - u2));
}

} // namespace detail

inline SeriesFit fit_partial_waves(const std::vector<double> &terms) {
  const int n = int(terms.size());
  if (n == 0)
    throw std::invalid_argument("no partial-wave terms");
  SeriesFit fit;
  std::vector<std::pair<double, double>> ev, od;
  double run = 0;
  for (int L = 0; L < n; ++L) {
    run += terms[L];
    if (L % 2 == 0) {
      ev.push_back({L + 1.0, run});
      fit.even_sums.push_back(run);
    } else {
      od.push_back({L + 1.0, run});
      fit.odd_sums.push_back(run);
    }
  }
  const double ae = detail::tail_limit(ev);
  if (od.empty()) {
    fit.value = ae;
    return fit;
  }
  const double ao = detail::tail_limit(od);
  fit.value = 0.5 * (ae + ao);
  fit.err = 0.5 * std::abs(ae - ao);
  return fit;
}

// Scale factor between a level shift and its tabulated dimensionless form,
// shift = scale * G with the shift in electron rest-energy units.
inline double g_scale(double Z, int n_shell) {
  const double a = consts::alpha;
  const double za = Z * a;
  return (a / M_PI) * (a / M_PI) * za * za * za * za * za /
         double(n_shell * n_shell * n_shell);
}

struct FirstOrder {
  std::vector<double> terms; // renormalized diagonal per multipole, m units
  SeriesFit fit;
};

inline FirstOrder first_order(const se::ElementTables &el,
                              bool sign_only = false, bool log_only = false) {
  const auto &blk = el.diag_block();
  const int f = blk.a_slot;
  FirstOrder out;
  for (int l = 0; l <= el.s; ++l)
    out.terms.push_back(sign_only  ? blk.renorm_sign_only(l, f)
                        : log_only ? blk.renorm_log_only(l, f)
                                   : blk.renorm(l, f));
  out.fit = fit_partial_waves(out.terms);
  return out;
}

// Irreducible two-loop shift: the renormalized element row against every
// other state of the reference channel, squared, over the energy gap,
//   sum_n M_l1(n) M_l2(n) / (E_a - E_n),
// accumulated as a multipole table T(l1,l2) and summed in shells of
// L = max(l1,l2) for the parity extrapolation.  States inside the gap window
// are excluded; exactly one (the reference state itself) must fall in it.
struct SeseResult {
  double value = 0, err = 0; // extrapolated shift, m units
  double g = 0;              // value / g_scale
  std::vector<double> terms; // shell terms over L = max(l1,l2)
  SeriesFit fit;
  Eigen::MatrixXd table;      // T(l1,l2)
  double negative_part = 0;   // full table sum restricted to E_n < 0
  int excluded_index = -1;
  double value_sum = 0;       // unextrapolated table sum
};

inline SeseResult sese_irreducible(const se::ElementTables &el, double Z,
                                   int n_shell = 1, bool sign_only = false,
                                   double window = 1e-10) {
  const auto &blk = el.diag_block();
  const int nf = blk.nf(), L = el.s;

  std::vector<int> keep;
  int excluded = -1;
  for (int f = 0; f < nf; ++f) {
    if (std::abs(blk.E[f] - el.E_a) < window) {
      if (excluded >= 0)
        throw std::runtime_error("gap window excluded more than one state");
      excluded = f;
      continue;
    }
    keep.push_back(f);
  }
  if (excluded < 0)
    throw std::runtime_error("gap window excluded no state");
  if (excluded != blk.a_slot)
    throw std::runtime_error("gap window excluded a state other than the "
                             "reference state");

  const int nk = int(keep.size());
  Eigen::MatrixXd M(L + 1, nk);
  Eigen::VectorXd w(nk), neg(nk);
  for (int j = 0; j < nk; ++j) {
    const int f = keep[j];
    for (int l = 0; l <= L; ++l)
      M(l, j) = sign_only ? blk.renorm_sign_only(l, f) : blk.renorm(l, f);
    w[j] = 1.0 / (el.E_a - blk.E[f]);
    neg[j] = blk.E[f] < 0 ? w[j] : 0.0;
  }

  SeseResult out;
  out.excluded_index = excluded;
  out.table = M * w.asDiagonal() * M.transpose();
  out.negative_part = (M * neg.asDiagonal() * M.transpose()).sum();

  for (int s = 0; s <= L; ++s) {
    double t = out.table(s, s);
    for (int l = 0; l < s; ++l)
      t += out.table(l, s) + out.table(s, l);
    out.terms.push_back(t);
    out.value_sum += t;
  }
  out.fit = fit_partial_waves(out.terms);
  out.value = out.fit.value;
  out.err = out.fit.err;
  out.g = out.value / g_scale(Z, n_shell);
  return out;
}

} // namespace pwrse::sese
