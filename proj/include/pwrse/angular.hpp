#pragma once
#include "pwrse/wigner.hpp"
#include <array>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <vector>

namespace pwrse::angular {

inline int l_of_kappa(int kap) { return kap > 0 ? kap : -kap - 1; }
inline int twoj_of_kappa(int kap) { return 2 * std::abs(kap) - 1; }

inline double parity_phase(int p) { return (((p % 2) + 2) % 2 == 0) ? 1.0 : -1.0; }

// <Y_{l1 m1} | C^l_m | Y_{l2 m2}> (Gaunt, C-normalized tensor)
inline double yCy(int l1, int m1, int l, int m, int l2, int m2) {
  if (m1 != m + m2)
    return 0.0;
  if ((l1 + l + l2) % 2 != 0)
    return 0.0;
  double w0 = wigner3j_2_cached(2 * l1, 2 * l, 2 * l2, 0, 0, 0);
  if (w0 == 0.0)
    return 0.0;
  double wm = wigner3j_2_cached(2 * l1, 2 * l, 2 * l2, -2 * m1, 2 * m, 2 * m2);
  return parity_phase(m1) * std::sqrt((2.0 * l1 + 1.0) * (2.0 * l2 + 1.0)) *
         w0 * wm;
}

// coefficient of Y_{l, (mu-s)} chi_s in Omega_{kappa mu}; ts = 2s = ±1
inline double omega_coeff(int kappa, int tmu, int ts) {
  const int l = l_of_kappa(kappa);
  const int tj = twoj_of_kappa(kappa);
  if (std::abs(tmu) > tj)
    return 0.0;
  return clebsch_2(2 * l, tmu - ts, 1, ts, tj, tmu);
}

// <Omega_{k1 mu1} | C^l_m | Omega_{k2 mu2}>
inline double A1(int l, int m, int k1, int tmu1, int k2, int tmu2) {
  if (tmu1 != tmu2 + 2 * m)
    return 0.0;
  double sum = 0.0;
  for (int ts = -1; ts <= 1; ts += 2) {
    double c1 = omega_coeff(k1, tmu1, ts);
    if (c1 == 0.0)
      continue;
    double c2 = omega_coeff(k2, tmu2, ts);
    if (c2 == 0.0)
      continue;
    sum += c1 * c2 *
           yCy(l_of_kappa(k1), (tmu1 - ts) / 2, l, m, l_of_kappa(k2),
               (tmu2 - ts) / 2);
  }
  return sum;
}

// spherical components of sigma between spin states; real in this basis
inline double sigma_el(int q, int ts_bra, int ts_ket) {
  if (q == 0)
    return (ts_bra == ts_ket) ? double(ts_ket) : 0.0;
  if (q == 1)
    return (ts_bra == 1 && ts_ket == -1) ? -std::sqrt(2.0) : 0.0;
  return (ts_bra == -1 && ts_ket == 1) ? std::sqrt(2.0) : 0.0;
}

// <Omega_{k1 mu1} | sigma_q C^l_m | Omega_{k2 mu2}>
inline double Asig(int l, int q, int m, int k1, int tmu1, int k2, int tmu2) {
  if (tmu1 != tmu2 + 2 * (m + q))
    return 0.0;
  double sum = 0.0;
  for (int tsb = -1; tsb <= 1; tsb += 2) {
    double c1 = omega_coeff(k1, tmu1, tsb);
    if (c1 == 0.0)
      continue;
    for (int tsk = -1; tsk <= 1; tsk += 2) {
      double se = sigma_el(q, tsb, tsk);
      if (se == 0.0)
        continue;
      double c2 = omega_coeff(k2, tmu2, tsk);
      if (c2 == 0.0)
        continue;
      sum += c1 * se * c2 *
             yCy(l_of_kappa(k1), (tmu1 - tsb) / 2, l, m, l_of_kappa(k2),
                 (tmu2 - tsk) / 2);
    }
  }
  return sum;
}

// <kappa1 || C^l || kappa2>
inline double reduced_Cl(int k1, int l, int k2) {
  if ((l_of_kappa(k1) + l + l_of_kappa(k2)) % 2 != 0)
    return 0.0;
  const int tj1 = twoj_of_kappa(k1), tj2 = twoj_of_kappa(k2);
  double w = wigner3j_2_cached(tj1, 2 * l, tj2, 1, 0, -1);
  return parity_phase((tj1 + 1) / 2) * std::sqrt((tj1 + 1.0) * (tj2 + 1.0)) * w;
}

//==============================================================================
// Contraction weights for one photon multipole between the two vertex matrix
// elements, with the intermediate projection summed and the reference
// projections fixed at mu = +1/2 (results are mu-independent for kf = ka).
//
// scal multiplies the 1x1 piece; w11..w22 multiply the four large/small
// radial combinations of the alpha.alpha piece:
//   B = scal*R1*R1' + w11*P1*P1' - w12*P1*P2' - w21*P2*P1' + w22*P2*P2'
// with P1 = int G_x F_y j_l, P2 = int F_x G_y j_l at each vertex.
struct Weights {
  double scal = 0, w11 = 0, w12 = 0, w21 = 0, w22 = 0;
  bool any(double tol = 1.0e-13) const {
    return std::abs(scal) > tol || std::abs(w11) > tol || std::abs(w12) > tol ||
           std::abs(w21) > tol || std::abs(w22) > tol;
  }
};

inline Weights contraction_weights(int l, int ka, int km, int kf) {
  Weights W;
  const int tjm = twoj_of_kappa(km);
  // scalar piece: mu_m = 1/2 - m forced by projection conservation
  for (int m = -l; m <= l; ++m) {
    const int tmum = 1 - 2 * m;
    if (std::abs(tmum) > tjm)
      continue;
    double f1 = A1(l, m, ka, 1, km, tmum);
    if (f1 == 0.0)
      continue;
    double f2 = A1(l, -m, km, tmum, kf, 1);
    W.scal += parity_phase(m) * f1 * f2;
  }
  // vector piece: mu_m = 1/2 - m - q
  for (int q = -1; q <= 1; ++q) {
    for (int m = -l; m <= l; ++m) {
      const int tmum = 1 - 2 * (m + q);
      if (std::abs(tmum) > tjm)
        continue;
      const double ph = parity_phase(q + m);
      double a1p = Asig(l, q, m, ka, 1, -km, tmum);
      double a1m = Asig(l, q, m, -ka, 1, km, tmum);
      double a2p = Asig(l, -q, -m, km, tmum, -kf, 1);
      double a2m = Asig(l, -q, -m, -km, tmum, kf, 1);
      W.w11 += ph * a1p * a2p;
      W.w12 += ph * a1p * a2m;
      W.w21 += ph * a1m * a2p;
      W.w22 += ph * a1m * a2m;
    }
  }
  return W;
}

// Cached weights; key (l, ka, km, kf).
class WeightTable {
public:
  const Weights &get(int l, int ka, int km, int kf) {
    const uint64_t key = pack6(l, ka, km, kf, 0, 0);
    std::lock_guard<std::mutex> lk(m_mtx);
    auto it = m_map.find(key);
    if (it == m_map.end())
      it = m_map.emplace(key, contraction_weights(l, ka, km, kf)).first;
    return it->second;
  }
  // kappa_m channels coupling to (ka -> kf) at multipole l
  std::vector<int> channels(int l, int ka, int kf, int kmax) {
    std::vector<int> out;
    for (int ak = 1; ak <= kmax; ++ak)
      for (int km : {-ak, ak})
        if (get(l, ka, km, kf).any())
          out.push_back(km);
    return out;
  }

private:
  std::map<uint64_t, Weights> m_map;
  std::mutex m_mtx;
};

} // namespace pwrse::angular
