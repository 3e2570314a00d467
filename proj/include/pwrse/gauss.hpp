#pragma once
#include <cassert>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

namespace pwrse::quad {

struct Rule {
  std::vector<double> x, w; // nodes/weights on (-1, 1)
};

// Nodes by Newton iteration on P_q; converges to full double precision.
inline Rule make_legendre(int q) {
  assert(q >= 1);
  Rule r;
  r.x.resize(q);
  r.w.resize(q);
  for (int i = 0; i < q; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (q + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < q; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = q * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1.0e-15)
        break;
    }
    r.x[i] = x;
    r.w[i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
  return r;
}

inline const Rule &legendre(int q) {
  static std::map<int, Rule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lk(mtx);
  auto it = cache.find(q);
  if (it == cache.end())
    it = cache.emplace(q, make_legendre(q)).first;
  return it->second;
}

} // namespace pwrse::quad
