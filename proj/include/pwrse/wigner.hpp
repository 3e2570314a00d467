#pragma once
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>

namespace pwrse::angular {

namespace mp = boost::multiprecision;
using BigInt = mp::cpp_int;
using BigRat = mp::cpp_rational;
using BigFloat = mp::cpp_bin_float_50;

inline BigInt factorial(int n) {
  BigInt f = 1;
  for (int i = 2; i <= n; ++i)
    f *= i;
  return f;
}

// Racah's formula evaluated in exact rational arithmetic, rounded once at the
// end.  Arguments are twice the angular momenta / projections.
inline double wigner3j_2(int tj1, int tj2, int tj3, int tm1, int tm2, int tm3) {
  if (tm1 + tm2 + tm3 != 0)
    return 0.0;
  if (std::abs(tm1) > tj1 || std::abs(tm2) > tj2 || std::abs(tm3) > tj3)
    return 0.0;
  if ((tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tj3 + tm3) % 2 != 0)
    return 0.0;
  if (tj3 > tj1 + tj2 || tj3 < std::abs(tj1 - tj2))
    return 0.0;
  if ((tj1 + tj2 + tj3) % 2 != 0)
    return 0.0;

  auto h = [](int t) { return t / 2; }; // all combinations below are even
  const int a1 = h(tj1 + tj2 - tj3), a2 = h(tj1 - tj2 + tj3),
            a3 = h(-tj1 + tj2 + tj3);
  BigRat delta(factorial(a1) * factorial(a2) * factorial(a3),
               factorial(h(tj1 + tj2 + tj3) + 1));
  BigInt num = factorial(h(tj1 + tm1)) * factorial(h(tj1 - tm1)) *
               factorial(h(tj2 + tm2)) * factorial(h(tj2 - tm2)) *
               factorial(h(tj3 + tm3)) * factorial(h(tj3 - tm3));

  const int t_min = std::max({0, h(tj2 - tj3 - tm1), h(tj1 - tj3 + tm2)});
  const int t_max = std::min({a1, h(tj1 - tm1), h(tj2 + tm2)});
  BigRat sum = 0;
  for (int t = t_min; t <= t_max; ++t) {
    BigInt den = factorial(t) * factorial(h(tj3 - tj2 + tm1) + t) *
                 factorial(h(tj3 - tj1 - tm2) + t) * factorial(a1 - t) *
                 factorial(h(tj1 - tm1) - t) * factorial(h(tj2 + tm2) - t);
    BigRat term(1, den);
    if (t % 2 != 0)
      term = -term;
    sum += term;
  }
  if (sum == 0)
    return 0.0;

  BigRat inside = delta * BigRat(num, 1); // (3j)^2 = inside * sum^2, signed sum
  BigFloat val = sqrt(BigFloat(inside)) * BigFloat(sum);
  int phase = h(tj1 - tj2 - tm3);
  if (((phase % 2) + 2) % 2 == 1)
    val = -val;
  return val.convert_to<double>();
}

inline uint64_t pack6(int a, int b, int c, int d, int e, int f) {
  auto u = [](int v) { return uint64_t(v + 300) & 0x3FF; };
  return u(a) | (u(b) << 10) | (u(c) << 20) | (u(d) << 30) | (u(e) << 40) |
         (u(f) << 50);
}

inline double wigner3j_2_cached(int tj1, int tj2, int tj3, int tm1, int tm2,
                                int tm3) {
  static std::map<uint64_t, double> cache;
  static std::mutex mtx;
  const uint64_t key = pack6(tj1, tj2, tj3, tm1, tm2, tm3);
  std::lock_guard<std::mutex> lk(mtx);
  auto it = cache.find(key);
  if (it != cache.end())
    return it->second;
  double v = wigner3j_2(tj1, tj2, tj3, tm1, tm2, tm3);
  cache.emplace(key, v);
  return v;
}

inline int to_twice(double j, const char *what) {
  double t = 2.0 * j;
  double r = std::round(t);
  if (std::abs(t - r) > 1.0e-9)
    throw std::invalid_argument(std::string(what) +
                                ": not integer or half-integer");
  return int(r);
}

inline double wigner3j(double j1, double j2, double j3, double m1, double m2,
                       double m3) {
  return wigner3j_2_cached(to_twice(j1, "j1"), to_twice(j2, "j2"),
                           to_twice(j3, "j3"), to_twice(m1, "m1"),
                           to_twice(m2, "m2"), to_twice(m3, "m3"));
}

// <j1 m1, j2 m2 | j3 m3>
inline double clebsch_2(int tj1, int tm1, int tj2, int tm2, int tj3, int tm3) {
  double w = wigner3j_2_cached(tj1, tj2, tj3, tm1, tm2, -tm3);
  if (w == 0.0)
    return 0.0;
  int phase = (tj1 - tj2 + tm3) / 2;
  double s = (((phase % 2) + 2) % 2 == 0) ? 1.0 : -1.0;
  return s * std::sqrt(tj3 + 1.0) * w;
}

} // namespace pwrse::angular
