#include "pwrse/wigner.hpp"
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

using namespace pwrse;

TEST_CASE("known closed-form 3j values") {
  // (j j 0; m -m 0) = (-1)^{j-m}/sqrt(2j+1)
  CHECK(angular::wigner3j(2, 2, 0, 1, -1, 0) ==
        Catch::Approx(-1.0 / std::sqrt(5.0)).epsilon(1e-14));
  CHECK(angular::wigner3j(0.5, 0.5, 0, 0.5, -0.5, 0) ==
        Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  // (1 1 2; 0 0 0) = sqrt(2/15)
  CHECK(angular::wigner3j(1, 1, 2, 0, 0, 0) ==
        Catch::Approx(std::sqrt(2.0 / 15.0)).epsilon(1e-14));
  // (1 1 1; 1 -1 0) = 1/sqrt(6)
  CHECK(angular::wigner3j(1, 1, 1, 1, -1, 0) ==
        Catch::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-14));
  // (3/2 1 1/2; 1/2 0 -1/2) = +1/sqrt(6)
  CHECK(angular::wigner3j(1.5, 1.0, 0.5, 0.5, 0.0, -0.5) ==
        Catch::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-13));
}

TEST_CASE("selection rules produce exact zeros") {
  CHECK(angular::wigner3j(1, 1, 3, 0, 0, 0) == 0.0);
  CHECK(angular::wigner3j(1, 1, 2, 1, 1, 0) == 0.0);
  CHECK(angular::wigner3j(0.5, 0.5, 0.5, 0.5, -0.5, 0) == 0.0);
  CHECK(angular::wigner3j(2, 2, 3, 0, 0, 0) == 0.0); // odd sum at zero m
}

TEST_CASE("half-integer validation") {
  CHECK_THROWS_AS(angular::wigner3j(0.3, 1, 1, 0, 0, 0),
                  std::invalid_argument);
}

TEST_CASE("orthogonality sum_m (2j3+1) 3j^2 = 1") {
  for (int tj1 : {1, 2, 3, 5}) {
    for (int tj2 : {1, 2, 4}) {
      for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2) {
        for (int tm2 = -tj2; tm2 <= tj2; tm2 += 2) {
          double sum = 0.0;
          for (int tj3 = std::abs(tj1 - tj2); tj3 <= tj1 + tj2; tj3 += 2) {
            double w =
                angular::wigner3j_2(tj1, tj2, tj3, tm1, tm2, -(tm1 + tm2));
            sum += (tj3 + 1.0) * w * w;
          }
          CHECK(sum == Catch::Approx(1.0).epsilon(1e-13));
        }
      }
    }
  }
}

TEST_CASE("column orthogonality over m1,m2") {
  // sum_{m1 m2} 3j(j1 j2 j3; m1 m2 m3)^2 = 1/(2j3+1)
  const int tj1 = 5, tj2 = 4, tj3 = 3, tm3 = 1;
  double sum = 0.0;
  for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2)
    for (int tm2 = -tj2; tm2 <= tj2; tm2 += 2) {
      if (tm1 + tm2 + tm3 != 0)
        continue;
      double w = angular::wigner3j_2(tj1, tj2, tj3, tm1, tm2, tm3);
      sum += w * w;
    }
  CHECK(sum == Catch::Approx(1.0 / (tj3 + 1.0)).epsilon(1e-13));
}

TEST_CASE("large-momentum values stay accurate") {
  // Regge-symmetric pair evaluated both ways
  double a = angular::wigner3j(20, 20, 20, 10, -4, -6);
  double b = angular::wigner3j(20, 20, 20, -10, 4, 6);
  CHECK(a == Catch::Approx(b).epsilon(1e-13)); // even sum: symmetric
  CHECK(std::abs(a) > 0.0);
}

TEST_CASE("clebsch-gordan composition") {
  // <1/2 1/2, 1/2 -1/2 | 1 0> = 1/sqrt(2)
  CHECK(angular::clebsch_2(1, 1, 1, -1, 2, 0) ==
        Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  // <1 1, 1 -1 | 0 0> = 1/sqrt(3)
  CHECK(angular::clebsch_2(2, 2, 2, -2, 0, 0) ==
        Catch::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
  // normalization: sum over (m1,m2) of CG^2 = 1 for each (j3,m3)
  double s = 0.0;
  for (int tm1 = -3; tm1 <= 3; tm1 += 2)
    for (int tm2 = -2; tm2 <= 2; tm2 += 2)
      if (tm1 + tm2 == 1) {
        double c = angular::clebsch_2(3, tm1, 2, tm2, 3, 1);
        s += c * c;
      }
  CHECK(s == Catch::Approx(1.0).epsilon(1e-13));
}
