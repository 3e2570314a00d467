#include "pwrse/constants.hpp"
#include "pwrse/dirac.hpp"
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

using namespace pwrse;

namespace {
spectrum::GridSpec grid_for(double Z, int N = 28, int k = 9) {
  spectrum::GridSpec g;
  g.N = N;
  g.k = k;
  g.R = 40.0 / (Z * consts::alpha);
  return g;
}
} // namespace

TEST_CASE("point-nucleus eigenvalue formula reference values") {
  // ground state energy = sqrt(1 - (Z alpha)^2) in m_e units
  const double za = 92.0 * consts::alpha;
  CHECK(spectrum::sommerfeld_energy(92, 1, -1) ==
        Catch::Approx(std::sqrt(1.0 - za * za)).epsilon(1e-14));
  CHECK(spectrum::sommerfeld_energy(92, 1, -1) ==
        Catch::Approx(0.74113463).epsilon(1e-7));
  // 2s and 2p_1/2 degenerate
  CHECK(spectrum::sommerfeld_energy(10, 2, -1) ==
        Catch::Approx(spectrum::sommerfeld_energy(10, 2, 1)).epsilon(1e-15));
}

TEST_CASE("finite-basis energies match the analytic spectrum to 1e-6") {
  for (double Z : {1.0, 10.0, 50.0, 92.0}) {
    auto S = spectrum::solve_spectrum(Z, grid_for(Z), {-1, 1, -2});
    struct Probe {
      int kappa, n, off;
    };
    // off = position above the channel's lowest gap state
    for (auto [kappa, n, off] : {Probe{-1, 1, 0}, Probe{-1, 2, 1},
                                 Probe{1, 2, 0}, Probe{-2, 2, 0}}) {
      const auto &ch = S.channel(kappa);
      int i0 = spectrum::lowest_bound_index(ch);
      double got = ch.E[i0 + off];
      double want = spectrum::sommerfeld_energy(Z, n, kappa);
      INFO("Z=" << Z << " kappa=" << kappa << " n=" << n);
      CHECK(std::abs(got - want) / std::abs(want) < 1.0e-6);
    }
  }
}

TEST_CASE("eigenvectors come out S-orthonormal") {
  auto S = spectrum::solve_spectrum(30.0, grid_for(30.0, 20, 7), {-1, 2});
  for (const auto &[kap, ch] : S.channels) {
    const int n = int(ch.E.size());
    Eigen::MatrixXd G = ch.CG.transpose() * S.S_GG * ch.CG +
                        ch.CF.transpose() * S.S_FF * ch.CF;
    CHECK((G - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <
          1.0e-10);
  }
}

TEST_CASE("pseudospectrum is complete within the basis span") {
  auto S = spectrum::solve_spectrum(20.0, grid_for(20.0, 18, 6), {-1});
  const auto &ch = S.channel(-1);
  const int nG = S.nG, nF = S.nF;
  // random spline-representable vector f: sum_n <f|n><n|g> must equal <f|g>
  Eigen::VectorXd fG = Eigen::VectorXd::Random(nG), fF = Eigen::VectorXd::Random(nF);
  Eigen::VectorXd gG = Eigen::VectorXd::Random(nG), gF = Eigen::VectorXd::Random(nF);
  Eigen::VectorXd pf = ch.CG.transpose() * (S.S_GG * fG) +
                       ch.CF.transpose() * (S.S_FF * fF);
  Eigen::VectorXd pg = ch.CG.transpose() * (S.S_GG * gG) +
                       ch.CF.transpose() * (S.S_FF * gF);
  double lhs = pf.dot(pg);
  double rhs = fG.dot(S.S_GG * gG) + fF.dot(S.S_FF * gF);
  CHECK(lhs == Catch::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("free spectrum has no states inside the mass gap") {
  auto g = grid_for(92.0);
  auto S = spectrum::solve_spectrum(0.0, g, {-1, 1, -2, 2, 5, -5});
  for (const auto &[kap, ch] : S.channels) {
    for (int i = 0; i < ch.E.size(); ++i)
      CHECK(std::abs(ch.E[i]) > 1.0 - 1.0e-3);
    // positive and negative branches both populated
    CHECK(ch.E[0] < -1.0);
    CHECK(ch.E[ch.E.size() - 1] > 1.0);
  }
}

TEST_CASE("state counts follow the basis dimensions") {
  auto g = grid_for(10.0);
  auto S = spectrum::solve_spectrum(10.0, g, {-1, 3});
  CHECK(S.nG == g.N + g.k - 4);
  CHECK(S.nF == g.N + g.k - 3);
  for (const auto &[kap, ch] : S.channels)
    CHECK(int(ch.E.size()) == S.nG + S.nF);
}

TEST_CASE("overlap demands matching radial grids") {
  auto A = spectrum::solve_spectrum(10.0, grid_for(10.0, 20, 6), {-1});
  auto B = spectrum::solve_spectrum(0.0, grid_for(11.0, 20, 6), {-1});
  CHECK_THROWS_AS(spectrum::overlap(A, -1, 0, B, -1, 0),
                  std::invalid_argument);
  auto C = spectrum::solve_spectrum(0.0, grid_for(10.0, 20, 6), {-1});
  CHECK_NOTHROW(spectrum::overlap(A, -1, 0, C, -1, 0));
  // bound states resolve to unit norm against their own spectrum
  CHECK(spectrum::overlap(A, -1, 3, A, -1, 3) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(spectrum::overlap(A, -1, 3, A, -1, 5) == Catch::Approx(0.0).margin(1e-11));
}

TEST_CASE("overlaps with the free spectrum resolve the bound norm") {
  auto g = grid_for(92.0);
  auto B = spectrum::solve_spectrum(92.0, g, {-1});
  auto F = spectrum::solve_spectrum(0.0, g, {-1});
  const auto &ch = B.channel(-1);
  int i1s = spectrum::lowest_bound_index(ch);
  double sum = 0.0;
  for (int p = 0; p < F.channel(-1).E.size(); ++p) {
    double ov = spectrum::overlap(B, -1, i1s, F, -1, p);
    sum += ov * ov;
  }
  CHECK(sum == Catch::Approx(1.0).epsilon(1e-10));
}
