#include "pwrse/selfenergy.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

using namespace pwrse;

namespace {

using Fn = std::function<double(double)>;

struct SynthStates {
  Fn ga, fa, gm, fm, gf, ff;
};

// Mirrors the per-state mesh/kernel/value assembly, but from analytic
// functions instead of spectrum tables.
se::detail::MWork make_synth_work(const std::vector<double> &breaks, int q0,
                                  double Delta, int smax,
                                  const SynthStates &st) {
  se::detail::MWork w;
  const int nc = int(breaks.size()) - 1;
  w.levels.assign(nc, 0);
  w.cline0.assign(nc, 0);
  w.ctri0.assign(nc, 0);
  w.cnline.assign(nc, 0);
  for (int c = 0; c < nc; ++c) {
    const double lo = breaks[c], hi = breaks[c + 1];
    w.levels[c] = se::detail::level_needed(std::abs(Delta) * (hi - lo), q0);
    const auto LN = basis::make_level_nodes(lo, hi, w.levels[c], q0);
    w.cline0[c] = int(w.lx.size());
    w.ctri0[c] = int(w.ty.size());
    w.cnline[c] = LN.nline();
    for (int s = 0; s < LN.nseg; ++s) {
      w.seg_x0.push_back(int(w.lx.size()) + s * LN.q);
      w.seg_q.push_back(LN.q);
      w.seg_cell.push_back(c);
    }
    w.lx.insert(w.lx.end(), LN.x.begin(), LN.x.end());
    w.lw.insert(w.lw.end(), LN.w.begin(), LN.w.end());
    w.ty.insert(w.ty.end(), LN.ty.begin(), LN.ty.end());
    w.tw.insert(w.tw.end(), LN.tw.begin(), LN.tw.end());
  }
  w.nline = int(w.lx.size());
  w.ntri = int(w.ty.size());
  w.nseg = int(w.seg_x0.size());

  w.kj.resize(w.nline, smax + 1);
  w.kn.resize(w.nline, smax + 1);
  w.ktri.resize(w.ntri, smax + 1);
  bessel::JN jn;
  for (int i = 0; i < w.nline; ++i) {
    bessel::sph_jn(smax, Delta * w.lx[i], jn);
    for (int l = 0; l <= smax; ++l) {
      w.kj(i, l) = jn.j[l];
      w.kn(i, l) = jn.n[l];
    }
  }
  for (int i = 0; i < w.ntri; ++i) {
    bessel::sph_jn(smax, Delta * w.ty[i], jn);
    for (int l = 0; l <= smax; ++l)
      w.ktri(i, l) = jn.n[l];
  }

  auto fill = [](Eigen::VectorXd &v, const std::vector<double> &xs,
                 const Fn &f) {
    v.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      v[i] = f(xs[i]);
  };
  fill(w.ga, w.lx, st.ga);
  fill(w.fa, w.lx, st.fa);
  fill(w.gm, w.lx, st.gm);
  fill(w.fm, w.lx, st.fm);
  fill(w.gat, w.ty, st.ga);
  fill(w.fat, w.ty, st.fa);
  fill(w.gmt, w.ty, st.gm);
  fill(w.fmt, w.ty, st.fm);
  w.us = w.ga.cwiseProduct(w.gm) + w.fa.cwiseProduct(w.fm);
  w.up1 = w.ga.cwiseProduct(w.fm);
  w.up2 = w.fa.cwiseProduct(w.gm);
  w.ust = w.gat.cwiseProduct(w.gmt) + w.fat.cwiseProduct(w.fmt);
  w.up1t = w.gat.cwiseProduct(w.fmt);
  w.up2t = w.fat.cwiseProduct(w.gmt);

  w.fblk.resize(nc);
  for (int c = 0; c < nc; ++c) {
    auto blk = std::make_shared<se::StateTables::Block>();
    const int n0 = w.cline0[c], nl = w.cnline[c];
    const int t0 = w.ctri0[c], nt = nl * basis::LevelNodes::qin;
    blk->lineG.resize(nl, 1);
    blk->lineF.resize(nl, 1);
    blk->triG.resize(nt, 1);
    blk->triF.resize(nt, 1);
    for (int i = 0; i < nl; ++i) {
      blk->lineG(i, 0) = st.gf(w.lx[n0 + i]);
      blk->lineF(i, 0) = st.ff(w.lx[n0 + i]);
    }
    for (int i = 0; i < nt; ++i) {
      blk->triG(i, 0) = float(st.gf(w.ty[t0 + i]));
      blk->triF(i, 0) = float(st.ff(w.ty[t0 + i]));
    }
    w.fblk[c] = blk;
  }
  return w;
}

double gauss_on(double a, double b, int q, const Fn &f) {
  const auto &r = quad::legendre(q);
  double s = 0;
  for (int i = 0; i < q; ++i)
    s += 0.5 * (b - a) * r.w[i] * f(0.5 * (a + b) + 0.5 * (b - a) * r.x[i]);
  return s;
}

// Composite reference for int_0^R u(r) j_l(D r) dr.
double ref_line_j(const Fn &u, int l, double D, double R, int K) {
  double s = 0;
  for (int i = 0; i < K; ++i) {
    const double a = R * i / K, b = R * (i + 1) / K;
    s += gauss_on(a, b, 12, [&](double r) {
      bessel::JN jn;
      bessel::sph_jn(l, D * r, jn);
      return u(r) * jn.j[l];
    });
  }
  return s;
}

// Composite reference for the ordered two-center integral
//   int int u(r) v(r') j_l(D r_<) n_l(D r_>) dr dr'
// as an outer sweep in the larger coordinate with cumulative inner integrals.
double ref_two_center(const Fn &u, const Fn &v, int l, double D, double R,
                      int K) {
  auto jl = [&](double r) {
    bessel::JN jn;
    bessel::sph_jn(l, D * r, jn);
    return jn.j[l];
  };
  auto nl = [&](double r) {
    bessel::JN jn;
    bessel::sph_jn(l, D * r, jn);
    return jn.n[l];
  };
  const auto &rule = quad::legendre(12);
  double total = 0;
  double cumUj = 0, cumVj = 0; // integrals over fully processed intervals
  for (int i = 0; i < K; ++i) {
    const double a = R * i / K, b = R * (i + 1) / K;
    for (int g = 0; g < 12; ++g) {
      const double x = 0.5 * (a + b) + 0.5 * (b - a) * rule.x[g];
      const double wx = 0.5 * (b - a) * rule.w[g];
      const double Uj = cumUj + gauss_on(a, x, 12, [&](double r) {
                          return u(r) * jl(r);
                        });
      const double Vj = cumVj + gauss_on(a, x, 12, [&](double r) {
                          return v(r) * jl(r);
                        });
      total += wx * nl(x) * (v(x) * Uj + u(x) * Vj);
    }
    cumUj += gauss_on(a, b, 12, [&](double r) { return u(r) * jl(r); });
    cumVj += gauss_on(a, b, 12, [&](double r) { return v(r) * jl(r); });
  }
  return total;
}

spectrum::GridSpec test_grid(double Z, int N, int k) {
  spectrum::GridSpec g;
  g.N = N;
  g.k = k;
  g.R = (Z > 0) ? 40.0 / (Z * consts::alpha) : 30.0;
  return g;
}

std::vector<int> kappa_range(int kmax) {
  std::vector<int> ks;
  for (int a = 1; a <= kmax; ++a) {
    ks.push_back(-a);
    ks.push_back(a);
  }
  return ks;
}

} // namespace

TEST_CASE("two-center contraction matches a brute-force reference") {
  SynthStates st;
  st.ga = [](double r) { return r * std::exp(-0.6 * r); };
  st.fa = [](double r) { return 0.4 * r * std::exp(-0.8 * r) * std::cos(0.7 * r); };
  st.gm = [](double r) { return r * std::exp(-0.5 * r) * (1.0 + 0.3 * std::sin(r)); };
  st.fm = [](double r) { return 0.25 * r * std::exp(-0.7 * r); };
  st.gf = [](double r) { return r * std::exp(-0.9 * r) * (1.0 - 0.2 * std::cos(1.3 * r)); };
  st.ff = [](double r) { return 0.3 * r * std::exp(-0.55 * r) * std::sin(0.9 * r); };

  angular::Weights W;
  W.scal = 0.7;
  W.w11 = 0.3;
  W.w12 = -0.2;
  W.w21 = 0.4;
  W.w22 = -0.5;

  const double R = 14.0;
  std::vector<double> breaks;
  for (int i = 0; i <= 7; ++i)
    breaks.push_back(R * i / 7.0);
  const int q0 = 10, smax = 2, K = 80;

  Fn us = [&](double r) { return st.ga(r) * st.gm(r) + st.fa(r) * st.fm(r); };
  Fn up1 = [&](double r) { return st.ga(r) * st.fm(r); };
  Fn up2 = [&](double r) { return st.fa(r) * st.gm(r); };
  Fn vs = [&](double r) { return st.gm(r) * st.gf(r) + st.fm(r) * st.ff(r); };
  Fn vp1 = [&](double r) { return st.gm(r) * st.ff(r); };
  Fn vp2 = [&](double r) { return st.fm(r) * st.gf(r); };
  struct Pair {
    const Fn *u, *v;
    double wgt;
  };
  const Pair pairs[5] = {{&us, &vs, W.scal},
                         {&up1, &vp1, W.w11},
                         {&up1, &vp2, -W.w12},
                         {&up2, &vp1, -W.w21},
                         {&up2, &vp2, W.w22}};

  for (double Delta : {0.3, 3.0, -3.0}) {
    auto w = make_synth_work(breaks, q0, Delta, smax, st);
    if (std::abs(Delta) > 1.0)
      REQUIRE(w.nseg > int(breaks.size()) - 1); // refinement engaged
    for (int l = 0; l <= smax; ++l) {
      double blog = 0, bsign = 0;
      se::detail::contract_l(w, l, W, {0}, &blog, &bsign);

      double rlog = 0, rsign = 0;
      for (const auto &p : pairs) {
        rlog += p.wgt * ref_line_j(*p.u, l, Delta, R, K) *
                ref_line_j(*p.v, l, Delta, R, K);
        rsign += p.wgt * ref_two_center(*p.u, *p.v, l, Delta, R, K);
      }
      INFO("Delta=" << Delta << " l=" << l);
      REQUIRE(std::abs(blog - rlog) <= 1e-6 * std::abs(rlog));
      REQUIRE(std::abs(bsign - rsign) <= 1e-6 * std::abs(rsign));
    }
  }
}

TEST_CASE("degenerate intermediate states drop out exactly") {
  auto g = test_grid(5.0, 12, 5);
  auto S = spectrum::solve_spectrum(5.0, g, kappa_range(5));
  angular::WeightTable wt;
  se::PassConfig cfg;
  cfg.s = 3;

  const int a = spectrum::lowest_bound_index(S.channel(-1));
  const double Ea = S.channel(-1).E[a];
  const int m0 = a + 1;

  auto SA = S;
  SA.channels.at(-1).E[m0] = Ea + 5e-15; // below the zero threshold
  auto SB = S;
  SB.channels.at(-1).E[m0] = Ea + 2.0; // live energy, dead coefficients
  SB.channels.at(-1).CG.col(m0).setZero();
  SB.channels.at(-1).CF.col(m0).setZero();

  se::MeshCache meshA(SA.bb), meshB(SB.bb);
  se::StateTables TA(SA, meshA), TB(SB, meshB);
  auto ra = se::element_pass(TA, TA, meshA, Ea, -1, a, -1, {a}, wt, cfg);
  auto rb = se::element_pass(TB, TB, meshB, Ea, -1, a, -1, {a}, wt, cfg);

  REQUIRE(ra.log_part.size() == rb.log_part.size());
  for (std::size_t i = 0; i < ra.log_part.size(); ++i) {
    REQUIRE(ra.log_part[i] == rb.log_part[i]);
    REQUIRE(ra.sign_part[i] == rb.sign_part[i]);
  }
}

TEST_CASE("subtraction term cancels the bound term without a potential") {
  auto g = test_grid(0.0, 12, 5);
  auto S = spectrum::solve_spectrum(0.0, g, kappa_range(5));
  angular::WeightTable wt;
  se::PassConfig cfg;
  cfg.s = 3;

  const auto &E = S.channel(-1).E;
  int p0 = 0;
  while (p0 < E.size() && E[p0] < 0)
    ++p0;
  REQUIRE(p0 < E.size());

  auto el = se::build_elements(S, S, wt, cfg, -1, p0);
  const auto &blk = el.diag_block();
  const int f = blk.a_slot;
  for (int l = 0; l <= cfg.s; ++l) {
    const int i = l * blk.nf() + f;
    INFO("l=" << l);
    REQUIRE(std::abs(blk.renorm_log_only(l, f)) <=
            1e-10 * std::abs(blk.b_log[i]));
    REQUIRE(std::abs(blk.renorm_sign_only(l, f)) <=
            1e-10 * std::abs(blk.b_sign[i]));
  }
}

TEST_CASE("element pass is symmetric in bra and ket at fixed energy") {
  auto g = test_grid(5.0, 12, 5);
  auto S = spectrum::solve_spectrum(5.0, g, kappa_range(5));
  angular::WeightTable wt;
  se::PassConfig cfg;
  cfg.s = 3;
  se::MeshCache mesh(S.bb);
  se::StateTables T(S, mesh);

  const int a = spectrum::lowest_bound_index(S.channel(-1));
  const double Ea = S.channel(-1).E[a];

  SECTION("within the reference channel") {
    const int j = a + 2;
    auto rf = se::element_pass(T, T, mesh, Ea, -1, a, -1, {j}, wt, cfg);
    auto rb = se::element_pass(T, T, mesh, Ea, -1, j, -1, {a}, wt, cfg);
    for (int l = 0; l <= cfg.s; ++l) {
      INFO("l=" << l);
      REQUIRE(rf.lp(l, 0) == Catch::Approx(rb.lp(l, 0)).epsilon(1e-10));
      REQUIRE(rf.sp(l, 0) == Catch::Approx(rb.sp(l, 0)).epsilon(1e-10));
    }
  }
  SECTION("with a continuum ket") {
    const int j = int(S.channel(-1).E.size()) - 3;
    auto rf = se::element_pass(T, T, mesh, Ea, -1, a, -1, {j}, wt, cfg);
    auto rb = se::element_pass(T, T, mesh, Ea, -1, j, -1, {a}, wt, cfg);
    double scale = 0;
    for (int l = 0; l <= cfg.s; ++l)
      scale = std::max(scale, std::abs(rf.lp(l, 0)) + std::abs(rf.sp(l, 0)));
    REQUIRE(scale > 0);
    for (int l = 0; l <= cfg.s; ++l) {
      INFO("l=" << l);
      REQUIRE(std::abs(rf.lp(l, 0) - rb.lp(l, 0)) <= 1e-10 * scale);
      REQUIRE(std::abs(rf.sp(l, 0) - rb.sp(l, 0)) <= 1e-10 * scale);
    }
  }
  SECTION("channels of different j or parity are dead by selection") {
    for (int kf : {1, -2, 2, -3, 3}) {
      bool alive = false;
      for (int l = 0; l <= cfg.s; ++l)
        for (int km = -6; km <= 6; ++km)
          if (km != 0 && wt.get(l, -1, km, kf).any())
            alive = true;
      INFO("kf=" << kf);
      REQUIRE_FALSE(alive);
    }
  }
}

TEST_CASE("renormalized elements are bit-identical for any worker count") {
  auto g = test_grid(5.0, 10, 5);
  auto bound = spectrum::solve_spectrum(5.0, g, kappa_range(4));
  auto freeS = spectrum::solve_spectrum(0.0, g, kappa_range(4));
  angular::WeightTable wt1, wt8;
  se::PassConfig c1, c8;
  c1.s = 2;
  c8.s = 2;
  c1.threads = 1;
  c8.threads = 8;

  auto e1 = se::build_elements(bound, freeS, wt1, c1);
  auto e8 = se::build_elements(bound, freeS, wt8, c8);

  REQUIRE(e1.blocks.size() == e8.blocks.size());
  for (std::size_t b = 0; b < e1.blocks.size(); ++b) {
    const auto &x = e1.blocks[b], &y = e8.blocks[b];
    REQUIRE(x.kappa == y.kappa);
    REQUIRE(std::memcmp(x.b_log.data(), y.b_log.data(),
                        x.b_log.size() * sizeof(double)) == 0);
    REQUIRE(std::memcmp(x.b_sign.data(), y.b_sign.data(),
                        x.b_sign.size() * sizeof(double)) == 0);
    REQUIRE(std::memcmp(x.c_log.data(), y.c_log.data(),
                        x.c_log.size() * sizeof(double)) == 0);
    REQUIRE(std::memcmp(x.c_sign.data(), y.c_sign.data(),
                        x.c_sign.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("refinement cap is counted when the level budget saturates") {
  auto g = test_grid(5.0, 12, 5);
  auto S = spectrum::solve_spectrum(5.0, g, kappa_range(5));
  angular::WeightTable wt;
  se::PassConfig cfg;
  cfg.s = 2;
  cfg.max_level = 0;
  se::MeshCache mesh(S.bb);
  se::StateTables T(S, mesh);
  const int a = spectrum::lowest_bound_index(S.channel(-1));
  auto r = se::element_pass(T, T, mesh, S.channel(-1).E[a], -1, a, -1, {a}, wt,
                            cfg);
  REQUIRE(r.cap_hits > 0);
}

TEST_CASE("refinement level grows with the kernel phase") {
  REQUIRE(se::detail::level_needed(0.5, 8) == 0);
  REQUIRE(se::detail::level_needed(basis::phase_budget(8) * 1.5, 8) == 1);
  const int l1 = se::detail::level_needed(50.0, 8);
  const int l2 = se::detail::level_needed(200.0, 8);
  REQUIRE(l2 > l1);
}
