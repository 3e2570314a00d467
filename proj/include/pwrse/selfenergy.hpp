#pragma once
#include "pwrse/angular.hpp"
#include "pwrse/bessel.hpp"
#include "pwrse/bspline.hpp"
#include "pwrse/constants.hpp"
#include "pwrse/dirac.hpp"
#include "pwrse/parallel.hpp"

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace pwrse::se {

struct PassConfig {
  int s = 7;                 // highest multipole order
  int threads = 1;
  double zero_delta = 1e-14; // |E_n - E_a| below which a term is exactly 0
  double amp_gate = 1e-13;   // relative cell-amplitude refinement gate
  int max_level = 6;         // cap on mesh refinement (2^level segments)
  double row_tol = 1e-6;     // drop subtraction rows with |<p|a>| below this
                             // fraction of the largest overlap
  std::size_t table_bytes = 800u << 20; // node-table memory budget per spectrum
};

namespace detail {

inline int level_needed(double dh, int q0) {
  if (dh <= basis::phase_budget(q0))
    return 0;
  const int J = int(std::ceil(std::log2(dh / basis::phase_budget(8))));
  return std::max(1, J);
}

} // namespace detail

//==============================================================================
// Line/triangle quadrature layouts per (cell, refinement level).
class MeshCache {
public:
  explicit MeshCache(const basis::SplineBasis &bb) : bb_(&bb) {}

  const basis::LevelNodes &get(int cell, int level) {
    const auto key = std::make_pair(cell, level);
    std::lock_guard<std::mutex> lk(mx_);
    auto it = store_.find(key);
    if (it == store_.end()) {
      const double lo = bb_->bs.breaks[cell], hi = bb_->bs.breaks[cell + 1];
      it = store_.emplace(key, basis::make_level_nodes(lo, hi, level, bb_->q0))
               .first;
    }
    return it->second;
  }

  const basis::SplineBasis &bb() const { return *bb_; }

private:
  const basis::SplineBasis *bb_;
  std::map<std::pair<int, int>, basis::LevelNodes> store_;
  std::mutex mx_;
};

//==============================================================================
// Values of every state of a spectrum at the mesh nodes, materialized lazily
// per (kappa, cell, level).  Line values in double, triangle values in float
// (they only feed the small diagonal-cell corrections).
class StateTables {
public:
  struct Block {
    Eigen::MatrixXd lineG, lineF; // [nline x D]
    Eigen::MatrixXf triG, triF;   // [ntri x D]
    std::size_t bytes() const {
      return sizeof(double) * 2 * lineG.size() + sizeof(float) * 2 * triG.size();
    }
  };

  StateTables(const spectrum::SpectrumSet &S, MeshCache &mesh,
              std::size_t byte_budget = 800u << 20)
      : S_(&S), mesh_(&mesh), budget_(byte_budget) {}

  const spectrum::SpectrumSet &spec() const { return *S_; }

  std::shared_ptr<const Block> get(int kappa, int cell, int level) {
    const auto key = std::make_tuple(kappa, cell, level);
    {
      std::lock_guard<std::mutex> lk(mx_);
      auto it = store_.find(key);
      if (it != store_.end())
        return it->second;
    }
    auto blk = std::make_shared<Block>(build(kappa, cell, level));
    std::lock_guard<std::mutex> lk(mx_);
    auto [it, fresh] = store_.emplace(key, blk);
    if (fresh) {
      bytes_ += it->second->bytes();
      if (bytes_ > budget_)
        evict_refined();
    }
    return it->second;
  }

  // Per-cell state amplitude, max(|G|, |F|) over the level-0 line nodes.
  const Eigen::MatrixXd &amp(int kappa) {
    {
      std::lock_guard<std::mutex> lk(amx_);
      auto it = amps_.find(kappa);
      if (it != amps_.end())
        return it->second;
    }
    const int nc = S_->bb.ncells();
    const int D = int(S_->channel(kappa).E.size());
    Eigen::MatrixXd A(nc, D);
    for (int c = 0; c < nc; ++c) {
      auto blk = get(kappa, c, 0);
      A.row(c) = blk->lineG.cwiseAbs()
                     .colwise()
                     .maxCoeff()
                     .cwiseMax(blk->lineF.cwiseAbs().colwise().maxCoeff());
    }
    std::lock_guard<std::mutex> lk(amx_);
    return amps_.emplace(kappa, std::move(A)).first->second;
  }

private:
  Block build(int kappa, int cell, int level) const {
    const auto &LN = mesh_->get(cell, level);
    const auto &ch = S_->channel(kappa);
    const auto &bb = S_->bb;
    const int k = bb.k;
    const int nG = S_->nG, nF = S_->nF;
    const int D = int(ch.E.size());

    const int loG = std::max(0, cell - 1);
    const int hiG = std::min(nG - 1, cell + k - 2);
    const int loF = std::max(0, cell - 1);
    const int hiF = std::min(nF - 1, cell + k - 1);
    const int lenG = hiG - loG + 1, lenF = hiF - loF + 1;

    auto scatter = [&](const std::vector<double> &xs, Eigen::MatrixXd &VG,
                       Eigen::MatrixXd &VF) {
      const int n = int(xs.size());
      VG.setZero(n, lenG);
      VF.setZero(n, lenF);
      double v[32], d[32];
      for (int i = 0; i < n; ++i) {
        int first = bb.bs.eval(xs[i], v, d);
        for (int r = 0; r < k; ++r) {
          const int f = first + r - 1;
          if (f >= loG && f <= hiG)
            VG(i, f - loG) = v[r];
        }
        first = S_->fset.eval(xs[i], v, d);
        for (int r = 0; r < k + 1; ++r) {
          const int f = first + r - 1;
          if (f >= loF && f <= hiF)
            VF(i, f - loF) = v[r];
        }
      }
    };

    Eigen::MatrixXd VG, VF;
    Block B;
    scatter(LN.x, VG, VF);
    B.lineG.noalias() = VG * ch.CG.middleRows(loG, lenG);
    B.lineF.noalias() = VF * ch.CF.middleRows(loF, lenF);
    scatter(LN.ty, VG, VF);
    B.triG = (VG * ch.CG.middleRows(loG, lenG)).cast<float>();
    B.triF = (VF * ch.CF.middleRows(loF, lenF)).cast<float>();
    (void)D;
    return B;
  }

  void evict_refined() {
    for (auto it = store_.begin(); it != store_.end();) {
      if (std::get<2>(it->first) > 0) {
        bytes_ -= it->second->bytes();
        it = store_.erase(it);
      } else {
        ++it;
      }
    }
  }

  const spectrum::SpectrumSet *S_;
  MeshCache *mesh_;
  std::size_t budget_, bytes_ = 0;
  std::map<std::tuple<int, int, int>, std::shared_ptr<const Block>> store_;
  std::mutex mx_;
  std::map<int, Eigen::MatrixXd> amps_;
  std::mutex amx_;
};

//==============================================================================
// One-vertex products and the two-center r</r> integral, vectorized over the
// ket set.  Per intermediate state the [0,R] axis is partitioned into
// segments (each cell refined as its kernel phase demands); with J_s/N_s the
// per-segment integrals of a density against j_l/n_l,
//   I(u,v) = sum_{s<s'} [J_s(u) N_s'(v) + J_s(v) N_s'(u)]
//          + sum_s [T_s(u,v) + T_s(v,u)],
// T_s the within-segment upper triangle handled by the inner triangle nodes.

struct PassResult {
  int s = 0, nf = 0;
  std::vector<double> log_part, sign_part; // [(s+1) * nf]
  long cap_hits = 0;
  double &lp(int l, int jf) { return log_part[l * nf + jf]; }
  double &sp(int l, int jf) { return sign_part[l * nf + jf]; }
  double lp(int l, int jf) const { return log_part[l * nf + jf]; }
  double sp(int l, int jf) const { return sign_part[l * nf + jf]; }
};

namespace detail {

struct MWork {
  // mesh
  std::vector<int> levels, cline0, ctri0, cnline;
  std::vector<int> seg_x0, seg_q, seg_cell;
  std::vector<double> lx, lw, ty, tw;
  int nline = 0, ntri = 0, nseg = 0;
  // kernels [n x (s+1)]
  Eigen::MatrixXd kj, kn, ktri;
  // state values along the axis
  Eigen::VectorXd ga, fa, gm, fm, gat, fat, gmt, fmt;
  // densities of the bra-side vertex (a,m)
  Eigen::VectorXd us, up1, up2, ust, up1t, up2t;
  // f-channel blocks per cell
  std::vector<std::shared_ptr<const StateTables::Block>> fblk;
};

// Assembles mesh + kernels + state values for one intermediate state.
// Bra and ket states come from T, the intermediate state from Tm.
inline void prepare_m(MWork &w, StateTables &T, StateTables &Tm,
                      MeshCache &mesh, double Delta, int a_kappa, int a_index,
                      int m_kappa, int m_index, int f_kappa,
                      const PassConfig &cfg, const Eigen::VectorXd &gate,
                      long &cap_hits) {
  const auto &bb = mesh.bb();
  const int nc = bb.ncells();
  const double gmax = gate.maxCoeff();
  w.levels.assign(nc, 0);
  for (int c = 0; c < nc; ++c) {
    const double dh = std::abs(Delta) * bb.cell_width(c);
    const int need = level_needed(dh, bb.q0);
    if (need > 0 && gate[c] >= cfg.amp_gate * gmax) {
      w.levels[c] = std::min(need, cfg.max_level);
      if (need > cfg.max_level)
        ++cap_hits;
    }
  }

  w.cline0.assign(nc, 0);
  w.ctri0.assign(nc, 0);
  w.cnline.assign(nc, 0);
  w.seg_x0.clear();
  w.seg_q.clear();
  w.seg_cell.clear();
  w.lx.clear();
  w.lw.clear();
  w.ty.clear();
  w.tw.clear();
  for (int c = 0; c < nc; ++c) {
    const auto &LN = mesh.get(c, w.levels[c]);
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

  const int L = cfg.s;
  w.kj.resize(w.nline, L + 1);
  w.kn.resize(w.nline, L + 1);
  w.ktri.resize(w.ntri, L + 1);
  bessel::JN jn;
  for (int i = 0; i < w.nline; ++i) {
    bessel::sph_jn(L, Delta * w.lx[i], jn);
    for (int l = 0; l <= L; ++l) {
      w.kj(i, l) = jn.j[l];
      w.kn(i, l) = jn.n[l];
    }
  }
  for (int i = 0; i < w.ntri; ++i) {
    bessel::sph_jn(L, Delta * w.ty[i], jn);
    for (int l = 0; l <= L; ++l)
      w.ktri(i, l) = jn.n[l];
  }

  w.ga.resize(w.nline);
  w.fa.resize(w.nline);
  w.gm.resize(w.nline);
  w.fm.resize(w.nline);
  w.gat.resize(w.ntri);
  w.fat.resize(w.ntri);
  w.gmt.resize(w.ntri);
  w.fmt.resize(w.ntri);
  w.fblk.assign(nc, nullptr);
  const bool same = (&T == &Tm);
  for (int c = 0; c < nc; ++c) {
    auto ba = T.get(a_kappa, c, w.levels[c]);
    auto bm = (same && m_kappa == a_kappa) ? ba
                                           : Tm.get(m_kappa, c, w.levels[c]);
    w.fblk[c] = (f_kappa == a_kappa)          ? ba
                : (same && f_kappa == m_kappa) ? bm
                                               : T.get(f_kappa, c, w.levels[c]);
    const int n0 = w.cline0[c], nl = w.cnline[c];
    w.ga.segment(n0, nl) = ba->lineG.col(a_index);
    w.fa.segment(n0, nl) = ba->lineF.col(a_index);
    w.gm.segment(n0, nl) = bm->lineG.col(m_index);
    w.fm.segment(n0, nl) = bm->lineF.col(m_index);
    const int t0 = w.ctri0[c], nt = nl * basis::LevelNodes::qin;
    w.gat.segment(t0, nt) = ba->triG.col(a_index).cast<double>();
    w.fat.segment(t0, nt) = ba->triF.col(a_index).cast<double>();
    w.gmt.segment(t0, nt) = bm->triG.col(m_index).cast<double>();
    w.fmt.segment(t0, nt) = bm->triF.col(m_index).cast<double>();
  }

  w.us = w.ga.cwiseProduct(w.gm) + w.fa.cwiseProduct(w.fm);
  w.up1 = w.ga.cwiseProduct(w.fm);
  w.up2 = w.fa.cwiseProduct(w.gm);
  w.ust = w.gat.cwiseProduct(w.gmt) + w.fat.cwiseProduct(w.fmt);
  w.up1t = w.gat.cwiseProduct(w.fmt);
  w.up2t = w.fat.cwiseProduct(w.gmt);
}

// One multipole contraction; adds B_log/B_sign for every ket to out arrays.
inline void contract_l(const MWork &w, int l, const angular::Weights &W,
                       const std::vector<int> &f_idx, double *blog,
                       double *bsign) {
  const int nline = w.nline, nseg = w.nseg, nf = int(f_idx.size());
  Eigen::VectorXd wj = w.kj.col(l).cwiseProduct(
      Eigen::Map<const Eigen::VectorXd>(w.lw.data(), nline));
  Eigen::VectorXd wn = w.kn.col(l).cwiseProduct(
      Eigen::Map<const Eigen::VectorXd>(w.lw.data(), nline));

  // per-segment bra-density integrals against j and n
  Eigen::MatrixXd Ju(nseg, 3), Nu(nseg, 3);
  for (int s = 0; s < nseg; ++s) {
    const int x0 = w.seg_x0[s], q = w.seg_q[s];
    double j0 = 0, j1 = 0, j2 = 0, n0 = 0, n1 = 0, n2 = 0;
    for (int i = x0; i < x0 + q; ++i) {
      j0 += wj[i] * w.us[i];
      j1 += wj[i] * w.up1[i];
      j2 += wj[i] * w.up2[i];
      n0 += wn[i] * w.us[i];
      n1 += wn[i] * w.up1[i];
      n2 += wn[i] * w.up2[i];
    }
    Ju(s, 0) = j0;
    Ju(s, 1) = j1;
    Ju(s, 2) = j2;
    Nu(s, 0) = n0;
    Nu(s, 1) = n1;
    Nu(s, 2) = n2;
  }
  Eigen::MatrixXd prefJ(nseg, 3), sufN(nseg, 3);
  for (int d = 0; d < 3; ++d) {
    double acc = 0;
    for (int s = 0; s < nseg; ++s) {
      prefJ(s, d) = acc;
      acc += Ju(s, d);
    }
    acc = 0;
    for (int s = nseg - 1; s >= 0; --s) {
      sufN(s, d) = acc;
      acc += Nu(s, d);
    }
  }

  // inner-triangle bra integrals and kernel-weighted intermediate values
  const int qin = basis::LevelNodes::qin;
  Eigen::VectorXd innerUs(nline), innerU1(nline), innerU2(nline);
  Eigen::VectorXd kgm(w.ntri), kfm(w.ntri);
  for (int i = 0; i < nline; ++i) {
    const int t0 = i * qin;
    double s0 = 0, s1 = 0, s2 = 0;
    for (int h = 0; h < qin; ++h) {
      const int idx = t0 + h;
      const double twk = w.tw[idx] * w.ktri(idx, l);
      kgm[idx] = twk * w.gmt[idx];
      kfm[idx] = twk * w.fmt[idx];
      s0 += twk * w.ust[idx];
      s1 += twk * w.up1t[idx];
      s2 += twk * w.up2t[idx];
    }
    innerUs[i] = s0;
    innerU1[i] = s1;
    innerU2[i] = s2;
  }

  const double sc = W.scal, w11 = W.w11, w12 = W.w12, w21 = W.w21,
               w22 = W.w22;
  // whole-axis bra integrals for the separable (log) kernel
  const double R1s = Ju.col(0).sum(), R1p1 = Ju.col(1).sum(),
               R1p2 = Ju.col(2).sum();
  const double as = sc * R1s;
  const double a1 = w11 * R1p1 - w21 * R1p2;
  const double a2 = -w12 * R1p1 + w22 * R1p2;

  // ket-side slot weights: line (log and sign) and triangle (sign)
  Eigen::VectorXd LGlog(nline), LFlog(nline), LGsig(nline), LFsig(nline);
  Eigen::VectorXd TG(w.ntri), TF(w.ntri);
  for (int s = 0; s < nseg; ++s) {
    const int x0 = w.seg_x0[s], q = w.seg_q[s];
    const double pjs = sc * prefJ(s, 0);
    const double pj1 = w11 * prefJ(s, 1) - w21 * prefJ(s, 2);
    const double pj2 = -w12 * prefJ(s, 1) + w22 * prefJ(s, 2);
    const double sns = sc * sufN(s, 0);
    const double sn1 = w11 * sufN(s, 1) - w21 * sufN(s, 2);
    const double sn2 = -w12 * sufN(s, 1) + w22 * sufN(s, 2);
    for (int i = x0; i < x0 + q; ++i) {
      const double cus = sc * wj[i] * w.us[i];
      const double cu1 = w11 * (wj[i] * w.up1[i]) - w21 * (wj[i] * w.up2[i]);
      const double cu2 = -w12 * (wj[i] * w.up1[i]) + w22 * (wj[i] * w.up2[i]);
      const double w2s = sc * (wj[i] * innerUs[i]);
      const double w21v = w11 * (wj[i] * innerU1[i]) - w21 * (wj[i] * innerU2[i]);
      const double w22v =
          -w12 * (wj[i] * innerU1[i]) + w22 * (wj[i] * innerU2[i]);
      const double Ls = wn[i] * pjs + wj[i] * sns + w2s;
      const double L1 = wn[i] * pj1 + wj[i] * sn1 + w21v;
      const double L2 = wn[i] * pj2 + wj[i] * sn2 + w22v;
      LGsig[i] = Ls * w.gm[i] + L2 * w.fm[i];
      LFsig[i] = Ls * w.fm[i] + L1 * w.gm[i];
      LGlog[i] = (as * w.gm[i] + a2 * w.fm[i]) * wj[i];
      LFlog[i] = (as * w.fm[i] + a1 * w.gm[i]) * wj[i];
      const int t0 = i * qin;
      for (int h = 0; h < qin; ++h) {
        const int idx = t0 + h;
        TG[idx] = cus * kgm[idx] + cu2 * kfm[idx];
        TF[idx] = cus * kfm[idx] + cu1 * kgm[idx];
      }
    }
  }

  // fold against the ket columns, cell by cell
  const int nc = int(w.fblk.size());
  for (int c = 0; c < nc; ++c) {
    const auto &B = *w.fblk[c];
    const int n0 = w.cline0[c], nl = w.cnline[c];
    const int t0 = w.ctri0[c], nt = nl * qin;
    for (int jf = 0; jf < nf; ++jf) {
      const int col = f_idx[jf];
      const double *G = B.lineG.col(col).data();
      const double *F = B.lineF.col(col).data();
      const float *Gt = B.triG.col(col).data();
      const float *Ft = B.triF.col(col).data();
      double accl = 0, accs = 0;
      for (int i = 0; i < nl; ++i) {
        accl += LGlog[n0 + i] * G[i] + LFlog[n0 + i] * F[i];
        accs += LGsig[n0 + i] * G[i] + LFsig[n0 + i] * F[i];
      }
      double acct = 0;
      for (int i = 0; i < nt; ++i)
        acct += TG[t0 + i] * double(Gt[i]) + TF[t0 + i] * double(Ft[i]);
      blog[jf] += accl;
      bsign[jf] += accs + acct;
    }
  }
}

} // namespace detail

//==============================================================================
// <a| Sigma^(l)(E_arg) |f> for every multipole l <= s and every state f of the
// f_kappa channel (restricted to f_indices), built by summing the whole
// pseudospectrum of intermediate states taken from Tm.  Bra and ket states
// live in T; passing the bound tables twice gives the bound-propagator
// element, passing free tables as Tm gives the subtraction element.  The
// separable log term and the r</r> sign term are returned separately.
inline PassResult element_pass(StateTables &T, StateTables &Tm,
                               MeshCache &mesh, double E_arg, int a_kappa,
                               int a_index, int f_kappa,
                               const std::vector<int> &f_indices,
                               angular::WeightTable &wt,
                               const PassConfig &cfg) {
  const auto &S = Tm.spec();
  if (!T.spec().grid_equal(S))
    throw std::runtime_error("bra/ket and intermediate spectra use different "
                             "radial grids");
  const int L = cfg.s;
  const int nf = int(f_indices.size());
  PassResult out;
  out.s = L;
  out.nf = nf;
  out.log_part.assign((L + 1) * nf, 0.0);
  out.sign_part.assign((L + 1) * nf, 0.0);

  // selection-rule channel demand: everything alive must be present
  for (int l = 0; l <= L; ++l)
    for (int km : wt.channels(l, a_kappa, f_kappa, L + 3))
      if (!S.channels.count(km))
        throw std::runtime_error(
            "spectrum missing kappa channel " + std::to_string(km) +
            " required by multipole l=" + std::to_string(l));

  const double E_a = E_arg;
  const auto &bb = S.bb;
  const int nc = bb.ncells();

  // cell amplitude factors for the refinement gate
  const auto &ampA = T.amp(a_kappa);
  const auto &ampF = T.amp(f_kappa);
  Eigen::VectorXd ampFmax(nc);
  for (int c = 0; c < nc; ++c) {
    double v = 0;
    for (int jf : f_indices)
      v = std::max(v, ampF(c, jf));
    ampFmax[c] = v;
  }

  std::atomic<long> cap{0};
  for (const auto &[km, ch] : S.channels) {
    std::vector<angular::Weights> W(L + 1);
    std::vector<int> alive;
    for (int l = 0; l <= L; ++l) {
      W[l] = wt.get(l, a_kappa, km, f_kappa);
      if (W[l].any())
        alive.push_back(l);
    }
    if (alive.empty())
      continue;

    const auto &ampM = Tm.amp(km);
    const int D = int(ch.E.size());
    std::vector<std::vector<double>> parts(D);
    const auto &E = ch.E;
    const int km_ = km;

    par::run_indexed(D, cfg.threads, [&, km_](int mi) {
      const double Delta = E[mi] - E_a;
      if (std::abs(Delta) < cfg.zero_delta)
        return; // exact zero of both terms
      Eigen::VectorXd gate(nc);
      for (int c = 0; c < nc; ++c)
        gate[c] = ampA(c, a_index) * ampM(c, mi) * ampM(c, mi) * ampFmax[c] *
                  bb.cell_width(c);
      long caphit = 0;
      detail::MWork w;
      detail::prepare_m(w, T, Tm, mesh, Delta, a_kappa, a_index, km_, mi,
                        f_kappa, cfg, gate, caphit);
      if (caphit)
        cap += caphit;

      auto &p = parts[mi];
      p.assign(2 * (L + 1) * nf, 0.0);
      std::vector<double> blog(nf), bsign(nf);
      for (int l : alive) {
        std::fill(blog.begin(), blog.end(), 0.0);
        std::fill(bsign.begin(), bsign.end(), 0.0);
        detail::contract_l(w, l, W[l], f_indices, blog.data(), bsign.data());
        const double pl = (consts::alpha / M_PI) * (2 * l + 1) * Delta *
                          std::log(std::abs(Delta));
        const double ps = -(consts::alpha / 2.0) * (2 * l + 1) *
                          (E[mi] > 0 ? 1.0 : -1.0) * Delta;
        for (int jf = 0; jf < nf; ++jf) {
          p[l * nf + jf] = pl * blog[jf];
          p[(L + 1 + l) * nf + jf] = ps * bsign[jf];
        }
      }
    });

    std::vector<double> acc(2 * (L + 1) * nf, 0.0);
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] = (i < std::size_t((L + 1) * nf))
                   ? out.log_part[i]
                   : out.sign_part[i - (L + 1) * nf];
    par::fold_ordered(parts, acc);
    for (int i = 0; i < (L + 1) * nf; ++i) {
      out.log_part[i] = acc[i];
      out.sign_part[i] = acc[(L + 1) * nf + i];
    }
  }
  out.cap_hits = cap.load();
  return out;
}

//==============================================================================
// Renormalized elements <a|Sigma(E_a)|f> - <a|Sigma_free|f> for the reference
// state a against every state f of each angular-momentum channel that the
// selection rules leave alive.
struct ElementTables {
  int s = 0;
  double E_a = 0.0;
  int a_kappa = 0, a_index = 0;
  struct FBlock {
    int kappa = 0;
    Eigen::VectorXd E;
    std::vector<double> b_log, b_sign, c_log, c_sign; // [(s+1) * nf]
    int a_slot = -1;
    int nf() const { return int(E.size()); }
    double renorm(int l, int f) const {
      const int i = l * nf() + f;
      return (b_log[i] + b_sign[i]) - (c_log[i] + c_sign[i]);
    }
    double renorm_sign_only(int l, int f) const {
      const int i = l * nf() + f;
      return b_sign[i] - c_sign[i];
    }
    double renorm_log_only(int l, int f) const {
      const int i = l * nf() + f;
      return b_log[i] - c_log[i];
    }
  };
  std::vector<FBlock> blocks;
  long cap_hits = 0;

  const FBlock &diag_block() const {
    for (const auto &b : blocks)
      if (b.a_slot >= 0)
        return b;
    throw std::runtime_error("element tables lack the reference-state block");
  }
};

// Dirac inner products <p|n> between two spectra sharing a grid, one channel.
inline Eigen::MatrixXd channel_overlap(const spectrum::SpectrumSet &A,
                                       const spectrum::SpectrumSet &B,
                                       int kappa) {
  const auto &ca = A.channel(kappa);
  const auto &cb = B.channel(kappa);
  return ca.CG.transpose() * A.S_GG * cb.CG +
         ca.CF.transpose() * A.S_FF * cb.CF;
}

// Copy of the free spectrum with the component along one bound state removed
// from every state of that channel; ov holds the overlaps <p|a>.
inline spectrum::SpectrumSet project_out(const spectrum::SpectrumSet &freeS,
                                         const spectrum::SpectrumSet &bound,
                                         int kappa, int index,
                                         const Eigen::VectorXd &ov) {
  auto out = freeS;
  auto &ch = out.channels.at(kappa);
  const auto &cb = bound.channel(kappa);
  for (int q = 0; q < int(ov.size()); ++q) {
    ch.CG.col(q) -= ov[q] * cb.CG.col(index);
    ch.CF.col(q) -= ov[q] * cb.CF.col(index);
  }
  return out;
}

inline ElementTables build_elements(const spectrum::SpectrumSet &bound,
                                    const spectrum::SpectrumSet &freeS,
                                    angular::WeightTable &wt,
                                    const PassConfig &cfg, int a_kappa,
                                    int a_index) {
  if (!bound.grid_equal(freeS))
    throw std::invalid_argument("bound and free spectra on different grids");

  const auto &chb = bound.channel(a_kappa);
  const auto &chf = freeS.channel(a_kappa);
  const int nb = int(chb.E.size()), np = int(chf.E.size());

  Eigen::MatrixXd O = channel_overlap(freeS, bound, a_kappa);
  Eigen::VectorXd ov = O.col(a_index);
  auto freeP = project_out(freeS, bound, a_kappa, a_index, ov);

  MeshCache mesh(bound.bb);
  StateTables Tb(bound, mesh, cfg.table_bytes);
  StateTables Tf(freeS, mesh, cfg.table_bytes);
  StateTables Ti(freeP, mesh, cfg.table_bytes);

  ElementTables el;
  el.s = cfg.s;
  el.a_kappa = a_kappa;
  el.a_index = a_index;
  el.E_a = chb.E[a_index];

  std::vector<int> nidx(nb);
  std::iota(nidx.begin(), nidx.end(), 0);
  PassResult b = element_pass(Tb, Tb, mesh, el.E_a, a_kappa, a_index, a_kappa,
                              nidx, wt, cfg);
  el.cap_hits += b.cap_hits;

  // Bound-propagator element is <a|Sigma(E_a)|n>.  The subtraction expands a
  // over the free channel and applies the free-state rows on shell,
  //   c(l,n) = sum_p <a|p> sum_q sigma_l(p,q; E_p) <q|n>,
  // with the reference state projected out of the intermediate tower, the
  // counterpart of the zero-gap skip in the bound sum.
  const int L = cfg.s;
  std::vector<double> cl((L + 1) * nb, 0.0), cs((L + 1) * nb, 0.0);
  std::vector<int> qidx(np);
  std::iota(qidx.begin(), qidx.end(), 0);
  const double ovmax = ov.cwiseAbs().maxCoeff();
  for (int p = 0; p < np; ++p) {
    if (std::abs(ov[p]) < cfg.row_tol * ovmax)
      continue;
    PassResult r = element_pass(Tf, Ti, mesh, chf.E[p], a_kappa, p, a_kappa,
                                qidx, wt, cfg);
    el.cap_hits += r.cap_hits;
    for (int l = 0; l <= L; ++l) {
      Eigen::Map<const Eigen::VectorXd> vl(&r.log_part[l * np], np);
      Eigen::Map<const Eigen::VectorXd> vs(&r.sign_part[l * np], np);
      Eigen::Map<Eigen::VectorXd>(&cl[l * nb], nb) += ov[p] * (O.transpose() * vl);
      Eigen::Map<Eigen::VectorXd>(&cs[l * nb], nb) += ov[p] * (O.transpose() * vs);
    }
  }

  ElementTables::FBlock blk;
  blk.kappa = a_kappa;
  blk.E = chb.E;
  blk.b_log = std::move(b.log_part);
  blk.b_sign = std::move(b.sign_part);
  blk.c_log = std::move(cl);
  blk.c_sign = std::move(cs);
  blk.a_slot = a_index;
  el.blocks.push_back(std::move(blk));
  return el;
}

inline ElementTables build_elements(const spectrum::SpectrumSet &bound,
                                    const spectrum::SpectrumSet &freeS,
                                    angular::WeightTable &wt,
                                    const PassConfig &cfg) {
  const int ak = -1;
  return build_elements(bound, freeS, wt, cfg, ak,
                        spectrum::lowest_bound_index(bound.channel(ak)));
}

} // namespace pwrse::se
