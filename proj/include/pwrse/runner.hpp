#pragma once
#include "pwrse/analysis.hpp"
#include "pwrse/sese.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pwrse::run {

inline constexpr const char *cache_version = "el-v3";

struct RunConfig {
  std::vector<int> Zs;
  int N = 28, k = 9, s = 7;
  double box_coeff = 40.0;
  basis::GridScheme scheme = basis::GridScheme::Exponential;
  double gamma = 0; // 0 selects the Z-adaptive default
  int threads = 1;
  std::string cache_dir, out_dir = ".";
  bool k_study = false;
  double window = 1e-10;
  double row_tol = 1e-6;
};

// Stronger origin clustering as the bound density contracts toward the
// nuclear singularity; the low end keeps the free tower well sampled.
inline double auto_gamma(double Z) {
  return 2.0 + 8.0 * (Z / 92.0) * (Z / 92.0);
}

namespace detail {

inline std::uint64_t fnv1a(const std::string &s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline bool save_elements(const std::string &path,
                          const se::ElementTables &el) {
  std::ofstream f(path + ".tmp", std::ios::binary);
  if (!f)
    return false;
  const auto &blk = el.blocks.front();
  auto wr = [&](const void *p, std::size_t n) {
    f.write(static_cast<const char *>(p), std::streamsize(n));
  };
  const char magic[8] = {'P', 'W', 'E', 'L', '0', '0', '0', '3'};
  wr(magic, 8);
  std::int64_t hdr[5] = {el.s, el.a_kappa, el.a_index, blk.kappa,
                         std::int64_t(blk.E.size())};
  wr(hdr, sizeof hdr);
  wr(&el.E_a, sizeof(double));
  std::int64_t caps = el.cap_hits;
  wr(&caps, sizeof caps);
  wr(blk.E.data(), sizeof(double) * blk.E.size());
  for (const auto *v : {&blk.b_log, &blk.b_sign, &blk.c_log, &blk.c_sign})
    wr(v->data(), sizeof(double) * v->size());
  f.close();
  if (!f)
    return false;
  std::error_code ec;
  std::filesystem::rename(path + ".tmp", path, ec);
  return !ec;
}

inline std::optional<se::ElementTables> load_elements(const std::string &path,
                                                      int s_expect) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    return std::nullopt;
  auto rd = [&](void *p, std::size_t n) {
    f.read(static_cast<char *>(p), std::streamsize(n));
    return bool(f);
  };
  char magic[8];
  if (!rd(magic, 8) || std::string(magic, 8) != "PWEL0003")
    return std::nullopt;
  std::int64_t hdr[5];
  if (!rd(hdr, sizeof hdr) || hdr[0] != s_expect || hdr[4] <= 0)
    return std::nullopt;
  se::ElementTables el;
  el.s = int(hdr[0]);
  el.a_kappa = int(hdr[1]);
  el.a_index = int(hdr[2]);
  se::ElementTables::FBlock blk;
  blk.kappa = int(hdr[3]);
  const std::int64_t nf = hdr[4];
  std::int64_t caps = 0;
  if (!rd(&el.E_a, sizeof(double)) || !rd(&caps, sizeof caps))
    return std::nullopt;
  el.cap_hits = caps;
  blk.E.resize(nf);
  if (!rd(blk.E.data(), sizeof(double) * nf))
    return std::nullopt;
  const std::size_t len = std::size_t(el.s + 1) * nf;
  for (auto *v : {&blk.b_log, &blk.b_sign, &blk.c_log, &blk.c_sign}) {
    v->resize(len);
    if (!rd(v->data(), sizeof(double) * len))
      return std::nullopt;
  }
  blk.a_slot = el.a_index;
  el.blocks.push_back(std::move(blk));
  return el;
}

inline std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.12e", v);
  return b;
}

} // namespace detail

// "3,10,20-26" into charges; false on malformed or empty input.
inline bool parse_z_list(const std::string &arg, std::vector<int> &out) {
  std::size_t i = 0;
  while (i < arg.size()) {
    std::size_t j = arg.find(',', i);
    if (j == std::string::npos)
      j = arg.size();
    const std::string tok = arg.substr(i, j - i);
    const std::size_t d = tok.find('-');
    try {
      if (d == std::string::npos) {
        out.push_back(std::stoi(tok));
      } else {
        const int lo = std::stoi(tok.substr(0, d));
        const int hi = std::stoi(tok.substr(d + 1));
        if (hi < lo)
          return false;
        for (int z = lo; z <= hi; ++z)
          out.push_back(z);
      }
    } catch (const std::exception &) {
      return false;
    }
    i = j + 1;
  }
  return !out.empty();
}

inline double gamma_of(const RunConfig &rc, int Z) {
  return rc.gamma > 0 ? rc.gamma : auto_gamma(Z);
}

inline std::string cache_key(const RunConfig &rc, int Z, int k) {
  std::ostringstream os;
  os << cache_version << '|' << consts::constants_version << '|' << Z << '|'
     << rc.N << '|' << k << '|' << rc.s << '|' << detail::fmt(rc.box_coeff)
     << '|' << int(rc.scheme) << '|' << detail::fmt(gamma_of(rc, Z)) << '|'
     << detail::fmt(rc.row_tol);
  return os.str();
}

inline se::ElementTables compute_elements(const RunConfig &rc, int Z, int k,
                                          bool *from_cache = nullptr) {
  std::string path;
  if (!rc.cache_dir.empty()) {
    std::filesystem::create_directories(rc.cache_dir);
    char name[64];
    std::snprintf(name, sizeof name, "elements_%016llx.bin",
                  (unsigned long long)detail::fnv1a(cache_key(rc, Z, k)));
    path = rc.cache_dir + "/" + name;
    if (auto el = detail::load_elements(path, rc.s)) {
      if (from_cache)
        *from_cache = true;
      return *el;
    }
  }
  if (from_cache)
    *from_cache = false;

  spectrum::GridSpec g;
  g.N = rc.N;
  g.k = k;
  g.R = rc.box_coeff / (Z * consts::alpha);
  g.scheme = rc.scheme;
  g.gamma = gamma_of(rc, Z);

  std::vector<int> ks;
  for (int a = 1; a <= rc.s + 2; ++a) {
    ks.push_back(-a);
    ks.push_back(a);
  }
  auto bound = spectrum::solve_spectrum(double(Z), g, ks);
  auto freeS = spectrum::solve_spectrum(0.0, g, ks);

  angular::WeightTable wt;
  se::PassConfig cfg;
  cfg.s = rc.s;
  cfg.threads = rc.threads;
  cfg.row_tol = rc.row_tol;
  auto el = se::build_elements(bound, freeS, wt, cfg);
  if (!path.empty())
    detail::save_elements(path, el);
  return el;
}

struct ZResult {
  int Z = 0;
  double gamma = 0;
  sese::FirstOrder fo, fo_sign, fo_log;
  sese::SeseResult s2, s2_sign;
  double sese_k4_eV = 0, kdev_pct = 0;
  bool has_k4 = false;
  double elapsed_s = 0;
  bool cached = false;
  long cap_hits = 0;
};

inline ZResult run_z(const RunConfig &rc, int Z) {
  const auto t0 = std::chrono::steady_clock::now();
  ZResult r;
  r.Z = Z;
  r.gamma = gamma_of(rc, Z);
  auto el = compute_elements(rc, Z, rc.k, &r.cached);
  r.cap_hits = el.cap_hits;
  r.fo = sese::first_order(el);
  r.fo_sign = sese::first_order(el, true);
  r.fo_log = sese::first_order(el, false, true);
  r.s2 = sese::sese_irreducible(el, Z, 1, false, rc.window);
  r.s2_sign = sese::sese_irreducible(el, Z, 1, true, rc.window);
  if (rc.k_study) {
    auto el4 = compute_elements(rc, Z, 4);
    auto s4 = sese::sese_irreducible(el4, Z, 1, false, rc.window);
    r.sese_k4_eV = s4.value * consts::mec2_eV;
    const double v9 = r.s2.value * consts::mec2_eV;
    r.kdev_pct = v9 != 0 ? std::abs(r.sese_k4_eV - v9) / std::abs(v9) * 100.0
                         : std::numeric_limits<double>::infinity();
    r.has_k4 = true;
  }
  r.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return r;
}

namespace detail {

inline void atomic_write(const std::string &dir, const std::string &name,
                         const std::string &body) {
  std::filesystem::create_directories(dir);
  const std::string tmp = dir + "/.tmp." + name;
  {
    std::ofstream f(tmp, std::ios::binary);
    f << body;
    if (!f)
      throw std::runtime_error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, dir + "/" + name);
}

inline std::string csv_first_order(const ZResult &r) {
  const double eV = consts::mec2_eV;
  std::ostringstream os;
  os << "# energies in eV, 1 m_e c^2 = " << fmt(consts::mec2_eV)
     << " eV\n";
  os << "l,term_eV,cum_eV,term_sign_eV,term_log_eV\n";
  double cum = 0;
  for (std::size_t l = 0; l < r.fo.terms.size(); ++l) {
    cum += r.fo.terms[l];
    os << l << ',' << fmt(r.fo.terms[l] * eV) << ',' << fmt(cum * eV) << ','
       << fmt(r.fo_sign.terms[l] * eV) << ',' << fmt(r.fo_log.terms[l] * eV)
       << '\n';
  }
  os << "extrapolated," << fmt(r.fo.fit.value * eV) << ','
     << fmt(r.fo.fit.err * eV) << ",,\n";
  return os.str();
}

inline void json_series(std::ostringstream &os, const char *key,
                        const std::vector<double> &v, double scale) {
  os << '"' << key << "\":[";
  for (std::size_t i = 0; i < v.size(); ++i)
    os << (i ? "," : "") << fmt(v[i] * scale);
  os << ']';
}

} // namespace detail

// Whole-batch driver.  Returns 0 when every requested Z completed, 2 when
// some failed, writing per-Z tables, the cross-Z summaries, and a run log.
inline int run_all(const RunConfig &rc, std::FILE *log = stderr) {
  const double eV = consts::mec2_eV;
  std::vector<ZResult> done;
  std::vector<std::pair<int, std::string>> failed;

  for (int Z : rc.Zs) {
    try {
      if (log)
        std::fprintf(log, "Z=%d: computing (gamma=%.3f)...\n", Z,
                     gamma_of(rc, Z));
      auto r = run_z(rc, Z);
      if (log)
        std::fprintf(log, "Z=%d: first order %.6f eV, two-loop %.6e eV, "
                          "G=%.4f  (%.1f s%s)\n",
                     Z, r.fo.fit.value * eV, r.s2.value * eV, r.s2.g,
                     r.elapsed_s, r.cached ? ", cached" : "");
      done.push_back(std::move(r));
    } catch (const std::exception &e) {
      if (log)
        std::fprintf(log, "Z=%d: failed: %s\n", Z, e.what());
      failed.push_back({Z, e.what()});
    }
  }

  for (const auto &r : done)
    detail::atomic_write(rc.out_dir,
                         "first_order_Z" + std::to_string(r.Z) + ".csv",
                         detail::csv_first_order(r));

  {
    std::ostringstream os;
    os << "# energies in eV, 1 m_e c^2 = " << detail::fmt(consts::mec2_eV)
       << " eV\n";
    os << "Z,gamma,sese_eV,sese_err_eV,G,sign_only_eV,sign_ratio,"
          "negative_part_eV,first_order_eV\n";
    for (const auto &r : done)
      os << r.Z << ',' << detail::fmt(r.gamma) << ','
         << detail::fmt(r.s2.value * eV) << ',' << detail::fmt(r.s2.err * eV)
         << ',' << detail::fmt(r.s2.g) << ','
         << detail::fmt(r.s2_sign.value * eV) << ','
         << detail::fmt(r.s2.value != 0 ? r.s2_sign.value / r.s2.value : 0.0)
         << ',' << detail::fmt(r.s2.negative_part * eV) << ','
         << detail::fmt(r.fo.fit.value * eV) << '\n';
    detail::atomic_write(rc.out_dir, "sese_summary.csv", os.str());
  }

  {
    std::ostringstream os;
    os << "# dimensionless shares of the first-order shift\n";
    os << "Z,log_share,sign_share\n";
    for (const auto &r : done) {
      const double t = r.fo.fit.value;
      os << r.Z << ','
         << detail::fmt(t != 0 ? r.fo_log.fit.value / t : 0.0) << ','
         << detail::fmt(t != 0 ? r.fo_sign.fit.value / t : 0.0) << '\n';
    }
    detail::atomic_write(rc.out_dir, "first_order_shares.csv", os.str());
  }

  {
    auto ref = analysis::refdata::table_this_work();
    auto r3 = analysis::refdata::g_ref3();
    std::ostringstream os;
    os << "# scaled two-loop function, dimensionless\n";
    os << "Z,G,G_published,dev_pct,G_alt,dev_alt_pct\n";
    for (const auto &r : done) {
      os << r.Z << ',' << detail::fmt(r.s2.g);
      const analysis::refdata::Row *row = nullptr;
      for (const auto &q : ref)
        if (q.Z == r.Z)
          row = &q;
      if (row)
        os << ',' << detail::fmt(row->g_this) << ','
           << detail::fmt(analysis::deviation_pct(r.s2.g, row->g_this));
      else
        os << ",,";
      auto it = r3.find(r.Z);
      if (it != r3.end())
        os << ',' << detail::fmt(it->second) << ','
           << detail::fmt(analysis::deviation_pct(r.s2.g, it->second));
      else
        os << ",,";
      os << '\n';
    }
    detail::atomic_write(rc.out_dir, "comparison.csv", os.str());
  }

  if (rc.k_study) {
    std::ostringstream os;
    os << "# energies in eV, 1 m_e c^2 = " << detail::fmt(consts::mec2_eV)
       << " eV\n";
    os << "Z,sese_k9_eV,sese_k4_eV,dev_pct,unstable\n";
    for (const auto &r : done)
      if (r.has_k4)
        os << r.Z << ',' << detail::fmt(r.s2.value * eV) << ','
           << detail::fmt(r.sese_k4_eV) << ',' << detail::fmt(r.kdev_pct)
           << ',' << (r.kdev_pct > 10.0 ? 1 : 0) << '\n';
    detail::atomic_write(rc.out_dir, "kstudy.csv", os.str());
  }

  {
    std::ostringstream l1, l2;
    for (const auto &r : done) {
      const double t = r.fo.fit.value;
      l1 << r.Z << ' ' << detail::fmt(t != 0 ? r.fo_log.fit.value / t : 0.0)
         << '\n';
      l2 << r.Z << ' ' << detail::fmt(t != 0 ? r.fo_sign.fit.value / t : 0.0)
         << '\n';
    }
    detail::atomic_write(rc.out_dir, "share_log.dat", l1.str());
    detail::atomic_write(rc.out_dir, "share_sign.dat", l2.str());
  }

  std::map<int, double> gmap;
  for (const auto &r : done)
    gmap[r.Z] = r.s2.g;
  std::optional<analysis::FitResult> cfit;
  try {
    cfit = analysis::fit_c(gmap);
  } catch (const std::invalid_argument &) {
  }

  {
    std::ostringstream os;
    os << "{\n\"version\":\"" << cache_version << "\",\n\"config\":{"
       << "\"N\":" << rc.N << ",\"k\":" << rc.k << ",\"s\":" << rc.s
       << ",\"box_coeff\":" << detail::fmt(rc.box_coeff)
       << ",\"scheme\":" << int(rc.scheme)
       << ",\"gamma\":" << detail::fmt(rc.gamma)
       << ",\"window\":" << detail::fmt(rc.window)
       << ",\"row_tol\":" << detail::fmt(rc.row_tol)
       << ",\"threads\":" << rc.threads
       << ",\"mec2_eV\":" << detail::fmt(consts::mec2_eV) << "},\n\"zs\":[";
    bool first = true;
    for (const auto &r : done) {
      os << (first ? "\n" : ",\n") << "{\"Z\":" << r.Z
         << ",\"gamma\":" << detail::fmt(r.gamma) << ",\"first_order\":{";
      detail::json_series(os, "terms_eV", r.fo.terms, eV);
      os << ',';
      detail::json_series(os, "even_sums_eV", r.fo.fit.even_sums, eV);
      os << ',';
      detail::json_series(os, "odd_sums_eV", r.fo.fit.odd_sums, eV);
      os << ",\"value_eV\":" << detail::fmt(r.fo.fit.value * eV)
         << ",\"err_eV\":" << detail::fmt(r.fo.fit.err * eV)
         << ",\"log_share\":"
         << detail::fmt(r.fo.fit.value != 0
                            ? r.fo_log.fit.value / r.fo.fit.value
                            : 0.0)
         << ",\"sign_share\":"
         << detail::fmt(r.fo.fit.value != 0
                            ? r.fo_sign.fit.value / r.fo.fit.value
                            : 0.0)
         << "},\"sese\":{";
      detail::json_series(os, "terms_eV", r.s2.terms, eV);
      os << ",\"value_eV\":" << detail::fmt(r.s2.value * eV)
         << ",\"err_eV\":" << detail::fmt(r.s2.err * eV)
         << ",\"g\":" << detail::fmt(r.s2.g)
         << ",\"sign_only_eV\":" << detail::fmt(r.s2_sign.value * eV)
         << ",\"sign_ratio\":"
         << detail::fmt(r.s2.value != 0 ? r.s2_sign.value / r.s2.value : 0.0)
         << ",\"negative_part_eV\":" << detail::fmt(r.s2.negative_part * eV)
         << "}";
      if (r.has_k4)
        os << ",\"kstudy\":{\"sese_k4_eV\":" << detail::fmt(r.sese_k4_eV)
           << ",\"dev_pct\":" << detail::fmt(r.kdev_pct) << "}";
      os << "}";
      first = false;
    }
    os << "\n],\n";
    if (cfit)
      os << "\"fit_c\":{\"mean\":" << detail::fmt(cfit->c_mean)
         << ",\"spread\":" << detail::fmt(cfit->c_spread) << "}\n";
    else
      os << "\"fit_c\":null\n";
    os << "}\n";
    detail::atomic_write(rc.out_dir, "results.json", os.str());
  }

  {
    std::ostringstream os;
    os << "{\n\"completed\":[";
    for (std::size_t i = 0; i < done.size(); ++i)
      os << (i ? "," : "") << "{\"Z\":" << done[i].Z
         << ",\"elapsed_s\":" << detail::fmt(done[i].elapsed_s)
         << ",\"cached\":" << (done[i].cached ? "true" : "false")
         << ",\"cap_hits\":" << done[i].cap_hits << "}";
    os << "],\n\"failed\":[";
    for (std::size_t i = 0; i < failed.size(); ++i)
      os << (i ? "," : "") << "{\"Z\":" << failed[i].first << ",\"error\":\""
         << failed[i].second << "\"}";
    os << "]\n}\n";
    detail::atomic_write(rc.out_dir, "run_log.json", os.str());
  }

  return failed.empty() ? 0 : 2;
}

} // namespace pwrse::run
