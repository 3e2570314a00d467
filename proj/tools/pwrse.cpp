#include "pwrse/runner.hpp"

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

using namespace pwrse;

namespace {

const char *usage =
    "usage: pwrse --Z <list> [options]\n"
    "\n"
    "  --Z <list>            nuclear charges, comma separated, ranges allowed\n"
    "                        (e.g. --Z 3,10,20-26,92)\n"
    "  --grid-points <N>     radial B-spline intervals            [28]\n"
    "  --spline-order <k>    B-spline order                       [9]\n"
    "  --partial-waves <s>   highest multipole order              [7]\n"
    "  --box-coeff <x>       cavity radius in units 1/(Z alpha)   [40]\n"
    "  --grid exp|lin        radial knot distribution             [exp]\n"
    "  --grid-gamma <g>      exponential clustering strength      [auto]\n"
    "  --row-tol <t>         relative overlap cut for subtraction  [1e-6]\n"
    "  --window <w>          gap exclusion window, electron masses [1e-10]\n"
    "  --threads <n>         worker threads                       [1]\n"
    "  --cache-dir <dir>     reuse matrix elements across runs\n"
    "  --out-dir <dir>       output directory                     [.]\n"
    "  --k-study             rerun at spline order 4 and compare\n";

} // namespace

int main(int argc, char **argv) {
  run::RunConfig rc;

  auto need = [&](int &i) -> const char * {
    if (i + 1 >= argc) {
      std::fprintf(stderr, "missing value for %s\n", argv[i]);
      std::exit(1);
    }
    return argv[++i];
  };

  for (int i = 1; i < argc; ++i) {
    const char *a = argv[i];
    if (!std::strcmp(a, "--help") || !std::strcmp(a, "-h")) {
      std::fputs(usage, stdout);
      return 0;
    } else if (!std::strcmp(a, "--Z")) {
      if (!run::parse_z_list(need(i), rc.Zs)) {
        std::fprintf(stderr, "bad --Z list\n");
        return 1;
      }
    } else if (!std::strcmp(a, "--grid-points")) {
      rc.N = std::atoi(need(i));
    } else if (!std::strcmp(a, "--spline-order")) {
      rc.k = std::atoi(need(i));
    } else if (!std::strcmp(a, "--partial-waves")) {
      rc.s = std::atoi(need(i));
    } else if (!std::strcmp(a, "--box-coeff")) {
      rc.box_coeff = std::atof(need(i));
    } else if (!std::strcmp(a, "--grid")) {
      const std::string v = need(i);
      if (v == "exp")
        rc.scheme = basis::GridScheme::Exponential;
      else if (v == "lin")
        rc.scheme = basis::GridScheme::Linear;
      else {
        std::fprintf(stderr, "bad --grid (want exp or lin)\n");
        return 1;
      }
    } else if (!std::strcmp(a, "--grid-gamma")) {
      rc.gamma = std::atof(need(i));
    } else if (!std::strcmp(a, "--row-tol")) {
      rc.row_tol = std::atof(need(i));
    } else if (!std::strcmp(a, "--window")) {
      rc.window = std::atof(need(i));
    } else if (!std::strcmp(a, "--threads")) {
      rc.threads = std::atoi(need(i));
    } else if (!std::strcmp(a, "--cache-dir")) {
      rc.cache_dir = need(i);
    } else if (!std::strcmp(a, "--out-dir")) {
      rc.out_dir = need(i);
    } else if (!std::strcmp(a, "--k-study")) {
      rc.k_study = true;
    } else {
      std::fprintf(stderr, "unknown option %s\n%s", a, usage);
      return 1;
    }
  }

  if (rc.Zs.empty()) {
    std::fputs(usage, stderr);
    return 1;
  }
  if (rc.N < 6 || rc.k < 3 || rc.k > 15 || rc.s < 0 || rc.s > 12 ||
      rc.box_coeff <= 0 || rc.threads < 1) {
    std::fprintf(stderr, "configuration out of range\n");
    return 1;
  }
  for (int z : rc.Zs)
    if (z < 1 || z > 137) {
      std::fprintf(stderr, "Z=%d out of range\n", z);
      return 1;
    }

  return run::run_all(rc);
}
