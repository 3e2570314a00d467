#include <catch2/catch_amalgamated.hpp>
#include <pwrse/parallel.hpp>

#include <atomic>
#include <cstdint>
#include <cstring>
#include <random>
#include <vector>

using namespace pwrse;

TEST_CASE("neumaier recovers cancellation that plain summation loses") {
  par::Neumaier acc;
  acc.add(1.0);
  acc.add(1e100);
  acc.add(1.0);
  acc.add(-1e100);
  CHECK(acc.value() == 2.0);

  par::Neumaier b;
  const double eps = 1e-17;
  for (int i = 0; i < 1000; ++i)
    b.add(eps);
  b.add(1.0);
  for (int i = 0; i < 1000; ++i)
    b.add(-eps);
  CHECK(b.value() == Catch::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("run_indexed visits every index exactly once") {
  const int n = 1000;
  std::vector<std::atomic<int>> hits(n);
  for (auto &h : hits)
    h = 0;
  par::run_indexed(n, 8, [&](int i) { hits[i].fetch_add(1); });
  for (int i = 0; i < n; ++i)
    CHECK(hits[i].load() == 1);
}

TEST_CASE("run_indexed propagates the first exception") {
  CHECK_THROWS_AS(par::run_indexed(100, 4,
                                   [](int i) {
                                     if (i == 37)
                                       throw std::runtime_error("boom");
                                   }),
                  std::runtime_error);
}

TEST_CASE("ordered fold is bit-identical for 1 and 8 workers") {
  const int n = 500, m = 64;
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<std::vector<double>> data(n);
  for (auto &row : data) {
    row.resize(m);
    for (auto &v : row)
      v = U(rng) * std::pow(10.0, 20.0 * U(rng));
  }
  auto reduce = [&](int threads) {
    std::vector<std::vector<double>> parts(n);
    par::run_indexed(n, threads, [&](int i) { parts[i] = data[i]; });
    std::vector<double> out(m, 0.0);
    par::fold_ordered(parts, out);
    return out;
  };
  const auto r1 = reduce(1);
  const auto r8 = reduce(8);
  REQUIRE(r1.size() == r8.size());
  for (int j = 0; j < m; ++j) {
    std::uint64_t a, b;
    std::memcpy(&a, &r1[j], 8);
    std::memcpy(&b, &r8[j], 8);
    CHECK(a == b);
  }
}
