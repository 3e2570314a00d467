#pragma once
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pwrse::par {

// Neumaier compensated accumulator.
struct Neumaier {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

// Runs fn(i) for i = 0..n-1 on up to `threads` workers.  Work items are
// claimed through an atomic counter; the first exception is captured and
// rethrown after all workers join.  Callers that need a deterministic
// reduction store per-index results and fold them in index order afterwards,
// which makes the outcome independent of the thread count.
inline void run_indexed(int n, int threads, const std::function<void(int)> &fn) {
  if (n <= 0)
    return;
  if (threads < 1)
    threads = 1;
  if (threads == 1 || n == 1) {
    for (int i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mx;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n)
        return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mx);
        if (!err)
          err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int nw = std::min(threads, n);
  pool.reserve(nw);
  for (int t = 0; t < nw; ++t)
    pool.emplace_back(worker);
  for (auto &t : pool)
    t.join();
  if (err)
    std::rethrow_exception(err);
}

// Ordered compensated fold of per-index partial arrays: out[j] accumulates
// parts[i][j] over i in index order.  Bit-identical for any thread count that
// produced the parts.
inline void fold_ordered(const std::vector<std::vector<double>> &parts,
                         std::vector<double> &out) {
  std::vector<Neumaier> acc(out.size());
  for (std::size_t j = 0; j < out.size(); ++j)
    acc[j].s = out[j];
  for (const auto &p : parts) {
    if (p.empty())
      continue;
    for (std::size_t j = 0; j < out.size(); ++j)
      acc[j].add(p[j]);
  }
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = acc[j].value();
}

} // namespace pwrse::par
