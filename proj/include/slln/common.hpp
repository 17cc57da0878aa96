#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace slln {

// Compensated (Neumaier) accumulator.  Used wherever long runs of values of
// mixed magnitude are folded into one double, e.g. prefix tables and annulus
// sums over large boxes.
class NeumaierSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// FNV-1a, 64-bit.  Stable across platforms; used to hash stream names and to
// fingerprint canonical report bytes.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Shortest round-trip decimal form of a double.  All user-facing numeric
// output funnels through here so that reports and manifests are byte-stable.
inline std::string fmt_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string fmt_int(std::int64_t x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// Runs fn(i) for i in [0, n).  Work is split into contiguous chunks, one per
// worker.  Callers must make fn(i) write only to slot i of preallocated
// storage; reductions happen after the join, in index order, so results do
// not depend on the thread budget.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  if (n <= 0) return;
  if (threads < 1) threads = 1;
  std::int64_t nthreads = std::min<std::int64_t>(threads, n);
  if (nthreads == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nthreads));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nthreads));
  for (std::int64_t t = 0; t < nthreads; ++t) {
    std::int64_t lo = n * t / nthreads;
    std::int64_t hi = n * (t + 1) / nthreads;
    pool.emplace_back([&, t, lo, hi]() {
      try {
        for (std::int64_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace slln
