#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hklab {

/// Raised when a run configuration fails validation (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a requested model exceeds the memory/pair budget (CLI exit code 3).
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

/// Fixed-order pairwise (cascade) summation. Deterministic for a given
/// element order and far more accurate than a running sum on long arrays.
inline double pairwise_sum(const double* p, std::size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(p, h) + pairwise_sum(p + h, n - h);
}

inline double pairwise_sum(std::span<const double> v) {
  return pairwise_sum(v.data(), v.size());
}

inline unsigned hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1u : n;
}

/// Runs body(chunk) for chunk = 0..n_chunks-1 on up to `threads` workers.
/// The chunk decomposition is fixed by the caller, so results are
/// independent of the number of workers as long as chunks do not share
/// mutable state.
template <class Body>
void parallel_chunks(std::size_t n_chunks, unsigned threads, Body&& body) {
  if (n_chunks == 0) return;
  unsigned nw = std::min<std::size_t>(threads == 0 ? 1 : threads, n_chunks);
  if (nw <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) body(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (unsigned w = 0; w < nw; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t c = next.fetch_add(1);
        if (c >= n_chunks) return;
        body(c);
      }
    });
  }
  for (auto& th : pool) th.join();
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = a + b x with the usual residual-based
/// standard error on the slope.
inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "least_squares: need >= 2 points");
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
  mx /= double(n); my /= double(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0, "least_squares: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.n = n;
  if (n > 2) {
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = y[i] - f.intercept - f.slope * x[i];
      ss += r * r;
    }
    f.slope_stderr = std::sqrt(ss / double(n - 2) / sxx);
  }
  return f;
}

/// Shortest exact decimal rendering used everywhere doubles reach a file,
/// so that reports are byte-stable.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Relative comparison slack used for the algebraic inequality verdicts.
inline bool leq_with_rel_slack(double lhs, double rhs, double rel = 1e-12) {
  double scale = std::max(std::abs(lhs), std::abs(rhs));
  return lhs <= rhs + rel * scale + 1e-300;
}

inline double rel_residual(double a, double b) {
  double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace hklab
