#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "hklab/chain.hpp"
#include "hklab/common.hpp"
#include "hklab/energy.hpp"
#include "hklab/kernel.hpp"

namespace hklab {

struct BetaDeviationFit {
  double beta_est = 0.0;
  double stderr_ = 0.0;
  std::vector<int> ks;
  std::vector<double> deviations;
  bool defined = false;  // false for on-ball-constant u (D identically 0)
};

/// Walk exponent from the ball-deviation scaling: slope of -log2 D(2^-k)
/// vs k. For a function of finite energy D(r) tracks r^beta at the
/// critical smoothness, which is the content of the domain identity
/// D(E) = W^{beta/2,2}.
inline BetaDeviationFit beta_from_deviation(const MetricMeasureSpace& space,
                                            const GridFunction& u, int k_lo, int k_hi,
                                            unsigned threads = 1) {
  require(k_hi - k_lo + 1 >= 4, "beta_from_deviation: need >= 4 scales");
  BetaDeviationFit out;
  std::vector<double> devs = deviation_profile(space, u, k_lo, k_hi, threads);
  out.deviations = devs;
  for (int k = k_lo; k <= k_hi; ++k) out.ks.push_back(k);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < devs.size(); ++i) {
    if (devs[i] <= 0) return out;  // undefined: constant-on-balls function
    xs.push_back(double(k_lo) + double(i));
    ys.push_back(-std::log2(devs[i]));
  }
  LineFit fit = least_squares(xs, ys);
  out.beta_est = fit.slope;
  out.stderr_ = fit.slope_stderr;
  out.defined = true;
  return out;
}

struct BetaCollapseFit {
  double beta_est = 0.0;
  double objective_at_min = 0.0;
  bool no_estimate = false;  // flat objective: kernel not of profile form
  std::vector<double> beta_grid;
  std::vector<double> objective;  // spread-vs-beta curve
};

using KernelEval = std::function<double(double t, int i, int j)>;

namespace detail {

/// Cross-t misalignment of the collapse cloud at a candidate beta: bin the
/// cloud in log s, take per-(t, bin) medians of log v, and average the
/// range across t over the covered bins, weighting by the local profile
/// slope (the beta-sensitive part of the curve). Points below 1.5x the
/// equilibrium kernel level are dropped: on a compact model they sit on
/// the p_t -> 1/mu(M) plateau, which the scaling estimate does not cover.
inline double collapse_misalignment(const MetricMeasureSpace& space, const KernelEval& eval,
                                    double alpha, double beta_try,
                                    const std::vector<double>& t_grid,
                                    const std::vector<std::pair<int, int>>& pairs,
                                    const std::map<std::pair<double, std::pair<int, int>>,
                                                   double>& values,
                                    int n_bins, double s_min, double s_max) {
  (void)eval;
  const double p_floor = 1.5 / space.total_mass();
  const double llo = std::log(s_min), lhi = std::log(s_max);
  const std::size_t nt = t_grid.size();
  std::vector<std::vector<double>> cell(nt * n_bins);
  for (std::size_t ti = 0; ti < nt; ++ti) {
    const double t = t_grid[ti];
    const double tb = std::pow(t, 1.0 / beta_try);
    const double ta = std::pow(t, alpha / beta_try);
    for (const auto& pr : pairs) {
      const double p = values.at({t, pr});
      if (p <= p_floor) continue;
      const double s = space.dist(pr.first, pr.second) / tb;
      if (s <= s_min || s >= s_max) continue;
      const int b = std::min(n_bins - 1,
                             static_cast<int>((std::log(s) - llo) / (lhi - llo) * n_bins));
      cell[ti * n_bins + b].push_back(std::log(ta * p));
    }
  }
  std::vector<double> med(nt * n_bins, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < cell.size(); ++c) {
    if (cell[c].size() >= 3) {
      auto& v = cell[c];
      std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
      med[c] = v[v.size() / 2];
    }
  }
  // per-bin profile level (median across t) for the slope weights
  std::vector<double> prof(n_bins, std::numeric_limits<double>::quiet_NaN());
  for (int b = 0; b < n_bins; ++b) {
    std::vector<double> col;
    for (std::size_t ti = 0; ti < nt; ++ti)
      if (std::isfinite(med[ti * n_bins + b])) col.push_back(med[ti * n_bins + b]);
    if (!col.empty()) {
      std::nth_element(col.begin(), col.begin() + col.size() / 2, col.end());
      prof[b] = col[col.size() / 2];
    }
  }
  double acc = 0.0, wacc = 0.0;
  for (int b = 0; b < n_bins; ++b) {
    std::vector<double> col;
    for (std::size_t ti = 0; ti < nt; ++ti)
      if (std::isfinite(med[ti * n_bins + b])) col.push_back(med[ti * n_bins + b]);
    if (col.size() < 4) continue;
    double slope = 0.0;
    int neigh = 0;
    for (int d : {-1, 1})
      if (b + d >= 0 && b + d < n_bins && std::isfinite(prof[b + d]) && std::isfinite(prof[b])) {
        slope += std::abs(prof[b + d] - prof[b]);
        ++neigh;
      }
    const double w = 1.0 + 3.0 * (neigh ? slope / neigh : 0.0);
    auto [mn, mx] = std::minmax_element(col.begin(), col.end());
    acc += w * (*mx - *mn);
    wacc += w;
  }
  if (wacc == 0.0) return std::numeric_limits<double>::infinity();
  return acc / wacc;
}

}  // namespace detail

/// Walk exponent by collapse-spread minimization over a beta grid with
/// parabolic refinement. A flat objective (no pronounced minimum) yields
/// a no-estimate verdict instead of a number.
inline BetaCollapseFit beta_from_collapse(const MetricMeasureSpace& space, const KernelEval& eval,
                                          double alpha, const std::vector<double>& beta_grid,
                                          const std::vector<double>& t_grid,
                                          const std::vector<std::pair<int, int>>& pairs,
                                          int n_bins = 36, double s_min = 0.05,
                                          double s_max = 3.0) {
  require(beta_grid.size() >= 5, "beta_from_collapse: need a beta grid of >= 5 points");
  require(t_grid.size() >= 4, "beta_from_collapse: need >= 4 t values");
  require(pairs.size() >= 32, "beta_from_collapse: pair sample too small");
  // kernel values are beta-independent: evaluate once
  std::map<std::pair<double, std::pair<int, int>>, double> values;
  for (double t : t_grid)
    for (const auto& pr : pairs) values[{t, pr}] = eval(t, pr.first, pr.second);

  BetaCollapseFit out;
  out.beta_grid = beta_grid;
  for (double b : beta_grid)
    out.objective.push_back(detail::collapse_misalignment(space, eval, alpha, b, t_grid, pairs,
                                                          values, n_bins, s_min, s_max));
  std::size_t imin = 0;
  for (std::size_t i = 1; i < out.objective.size(); ++i)
    if (out.objective[i] < out.objective[imin]) imin = i;
  // flatness test against the median objective
  std::vector<double> sorted = out.objective;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  out.objective_at_min = out.objective[imin];
  if (!(out.objective_at_min < 0.8 * median) || !std::isfinite(median)) {
    out.no_estimate = true;
    return out;
  }
  if (imin == 0 || imin + 1 == out.objective.size()) {
    out.no_estimate = true;  // minimum at the bracket edge: not localized
    return out;
  }
  // parabolic refinement through the three points around the minimum
  const double x0 = beta_grid[imin - 1], x1 = beta_grid[imin], x2 = beta_grid[imin + 1];
  const double y0 = out.objective[imin - 1], y1 = out.objective[imin],
               y2 = out.objective[imin + 1];
  const double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
  double refined = x1;
  if (std::abs(denom) > 0) {
    const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if (a > 0) refined = std::clamp(-b / (2.0 * a), x0, x2);
  }
  out.beta_est = refined;
  return out;
}

inline BetaCollapseFit beta_from_collapse(const HeatKernelModel& model,
                                          const std::vector<double>& beta_grid,
                                          const std::vector<double>& t_grid,
                                          const std::vector<std::pair<int, int>>& pairs,
                                          int n_bins = 36, double s_min = 0.05,
                                          double s_max = 3.0) {
  return beta_from_collapse(
      model.space(),
      [&model](double t, int i, int j) { return model.eval(t, i, j); },
      model.nominal().alpha, beta_grid, t_grid, pairs, n_bins, s_min, s_max);
}

struct BetaStarBisect {
  double beta_star_est = 0.0;     // 2 sigma at the growth-exponent crossing
  double bracket_lo = 0.0, bracket_hi = 0.0;  // in sigma
  std::vector<std::pair<double, double>> evaluations;  // (sigma, g)
  bool ok = false;
  std::string note;
};

/// Locates the sigma at which the triviality growth exponent crosses +0.2
/// and reports beta* = 2 sigma_crit. Uses precomputed per-level deviation
/// profiles, so each g(sigma) evaluation is closed-form in sigma.
inline BetaStarBisect beta_star_bisect(const std::vector<std::vector<double>>& level_deviations,
                                       const std::vector<double>& level_log2_invres,
                                       double sigma_lo, double sigma_hi,
                                       double bracket_width = 0.05, double threshold = 0.2,
                                       int k_lo = 1) {
  require(sigma_lo > 0 && sigma_hi > sigma_lo, "beta_star_bisect: bad bracket");
  BetaStarBisect out;
  auto g_of = [&](double sigma) {
    TrivialityResult r = triviality_demo(level_deviations, level_log2_invres, sigma, k_lo);
    out.evaluations.emplace_back(sigma, r.growth_exponent);
    return r.growth_exponent;
  };
  double g_lo = g_of(sigma_lo), g_hi = g_of(sigma_hi);
  if (!(g_lo < threshold && g_hi > threshold)) {
    out.note = "bracket does not straddle the crossing: g(" + fmt_g17(sigma_lo) + ") = " +
               fmt_g17(g_lo) + ", g(" + fmt_g17(sigma_hi) + ") = " + fmt_g17(g_hi);
    return out;
  }
  // monotonicity spot check across the bracket
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 8; ++i) {
    double g = g_of(sigma_lo + (sigma_hi - sigma_lo) * i / 8.0);
    if (g < prev - 1e-9) {
      out.note = "growth exponent not monotone on the bracket";
      return out;
    }
    prev = g;
  }
  double lo = sigma_lo, hi = sigma_hi;
  while (hi - lo > bracket_width) {
    const double mid = 0.5 * (lo + hi);
    (g_of(mid) > threshold ? hi : lo) = mid;
  }
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.beta_star_est = lo + hi;  // 2 * midpoint
  out.ok = true;
  return out;
}

struct ExponentReport {
  double alpha_est = 0.0, alpha_stderr = 0.0;
  double beta_deviation = 0.0, beta_deviation_stderr = 0.0;
  double beta_collapse = 0.0;
  bool beta_routes_agree = false;  // required before beta is reported
  double beta_est = 0.0;           // mean of the two routes when they agree
  double beta_star_est = 0.0;
  double beta_star_bracket = 0.0;
  bool beta_defined = false;
  bool beta_star_defined = false;
  std::string provenance;
};

/// Combines the two beta routes under the agreement rule: a beta is
/// reported only when collapse and deviation agree within tolerance.
inline ExponentReport combine_exponents(const AhlforsFit& ahlfors, const BetaDeviationFit& dev,
                                        const BetaCollapseFit& col,
                                        const std::optional<BetaStarBisect>& bstar,
                                        double agreement_tol) {
  ExponentReport rep;
  rep.alpha_est = ahlfors.alpha_est;
  rep.alpha_stderr = ahlfors.alpha_stderr;
  if (dev.defined && !col.no_estimate) {
    rep.beta_deviation = dev.beta_est;
    rep.beta_deviation_stderr = dev.stderr_;
    rep.beta_collapse = col.beta_est;
    rep.beta_routes_agree = std::abs(dev.beta_est - col.beta_est) <= agreement_tol;
    if (rep.beta_routes_agree) {
      rep.beta_est = 0.5 * (dev.beta_est + col.beta_est);
      rep.beta_defined = true;
    }
  }
  if (bstar && bstar->ok) {
    rep.beta_star_est = bstar->beta_star_est;
    rep.beta_star_bracket = bstar->bracket_hi - bstar->bracket_lo;
    rep.beta_star_defined = true;
  }
  return rep;
}

}  // namespace hklab
