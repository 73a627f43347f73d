#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "hklab/common.hpp"
#include "hklab/profile.hpp"

namespace hklab {

/// Result of evaluating the moment integral int_0^inf s^gamma Phi(s) ds/s.
struct MomentResult {
  double gamma = 0.0;
  double value = 0.0;          // meaningful only when !divergent
  bool divergent = false;
  double quad_error = 0.0;     // truncation estimate from dropped octaves
  double tail_bound = 0.0;     // bound on the remainder past the last octave
  int octaves_used = 0;
};

namespace detail {

// 16-point Gauss-Legendre nodes/weights on [-1, 1] (positive half).
inline constexpr std::array<double, 8> kGL16X = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
    0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
inline constexpr std::array<double, 8> kGL16W = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

// Integrates s^gamma Phi(s) ds/s over [a, b] via the substitution s = e^w,
// i.e. int e^{gamma w} Phi(e^w) dw, which is uniformly accurate per octave.
inline double block_integral(const DecayProfile& phi, double gamma, double a, double b) {
  if (a >= b) return 0.0;
  const double wa = std::log(a), wb = std::log(b);
  const double mid = 0.5 * (wa + wb), half = 0.5 * (wb - wa);
  double acc = 0.0;
  for (std::size_t i = 0; i < kGL16X.size(); ++i) {
    for (double sign : {-1.0, 1.0}) {
      const double w = mid + sign * half * kGL16X[i];
      const double s = std::exp(w);
      acc += kGL16W[i] * std::exp(gamma * w) * phi(s);
    }
  }
  return acc * half;
}

// Analytic bound on int_x^inf s^gamma Phi ds/s; nullopt when no
// closed-form bound applies (tabulated without extension, or a
// genuinely divergent tail).
inline std::optional<double> analytic_tail_bound(const DecayProfile& phi, double gamma,
                                                 double x) {
  if (x <= 0) return std::nullopt;
  switch (phi.kind()) {
    case ProfileKind::Polynomial: {
      const double q = phi.poly_exponent();
      if (q <= gamma) return std::nullopt;  // divergent tail
      // (1+s)^-q <= s^-q, so the tail is below C x^{gamma-q}/(q-gamma).
      return phi.amplitude() * std::pow(x, gamma - q) / (q - gamma);
    }
    case ProfileKind::StretchedExponential: {
      const double C = phi.amplitude(), c = phi.decay_rate(), nu = phi.stretch_exponent();
      // e^{-c s^nu} <= e^{-c x^nu / 2} e^{-c s^nu / 2} for s >= x.
      const double full_half =
          (1.0 / nu) * std::pow(0.5 * c, -gamma / nu) * std::tgamma(gamma / nu);
      return C * std::exp(-0.5 * c * std::pow(x, nu)) * full_half;
    }
    default: {
      // Past its last sample an extended tabulated profile is an exact
      // power law Phi(last) (s/s_last)^slope; Phi is monotone elsewhere.
      if (!phi.has_extension()) return std::nullopt;
      const double s_probe = std::max(x, 1.0) * 1e6;
      const double p1 = phi(s_probe), p2 = phi(2.0 * s_probe);
      if (p1 <= 0) return 0.0;
      const double slope = std::log2(std::max(p2, 1e-300) / p1);
      if (slope + gamma >= 0) return std::nullopt;  // tail at least s^{-gamma}: divergent
      const double m = -slope;
      const double x_eff = std::max(x, s_probe);
      double bound = phi(x_eff) * std::pow(x_eff, gamma) / (m - gamma);
      if (x < s_probe) {
        // bounded monotone piece in between: Phi(x) * x^gamma-type block bound
        bound += phi(x) * (std::pow(s_probe, gamma) - std::pow(x, gamma)) / gamma;
      }
      return bound;
    }
  }
}

}  // namespace detail

/// Adaptive evaluation of int_lo^inf s^gamma Phi(s) ds/s by octave blocks
/// [2^j, 2^{j+1}]. Divergence is declared when the octave contributions do
/// not form a Cauchy sequence within `max_octaves` octaves above s = 1.
inline MomentResult integrate_moment_from(const DecayProfile& phi, double gamma, double lo,
                                          double tol = 1e-10, int max_octaves = 40) {
  require(gamma > 0, "moment: gamma must be positive");
  require(lo >= 0, "moment: lower limit must be nonnegative");
  if (phi.kind() == ProfileKind::Tabulated && !phi.has_extension())
    throw std::invalid_argument("moment: tabulated profile carries no extension rule");

  MomentResult out;
  out.gamma = gamma;
  std::vector<double> blocks;

  int j_anchor = 0;
  if (lo > 0) {
    // partial block [lo, 2^ceil(log2 lo)] then whole octaves upward
    j_anchor = static_cast<int>(std::ceil(std::log2(lo)));
    const double edge = std::pow(2.0, j_anchor);
    if (edge > lo) blocks.push_back(detail::block_integral(phi, gamma, lo, edge));
  } else {
    // octaves downward from s = 1; the integrand is <= Phi(0) s^{gamma-1},
    // so contributions shrink geometrically like 2^{j gamma}
    const double phi0 = phi(0.0);
    int j = 0;
    double down_acc = 0.0;
    while (j > -1000) {
      --j;
      const double b = detail::block_integral(phi, gamma, std::pow(2.0, j), std::pow(2.0, j + 1));
      blocks.push_back(b);
      down_acc += b;
      const double lower_bound_rest = phi0 * std::pow(2.0, double(j) * gamma) / gamma;
      if (lower_bound_rest <= tol * std::max(down_acc, 1e-300) || lower_bound_rest < 1e-300) {
        out.quad_error += lower_bound_rest;
        break;
      }
    }
    std::reverse(blocks.begin(), blocks.end());
    j_anchor = 0;
  }

  // Octaves upward. Finiteness is certified either by an analytic tail
  // bound (parametric and extended-tabulated kinds) or by geometrically
  // decreasing octave contributions; divergence is declared when the
  // contributions have not started a genuine decay within `max_octaves`
  // octaves above the anchor (the Cauchy test of the design).
  double acc = pairwise_sum(blocks);
  double prev = -1.0;
  bool settled = false;
  int j = j_anchor;
  const int divergence_horizon = std::max(j_anchor, 0) + max_octaves;
  const int hard_cap = std::max(j_anchor, 0) + 3000;
  while (j < hard_cap) {
    const double b = detail::block_integral(phi, gamma, std::pow(2.0, j), std::pow(2.0, j + 1));
    blocks.push_back(b);
    acc += b;
    ++out.octaves_used;
    if (auto tb = detail::analytic_tail_bound(phi, gamma, std::pow(2.0, j + 1));
        tb && *tb <= tol * std::max(std::abs(acc), 1e-300)) {
      out.tail_bound = *tb;
      settled = true;
      break;
    }
    if (prev > 0) {
      const double rho = b / prev;
      // rho < 1/2 certifies the remainder <= b rho/(1-rho) for the
      // eventually log-concave tails of this catalog
      if (rho < 0.5 && b * rho / (1.0 - rho) <= tol * std::max(std::abs(acc), 1e-300)) {
        out.tail_bound = b * rho / (1.0 - rho);
        settled = true;
        break;
      }
      if (j >= divergence_horizon && rho >= 0.9995) break;  // not Cauchy: divergent
    }
    prev = b;
    ++j;
  }
  if (!settled) {
    out.divergent = true;
    return out;
  }
  out.value = pairwise_sum(blocks);
  return out;
}

/// The moment condition integral int_0^inf s^gamma Phi(s) ds/s.
inline MomentResult moment_integral(const DecayProfile& phi, double gamma, double tol = 1e-10) {
  return integrate_moment_from(phi, gamma, 0.0, tol);
}

/// int_x^inf s^gamma Phi(s) ds/s; requires the full moment to be finite.
inline double tail_integral(const DecayProfile& phi, double gamma, double x, double tol = 1e-10) {
  require(x >= 0, "tail_integral: lower limit must be nonnegative");
  MomentResult r = integrate_moment_from(phi, gamma, x, tol);
  if (r.divergent) throw std::invalid_argument("tail_integral: divergent moment");
  return r.value;
}

/// int_lo^hi s^gamma Phi(s) ds/s over a finite range (always finite for
/// gamma > 0 and bounded Phi).
inline double partial_moment(const DecayProfile& phi, double gamma, double hi,
                             double tol = 1e-10) {
  require(hi >= 0, "partial_moment: negative upper limit");
  if (hi == 0) return 0.0;
  // Dyadic blocks downward from hi, same lower-truncation rule as the
  // full moment.
  const double phi0 = phi(0.0);
  std::vector<double> blocks;
  double edge = hi;
  double acc = 0.0;
  for (int guard = 0; guard < 1200; ++guard) {
    const double lo = edge * 0.5;
    const double b = detail::block_integral(phi, gamma, lo, edge);
    blocks.push_back(b);
    acc += b;
    const double rest = phi0 * std::pow(lo, gamma) / gamma;
    if (rest <= tol * std::max(acc, 1e-300) || rest < 1e-300) break;
    edge = lo;
  }
  std::reverse(blocks.begin(), blocks.end());
  return pairwise_sum(blocks);
}

struct TailThreshold {
  double T = 0.0;            // largest dyadic T with tail(T^{-1/beta}) < delta
  double tail_at_T = 0.0;    // recomputed tail, confirming the inequality
  bool vacuous = false;      // delta >= full moment: any T works
  double full_moment = 0.0;
};

/// Finds T on the dyadic grid 2^{-j}, j in [-20, 60], largest first, such
/// that int_{T^{-1/beta}}^inf s^{alpha+beta} Phi(s) ds/s < delta strictly.
inline TailThreshold tail_threshold(const DecayProfile& phi, double alpha, double beta,
                                    double delta) {
  require(delta > 0, "tail_threshold: delta must be positive");
  require(alpha > 0 && beta > 0, "tail_threshold: exponents must be positive");
  const double gamma = alpha + beta;
  MomentResult full = moment_integral(phi, gamma);
  if (full.divergent)
    throw std::invalid_argument("tail_threshold: moment at gamma = alpha + beta diverges");
  TailThreshold out;
  out.full_moment = full.value;
  if (delta >= full.value) {
    out.T = std::pow(2.0, 20);
    out.tail_at_T = tail_integral(phi, gamma, std::pow(out.T, -1.0 / beta));
    out.vacuous = true;
    return out;
  }
  for (int j = -20; j <= 60; ++j) {
    const double T = std::pow(2.0, -j);
    const double tail = tail_integral(phi, gamma, std::pow(T, -1.0 / beta));
    if (tail < delta) {
      out.T = T;
      out.tail_at_T = tail;
      return out;
    }
  }
  throw std::runtime_error("tail_threshold: no dyadic T in [2^-60, 2^20] satisfies the bound");
}

}  // namespace hklab
