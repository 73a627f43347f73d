#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "hklab/common.hpp"

namespace hklab {

enum class ProfileKind { StretchedExponential, Polynomial, Tabulated };

inline const char* to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::StretchedExponential: return "stretched-exponential";
    case ProfileKind::Polynomial: return "polynomial";
    default: return "tabulated";
  }
}

/// Nonnegative, nonincreasing profile Phi on [0, inf).
///   stretched-exponential: C exp(-c s^nu)
///   polynomial:            C (1+s)^(-q)
///   tabulated:             samples (s_j, Phi_j), log-linear in (log s, log Phi)
///                          between samples, optionally extended past the last
///                          sample by the final log-log slope.
class DecayProfile {
 public:
  static DecayProfile stretched_exponential(double C, double c, double nu) {
    require(C > 0 && c > 0 && nu > 0, "profile: C, c, nu must be positive");
    DecayProfile p;
    p.kind_ = ProfileKind::StretchedExponential;
    p.C_ = C; p.c_ = c; p.nu_ = nu;
    return p;
  }

  static DecayProfile polynomial(double C, double q) {
    require(C > 0 && q > 0, "profile: C, q must be positive");
    DecayProfile p;
    p.kind_ = ProfileKind::Polynomial;
    p.C_ = C; p.q_ = q;
    return p;
  }

  /// Samples must have increasing s (s.front() may be 0), strictly positive
  /// nonincreasing values. extend_by_last_slope controls behaviour past the
  /// last sample; without it, integration over an unbounded range is refused.
  static DecayProfile tabulated(std::vector<double> s, std::vector<double> phi,
                                bool extend_by_last_slope = true) {
    require(s.size() == phi.size() && s.size() >= 2, "profile: need >= 2 samples");
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      require(s[i] < s[i + 1], "profile: sample abscissae must increase");
      require(phi[i + 1] <= phi[i], "profile: tabulated values must be nonincreasing");
    }
    require(s.front() >= 0, "profile: negative abscissa");
    for (double v : phi) require(v > 0, "profile: tabulated values must be positive");
    DecayProfile p;
    p.kind_ = ProfileKind::Tabulated;
    p.s_ = std::move(s);
    p.phi_ = std::move(phi);
    p.extend_ = extend_by_last_slope;
    return p;
  }

  ProfileKind kind() const { return kind_; }
  bool has_extension() const { return kind_ != ProfileKind::Tabulated || extend_; }
  double amplitude() const { return C_; }
  double decay_rate() const { return c_; }
  double stretch_exponent() const { return nu_; }
  double poly_exponent() const { return q_; }

  double operator()(double s) const {
    require(s >= 0, "profile: negative argument");
    switch (kind_) {
      case ProfileKind::StretchedExponential:
        return C_ * std::exp(-c_ * std::pow(s, nu_));
      case ProfileKind::Polynomial:
        return C_ * std::pow(1.0 + s, -q_);
      default:
        return eval_tabulated(s);
    }
  }

  /// Monotonicity audit on a dense grid; parametric kinds are monotone by
  /// form, tabulated by construction, so this should only ever trip on a
  /// profile constructed through a bug.
  double max_monotonicity_violation(double s_max = 64.0, int n = 4096) const {
    double worst = 0.0, prev = (*this)(0.0);
    for (int i = 1; i <= n; ++i) {
      double cur = (*this)(s_max * double(i) / n);
      worst = std::max(worst, cur - prev);
      prev = cur;
    }
    return worst;
  }

  std::string describe() const {
    switch (kind_) {
      case ProfileKind::StretchedExponential:
        return "stretched-exponential(C=" + fmt_g17(C_) + ", c=" + fmt_g17(c_) +
               ", nu=" + fmt_g17(nu_) + ")";
      case ProfileKind::Polynomial:
        return "polynomial(C=" + fmt_g17(C_) + ", q=" + fmt_g17(q_) + ")";
      default:
        return "tabulated(" + std::to_string(s_.size()) + " samples" +
               (extend_ ? ", extended)" : ", no extension)");
    }
  }

 private:
  double eval_tabulated(double s) const {
    if (s <= s_.front()) return phi_.front();
    if (s >= s_.back()) {
      if (!extend_) return phi_.back();
      // continue the final (log s, log Phi) slope
      std::size_t m = s_.size();
      double s0 = std::max(s_[m - 2], 1e-300), s1 = s_[m - 1];
      double slope = std::log(phi_[m - 1] / phi_[m - 2]) / std::log(s1 / s0);
      if (slope > 0) slope = 0;  // never increase past the table
      return phi_[m - 1] * std::pow(s / s1, slope);
    }
    auto it = std::upper_bound(s_.begin(), s_.end(), s);
    std::size_t hi = std::size_t(it - s_.begin());
    std::size_t lo = hi - 1;
    if (s_[lo] <= 0.0) {
      // first interval anchored at s = 0: linear in (s, log Phi)
      double f = (s - s_[lo]) / (s_[hi] - s_[lo]);
      return phi_[lo] * std::pow(phi_[hi] / phi_[lo], f);
    }
    double f = std::log(s / s_[lo]) / std::log(s_[hi] / s_[lo]);
    return phi_[lo] * std::pow(phi_[hi] / phi_[lo], f);
  }

  ProfileKind kind_ = ProfileKind::StretchedExponential;
  double C_ = 1.0, c_ = 1.0, nu_ = 1.0, q_ = 1.0;
  std::vector<double> s_, phi_;
  bool extend_ = true;
};

/// Parameters of the two-sided estimate: volume exponent alpha and walk
/// exponent beta, both strictly positive.
struct HKParameters {
  double alpha = 1.0;
  double beta = 2.0;
  HKParameters() = default;
  HKParameters(double a, double b) : alpha(a), beta(b) {
    require(a > 0 && b > 0, "HKParameters: exponents must be positive");
  }
};

}  // namespace hklab
