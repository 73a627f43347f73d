#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "hklab/common.hpp"
#include "hklab/function.hpp"
#include "hklab/kernel.hpp"

namespace hklab {

/// T_t u as a grid function.
inline GridFunction apply_semigroup(const HeatKernelModel& model, double t,
                                    const GridFunction& u) {
  require(u.space.get() == &model.space(), "apply_semigroup: function lives on another space");
  return {u.space, model.apply(t, u.values), u.name + "|T_" + fmt_g17(t)};
}

/// Dirichlet quotient E_t(u) = t^{-1} <u - T_t u, u>_mu. Spectral kernels
/// evaluate the exact eigenbasis form t^{-1} sum (1 - e^{-lambda t}) c_i^2,
/// which is nonnegative term by term.
inline double dirichlet_quotient(const HeatKernelModel& model, double t, const GridFunction& u) {
  require(t > 0, "dirichlet_quotient: t must be positive");
  require(u.space.get() == &model.space(), "dirichlet_quotient: space mismatch");
  if (model.variant() == KernelVariant::Spectral) {
    Vector c = model.coefficients(u.values);
    std::vector<double> terms(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i)
      terms[i] = -std::expm1(-model.eigenvalues()[i] * t) * c[i] * c[i];
    return pairwise_sum(terms) / t;
  }
  Vector tu = model.apply(t, u.values);
  std::vector<double> terms(u.values.size());
  for (Eigen::Index i = 0; i < u.values.size(); ++i)
    terms[i] = (u.values[i] - tu[i]) * u.values[i] * model.space().weight(i);
  return pairwise_sum(terms) / t;
}

struct EnergyLimit {
  double estimate = 0.0;          // E_t at the smallest resolved t
  bool monotone = true;           // E_t nondecreasing as t decreases
  double worst_monotone_slip = 0.0;
  bool diverging = false;         // last decade grew by more than 10x
  std::vector<double> t_grid;     // descending
  std::vector<double> values;
};

/// E(u) = lim_{t->0} E_t(u), reported as the value at the smallest resolved
/// t together with monotonicity and divergence verdicts (no extrapolation).
inline EnergyLimit energy_limit(const HeatKernelModel& model, const GridFunction& u,
                                std::vector<double> t_grid, double rel_slack = 1e-10) {
  require(t_grid.size() >= 4, "energy_limit: need at least 4 t values");
  std::sort(t_grid.begin(), t_grid.end(), std::greater<>());
  require(t_grid.back() >= model.t_min() * (1.0 - 1e-12),
          "energy_limit: grid dips below the resolution floor t_min = " + fmt_g17(model.t_min()));
  require(t_grid.front() / t_grid.back() >= 1e3, "energy_limit: grid must span >= 3 decades");
  EnergyLimit out;
  out.t_grid = t_grid;
  for (double t : t_grid) out.values.push_back(dirichlet_quotient(model, t, u));
  for (std::size_t i = 1; i < out.values.size(); ++i) {
    const double prev = out.values[i - 1], cur = out.values[i];
    const double slip = prev - cur;  // positive: decreased while t went down
    if (slip > rel_slack * std::max(std::abs(prev), std::abs(cur))) {
      out.monotone = false;
      out.worst_monotone_slip = std::max(out.worst_monotone_slip, slip);
    }
  }
  out.estimate = out.values.back();
  // compare against the value one decade up
  const double t_small = out.t_grid.back();
  for (std::size_t i = 0; i < out.t_grid.size(); ++i) {
    if (out.t_grid[i] >= 10.0 * t_small && i + 1 < out.t_grid.size() &&
        out.t_grid[i + 1] < 10.0 * t_small) {
      if (out.values[i] > 0 && out.estimate > 10.0 * out.values[i]) out.diverging = true;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pair integrals. All double integrals are full O(N^2) ordered-pair sums
// with fixed-order pairwise summation; row blocks may run in parallel and
// are merged in block order, so results do not depend on the thread count.
// Negative kernel values from eigen-roundoff are clamped to zero inside
// these energy integrals only (axiom checks see the raw operator).
// ---------------------------------------------------------------------------

namespace detail {
constexpr int kRowBlock = 64;

template <class PerRow>
inline double blocked_pair_sum(int n, unsigned threads, PerRow&& per_row) {
  const int n_blocks = (n + kRowBlock - 1) / kRowBlock;
  std::vector<double> block_acc(n_blocks, 0.0);
  parallel_chunks(n_blocks, threads, [&](std::size_t blk) {
    const int lo = static_cast<int>(blk) * kRowBlock;
    const int hi = std::min(n, lo + kRowBlock);
    std::vector<double> rows;
    rows.reserve(hi - lo);
    for (int i = lo; i < hi; ++i) rows.push_back(per_row(i));
    block_acc[blk] = pairwise_sum(rows);
  });
  return pairwise_sum(block_acc);
}
}  // namespace detail

/// (1/2t) iint (u(x)-u(y))^2 p_t dmu dmu split at d(x,y) < cut (near, B)
/// versus d >= cut (far, A). A + B equals the full double integral by pair
/// partition.
struct NearFarSplit {
  double near_B = 0.0;
  double far_A = 0.0;
  double full() const { return near_B + far_A; }
};

inline NearFarSplit near_far_split(const HeatKernelModel& model, double t, const GridFunction& u,
                                   double cut = 1.0, const Matrix* pt = nullptr,
                                   unsigned threads = 1) {
  require(t > 0, "near_far_split: t must be positive");
  require(u.space.get() == &model.space(), "near_far_split: space mismatch");
  require(cut > 0, "near_far_split: cut must be positive");
  const auto& space = model.space();
  const int n = space.size();
  Matrix local;
  if (!pt) {
    local = model.matrix(t);
    pt = &local;
  }
  const double inv2t = 0.5 / t;
  NearFarSplit out;
  std::vector<double> near_blocks, far_blocks;
  const int n_blocks = (n + detail::kRowBlock - 1) / detail::kRowBlock;
  near_blocks.assign(n_blocks, 0.0);
  far_blocks.assign(n_blocks, 0.0);
  parallel_chunks(n_blocks, threads, [&](std::size_t blk) {
    const int lo = static_cast<int>(blk) * detail::kRowBlock;
    const int hi = std::min(n, lo + detail::kRowBlock);
    std::vector<double> rn, rf;
    rn.reserve(hi - lo);
    rf.reserve(hi - lo);
    for (int i = lo; i < hi; ++i) {
      double an = 0.0, af = 0.0;
      const double ui = u.values[i], wi = space.weight(i);
      for (int j = 0; j < n; ++j) {
        const double du = ui - u.values[j];
        const double term = du * du * std::max((*pt)(i, j), 0.0) * wi * space.weight(j);
        if (space.dist(i, j) < cut) an += term;
        else af += term;
      }
      rn.push_back(an);
      rf.push_back(af);
    }
    near_blocks[blk] = pairwise_sum(rn);
    far_blocks[blk] = pairwise_sum(rf);
  });
  out.near_B = inv2t * pairwise_sum(near_blocks);
  out.far_A = inv2t * pairwise_sum(far_blocks);
  return out;
}

struct QuadraticIdentity {
  double e_t = 0.0;
  double double_integral = 0.0;  // (1/2t) iint (u(x)-u(y))^2 p_t
  double abs_residual = 0.0;
  double rel_residual = 0.0;
  double unit_mass_residual = 0.0;
  double derived_budget = 0.0;   // t^{-1} resid ||u||_inf^2 mass + pair-sum floor
};

/// E_t(u) equals the symmetric double integral exactly when the kernel is
/// conservative; the gap is t^{-1} <u^2, 1 - T_t 1>, so the honest budget
/// carries the 1/t factor alongside the unit-mass residual.
inline QuadraticIdentity quadratic_identity_check(const HeatKernelModel& model, double t,
                                                  const GridFunction& u,
                                                  const Matrix* pt = nullptr,
                                                  unsigned threads = 1) {
  QuadraticIdentity out;
  out.e_t = dirichlet_quotient(model, t, u);
  NearFarSplit split =
      near_far_split(model, t, u, 2.0 * model.space().diameter(), pt, threads);
  out.double_integral = split.full();
  out.abs_residual = std::abs(out.e_t - out.double_integral);
  out.rel_residual = rel_residual(out.e_t, out.double_integral);
  out.unit_mass_residual = check_conservative(model, t).max_residual;
  const double scale = std::max(std::abs(out.e_t), std::abs(out.double_integral));
  out.derived_budget = out.unit_mass_residual * u.sup_norm() * u.sup_norm() *
                           model.space().total_mass() / t +
                       1e-9 * scale + 1e-12;
  return out;
}

struct EnergyCurvePoint {
  double t = 0.0;
  double e_t = 0.0;
  double a_far = 0.0;
  double b_near = 0.0;
  double identity_residual = 0.0;
};

struct EnergyCurve {
  std::vector<EnergyCurvePoint> points;  // t descending
  bool monotone = true;
  double worst_monotone_slip = 0.0;
};

inline EnergyCurve energy_curve(const HeatKernelModel& model, const GridFunction& u,
                                std::vector<double> t_grid, double cut = 1.0,
                                unsigned threads = 1, double rel_slack = 1e-10) {
  std::sort(t_grid.begin(), t_grid.end(), std::greater<>());
  EnergyCurve out;
  for (double t : t_grid) {
    EnergyCurvePoint p;
    p.t = t;
    p.e_t = dirichlet_quotient(model, t, u);
    Matrix pt = model.matrix(t);
    NearFarSplit split = near_far_split(model, t, u, cut, &pt, threads);
    p.a_far = split.far_A;
    p.b_near = split.near_B;
    p.identity_residual = rel_residual(p.e_t, split.full());
    out.points.push_back(p);
  }
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    const double prev = out.points[i - 1].e_t, cur = out.points[i].e_t;
    const double slip = prev - cur;
    if (slip > rel_slack * std::max(std::abs(prev), std::abs(cur))) {
      out.monotone = false;
      out.worst_monotone_slip = std::max(out.worst_monotone_slip, slip);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ball-average deviation and the Besov functional
// ---------------------------------------------------------------------------

/// D(r) = int (1/mu(B(x,r))) int_{B(x,r)} (u(y)-u(x))^2 dmu(y) dmu(x).
/// Balls contain their center, so the inner mass is always positive.
inline double ball_average_deviation(const MetricMeasureSpace& space, const GridFunction& u,
                                     double r, unsigned threads = 1) {
  require(u.space.get() == &space, "ball_average_deviation: space mismatch");
  require(r >= 2.0 * space.resolution() * (1.0 - 1e-12),
          "ball_average_deviation: r below 2 * resolution, balls may be singletons");
  const int n = space.size();
  return detail::blocked_pair_sum(n, threads, [&](int i) {
    double num = 0.0, mass = 0.0;
    const double ui = u.values[i];
    for (int j = 0; j < n; ++j) {
      if (space.dist(i, j) < r) {
        const double du = u.values[j] - ui;
        num += du * du * space.weight(j);
        mass += space.weight(j);
      }
    }
    return space.weight(i) * num / mass;
  });
}

/// D(2^-k) for k in k_range (inclusive); shared by the Besov report and the
/// walk-dimension regression.
inline std::vector<double> deviation_profile(const MetricMeasureSpace& space,
                                             const GridFunction& u, int k_lo, int k_hi,
                                             unsigned threads = 1) {
  require(k_lo >= 1 && k_hi >= k_lo, "deviation_profile: bad k range");
  std::vector<double> out;
  for (int k = k_lo; k <= k_hi; ++k)
    out.push_back(ball_average_deviation(space, u, std::pow(2.0, -k), threads));
  return out;
}

struct BesovScale {
  int k = 0;
  double r = 0.0;
  double deviation = 0.0;  // D(r)
  double scaled = 0.0;     // r^{-2 sigma} D(r)
};

struct BesovReport {
  double sigma = 0.0;
  std::vector<BesovScale> scales;
  double w_sigma = 0.0;  // max of scaled values: dyadic lower bound for the sup
  int argmax_k = 0;
};

/// W_sigma(u) evaluated on the dyadic grid r = 2^-k, k in [k_lo, k_hi]; a
/// lower bound for the sup over 0 < r < 1, equivalent up to 2^{2 sigma}.
inline BesovReport besov_energy(const MetricMeasureSpace& space, const GridFunction& u,
                                double sigma, int k_lo, int k_hi, unsigned threads = 1) {
  require(sigma > 0, "besov_energy: sigma must be positive");
  require(k_lo >= 1 && k_hi >= k_lo, "besov_energy: empty k range");
  require(std::pow(2.0, -k_hi) >= 2.0 * space.resolution() * (1.0 - 1e-12),
          "besov_energy: deepest scale below 2 * resolution");
  BesovReport rep;
  rep.sigma = sigma;
  std::vector<double> devs = deviation_profile(space, u, k_lo, k_hi, threads);
  for (int k = k_lo; k <= k_hi; ++k) {
    BesovScale sc;
    sc.k = k;
    sc.r = std::pow(2.0, -k);
    sc.deviation = devs[k - k_lo];
    sc.scaled = std::pow(sc.r, -2.0 * sigma) * sc.deviation;
    rep.scales.push_back(sc);
    if (sc.scaled >= rep.w_sigma) {
      rep.w_sigma = sc.scaled;
      rep.argmax_k = k;
    }
  }
  return rep;
}

/// Besov report computed from an existing deviation profile (avoids the
/// O(N^2) sweeps when scanning many sigmas).
inline BesovReport besov_from_profile(const std::vector<double>& devs, double sigma, int k_lo) {
  require(!devs.empty(), "besov_from_profile: empty profile");
  BesovReport rep;
  rep.sigma = sigma;
  for (std::size_t idx = 0; idx < devs.size(); ++idx) {
    BesovScale sc;
    sc.k = k_lo + static_cast<int>(idx);
    sc.r = std::pow(2.0, -sc.k);
    sc.deviation = devs[idx];
    sc.scaled = std::pow(sc.r, -2.0 * sigma) * sc.deviation;
    rep.scales.push_back(sc);
    if (sc.scaled >= rep.w_sigma) {
      rep.w_sigma = sc.scaled;
      rep.argmax_k = sc.k;
    }
  }
  return rep;
}

/// iint over the dyadic shell 2^-k <= d(x,y) < 2^-(k-1) of (u(x)-u(y))^2,
/// ordered pairs, no kernel weight.
inline double shell_energy(const MetricMeasureSpace& space, const GridFunction& u, int k,
                           unsigned threads = 1) {
  require(k >= 1, "shell_energy: k must be >= 1");
  const double r_in = std::pow(2.0, -k), r_out = std::pow(2.0, -(k - 1));
  const int n = space.size();
  return detail::blocked_pair_sum(n, threads, [&](int i) {
    double acc = 0.0;
    const double ui = u.values[i], wi = space.weight(i);
    for (int j = 0; j < n; ++j) {
      const double d = space.dist(i, j);
      if (d >= r_in && d < r_out) {
        const double du = ui - u.values[j];
        acc += du * du * wi * space.weight(j);
      }
    }
    return acc;
  });
}

namespace detail {
/// Shell index k with cut 2^-k <= d < cut 2^-(k-1), robust at exact dyadic
/// distances where floating log2 may land on either side.
inline int shell_index(double d, double cut, double log2_cut) {
  int k = static_cast<int>(std::floor(log2_cut - std::log2(d))) + 1;
  if (k < 1) k = 1;
  while (k > 1 && d >= cut * std::pow(2.0, -(k - 1))) --k;
  while (d < cut * std::pow(2.0, -k)) ++k;
  return k;
}
}  // namespace detail

/// One-pass bucketing of the plain pair energies: far part (d >= cut),
/// shells k = 1..k_deep below the cut, and the sub-shell remainder
/// (0 < d < 2^-k_deep). Ball sums for the chain are cumulative sums of
/// these buckets from below.
struct PairEnergyBuckets {
  double cut = 1.0;
  int k_deep = 0;
  double far = 0.0;
  std::vector<double> shells;  // index k-1 holds shell k
  double deeper = 0.0;
  double total() const {
    std::vector<double> all(shells);
    all.push_back(far);
    all.push_back(deeper);
    return pairwise_sum(all);
  }
  /// iint over {d < 2^-(k-1)} (the k-th ball sum of the chain bound).
  double ball_sum(int k) const {
    double acc = deeper;
    for (int kk = k_deep; kk >= k; --kk) acc += shells[kk - 1];
    return acc;
  }
};

inline PairEnergyBuckets pair_energy_buckets(const MetricMeasureSpace& space,
                                             const GridFunction& u, double cut, int k_deep,
                                             unsigned threads = 1) {
  require(k_deep >= 1, "pair_energy_buckets: k_deep must be >= 1");
  const int n = space.size();
  const int n_buckets = k_deep + 2;  // far, shells 1..k_deep, deeper
  const int n_blocks = (n + detail::kRowBlock - 1) / detail::kRowBlock;
  std::vector<std::vector<double>> acc(n_blocks, std::vector<double>(n_buckets, 0.0));
  const double log2_cut = std::log2(cut);
  parallel_chunks(n_blocks, threads, [&](std::size_t blk) {
    const int lo = static_cast<int>(blk) * detail::kRowBlock;
    const int hi = std::min(n, lo + detail::kRowBlock);
    auto& a = acc[blk];
    for (int i = lo; i < hi; ++i) {
      const double ui = u.values[i], wi = space.weight(i);
      for (int j = 0; j < n; ++j) {
        const double d = space.dist(i, j);
        if (d <= 0.0) continue;
        const double du = ui - u.values[j];
        const double term = du * du * wi * space.weight(j);
        if (d >= cut) {
          a[0] += term;
        } else {
          const int k = detail::shell_index(d, cut, log2_cut);
          if (k > k_deep) a[n_buckets - 1] += term;
          else a[k] += term;
        }
      }
    }
  });
  PairEnergyBuckets out;
  out.cut = cut;
  out.k_deep = k_deep;
  out.shells.resize(k_deep, 0.0);
  std::vector<double> col(n_blocks);
  for (int b = 0; b < n_buckets; ++b) {
    for (int blk = 0; blk < n_blocks; ++blk) col[blk] = acc[blk][b];
    const double v = pairwise_sum(col);
    if (b == 0) out.far = v;
    else if (b == n_buckets - 1) out.deeper = v;
    else out.shells[b - 1] = v;
  }
  return out;
}

/// Same bucketing with the kernel weight p_t attached (clamped at zero):
/// yields B(t), A(t) and the per-shell kernel sums in one sweep.
struct KernelEnergyBuckets {
  double t = 0.0;
  double cut = 1.0;
  int k_deep = 0;
  double far = 0.0;            // iint_{d>=cut} (u-u)^2 p_t
  std::vector<double> shells;  // with p_t
  double deeper = 0.0;
  double p_diag_max = 0.0;     // max_x p_t(x,x): the kernel's roundoff scale
  double near_total() const {
    std::vector<double> all(shells);
    all.push_back(deeper);
    return pairwise_sum(all);
  }
  double b_of_t() const { return near_total() / (2.0 * t); }
  double a_of_t() const { return far / (2.0 * t); }
};

inline KernelEnergyBuckets kernel_energy_buckets(const HeatKernelModel& model, double t,
                                                 const GridFunction& u, double cut, int k_deep,
                                                 const Matrix* pt_in = nullptr,
                                                 unsigned threads = 1) {
  require(t > 0, "kernel_energy_buckets: t must be positive");
  const auto& space = model.space();
  const int n = space.size();
  Matrix local;
  if (!pt_in) {
    local = model.matrix(t);
    pt_in = &local;
  }
  const Matrix& pt = *pt_in;
  const int n_buckets = k_deep + 2;
  const int n_blocks = (n + detail::kRowBlock - 1) / detail::kRowBlock;
  std::vector<std::vector<double>> acc(n_blocks, std::vector<double>(n_buckets, 0.0));
  const double log2_cut = std::log2(cut);
  parallel_chunks(n_blocks, threads, [&](std::size_t blk) {
    const int lo = static_cast<int>(blk) * detail::kRowBlock;
    const int hi = std::min(n, lo + detail::kRowBlock);
    auto& a = acc[blk];
    for (int i = lo; i < hi; ++i) {
      const double ui = u.values[i], wi = space.weight(i);
      for (int j = 0; j < n; ++j) {
        const double d = space.dist(i, j);
        if (d <= 0.0) continue;
        const double du = ui - u.values[j];
        const double term = du * du * std::max(pt(i, j), 0.0) * wi * space.weight(j);
        if (d >= cut) {
          a[0] += term;
        } else {
          const int k = detail::shell_index(d, cut, log2_cut);
          if (k > k_deep) a[n_buckets - 1] += term;
          else a[k] += term;
        }
      }
    }
  });
  KernelEnergyBuckets out;
  out.t = t;
  out.cut = cut;
  out.k_deep = k_deep;
  out.p_diag_max = pt.diagonal().maxCoeff();
  out.shells.resize(k_deep, 0.0);
  std::vector<double> col(n_blocks);
  for (int b = 0; b < n_buckets; ++b) {
    for (int blk = 0; blk < n_blocks; ++blk) col[blk] = acc[blk][b];
    const double v = pairwise_sum(col);
    if (b == 0) out.far = v;
    else if (b == n_buckets - 1) out.deeper = v;
    else out.shells[b - 1] = v;
  }
  return out;
}

/// Deepest shell index that can contain a pair, given that the smallest
/// positive distance is the space's resolution: shells 1..k_deep cover
/// every near pair.
inline int deepest_shell(const MetricMeasureSpace& space, double cut = 1.0) {
  return detail::shell_index(space.resolution(), cut, std::log2(cut));
}

}  // namespace hklab
