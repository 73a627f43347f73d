#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>

#include "hklab/common.hpp"
#include "hklab/kernel.hpp"
#include "hklab/space.hpp"

namespace hklab {

/// Real-valued function on a space's points with its cached L2(mu) norm.
struct GridFunction {
  std::shared_ptr<const MetricMeasureSpace> space;
  Vector values;
  std::string name;
  double norm_l2_sq = 0.0;  // sum u_i^2 mu_i

  GridFunction() = default;
  GridFunction(std::shared_ptr<const MetricMeasureSpace> sp, Vector v, std::string nm)
      : space(std::move(sp)), values(std::move(v)), name(std::move(nm)) {
    require(values.size() == space->size(), "grid function: size mismatch");
    for (Eigen::Index i = 0; i < values.size(); ++i)
      require(std::isfinite(values[i]), "grid function: non-finite value");
    std::vector<double> terms(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i)
      terms[i] = values[i] * values[i] * space->weight(i);
    norm_l2_sq = pairwise_sum(terms);
  }

  double sup_norm() const { return values.cwiseAbs().maxCoeff(); }
  bool is_constant(double tol = 0.0) const {
    return values.maxCoeff() - values.minCoeff() <= tol;
  }
};

// ---------------------------------------------------------------------------
// Closed-form corpus: the same expression is re-evaluable on any refinement
// level of a model family, which the triviality demonstration relies on.
// ---------------------------------------------------------------------------

/// Smooth compactly supported bump exp(1 - 1/(1 - (|x-c|/w)^2)) on |x-c| < w.
inline GridFunction make_bump(std::shared_ptr<const MetricMeasureSpace> space,
                              std::vector<double> center, double width,
                              std::string name = "bump") {
  require(width > 0, "bump: width must be positive");
  require(static_cast<int>(center.size()) == space->dim(), "bump: center dimension mismatch");
  Vector v(space->size());
  for (int i = 0; i < space->size(); ++i) {
    double r2 = 0;
    for (int c = 0; c < space->dim(); ++c) {
      double d = space->points()(i, c) - center[c];
      r2 += d * d;
    }
    double rho2 = r2 / (width * width);
    v[i] = rho2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - rho2)) : 0.0;
  }
  return {std::move(space), std::move(v), std::move(name)};
}

/// Piecewise-linear tent max(0, 1 - |x-c|/w).
inline GridFunction make_tent(std::shared_ptr<const MetricMeasureSpace> space,
                              std::vector<double> center, double width,
                              std::string name = "tent") {
  require(width > 0, "tent: width must be positive");
  require(static_cast<int>(center.size()) == space->dim(), "tent: center dimension mismatch");
  Vector v(space->size());
  for (int i = 0; i < space->size(); ++i) {
    double r2 = 0;
    for (int c = 0; c < space->dim(); ++c) {
      double d = space->points()(i, c) - center[c];
      r2 += d * d;
    }
    v[i] = std::max(0.0, 1.0 - std::sqrt(r2) / width);
  }
  return {std::move(space), std::move(v), std::move(name)};
}

inline GridFunction make_coordinate(std::shared_ptr<const MetricMeasureSpace> space, int axis,
                                    std::string name = "coordinate") {
  require(axis >= 0 && axis < space->dim(), "coordinate: axis out of range");
  Vector v = space->points().col(axis);
  return {std::move(space), std::move(v), std::move(name)};
}

inline GridFunction make_constant(std::shared_ptr<const MetricMeasureSpace> space, double value,
                                  std::string name = "constant") {
  Vector v = Vector::Constant(space->size(), value);
  return {std::move(space), std::move(v), std::move(name)};
}

/// iid uniform [-1, 1] values from a fixed seed. Tied to the point
/// enumeration order, not to coordinates, so it is reproducible on one
/// space but not refinable across levels.
inline GridFunction make_random(std::shared_ptr<const MetricMeasureSpace> space,
                                std::uint64_t seed, std::string name = "random") {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pick(-1.0, 1.0);
  Vector v(space->size());
  for (int i = 0; i < space->size(); ++i) v[i] = pick(rng);
  return {std::move(space), std::move(v), std::move(name)};
}

inline GridFunction make_eigenfunction(const HeatKernelModel& model, int index,
                                       std::string name = "eigenfunction") {
  return {model.space_ptr(), model.eigenfunction(index),
          name + "[" + std::to_string(index) + "]"};
}

/// Harmonic extension of corner values to the level-L gasket via the
/// 1/5-2/5 rule: each midpoint takes (2a + 2b + c)/5 of its cell corners.
/// The canonical finite-energy test function on the gasket: its ball
/// deviation scales like r^beta with beta = log5/log2.
inline GridFunction make_gasket_harmonic(std::shared_ptr<const MetricMeasureSpace> space,
                                         double va, double vb, double vc,
                                         std::string name = "harmonic") {
  require(space->kind() == SpaceKind::Gasket, "harmonic: gasket spaces only");
  const int level = static_cast<int>(std::lround(-std::log2(space->resolution())));
  require(level >= 1 && level <= 30, "harmonic: implausible gasket level");
  const std::int64_t scale = std::int64_t(1) << level;
  std::map<std::pair<std::int64_t, std::int64_t>, double> vals;
  struct Frame {
    std::int64_t ax, ay, bx, by, cx, cy;
    double va, vb, vc;
    int depth;
  };
  std::vector<Frame> stack{{0, 0, scale, 0, 0, scale, va, vb, vc, level}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    if (f.depth == 0) {
      vals[{f.ax, f.ay}] = f.va;
      vals[{f.bx, f.by}] = f.vb;
      vals[{f.cx, f.cy}] = f.vc;
      continue;
    }
    const std::int64_t abx = (f.ax + f.bx) / 2, aby = (f.ay + f.by) / 2;
    const std::int64_t bcx = (f.bx + f.cx) / 2, bcy = (f.by + f.cy) / 2;
    const std::int64_t cax = (f.cx + f.ax) / 2, cay = (f.cy + f.ay) / 2;
    const double vab = (2 * f.va + 2 * f.vb + f.vc) / 5.0;
    const double vbc = (2 * f.vb + 2 * f.vc + f.va) / 5.0;
    const double vca = (2 * f.vc + 2 * f.va + f.vb) / 5.0;
    stack.push_back({f.ax, f.ay, abx, aby, cax, cay, f.va, vab, vca, f.depth - 1});
    stack.push_back({abx, aby, f.bx, f.by, bcx, bcy, vab, f.vb, vbc, f.depth - 1});
    stack.push_back({cax, cay, bcx, bcy, f.cx, f.cy, vca, vbc, f.vc, f.depth - 1});
  }
  require(static_cast<int>(vals.size()) == space->size(),
          "harmonic: vertex count mismatch against the space");
  // Recover each vertex's lattice coordinates from its embedded position.
  Vector v(space->size());
  const double root3_2 = std::sqrt(3.0) / 2.0;
  for (int k = 0; k < space->size(); ++k) {
    const double x = space->points()(k, 0), y = space->points()(k, 1);
    const auto j = std::int64_t(std::lround(y / root3_2 * double(scale)));
    const auto i = std::int64_t(std::lround(x * double(scale) - 0.5 * double(j)));
    auto it = vals.find({i, j});
    require(it != vals.end(), "harmonic: lattice lookup failed");
    v[k] = it->second;
  }
  return {std::move(space), std::move(v), std::move(name)};
}

}  // namespace hklab
