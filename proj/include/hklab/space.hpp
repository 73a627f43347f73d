#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hklab/common.hpp"

namespace hklab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class SpaceKind { BoxGrid, Gasket, Custom };

inline const char* to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::BoxGrid: return "box-grid";
    case SpaceKind::Gasket: return "gasket";
    default: return "custom";
  }
}

struct BallView {
  int center = -1;
  double radius = 0.0;
  std::vector<int> members;  // strict d(center, y) < radius
  double mass = 0.0;
};

/// Finite metric measure space (M, d, mu): embedded points, strictly
/// positive weights, Euclidean metric. The pairwise distance table is
/// materialized for N <= dense_limit and computed on demand above that.
class MetricMeasureSpace {
 public:
  static constexpr int kDenseLimit = 4096;

  MetricMeasureSpace(Matrix points, Vector weights, SpaceKind kind,
                     double resolution, std::size_t max_points = 20000)
      : points_(std::move(points)), weights_(std::move(weights)), kind_(kind),
        resolution_(resolution) {
    const auto n = static_cast<std::size_t>(points_.rows());
    require(n >= 2, "space: need at least 2 points");
    require(static_cast<std::size_t>(weights_.size()) == n, "space: weights size mismatch");
    if (n > max_points)
      throw BudgetError("space: " + std::to_string(n) + " points exceeds budget of " +
                        std::to_string(max_points) + " (pair table would need " +
                        std::to_string(n * n * 8 / (1 << 20)) + " MiB)");
    for (Eigen::Index i = 0; i < weights_.size(); ++i)
      require(weights_[i] > 0, "space: weights must be strictly positive");
    total_mass_ = pairwise_sum(std::span<const double>(weights_.data(), weights_.size()));
    if (points_.rows() <= kDenseLimit) {
      dist_.resize(points_.rows(), points_.rows());
      for (Eigen::Index i = 0; i < points_.rows(); ++i) {
        dist_(i, i) = 0.0;
        for (Eigen::Index j = 0; j < i; ++j) {
          double d = (points_.row(i) - points_.row(j)).norm();
          dist_(i, j) = d;
          dist_(j, i) = d;
        }
      }
      diameter_ = dist_.maxCoeff();
    } else {
      diameter_ = 0.0;
      for (Eigen::Index i = 0; i < points_.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j)
          diameter_ = std::max(diameter_, (points_.row(i) - points_.row(j)).norm());
    }
  }

  int size() const { return static_cast<int>(points_.rows()); }
  int dim() const { return static_cast<int>(points_.cols()); }
  SpaceKind kind() const { return kind_; }
  double resolution() const { return resolution_; }
  double diameter() const { return diameter_; }
  double total_mass() const { return total_mass_; }
  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  double weight(int i) const { return weights_[i]; }
  bool has_dense_table() const { return dist_.size() > 0; }
  const Matrix& distance_table() const {
    require(has_dense_table(), "space: no dense distance table at this size");
    return dist_;
  }

  double dist(int i, int j) const {
    if (dist_.size() > 0) return dist_(i, j);
    return (points_.row(i) - points_.row(j)).norm();
  }

  /// Open ball: members satisfy d(center, y) < r strictly.
  BallView ball(int center, double r) const {
    require(center >= 0 && center < size(), "ball: unknown point id");
    require(r > 0, "ball: radius must be positive");
    BallView b;
    b.center = center;
    b.radius = r;
    std::vector<double> ms;
    for (int j = 0; j < size(); ++j) {
      if (dist(center, j) < r) {
        b.members.push_back(j);
        ms.push_back(weights_[j]);
      }
    }
    b.mass = pairwise_sum(ms);
    return b;
  }

  double ball_mass(int center, double r) const {
    double m = 0.0;
    for (int j = 0; j < size(); ++j)
      if (dist(center, j) < r) m += weights_[j];
    return m;
  }

  /// Distance from a point to the model's artificial boundary. Box grids
  /// measure to the box faces, gaskets to the three outer corners; custom
  /// spaces have no declared boundary.
  double boundary_distance(int i) const {
    switch (kind_) {
      case SpaceKind::BoxGrid: {
        double m = std::numeric_limits<double>::infinity();
        for (int c = 0; c < dim(); ++c)
          m = std::min(m, halfwidth_ - std::abs(points_(i, c)));
        return m;
      }
      case SpaceKind::Gasket: {
        double m = std::numeric_limits<double>::infinity();
        for (int c : corner_ids_) m = std::min(m, dist(i, c));
        return m;
      }
      default:
        return std::numeric_limits<double>::infinity();
    }
  }

  /// Graph edges (i < j) for models built with an adjacency structure.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& corner_ids() const { return corner_ids_; }
  double halfwidth() const { return halfwidth_; }

  struct MetricCheck {
    double max_symmetry_violation = 0.0;
    double max_triangle_violation = 0.0;
    std::size_t triples_checked = 0;
  };

  /// Exact-symmetry plus triangle inequality on random triples.
  MetricCheck verify_metric(std::size_t n_triples = 10000, std::uint64_t seed = 0) const {
    MetricCheck out;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, size() - 1);
    for (std::size_t k = 0; k < n_triples; ++k) {
      int a = pick(rng), b = pick(rng), c = pick(rng);
      double ab = dist(a, b), ba = dist(b, a);
      out.max_symmetry_violation = std::max(out.max_symmetry_violation, std::abs(ab - ba));
      double viol = ab - (dist(a, c) + dist(c, b));
      out.max_triangle_violation = std::max(out.max_triangle_violation, viol);
    }
    out.triples_checked = n_triples;
    return out;
  }

  // Builder hooks.
  void set_edges(std::vector<std::pair<int, int>> e) { edges_ = std::move(e); }
  void set_corners(std::vector<int> c) { corner_ids_ = std::move(c); }
  void set_halfwidth(double h) { halfwidth_ = h; }

 private:
  Matrix points_;
  Vector weights_;
  SpaceKind kind_;
  double resolution_;
  double diameter_ = 0.0;
  double total_mass_ = 0.0;
  double halfwidth_ = 0.0;
  Matrix dist_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<int> corner_ids_;
};

/// Uniform grid on [-halfwidth, halfwidth]^dim including the endpoints:
/// spacing 2h/(n-1), every point carries one cell volume spacing^dim.
/// Nearest-neighbour grid edges are attached for Laplacian builders.
inline MetricMeasureSpace build_box_grid(int dim, int n_per_side, double halfwidth,
                                         std::size_t max_points = 20000) {
  require(dim == 1 || dim == 2, "build_box_grid: dim must be 1 or 2");
  require(n_per_side >= 2, "build_box_grid: need n_per_side >= 2");
  require(halfwidth > 0, "build_box_grid: halfwidth must be positive");
  const double spacing = 2.0 * halfwidth / (n_per_side - 1);
  const std::size_t n = dim == 1 ? std::size_t(n_per_side)
                                 : std::size_t(n_per_side) * std::size_t(n_per_side);
  if (n > max_points)
    throw BudgetError("build_box_grid: grid of " + std::to_string(n) +
                      " points exceeds the configured budget");
  Matrix pts(n, dim);
  Vector w = Vector::Constant(n, std::pow(spacing, dim));
  std::vector<std::pair<int, int>> edges;
  if (dim == 1) {
    for (int i = 0; i < n_per_side; ++i) {
      pts(i, 0) = -halfwidth + spacing * i;
      if (i + 1 < n_per_side) edges.emplace_back(i, i + 1);
    }
  } else {
    for (int iy = 0; iy < n_per_side; ++iy)
      for (int ix = 0; ix < n_per_side; ++ix) {
        int id = iy * n_per_side + ix;
        pts(id, 0) = -halfwidth + spacing * ix;
        pts(id, 1) = -halfwidth + spacing * iy;
        if (ix + 1 < n_per_side) edges.emplace_back(id, id + 1);
        if (iy + 1 < n_per_side) edges.emplace_back(id, id + n_per_side);
      }
  }
  MetricMeasureSpace s(std::move(pts), std::move(w), SpaceKind::BoxGrid, spacing, max_points);
  s.set_edges(std::move(edges));
  s.set_halfwidth(halfwidth);
  return s;
}

namespace detail {
// Integer lattice coordinates for gasket vertices at level L:
// position = (i + j/2, j*sqrt(3)/2) / 2^L.
struct GasketMesh {
  std::map<std::pair<std::int64_t, std::int64_t>, int> ids;
  std::vector<std::pair<std::int64_t, std::int64_t>> coords;
  std::vector<std::pair<int, int>> edges;
  int id(std::int64_t i, std::int64_t j) {
    auto [it, fresh] = ids.try_emplace({i, j}, static_cast<int>(coords.size()));
    if (fresh) coords.emplace_back(i, j);
    return it->second;
  }
};

template <class Visit>
void gasket_recurse(std::int64_t ax, std::int64_t ay, std::int64_t bx, std::int64_t by,
                    std::int64_t cx, std::int64_t cy, int depth, Visit&& visit) {
  if (depth == 0) {
    visit(ax, ay, bx, by, cx, cy);
    return;
  }
  const std::int64_t abx = (ax + bx) / 2, aby = (ay + by) / 2;
  const std::int64_t bcx = (bx + cx) / 2, bcy = (by + cy) / 2;
  const std::int64_t cax = (cx + ax) / 2, cay = (cy + ay) / 2;
  gasket_recurse(ax, ay, abx, aby, cax, cay, depth - 1, visit);
  gasket_recurse(abx, aby, bx, by, bcx, bcy, depth - 1, visit);
  gasket_recurse(cax, cay, bcx, bcy, cx, cy, depth - 1, visit);
}
}  // namespace detail

/// Vertices of the level-L Sierpinski gasket graph, embedded in the plane
/// with unit outer side. Uniform weights normalized to total mass 1;
/// metric is the Euclidean distance of the embedding. Vertex count is
/// (3^(L+1) + 3)/2.
inline MetricMeasureSpace build_gasket_graph(int level, std::size_t max_points = 20000) {
  require(level >= 1 && level <= 8, "build_gasket_graph: level must be in [1, 8]");
  const std::int64_t scale = std::int64_t(1) << level;
  detail::GasketMesh mesh;
  detail::gasket_recurse(0, 0, scale, 0, 0, scale, level,
                         [&](std::int64_t ax, std::int64_t ay, std::int64_t bx, std::int64_t by,
                             std::int64_t cx, std::int64_t cy) {
                           int ia = mesh.id(ax, ay), ib = mesh.id(bx, by), ic = mesh.id(cx, cy);
                           mesh.edges.emplace_back(std::min(ia, ib), std::max(ia, ib));
                           mesh.edges.emplace_back(std::min(ib, ic), std::max(ib, ic));
                           mesh.edges.emplace_back(std::min(ic, ia), std::max(ic, ia));
                         });
  const std::size_t n = mesh.coords.size();
  Matrix pts(n, 2);
  const double inv = 1.0 / double(scale);
  const double root3_2 = std::sqrt(3.0) / 2.0;
  for (std::size_t k = 0; k < n; ++k) {
    auto [i, j] = mesh.coords[k];
    pts(k, 0) = (double(i) + 0.5 * double(j)) * inv;
    pts(k, 1) = root3_2 * double(j) * inv;
  }
  Vector w = Vector::Constant(n, 1.0 / double(n));
  std::sort(mesh.edges.begin(), mesh.edges.end());
  mesh.edges.erase(std::unique(mesh.edges.begin(), mesh.edges.end()), mesh.edges.end());
  MetricMeasureSpace s(std::move(pts), std::move(w), SpaceKind::Gasket,
                       1.0 / double(scale), max_points);
  s.set_edges(std::move(mesh.edges));
  // Outer corners were visited first by the recursion at (0,0), (scale,0), (0,scale).
  std::vector<int> corners;
  for (auto key : {std::pair<std::int64_t, std::int64_t>{0, 0}, {scale, 0}, {0, scale}}) {
    auto it = mesh.ids.find(key);
    require(it != mesh.ids.end(), "gasket: corner lookup failed");
    corners.push_back(it->second);
  }
  s.set_corners(std::move(corners));
  return s;
}

struct AhlforsFit {
  double alpha_est = 0.0;
  double alpha_stderr = 0.0;
  double c_lo = 0.0;  // min over (x, r) of mu(B(x,r)) / r^alpha_est
  double c_hi = 0.0;  // max over (x, r)
  std::vector<double> r_grid;
  bool grid_shrunk = false;  // radii with singleton balls were dropped
  std::size_t centers_used = 0;
};

/// Least-squares slope of log mu(B(x,r)) vs log r, per center, averaged.
/// Radii where some ball degenerates to the bare center are dropped and
/// reported rather than fitted through.
inline AhlforsFit ahlfors_fit(const MetricMeasureSpace& space, std::vector<double> r_grid,
                              const std::vector<int>& centers) {
  require(r_grid.size() >= 4, "ahlfors_fit: need at least 4 radii");
  require(!centers.empty(), "ahlfors_fit: need at least one center");
  std::sort(r_grid.begin(), r_grid.end());
  AhlforsFit out;
  // Drop under-resolved radii (some ball is just the center itself).
  for (double r : r_grid) {
    bool ok = true;
    for (int c : centers)
      if (space.ball(c, r).members.size() <= 1) { ok = false; break; }
    if (ok) out.r_grid.push_back(r);
    else out.grid_shrunk = true;
  }
  require(out.r_grid.size() >= 4, "ahlfors_fit: fewer than 4 usable radii after shrinking");

  std::vector<double> lx(out.r_grid.size()), ly(out.r_grid.size());
  std::vector<double> slopes;
  Matrix masses(centers.size(), out.r_grid.size());
  for (std::size_t ci = 0; ci < centers.size(); ++ci) {
    for (std::size_t ri = 0; ri < out.r_grid.size(); ++ri) {
      double m = space.ball_mass(centers[ci], out.r_grid[ri]);
      masses(ci, ri) = m;
      lx[ri] = std::log(out.r_grid[ri]);
      ly[ri] = std::log(m);
    }
    slopes.push_back(least_squares(lx, ly).slope);
  }
  out.alpha_est = pairwise_sum(slopes) / double(slopes.size());
  if (slopes.size() > 1) {
    double ss = 0;
    for (double s : slopes) ss += (s - out.alpha_est) * (s - out.alpha_est);
    out.alpha_stderr = std::sqrt(ss / double(slopes.size() - 1) / double(slopes.size()));
  }
  out.c_lo = std::numeric_limits<double>::infinity();
  out.c_hi = 0.0;
  for (std::size_t ci = 0; ci < centers.size(); ++ci)
    for (std::size_t ri = 0; ri < out.r_grid.size(); ++ri) {
      double ratio = masses(ci, ri) / std::pow(out.r_grid[ri], out.alpha_est);
      out.c_lo = std::min(out.c_lo, ratio);
      out.c_hi = std::max(out.c_hi, ratio);
    }
  out.centers_used = centers.size();
  return out;
}

/// Pair sample stratified by dyadic distance band [2^-k, 2^-k+1) relative
/// to the diameter, up to per_band pairs per band via seeded reservoir
/// sampling. Covers every length scale of the space, which profile checks
/// and collapse fits need.
inline std::vector<std::pair<int, int>> stratified_pairs(const MetricMeasureSpace& space,
                                                         std::size_t per_band = 256,
                                                         std::uint64_t seed = 17) {
  const int n = space.size();
  const int n_bands =
      std::max(1, static_cast<int>(std::ceil(std::log2(space.diameter() / space.resolution()))) +
                      1);
  std::vector<std::vector<std::pair<int, int>>> bands(n_bands);
  std::vector<std::size_t> seen(n_bands, 0);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = space.dist(i, j);
      if (d <= 0) continue;
      int band = static_cast<int>(std::floor(std::log2(space.diameter() / d)));
      band = std::clamp(band, 0, n_bands - 1);
      ++seen[band];
      auto& bucket = bands[band];
      if (bucket.size() < per_band) {
        bucket.emplace_back(i, j);
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, seen[band] - 1);
        const std::size_t slot = pick(rng);
        if (slot < per_band) bucket[slot] = {i, j};
      }
    }
  std::vector<std::pair<int, int>> out;
  for (auto& b : bands) out.insert(out.end(), b.begin(), b.end());
  return out;
}

/// Deterministic sample of points at boundary distance >= margin,
/// strided down to at most max_count ids.
inline std::vector<int> interior_centers(const MetricMeasureSpace& space, double margin,
                                         std::size_t max_count = 64) {
  std::vector<int> all;
  for (int i = 0; i < space.size(); ++i)
    if (space.boundary_distance(i) >= margin) all.push_back(i);
  if (all.size() <= max_count) return all;
  std::vector<int> out;
  const double stride = double(all.size()) / double(max_count);
  for (std::size_t k = 0; k < max_count; ++k)
    out.push_back(all[static_cast<std::size_t>(k * stride)]);
  return out;
}

}  // namespace hklab
