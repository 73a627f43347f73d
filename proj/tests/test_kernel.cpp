#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <memory>

#include "hklab/function.hpp"
#include "hklab/kernel.hpp"

using namespace hklab;

namespace {

std::shared_ptr<const MetricMeasureSpace> two_point_space() {
  Matrix pts(2, 1);
  pts << 0.0, 1.0;
  Vector w = Vector::Ones(2);
  auto s = std::make_shared<MetricMeasureSpace>(pts, w, SpaceKind::Custom, 1.0);
  s->set_edges({{0, 1}});
  return s;
}

std::shared_ptr<const MetricMeasureSpace> line_space(int n = 128, double h = 4.0) {
  return std::make_shared<MetricMeasureSpace>(build_box_grid(1, n, h));
}

HeatKernelModel line_spectral(std::shared_ptr<const MetricMeasureSpace> s) {
  const double rho = 1.0 / (s->resolution() * s->resolution());
  return build_spectral_kernel(s, GeneratorKind::Combinatorial, rho, HKParameters(1.0, 2.0));
}

std::vector<std::pair<int, int>> sample_pairs(const MetricMeasureSpace& s, int stride = 7) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < s.size(); i += stride)
    for (int j = i + 1; j < s.size(); j += stride) out.emplace_back(i, j);
  return out;
}

}  // namespace

TEST_CASE("two-point generator: hand eigendecomposition") {
  auto sp = two_point_space();
  auto model = build_spectral_kernel(sp, GeneratorKind::Combinatorial, 1.0, HKParameters(1, 2));
  REQUIRE(model.eigenvalues().size() == 2);
  CHECK(model.eigenvalues()[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(model.eigenvalues()[1] == Catch::Approx(2.0).epsilon(1e-12));
  for (double t : {0.1, 0.7, 2.0}) {
    CHECK(model.eval(t, 0, 0) == Catch::Approx(0.5 * (1.0 + std::exp(-2.0 * t))).epsilon(1e-12));
    CHECK(model.eval(t, 0, 1) == Catch::Approx(0.5 * (1.0 - std::exp(-2.0 * t))).epsilon(1e-12));
  }
}

TEST_CASE("spectral kernel symmetry is exact to 1e-12") {
  auto sp = line_space(96);
  auto model = line_spectral(sp);
  for (double t : {0.01, 0.5}) {
    auto rep = check_symmetry(model, t, sample_pairs(*sp, 5));
    CHECK(rep.max_abs_asymmetry <= 1e-12);
    CHECK(rep.min_value >= -1e-10);  // roundoff lobes only
  }
  Matrix pt = model.matrix(0.05);
  CHECK((pt - pt.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("gaussian closed form values") {
  auto sp = line_space(65);  // spacing 0.125: distance 2 is on the grid
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  // (4 pi)^{-1/2} and its e^{-1} multiple at d = 2, t = 1
  CHECK(model.eval(1.0, 0, 0) == Catch::Approx(0.28209479177387814).epsilon(1e-12));
  int i = 0, j = -1;
  for (int k = 0; k < sp->size(); ++k)
    if (std::abs(sp->dist(0, k) - 2.0) < 1e-9) j = k;
  REQUIRE(j > 0);
  CHECK(model.eval(1.0, i, j) == Catch::Approx(0.10377687435514868).epsilon(1e-10));
  CHECK_THROWS_AS(model.eval(0.0, 0, 0), std::invalid_argument);
}

TEST_CASE("spectral kernel equilibrates to 1/mu(M)") {
  auto sp = line_space(64);
  auto model = line_spectral(sp);
  const double target = 1.0 / sp->total_mass();
  CHECK(model.eval(1e6, 3, 40) == Catch::Approx(target).epsilon(1e-10));
}

TEST_CASE("unit mass: spectral kernels are conservative under quadrature") {
  auto sp = line_space(128);
  auto model = line_spectral(sp);
  for (double t : {1e-3, 0.1, 1.0}) {
    auto rep = check_conservative(model, t);
    CHECK(rep.max_residual <= 1e-8);
  }
}

TEST_CASE("unit mass: gaussian box leaks at the boundary, interior is clean") {
  auto sp = line_space(256, 8.0);
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  auto rep = check_conservative(model, 0.01);
  CHECK(rep.interior_residual <= 1e-3);
  CHECK(rep.boundary_residual > rep.interior_residual);
  CHECK_FALSE(rep.under_resolved);
}

TEST_CASE("unit mass: under-resolved t is flagged") {
  auto sp = line_space(256, 4.0);  // spacing ~0.03
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  auto rep = check_conservative(model, 1e-12);
  CHECK(rep.under_resolved);
  CHECK(rep.max_residual > 0.1);  // kernel narrower than one cell
}

TEST_CASE("semigroup identity") {
  auto sp = line_space(96);
  auto model = line_spectral(sp);
  auto pairs = sample_pairs(*sp, 13);
  SECTION("exact for spectral kernels by eigenfunction orthonormality") {
    auto rep = check_semigroup(model, 0.05, 0.15, pairs);
    CHECK(rep.max_residual <= 1e-8);
  }
  SECTION("nonpositive times rejected") {
    CHECK_THROWS_AS(check_semigroup(model, 0.0, 0.1, pairs), std::invalid_argument);
    CHECK_THROWS_AS(check_semigroup(model, 0.1, -0.1, pairs), std::invalid_argument);
  }
}

TEST_CASE("semigroup residual of the gaussian quadrature stays within budget") {
  auto sp = line_space(256, 8.0);
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  // central pairs only: boundary truncation is excluded by construction
  std::vector<std::pair<int, int>> pairs;
  for (int i = 100; i < 156; i += 9)
    for (int j = i + 1; j < 156; j += 9) pairs.emplace_back(i, j);
  auto rep = check_semigroup(model, 0.5, 0.5, pairs);
  CHECK(rep.max_residual <= 1e-2);
}

TEST_CASE("two-sided estimate on the exact gaussian profile") {
  auto sp = line_space(128, 8.0);
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  auto phi = gaussian_profile(1.0);
  std::vector<double> ts = {0.01, 0.05, 0.2, 1.0};
  auto pairs = sample_pairs(*sp, 11);
  SECTION("equality case: zero violations both sides") {
    auto rep = check_two_sided(model, HKParameters(1, 2), phi, phi, ts, pairs);
    CHECK(rep.phi1_positive_at_1);
    CHECK(rep.lower_violations == 0);
    CHECK(rep.upper_violations == 0);
  }
  SECTION("halved upper profile violates at d = 0") {
    auto weak = gaussian_profile(1.0, 0.5);
    std::vector<std::pair<int, int>> diag = {{5, 5}, {64, 64}};
    auto rep = check_two_sided(model, HKParameters(1, 2), phi, weak, ts, diag);
    CHECK(rep.upper_violations > 0);
  }
}

TEST_CASE("profile collapse of the closed-form gaussian") {
  auto sp = line_space(512, 8.0);
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  // contiguous interior block: collisions across the dyadic t grid exist
  std::vector<std::pair<int, int>> pairs;
  for (int i = 200; i < 260; i += 3)
    for (int j = i + 1; j < 312; j += 3) pairs.emplace_back(i, j);
  std::vector<double> ts = {0.01, 0.08, 0.64};  // ratio 8: dyadic s collisions

  SECTION("exact collapse at the true exponents") {
    auto cloud = fit_profile(model, HKParameters(1, 2), ts, pairs);
    CHECK(cloud.collision_spread <= 1e-6);
    // envelopes are monotone nonincreasing with positive lower value at 1
    auto up = cloud.upper_profile();
    auto lo = cloud.lower_profile();
    CHECK(up.max_monotonicity_violation() <= 0.0);
    CHECK(lo.max_monotonicity_violation() <= 0.0);
    CHECK(lo(1.0) > 0.0);
  }
  SECTION("wrong walk exponent fails to collapse") {
    auto cloud = fit_profile(model, HKParameters(1, 3), ts, pairs);
    CHECK(cloud.collision_spread > 0.1);
  }
  SECTION("single t collapses by construction") {
    auto cloud = fit_profile(model, HKParameters(1, 3), {0.01}, pairs);
    CHECK(cloud.collision_spread <= 1e-14);
  }
}

TEST_CASE("calibrated stretched-exponential envelopes enclose a spectral kernel") {
  auto sp = line_space(128, 4.0);
  auto model = line_spectral(sp);
  std::vector<double> ts;
  for (double t = model.t_min(); t <= 0.5; t *= 2.0) ts.push_back(t);
  auto pairs = sample_pairs(*sp, 5);
  auto cloud = fit_profile(model, model.nominal(), ts, pairs);
  // nu = beta/(beta-1) = 2 on a walk-dimension-2 model
  auto cal = calibrate_stretched_profiles(cloud, 2.0);
  const auto& phi1 = cal.phi1;
  const auto& phi2 = cal.phi2;
  auto rep = check_two_sided(model, model.nominal(), phi1, phi2, ts, pairs, 1e-12,
                             cal.s_fit_max);
  CHECK(rep.upper_violations == 0);
  CHECK(rep.phi1_positive_at_1);
  // The lower bound holds on the resolvable band: beyond it the kernel
  // sits at machine-roundoff level where any positive profile loses.
  std::vector<std::pair<int, int>> near_pairs;
  for (auto [i, j] : pairs)
    if (sp->dist(i, j) <= 1.0) near_pairs.push_back({i, j});
  std::vector<double> mid_ts(ts.end() - 3, ts.end());  // the three largest t
  auto rep_lo = check_two_sided(model, model.nominal(), phi1, phi2, mid_ts, near_pairs);
  CHECK(rep_lo.lower_violations == 0);
}

TEST_CASE("generator preconditions") {
  auto sp = line_space(32);
  SECTION("negative renormalization rejected") {
    CHECK_THROWS_AS(build_graph_laplacian(*sp, GeneratorKind::Combinatorial, -1.0),
                    std::invalid_argument);
  }
  SECTION("combinatorial form demands uniform weights") {
    Matrix pts(3, 1);
    pts << 0.0, 1.0, 2.0;
    Vector w(3);
    w << 1.0, 2.0, 1.0;
    auto s = std::make_shared<MetricMeasureSpace>(pts, w, SpaceKind::Custom, 1.0);
    s->set_edges({{0, 1}, {1, 2}});
    CHECK_THROWS_AS(build_graph_laplacian(*s, GeneratorKind::Combinatorial, 1.0),
                    std::invalid_argument);
    // the mu-normalized form accepts it
    auto model = build_spectral_kernel(s, GeneratorKind::MuNormalized, 1.0, HKParameters(1, 2));
    CHECK(check_conservative(model, 0.3).max_residual <= 1e-10);
  }
}
