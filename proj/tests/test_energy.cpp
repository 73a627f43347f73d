#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <memory>

#include "hklab/energy.hpp"

using namespace hklab;

namespace {

std::shared_ptr<const MetricMeasureSpace> line_space(int n = 128, double h = 4.0) {
  return std::make_shared<MetricMeasureSpace>(build_box_grid(1, n, h));
}

HeatKernelModel line_spectral(std::shared_ptr<const MetricMeasureSpace> s) {
  const double rho = 1.0 / (s->resolution() * s->resolution());
  return build_spectral_kernel(s, GeneratorKind::Combinatorial, rho, HKParameters(1.0, 2.0));
}

// unit-rate two-point model: eigenvalues {0, 1}
HeatKernelModel unit_pair_model(std::shared_ptr<const MetricMeasureSpace>& out_space) {
  Matrix pts(2, 1);
  pts << 0.0, 1.0;
  Vector w = Vector::Ones(2);
  auto s = std::make_shared<MetricMeasureSpace>(pts, w, SpaceKind::Custom, 1.0);
  s->set_edges({{0, 1}});
  out_space = s;
  return build_spectral_kernel(out_space, GeneratorKind::Combinatorial, 0.5, HKParameters(1, 2));
}

}  // namespace

TEST_CASE("semigroup action") {
  auto sp = line_space();
  auto model = line_spectral(sp);
  SECTION("constant functions are fixed points of a conservative kernel") {
    auto u = make_constant(sp, 3.25);
    auto tu = apply_semigroup(model, 0.37, u);
    for (int i = 0; i < sp->size(); ++i)
      CHECK(tu.values[i] == Catch::Approx(3.25).margin(1e-10));
  }
  SECTION("eigenfunctions contract by e^{-lambda t}") {
    auto u = make_eigenfunction(model, 5);
    const double lam = model.eigenvalues()[5], t = 0.21;
    auto tu = apply_semigroup(model, t, u);
    for (int i = 0; i < sp->size(); i += 11)
      CHECK(tu.values[i] == Catch::Approx(std::exp(-lam * t) * u.values[i]).margin(1e-10));
  }
  SECTION("large t projects onto the mean") {
    auto u = make_bump(sp, {0.5}, 1.5);
    auto tu = apply_semigroup(model, 1e5, u);
    std::vector<double> terms(sp->size());
    for (int i = 0; i < sp->size(); ++i) terms[i] = u.values[i] * sp->weight(i);
    const double mean = pairwise_sum(terms) / sp->total_mass();
    for (int i = 0; i < sp->size(); i += 17)
      CHECK(tu.values[i] == Catch::Approx(mean).margin(1e-9));
  }
  SECTION("space mismatch rejected") {
    auto other = line_space(64);
    auto u = make_constant(other, 1.0);
    CHECK_THROWS_AS(apply_semigroup(model, 0.1, u), std::invalid_argument);
  }
}

TEST_CASE("dirichlet quotient closed forms") {
  std::shared_ptr<const MetricMeasureSpace> sp;
  auto model = unit_pair_model(sp);
  REQUIRE(model.eigenvalues()[1] == Catch::Approx(1.0).epsilon(1e-12));
  SECTION("constants have zero energy") {
    auto u = make_constant(sp, 2.0);
    CHECK(dirichlet_quotient(model, 0.7, u) == Catch::Approx(0.0).margin(1e-14));
  }
  SECTION("unit eigenfunction at t = 1: (1 - 1/e)") {
    auto u = make_eigenfunction(model, 1);
    CHECK(dirichlet_quotient(model, 1.0, u) ==
          Catch::Approx(0.6321205588285577).epsilon(1e-12));
  }
  SECTION("t to zero recovers the eigenvalue") {
    auto u = make_eigenfunction(model, 1);
    CHECK(dirichlet_quotient(model, 1e-8, u) == Catch::Approx(1.0).epsilon(1e-6));
  }
  SECTION("nonpositive t rejected") {
    auto u = make_eigenfunction(model, 1);
    CHECK_THROWS_AS(dirichlet_quotient(model, 0.0, u), std::invalid_argument);
  }
}

TEST_CASE("energy limit") {
  auto sp = line_space(321, 4.0);  // spacing 0.025: three resolved decades
  auto model = line_spectral(sp);
  std::vector<double> ts;
  for (double t = 1.0; t >= model.t_min(); t *= 0.5) ts.push_back(t);
  SECTION("eigenfunction energy approaches its eigenvalue") {
    auto u = make_eigenfunction(model, 3);
    auto lim = energy_limit(model, u, ts);
    CHECK(lim.monotone);
    CHECK_FALSE(lim.diverging);
    CHECK(lim.estimate == Catch::Approx(model.eigenvalues()[3]).epsilon(0.01));
  }
  SECTION("constants vanish up to eigenbasis roundoff") {
    auto u = make_constant(sp, 1.0);
    auto lim = energy_limit(model, u, ts);
    CHECK(std::abs(lim.estimate) <= 1e-9);
  }
  SECTION("rough random data diverges") {
    auto u = make_random(sp, 1234);
    auto lim = energy_limit(model, u, ts);
    CHECK(lim.monotone);
    CHECK(lim.diverging);
  }
  SECTION("under-resolved grid rejected") {
    auto u = make_eigenfunction(model, 3);
    CHECK_THROWS_AS(energy_limit(model, u, {1.0, 0.1, 0.01, model.t_min() / 100.0}),
                    std::invalid_argument);
  }
}

TEST_CASE("quadratic identity for conservative kernels") {
  auto sp = line_space(96, 4.0);
  auto model = line_spectral(sp);
  SECTION("spectral kernels satisfy it to 1e-9") {
    for (const auto& u :
         {make_bump(sp, {0.0}, 2.0), make_random(sp, 7), make_coordinate(sp, 0)}) {
      for (double t : {0.02, 0.3}) {
        auto q = quadratic_identity_check(model, t, u);
        CHECK(q.rel_residual <= 1e-9);
        CHECK(q.abs_residual <= q.derived_budget);
      }
    }
  }
  SECTION("zero function gives zero") {
    auto q = quadratic_identity_check(model, 0.1, make_constant(sp, 0.0));
    CHECK(q.e_t == 0.0);
    CHECK(q.double_integral == 0.0);
  }
  SECTION("gaussian boundary leakage is reported through the budget") {
    auto gm = HeatKernelModel::gaussian(sp, 1.0);
    // mass centered at the box edge: the leak shows up in E_t vs the integral
    auto u = make_bump(sp, {4.0}, 1.0);
    auto q = quadratic_identity_check(gm, 0.05, u);
    CHECK(q.abs_residual > 1e-6);  // genuinely nonconservative
    CHECK(q.abs_residual <= q.derived_budget);
  }
}

TEST_CASE("near/far split") {
  auto sp = line_space(96, 4.0);
  auto model = line_spectral(sp);
  auto u = make_bump(sp, {0.0}, 2.0);
  const double t = 0.05;
  SECTION("cut above the diameter: everything is near") {
    auto s = near_far_split(model, t, u, 100.0);
    CHECK(s.far_A == 0.0);
    CHECK(s.near_B > 0.0);
  }
  SECTION("cut below the resolution: everything is far") {
    auto s = near_far_split(model, t, u, 0.5 * sp->resolution());
    CHECK(s.near_B == 0.0);
    CHECK(s.far_A > 0.0);
  }
  SECTION("partition is exact") {
    auto s1 = near_far_split(model, t, u, 1.0);
    auto s0 = near_far_split(model, t, u, 100.0);
    CHECK(rel_residual(s1.full(), s0.full()) <= 1e-12);
  }
  SECTION("identity residual ties the curve together") {
    std::vector<double> ts;
    for (double tt = 1.0; tt >= model.t_min(); tt *= 0.5) ts.push_back(tt);
    auto curve = energy_curve(model, u, ts, 1.0);
    CHECK(curve.monotone);
    for (const auto& p : curve.points) CHECK(p.identity_residual <= 1e-9);
  }
}

TEST_CASE("ball average deviation") {
  auto sp = line_space(64, 4.0);
  const double spc = sp->resolution();
  SECTION("constants vanish") {
    auto u = make_constant(sp, 5.0);
    CHECK(ball_average_deviation(*sp, u, 4 * spc) == 0.0);
  }
  SECTION("a single spike is visible") {
    Vector v = Vector::Zero(sp->size());
    v[30] = 1.0;
    GridFunction u(sp, v, "spike");
    CHECK(ball_average_deviation(*sp, u, 4 * spc) > 0.0);
  }
  SECTION("linear profile matches the brute-force double sum and r^2/3") {
    auto u = make_coordinate(sp, 0);
    for (int m : {4, 8, 16}) {
      const double r = m * spc * (1 + 1e-9);
      const double got = ball_average_deviation(*sp, u, r);
      // independent O(N^2) oracle
      double oracle = 0.0;
      for (int i = 0; i < sp->size(); ++i) {
        double num = 0.0, mass = 0.0;
        for (int j = 0; j < sp->size(); ++j)
          if (sp->dist(i, j) < r) {
            num += (u.values[j] - u.values[i]) * (u.values[j] - u.values[i]) * sp->weight(j);
            mass += sp->weight(j);
          }
        oracle += sp->weight(i) * num / mass;
      }
      CHECK(got == Catch::Approx(oracle).epsilon(1e-12));
      // Riemann value r^2/3 * mass, up to the (1 + 1/m) discreteness factor
      const double cont = r * r / 3.0 * sp->total_mass();
      CHECK(got / cont > 0.85);
      CHECK(got / cont < 1.0 + 1.4 / m);
    }
  }
  SECTION("r below two spacings rejected") {
    auto u = make_coordinate(sp, 0);
    CHECK_THROWS_AS(ball_average_deviation(*sp, u, 0.5 * spc), std::invalid_argument);
  }
}

TEST_CASE("besov energy report") {
  auto sp = line_space(513, 8.0);  // spacing exactly 2^-5: dyadic scales resolve
  SECTION("zero function: W = 0") {
    auto rep = besov_energy(*sp, make_constant(sp, 0.0), 0.5, 1, 4);
    CHECK(rep.w_sigma == 0.0);
  }
  SECTION("linear function: scaled values track r^{2-2sigma}") {
    auto u = make_coordinate(sp, 0);
    auto flat = besov_energy(*sp, u, 1.0, 1, 4);   // r^0: flat profile
    double lo = 1e300, hi = 0;
    for (auto& s : flat.scales) {
      lo = std::min(lo, s.scaled);
      hi = std::max(hi, s.scaled);
    }
    // strict open balls drop the boundary member exactly at dyadic radii,
    // so the deepest scale sits lower by about (m+1)/m with m ~ 1
    CHECK(hi / lo <= 2.0);
    auto grow = besov_energy(*sp, u, 0.9, 1, 4);   // r^{0.2}: largest r wins
    CHECK(grow.argmax_k == 1);
    auto shrink = besov_energy(*sp, u, 1.3, 1, 4); // r^{-0.6}: smallest r wins
    CHECK(shrink.argmax_k == 4);
  }
  SECTION("refining the k range never decreases W") {
    auto u = make_bump(sp, {0.0}, 2.0);
    double prev = 0.0;
    for (int kmax = 2; kmax <= 4; ++kmax) {
      auto rep = besov_energy(*sp, u, 1.2, 1, kmax);
      CHECK(rep.w_sigma >= prev);
      prev = rep.w_sigma;
    }
  }
  SECTION("quadratic scaling covariance") {
    auto u = make_bump(sp, {0.0}, 2.0);
    Vector scaled = 3.0 * u.values;
    GridFunction u3(sp, scaled, "3u");
    auto a = besov_energy(*sp, u, 1.2, 1, 4);
    auto b = besov_energy(*sp, u3, 1.2, 1, 4);
    CHECK(b.w_sigma == Catch::Approx(9.0 * a.w_sigma).epsilon(1e-12));
  }
}

TEST_CASE("shell energies partition the pair sum") {
  auto sp = line_space(128, 4.0);
  auto u = make_coordinate(sp, 0);
  const int k_deep = deepest_shell(*sp, 1.0);
  auto buckets = pair_energy_buckets(*sp, u, 1.0, k_deep);
  SECTION("no pair escapes below the deepest shell") { CHECK(buckets.deeper == 0.0); }
  SECTION("sum of shells plus far part is the full integral") {
    // independent full pair sum
    double full = 0.0;
    for (int i = 0; i < sp->size(); ++i)
      for (int j = 0; j < sp->size(); ++j) {
        double du = u.values[i] - u.values[j];
        full += du * du * sp->weight(i) * sp->weight(j);
      }
    CHECK(rel_residual(buckets.total(), full) <= 1e-12);
  }
  SECTION("individual shells match brute force") {
    for (int k : {1, 2, 3}) {
      double brute = 0.0;
      for (int i = 0; i < sp->size(); ++i)
        for (int j = 0; j < sp->size(); ++j) {
          double d = sp->dist(i, j);
          if (d >= std::pow(2.0, -k) && d < std::pow(2.0, -(k - 1))) {
            double du = u.values[i] - u.values[j];
            brute += du * du * sp->weight(i) * sp->weight(j);
          }
        }
      CHECK(shell_energy(*sp, u, k) == Catch::Approx(brute).epsilon(1e-12));
      CHECK(buckets.shells[k - 1] == Catch::Approx(brute).epsilon(1e-12));
    }
  }
  SECTION("constant functions have empty shells") {
    auto c = make_constant(sp, 4.0);
    CHECK(shell_energy(*sp, c, 2) == 0.0);
  }
  SECTION("ball sums are cumulative") {
    CHECK(buckets.ball_sum(1) ==
          Catch::Approx(buckets.total() - buckets.far).epsilon(1e-12));
    CHECK(buckets.ball_sum(2) <= buckets.ball_sum(1));
  }
}

TEST_CASE("pair sweeps are deterministic across thread counts") {
  auto sp = line_space(192, 4.0);
  auto u = make_random(sp, 99);
  const double a = ball_average_deviation(*sp, u, 0.5, 1);
  const double b = ball_average_deviation(*sp, u, 0.5, 4);
  CHECK(a == b);  // bitwise
  auto model = line_spectral(sp);
  auto s1 = near_far_split(model, 0.05, u, 1.0, nullptr, 1);
  auto s4 = near_far_split(model, 0.05, u, 1.0, nullptr, 4);
  CHECK(s1.near_B == s4.near_B);
  CHECK(s1.far_A == s4.far_A);
}
