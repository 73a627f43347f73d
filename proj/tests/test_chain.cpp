#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <memory>

#include "hklab/chain.hpp"

using namespace hklab;

namespace {

std::shared_ptr<const MetricMeasureSpace> dyadic_line(int m = 257, double h = 8.0) {
  return std::make_shared<MetricMeasureSpace>(build_box_grid(1, m, h));
}

std::vector<double> ratio2_grid(double lo, double hi) {
  std::vector<double> ts;
  for (double t = hi; t >= lo * (1 - 1e-12); t *= 0.5) ts.push_back(t);
  return ts;
}

ChainConfig gaussian_chain_config(const HeatKernelModel& model, double sigma, int k_max) {
  ChainConfig cfg;
  cfg.sigma = sigma;
  cfg.k_max = k_max;
  cfg.t_grid = ratio2_grid(model.t_min(), 1.0);
  cfg.deltas = {0.3, 0.1, 0.03};
  return cfg;
}

}  // namespace

TEST_CASE("proof chain on the exact gaussian profile") {
  auto sp = dyadic_line(1025);  // spacing 1/64: t_min = 2^-12, deep asymptotics
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  auto u = make_bump(sp, {0.0}, 2.0);
  ChainInputs in;
  in.model = &model;
  in.u = &u;
  in.phi2 = gaussian_profile(1.0);
  ChainConfig cfg = gaussian_chain_config(model, 1.5, 3);

  auto rep = run_chain(in, cfg);
  REQUIRE(rep.points.size() >= 8);
  CHECK(rep.eps == Catch::Approx(1.0));

  SECTION("certificate holds without rescaling the exact profile") {
    CHECK(rep.phi2_scale <= 1.0 + 2e-9);
  }
  SECTION("every chain verdict passes") {
    CHECK(rep.all_chain_ok);
    CHECK(rep.all_splits_ok);
    CHECK(rep.far_bound_ok);
    for (const auto& p : rep.points) {
      CHECK(p.b_le_s1);
      CHECK(p.s1_le_s2);
      CHECK(p.s2_le_s3);
      CHECK(p.sum_le_integral);
      for (const auto& st : p.shell_terms) CHECK(st.ok);
    }
  }
  SECTION("B and A match the raw O(N^2) oracle at one t") {
    const double t = cfg.t_grid[3];
    double near = 0.0, far = 0.0;
    for (int i = 0; i < sp->size(); ++i)
      for (int j = 0; j < sp->size(); ++j) {
        const double d = sp->dist(i, j);
        if (d <= 0) continue;
        const double du = u.values[i] - u.values[j];
        const double term = du * du * model.eval(t, i, j) * sp->weight(i) * sp->weight(j);
        (d < 1.0 ? near : far) += term;
      }
    CHECK(rep.points[3].B == Catch::Approx(near / (2 * t)).epsilon(1e-10));
    CHECK(rep.points[3].A == Catch::Approx(far / (2 * t)).epsilon(1e-10));
  }
  SECTION("delta split: threshold confirmed and applicability honored") {
    const auto& splits0 = rep.points.front().splits;  // t = 1
    REQUIRE(splits0.size() == 3);
    // T confirmed by recomputation and strictly below the vacuity scale
    CHECK(splits0[1].T < 1.0);
    CHECK_FALSE(splits0[1].vacuous);
    CHECK_FALSE(splits0[1].applicable);  // t = 1 > T
    bool some_applicable = false;
    for (const auto& p : rep.points)
      for (const auto& s : p.splits)
        if (s.applicable) {
          some_applicable = true;
          CHECK(s.s3_le_split);
          CHECK(s.sub_low_ok);
          CHECK(s.sub_high_ok);
        }
    CHECK(some_applicable);
  }
  SECTION("the majorant carries the t^{eps/beta} rate, raw B does not") {
    CHECK(rep.fit_s3.verdict == DecayVerdict::Pass);
    CHECK(rep.fit_s3.slope == Catch::Approx(0.5).margin(0.15));
    CHECK(rep.fit_p1.slope == Catch::Approx(0.5).margin(1e-6));  // exact power law
    // measured B approaches the Dirichlet energy: flat as t drops
    CHECK(std::abs(rep.fit_b_raw.slope) < 0.3);
  }
  SECTION("far part is astronomically small at small t") {
    CHECK(rep.a_last_over_first <= 1e-3);
  }
}

TEST_CASE("chain constants against the measured ball geometry") {
  // line grid, u(x) = x, sigma = 0.75 beta: C_meas within [1, 2^{2s} c_hi 1.5]
  auto sp = dyadic_line(513, 8.0);
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  auto u = make_coordinate(sp, 0);
  ChainInputs in;
  in.model = &model;
  in.u = &u;
  in.phi2 = gaussian_profile(1.0);
  std::vector<double> radii = {0.125, 0.25, 0.5, 1.0};
  auto fit = ahlfors_fit(*sp, radii, interior_centers(*sp, 1.0));
  in.c_hi = fit.c_hi;
  ChainConfig cfg = gaussian_chain_config(model, 1.5, 4);
  cfg.t_grid = ratio2_grid(model.t_min() * 16, 1.0);
  auto rep = run_chain(in, cfg);
  CHECK(rep.all_chain_ok);
  CHECK(rep.c_meas >= 1.0);
  CHECK(rep.c_meas <= std::pow(2.0, 2 * 1.5) * fit.c_hi * 1.5);
  CHECK(rep.c_theory >= rep.c_meas);  // 2^{alpha+2sigma} c_hi dominates
}

TEST_CASE("shell profile bound refuses an unverified kernel") {
  auto sp = dyadic_line(129, 4.0);
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  auto u = make_bump(sp, {0.0}, 2.0);
  ChainConfig cfg;
  cfg.sigma = 1.5;
  cfg.k_max = 3;
  const int k_deep = deepest_shell(*sp, 1.0);
  auto plain = pair_energy_buckets(*sp, u, 1.0, k_deep);
  auto kern = kernel_energy_buckets(model, 0.01, u, 1.0, k_deep);
  CHECK_THROWS_AS(shell_profile_bound(cfg, model.nominal(), gaussian_profile(1.0, 0.5), 0.01,
                                      plain, kern, /*upper_certified=*/false),
                  std::invalid_argument);
}

TEST_CASE("zero and constant functions give a trivial chain") {
  auto sp = dyadic_line(129, 4.0);
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  ChainInputs in;
  in.model = &model;
  auto u = make_constant(sp, 0.0);
  in.u = &u;
  in.phi2 = gaussian_profile(1.0);
  ChainConfig cfg = gaussian_chain_config(model, 1.5, 3);
  auto rep = run_chain(in, cfg);
  CHECK(rep.all_chain_ok);
  for (const auto& p : rep.points) {
    CHECK(p.B == 0.0);
    CHECK(p.S1 == 0.0);
  }
  CHECK(rep.fit_b_raw.verdict == DecayVerdict::TrivialConvergent);
}

TEST_CASE("on-ball-constant function degenerates W and skips the W-form bounds") {
  // two clusters separated by a gap: nonconstant u, yet constant on every
  // ball below the gap scale
  Matrix pts(6, 1);
  pts << 0.0, 0.1, 0.2, 2.2, 2.3, 2.4;
  Vector w = Vector::Constant(6, 0.1);
  auto sp = std::make_shared<MetricMeasureSpace>(pts, w, SpaceKind::Custom, 0.1);
  Vector uv(6);
  uv << 0, 0, 0, 1, 1, 1;
  GridFunction u(sp, uv, "two-level");
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  ChainInputs in;
  in.model = &model;
  in.u = &u;
  in.phi2 = gaussian_profile(1.0);
  ChainConfig cfg;
  cfg.sigma = 1.5;
  cfg.k_max = 2;
  cfg.t_grid = ratio2_grid(0.05, 0.4);
  cfg.deltas = {0.1};
  auto rep = run_chain(in, cfg);
  CHECK(rep.w_sigma == 0.0);
  CHECK(rep.w_sigma_degenerate);
  for (const auto& p : rep.points) {
    CHECK(p.B == 0.0);  // no near pair crosses the gap
    CHECK(p.S2 == 0.0);
    CHECK(p.A > 0.0);
  }
}

TEST_CASE("sum-to-integral comparison") {
  auto phi = gaussian_profile(1.0);
  SECTION("gaussian profile at gamma' = 4") {
    auto r = sum_to_integral_bound(phi, 4.0, 0.01, 2.0, 12);
    CHECK(r.ok);
    CHECK(r.sum_side > 0);
    CHECK(r.integral_side > 0);
    CHECK(r.sum_side <= r.constant * r.integral_side);
  }
  SECTION("empty sum is trivially dominated") {
    auto r = sum_to_integral_bound(phi, 4.0, 0.01, 2.0, 0);
    CHECK(r.sum_side == 0.0);
    CHECK(r.ok);
  }
  SECTION("piecewise-constant profile: finite sum vs exact integral") {
    auto step = DecayProfile::tabulated({0.0, 1.0, 1.0000001, 64.0},
                                        {1.0, 1.0, 1e-12, 1e-12}, false);
    auto r = sum_to_integral_bound(step, 3.0, 0.04, 2.0, 10);
    CHECK(r.ok);
  }
}

TEST_CASE("delta split edge cases") {
  auto phi = gaussian_profile(1.0);
  HKParameters params(1.0, 2.0);
  const double M = moment_integral(phi, 3.0).value;
  SECTION("delta above the full moment is vacuous; P1 alone bounds") {
    auto th = tail_threshold(phi, 1.0, 2.0, M * 2.0);
    CHECK(th.vacuous);
    auto rec = delta_split_bound(phi, params, 1.0, M * 2.0, 0.01, /*s3=*/1.0,
                                 /*prefactor=*/1.0, M, th);
    CHECK(rec.applicable);
    CHECK(rec.s3_le_split);
  }
  SECTION("t above T is reported inapplicable, not failed") {
    auto th = tail_threshold(phi, 1.0, 2.0, 0.01);
    auto rec = delta_split_bound(phi, params, 1.0, 0.01, th.T * 4.0, 1.0, 1.0, M, th);
    CHECK_FALSE(rec.applicable);
  }
}

TEST_CASE("b_decay_fit guards") {
  SECTION("all-zero series is trivially convergent") {
    auto f = b_decay_fit({1.0, 0.5, 0.25, 0.125}, {0, 0, 0, 0}, 0.5, true);
    CHECK(f.verdict == DecayVerdict::TrivialConvergent);
  }
  SECTION("short span is insufficient") {
    auto f = b_decay_fit({1.0, 0.5, 0.25, 0.125}, {1, 2, 3, 4}, 0.5, true);
    CHECK(f.verdict == DecayVerdict::Insufficient);
  }
  SECTION("exact power law is recovered") {
    std::vector<double> ts, vs;
    for (double t = 1.0; t > 1e-3; t *= 0.5) {
      ts.push_back(t);
      vs.push_back(3.0 * std::pow(t, 0.5));
    }
    auto f = b_decay_fit(ts, vs, 0.5, true);
    CHECK(f.verdict == DecayVerdict::Pass);
    CHECK(f.slope == Catch::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("S1 refinement consistency: deeper truncation adds one term") {
  auto sp = dyadic_line(257, 8.0);
  auto model = HeatKernelModel::gaussian(sp, 1.0);
  auto u = make_bump(sp, {0.0}, 2.0);
  ChainConfig cfg;
  cfg.sigma = 1.5;
  cfg.k_max = 3;
  const int k_deep = deepest_shell(*sp, 1.0);
  const double t = 0.02;
  auto phi = gaussian_profile(1.0);
  for (int K = 2; K < k_deep; ++K) {
    auto plain_k = pair_energy_buckets(*sp, u, 1.0, K);
    auto plain_k1 = pair_energy_buckets(*sp, u, 1.0, K + 1);
    auto kern_k = kernel_energy_buckets(model, t, u, 1.0, K);
    auto kern_k1 = kernel_energy_buckets(model, t, u, 1.0, K + 1);
    auto s1_k = shell_profile_bound(cfg, model.nominal(), phi, t, plain_k, kern_k, true);
    auto s1_k1 = shell_profile_bound(cfg, model.nominal(), phi, t, plain_k1, kern_k1, true);
    const double added = s1_k1.terms.back().bound_side;
    CHECK(added >= 0.0);
    CHECK(s1_k1.value == Catch::Approx(s1_k.value + added).epsilon(1e-12));
  }
}

TEST_CASE("far part decay bookkeeping") {
  auto phi = gaussian_profile(1.0);
  HKParameters params(1.0, 2.0);
  SECTION("identically-zero far part: cut above the diameter") {
    auto out = far_part_decay({0.1, 0.01, 0.001}, {0, 0, 0}, phi, params, 0.0);
    CHECK(out.all_bounded);
    CHECK(out.decay_confirmed);
  }
  SECTION("bound violation is detected") {
    auto out = far_part_decay({0.1}, {1e9}, phi, params, 1.0);
    CHECK_FALSE(out.all_bounded);
  }
}

TEST_CASE("triviality demo across the dyadic line family") {
  std::vector<std::vector<double>> devs;
  std::vector<double> lvl;
  // the family starts where r = 1/2 is already 8 grid spacings: the
  // coarsest scales must resolve before growth exponents mean anything
  for (int m : {257, 513, 1025, 2049}) {
    auto sp = std::make_shared<const MetricMeasureSpace>(build_box_grid(1, m, 8.0));
    auto u = make_bump(sp, {0.0}, 2.0);
    const int kmax = static_cast<int>(std::floor(-std::log2(2.0 * sp->resolution())));
    devs.push_back(deviation_profile(*sp, u, 1, kmax));
    lvl.push_back(std::log2(1.0 / sp->resolution()));
  }
  SECTION("sigma above the critical line expands") {
    auto r = triviality_demo(devs, lvl, 1.25);
    CHECK(r.verdict == GrowthVerdict::Expands);
    CHECK(r.growth_exponent == Catch::Approx(0.5).margin(0.15));  // 2 sigma - beta
  }
  SECTION("sigma below the critical line is stable") {
    auto r = triviality_demo(devs, lvl, 0.6);
    CHECK((r.verdict == GrowthVerdict::Stable || r.verdict == GrowthVerdict::Contracts));
  }
  SECTION("constant functions are degenerate") {
    std::vector<std::vector<double>> zero_devs(devs.size());
    for (std::size_t i = 0; i < devs.size(); ++i)
      zero_devs[i].assign(devs[i].size(), 0.0);
    auto r = triviality_demo(zero_devs, lvl, 1.2);
    CHECK(r.verdict == GrowthVerdict::DegenerateConstant);
  }
  SECTION("fewer than three levels rejected") {
    std::vector<std::vector<double>> two(devs.begin(), devs.begin() + 2);
    std::vector<double> lvl2(lvl.begin(), lvl.begin() + 2);
    CHECK_THROWS_AS(triviality_demo(two, lvl2, 1.2), std::invalid_argument);
  }
}
