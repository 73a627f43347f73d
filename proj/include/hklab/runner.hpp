#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "hklab/chain.hpp"
#include "hklab/config.hpp"
#include "hklab/exponent.hpp"
#include "hklab/report.hpp"

namespace hklab {

namespace fs = std::filesystem;

/// Config-driven pipeline: each subcommand consumes its run list from the
/// config's `suites` section, writes CSV series plus its slice of
/// report.json, and reports a pass verdict. report.json carries no clocks
/// or thread counts, so identical config + seed give identical bytes.
class Runner {
 public:
  Runner(ExperimentConfig cfg, fs::path out_dir, std::uint64_t seed, unsigned threads,
         std::string suite_filter = "")
      : cfg_(std::move(cfg)), out_(std::move(out_dir)), seed_(seed),
        threads_(threads == 0 ? hardware_threads() : threads),
        suite_filter_(std::move(suite_filter)) {
    fs::create_directories(out_);
    report_["config"] = cfg_.raw;
    report_["seed"] = seed_;
    report_["incomplete"] = true;
    report_["stages"] = Json::object();
    report_["pass"] = Json::object();
  }

  static const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"space", "kernel", "energy",
                                                   "moment", "chain", "exponent"};
    return names;
  }

  /// Runs one subcommand (or "all"); returns the process exit code:
  /// 0 all enabled suites pass, 1 a suite failed, 2 config error, 3 budget.
  int run(const std::string& subcommand) {
    std::vector<std::string> stages;
    if (subcommand == "all") stages = stage_names();
    else stages = {subcommand};
    bool all_pass = true;
    for (const auto& name : stages) {
      const auto t0 = std::chrono::steady_clock::now();
      bool pass = false;
      Json stage_out = Json::object();
      std::string error;
      try {
        pass = dispatch(name, stage_out);
      } catch (const ConfigError&) {
        throw;  // configuration problems abort the run (exit 2)
      } catch (const BudgetError&) {
        throw;  // exit 3
      } catch (const std::exception& e) {
        error = e.what();
        pass = false;
      }
      if (!error.empty()) stage_out["error"] = error;
      report_["stages"][name] = std::move(stage_out);
      report_["pass"][name] = pass;
      all_pass = all_pass && pass;
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                              .count();
      timing_.emplace_back(name, secs);
      flush(true);  // crash-safe partial report with the incomplete marker
    }
    report_["incomplete"] = false;
    flush(false);
    write_summary(all_pass);
    return all_pass ? 0 : 1;
  }

  const Json& report() const { return report_; }
  const fs::path& out_dir() const { return out_; }

 private:
  bool dispatch(const std::string& name, Json& out) {
    if (name == "space") return stage_space(out);
    if (name == "kernel") return stage_kernel(out);
    if (name == "energy") return stage_energy(out);
    if (name == "moment") return stage_moment(out);
    if (name == "chain") return stage_chain(out);
    if (name == "exponent") return stage_exponent(out);
    throw ConfigError("unknown subcommand '" + name + "'");
  }

  /// --suite NAME restricts every stage to runs whose primary object
  /// (space or kernel) carries that name.
  bool selected(const Json& run) const {
    if (suite_filter_.empty()) return true;
    return run.value("space", "") == suite_filter_ || run.value("kernel", "") == suite_filter_ ||
           run.value("profile", "") == suite_filter_ || run.value("name", "") == suite_filter_;
  }

  // ---- shared registries -------------------------------------------------

  std::shared_ptr<const MetricMeasureSpace> space(const std::string& name) {
    auto it = spaces_.find(name);
    if (it != spaces_.end()) return it->second;
    const Json& spec = cfg_.find_named("spaces", name, "run");
    auto sp = build_space_from(spec, cfg_.pair_budget_points());
    spaces_.emplace(name, sp);
    return sp;
  }

  const HeatKernelModel& model(const std::string& name) {
    auto it = models_.find(name);
    if (it != models_.end()) return *it->second;
    const Json& spec = cfg_.find_named("kernels", name, "run");
    auto sp = space(detail::require_string(spec, "space", "kernel '" + name + "'"));
    auto m = std::make_unique<HeatKernelModel>(build_kernel_from(spec, sp));
    return *models_.emplace(name, std::move(m)).first->second;
  }

  GridFunction function(const std::string& name, const HeatKernelModel& m) {
    const Json& spec = cfg_.find_named("functions", name, "run");
    return build_function_from(spec, m.space_ptr(), &m, seed_);
  }

  /// Resolves the run's upper/lower profile pair: either named entries or
  /// `"calibrated"`, which fits stretched-exponential envelopes with
  /// nu = beta/(beta-1) to the model's own collapse cloud.
  CalibratedProfiles profiles_for(const Json& run, const HeatKernelModel& m,
                                  const std::vector<double>& ts) {
    const std::string p2 = run.value("phi2", "calibrated");
    const std::string p1 = run.value("phi1", p2 == "calibrated" ? "calibrated" : p2);
    if (p1 == "calibrated" || p2 == "calibrated") {
      auto pairs = stratified_pairs(m.space(), run.value("pairs_per_band", 192), seed_);
      auto cloud = fit_profile(m, m.nominal(), ts, pairs);
      const double beta = m.nominal().beta;
      CalibratedProfiles cal = calibrate_stretched_profiles(cloud, beta / (beta - 1.0));
      if (p1 != "calibrated")
        cal.phi1 = build_profile_from(cfg_.find_named("profiles", p1, "run"));
      if (p2 != "calibrated")
        cal.phi2 = build_profile_from(cfg_.find_named("profiles", p2, "run"));
      return cal;
    }
    return {build_profile_from(cfg_.find_named("profiles", p1, "run")),
            build_profile_from(cfg_.find_named("profiles", p2, "run")),
            std::numeric_limits<double>::infinity()};
  }

  // ---- stages --------------------------------------------------------------

  bool stage_space(Json& out) {
    bool pass = true;
    Json runs = Json::array();
    for (const auto& run : cfg_.suite("space")) {
      if (!selected(run)) continue;
      const std::string name = detail::require_string(run, "space", "space run");
      auto sp = space(name);
      Json j{{"space", name},
             {"points", sp->size()},
             {"total_mass", sp->total_mass()},
             {"resolution", sp->resolution()},
             {"diameter", sp->diameter()}};
      auto metric = sp->verify_metric(run.value("metric_triples", 10000), seed_);
      j["metric"] = to_json(metric);
      bool ok = metric.max_symmetry_violation <= 1e-12 &&
                metric.max_triangle_violation <= 1e-12;
      if (run.contains("radii")) {
        std::vector<double> radii = run["radii"].get<std::vector<double>>();
        auto centers =
            interior_centers(*sp, *std::max_element(radii.begin(), radii.end()),
                             run.value("max_centers", std::size_t{64}));
        auto fit = ahlfors_fit(*sp, radii, centers);
        j["ahlfors"] = to_json(fit);
        if (run.contains("expect_alpha")) {
          const double want = run["expect_alpha"].get<double>();
          const double tol = run.value("alpha_tol", 0.05);
          const bool hit = std::abs(fit.alpha_est - want) <= tol;
          j["alpha_within_band"] = hit;
          ok = ok && hit;
        }
      }
      if (run.value("export_csv", false))
        write_space_csv(out_ / (name + "_space.csv"), *sp);
      j["pass"] = ok;
      pass = pass && ok;
      runs.push_back(std::move(j));
    }
    out["runs"] = std::move(runs);
    return pass;
  }

  bool stage_kernel(Json& out) {
    bool pass = true;
    Json runs = Json::array();
    for (const auto& run : cfg_.suite("kernel")) {
      if (!selected(run)) continue;
      const std::string name = detail::require_string(run, "kernel", "kernel run");
      const auto& m = model(name);
      std::vector<double> ts = t_grid_from(run, m, "kernel run '" + name + "'");
      auto pairs = stratified_pairs(m.space(), run.value("pairs_per_band", 128), seed_);
      Json j{{"kernel", name}, {"t_grid", ts}};
      bool ok = true;

      // symmetry + unit mass across the grid
      double worst_sym = 0.0, worst_mass = 0.0, worst_interior = 0.0;
      Json mass = Json::array();
      for (double t : ts) {
        worst_sym = std::max(worst_sym, check_symmetry(m, t, pairs).max_abs_asymmetry);
        auto c = check_conservative(m, t);
        mass.push_back(to_json(c));
        worst_mass = std::max(worst_mass, c.max_residual);
        worst_interior = std::max(worst_interior, c.interior_residual);
      }
      j["max_asymmetry"] = worst_sym;
      j["unit_mass"] = std::move(mass);
      ok = ok && worst_sym <= run.value("symmetry_tol", 1e-12);
      const double mass_tol = run.value("unit_mass_tol", 1e-8);
      if (m.conservative()) ok = ok && worst_mass <= mass_tol;
      else ok = ok && worst_interior <= run.value("interior_mass_tol", 1e-3);

      // semigroup on a few (s, t) combinations; for leaky closed-form
      // kernels only interior pairs are meaningful (the quadrature
      // truncates the tail mass at the box edge)
      Json semi = Json::array();
      double worst_semi = 0.0;
      const double s0 = ts.size() >= 3 ? ts[ts.size() / 2] : ts.front();
      for (double t : {ts.front(), ts.back()}) {
        std::vector<std::pair<int, int>> sg_pairs;
        const double margin =
            m.conservative() ? 0.0 : 6.0 * std::pow(t + s0, 1.0 / m.nominal().beta);
        for (auto pr : pairs)
          if (m.space().boundary_distance(pr.first) >= margin &&
              m.space().boundary_distance(pr.second) >= margin)
            sg_pairs.push_back(pr);
        if (sg_pairs.empty()) continue;
        auto r = check_semigroup(m, s0, t, sg_pairs);
        worst_semi = std::max(worst_semi, r.max_residual);
        semi.push_back(to_json(r));
      }
      j["semigroup"] = std::move(semi);
      ok = ok && worst_semi <= run.value("semigroup_tol", m.conservative() ? 1e-8 : 1e-2);

      // collapse cloud + two-sided sandwich on the resolved band
      auto cloud = fit_profile(m, m.nominal(), ts, pairs);
      j["collapse"] = Json{{"points", cloud.points.size()},
                           {"collision_spread", cloud.collision_spread},
                           {"binned_spread", cloud.binned_spread},
                           {"s_range", Json::array({cloud.s_min, cloud.s_max})}};
      if (run.value("emit_collapse_csv", true))
        write_collapse_csv(out_ / (name + "_collapse.csv"), cloud);
      CalibratedProfiles cal = profiles_for(run, m, ts);
      auto two = check_two_sided(m, m.nominal(), cal.phi1, cal.phi2, ts, pairs, 1e-12,
                                 cal.s_fit_max);
      j["two_sided"] = to_json(two);
      j["band_s_max"] = cal.s_fit_max;
      j["phi1"] = cal.phi1.describe();
      j["phi2"] = cal.phi2.describe();
      ok = ok && two.upper_violations == 0 && two.phi1_positive_at_1;

      j["pass"] = ok;
      pass = pass && ok;
      runs.push_back(std::move(j));
    }
    out["runs"] = std::move(runs);
    return pass;
  }

  bool stage_energy(Json& out) {
    bool pass = true;
    Json runs = Json::array();
    for (const auto& run : cfg_.suite("energy")) {
      if (!selected(run)) continue;
      const std::string name = detail::require_string(run, "kernel", "energy run");
      const auto& m = model(name);
      std::vector<double> ts = t_grid_from(run, m, "energy run '" + name + "'");
      const double cut = run.value("cut", 1.0);
      Json j{{"kernel", name}, {"t_grid", ts}, {"cut", cut}};
      bool ok = true;
      Json fns = Json::array();
      for (const auto& fname : run.value("functions", std::vector<std::string>{})) {
        GridFunction u = function(fname, m);
        Json fj{{"function", fname}};
        auto curve = energy_curve(m, u, ts, cut, threads_);
        fj["curve"] = to_json(curve);
        ok = ok && curve.monotone;
        write_energy_curve_csv(out_ / (name + "_" + fname + "_energy.csv"), curve);
        // quadratic identity within the derived unit-mass budget
        if (m.conservative()) {
          bool id_ok = true;
          for (double t : {ts.front(), ts.back()}) {
            auto q = quadratic_identity_check(m, t, u, nullptr, threads_);
            id_ok = id_ok && q.abs_residual <= q.derived_budget;
          }
          fj["quadratic_identity_ok"] = id_ok;
          ok = ok && id_ok;
        }
        if (run.value("limit", false)) {
          auto lim = energy_limit(m, u, ts);
          fj["limit"] = to_json(lim);
          ok = ok && lim.monotone;
        }
        if (run.contains("sigmas") || run.contains("sigma_factors")) {
          std::vector<double> sigmas;
          if (run.contains("sigmas")) sigmas = run["sigmas"].get<std::vector<double>>();
          for (double f : run.value("sigma_factors", std::vector<double>{}))
            sigmas.push_back(f * m.nominal().beta);
          const int k_max = run.value("k_max", default_k_max(m.space()));
          std::vector<double> devs = deviation_profile(m.space(), u, 1, k_max, threads_);
          std::vector<BesovReport> reps;
          for (double sg : sigmas) reps.push_back(besov_from_profile(devs, sg, 1));
          Json bj = Json::array();
          for (const auto& rep : reps) bj.push_back(to_json(rep));
          fj["besov"] = std::move(bj);
          write_besov_csv(out_ / (name + "_" + fname + "_besov.csv"), reps);
        }
        fns.push_back(std::move(fj));
      }
      j["functions"] = std::move(fns);
      j["pass"] = ok;
      pass = pass && ok;
      runs.push_back(std::move(j));
    }
    out["runs"] = std::move(runs);
    return pass;
  }

  bool stage_moment(Json& out) {
    bool pass = true;
    Json runs = Json::array();
    std::vector<std::pair<std::string, MomentResult>> csv_rows;
    for (const auto& run : cfg_.suite("moment")) {
      if (!selected(run)) continue;
      const std::string pname = detail::require_string(run, "profile", "moment run");
      DecayProfile phi = build_profile_from(cfg_.find_named("profiles", pname, "moment run"));
      Json j{{"profile", pname}};
      Json rows = Json::array();
      for (double g : run.value("gammas", std::vector<double>{})) {
        MomentResult mres = moment_integral(phi, g);
        csv_rows.emplace_back(pname, mres);
        Json row = to_json(mres);
        if (phi.kind() == ProfileKind::StretchedExponential && !mres.divergent) {
          // gamma-identity oracle: (C/nu) c^{-g/nu} Gamma(g/nu)
          const double oracle = phi.amplitude() / phi.stretch_exponent() *
                                std::pow(phi.decay_rate(), -g / phi.stretch_exponent()) *
                                std::tgamma(g / phi.stretch_exponent());
          row["gamma_identity"] = oracle;
          const bool hit = rel_residual(mres.value, oracle) <= 1e-6;
          row["gamma_identity_ok"] = hit;
          pass = pass && hit;
        }
        if (phi.kind() == ProfileKind::Polynomial) {
          // divergence is a finding, not a failure; misclassification is one
          const bool expect_divergent = phi.poly_exponent() <= g;
          row["classifier_ok"] = mres.divergent == expect_divergent;
          pass = pass && (mres.divergent == expect_divergent);
        }
        rows.push_back(std::move(row));
      }
      j["moments"] = std::move(rows);
      if (run.contains("thresholds")) {
        Json th = Json::array();
        for (const auto& spec : run["thresholds"]) {
          auto res = tail_threshold(phi, spec.value("alpha", 1.0), spec.value("beta", 2.0),
                                    detail::require_number(spec, "delta", "threshold"));
          Json tj = to_json(res);
          tj["delta"] = spec["delta"];
          th.push_back(std::move(tj));
          pass = pass && (res.vacuous || res.tail_at_T < spec["delta"].get<double>());
        }
        j["thresholds"] = std::move(th);
      }
      runs.push_back(std::move(j));
    }
    write_moment_csv(out_ / "moments.csv", csv_rows);
    out["runs"] = std::move(runs);
    return pass;
  }

  bool stage_chain(Json& out) {
    bool pass = true;
    Json runs = Json::array();
    for (const auto& run : cfg_.suite("chain")) {
      if (!selected(run)) continue;
      const std::string name = detail::require_string(run, "kernel", "chain run");
      const auto& m = model(name);
      std::vector<double> ts = t_grid_from(run, m, "chain run '" + name + "'");
      CalibratedProfiles cal = profiles_for(run, m, ts);
      const DecayProfile& phi2 = cal.phi2;
      std::vector<double> sigmas;
      if (run.contains("sigmas")) sigmas = run["sigmas"].get<std::vector<double>>();
      for (double f : run.value("sigma_factors", std::vector<double>{}))
        sigmas.push_back(f * m.nominal().beta);
      if (sigmas.empty())
        throw ConfigError("config: chain run '" + name + "': field 'sigmas'/'sigma_factors' empty");
      double c_hi = 0.0;
      if (run.contains("ahlfors_radii")) {
        std::vector<double> radii = run["ahlfors_radii"].get<std::vector<double>>();
        auto centers = interior_centers(m.space(),
                                        *std::max_element(radii.begin(), radii.end()));
        c_hi = ahlfors_fit(m.space(), radii, centers).c_hi;
      }
      Json j{{"kernel", name}, {"phi2", phi2.describe()}, {"t_grid", ts}};
      Json reports = Json::array();
      for (const auto& fname : run.value("functions", std::vector<std::string>{})) {
        GridFunction u = function(fname, m);
        for (double sg : sigmas) {
          ChainConfig ccfg;
          ccfg.sigma = sg;
          ccfg.k_max = run.value("k_max", default_k_max(m.space()));
          ccfg.t_grid = ts;
          ccfg.deltas = run.value("deltas", std::vector<double>{0.3, 0.1, 0.03});
          ccfg.cut = run.value("cut", 1.0);
          ChainInputs in;
          in.model = &m;
          in.u = &u;
          in.phi2 = phi2;
          in.c_hi = c_hi;
          in.threads = threads_;
          ChainReport rep = run_chain(in, ccfg);
          // the far-part bound is meaningful for exact-profile kernels;
          // discrete spectral tails genuinely exceed continuum envelopes
          // out there, so it is reported but gated only on request
          bool ok = rep.all_chain_ok && rep.all_splits_ok;
          if (run.value("gate_far_bound", false)) ok = ok && rep.far_bound_ok;
          pass = pass && ok;
          Json rj = to_json(rep);
          rj["pass"] = ok;
          reports.push_back(std::move(rj));
          const std::string base = name + "_" + fname + "_s" + fmt_g17(sg);
          write_chain_overlay_csv(out_ / (base + "_chain.csv"), rep);
          write_chain_split_csv(out_ / (base + "_split.csv"), rep);
        }
      }
      j["reports"] = std::move(reports);
      runs.push_back(std::move(j));
    }
    out["runs"] = std::move(runs);
    return pass;
  }

  bool stage_exponent(Json& out) {
    bool pass = true;
    Json runs = Json::array();
    for (const auto& run : cfg_.suite("exponent")) {
      if (!selected(run)) continue;
      Json j = Json::object();
      bool ok = true;
      AhlforsFit ahl;
      BetaDeviationFit dev;
      BetaCollapseFit col;
      std::optional<BetaStarBisect> bstar;
      std::string provenance;

      if (run.contains("kernel")) {
        const std::string name = run["kernel"].get<std::string>();
        const auto& m = model(name);
        provenance = "kernel=" + name;
        j["kernel"] = name;
        if (run.contains("ahlfors_radii")) {
          std::vector<double> radii = run["ahlfors_radii"].get<std::vector<double>>();
          auto centers = interior_centers(m.space(),
                                          *std::max_element(radii.begin(), radii.end()),
                                          run.value("max_centers", std::size_t{64}));
          ahl = ahlfors_fit(m.space(), radii, centers);
          j["ahlfors"] = to_json(ahl);
        }
        if (run.contains("deviation")) {
          const auto& dspec = run["deviation"];
          GridFunction u = function(detail::require_string(dspec, "function", "deviation"), m);
          const int k_lo = dspec.value("k_lo", 1);
          const int k_hi = dspec.value("k_hi", default_k_max(m.space()));
          dev = beta_from_deviation(m.space(), u, k_lo, k_hi, threads_);
          j["beta_deviation"] =
              Json{{"beta_est", dev.beta_est}, {"stderr", dev.stderr_},
                   {"defined", dev.defined}, {"deviations", dev.deviations}};
        }
        if (run.contains("collapse")) {
          const auto& cspec = run["collapse"];
          std::vector<double> bgrid;
          const double b0 = cspec.value("beta_min", 1.5);
          const double b1 = cspec.value("beta_max", 3.0);
          const double db = cspec.value("beta_step", 0.1);
          for (double b = b0; b <= b1 + 1e-12; b += db) bgrid.push_back(b);
          std::vector<double> ts = t_grid_from(cspec, m, "collapse");
          auto pairs =
              stratified_pairs(m.space(), cspec.value("pairs_per_band", 256), seed_);
          col = beta_from_collapse(m, bgrid, ts, pairs);
          j["beta_collapse"] = Json{{"beta_est", col.beta_est},
                                    {"no_estimate", col.no_estimate},
                                    {"beta_grid", col.beta_grid},
                                    {"objective", col.objective}};
        }
      }
      if (run.contains("family")) {
        const auto& fam = run["family"];
        auto [devs, lvls] = family_deviations(fam);
        Json trows = Json::array();
        std::vector<TrivialityResult> tcsv;
        for (const auto& sg : fam.value("sigmas", std::vector<double>{})) {
          auto tr = triviality_demo(devs, lvls, sg);
          tcsv.push_back(tr);
          trows.push_back(to_json(tr));
        }
        if (!trows.empty()) j["triviality"] = std::move(trows);
        if (!tcsv.empty()) write_gsigma_csv(out_ / "g_sigma.csv", tcsv);
        if (fam.contains("sigma_bracket")) {
          const auto br = fam["sigma_bracket"].get<std::vector<double>>();
          if (br.size() != 2)
            throw ConfigError("config: exponent family: sigma_bracket needs 2 entries");
          bstar = beta_star_bisect(devs, lvls, br[0], br[1]);
          j["beta_star"] = to_json(*bstar);
          ok = ok && bstar->ok;
        }
      }
      ExponentReport rep =
          combine_exponents(ahl, dev, col, bstar, run.value("agreement_tol", 0.25));
      rep.provenance = provenance;
      j["combined"] = to_json(rep);
      if (run.contains("expect_alpha"))
        ok = ok && std::abs(ahl.alpha_est - run["expect_alpha"].get<double>()) <=
                       run.value("alpha_tol", 0.05);
      if (run.contains("expect_beta"))
        ok = ok && rep.beta_defined &&
             std::abs(rep.beta_est - run["expect_beta"].get<double>()) <=
                 run.value("beta_tol", 0.25);
      if (run.contains("beta_star_consistency_tol"))
        ok = ok && rep.beta_defined && rep.beta_star_defined &&
             std::abs(rep.beta_star_est - rep.beta_est) <=
                 run["beta_star_consistency_tol"].get<double>();
      j["pass"] = ok;
      pass = pass && ok;
      runs.push_back(std::move(j));
    }
    out["runs"] = std::move(runs);
    return pass;
  }

  /// Per-level deviation profiles for a refinement family, sampling the
  /// same closed-form function on every level.
  std::pair<std::vector<std::vector<double>>, std::vector<double>> family_deviations(
      const Json& fam) {
    const std::string kind = detail::require_string(fam, "kind", "exponent family");
    const Json& fspec =
        cfg_.find_named("functions", detail::require_string(fam, "function", "family"),
                        "exponent family");
    std::vector<std::shared_ptr<const MetricMeasureSpace>> levels;
    if (kind == "gasket") {
      for (int L : fam.value("levels", std::vector<int>{}))
        levels.push_back(std::make_shared<const MetricMeasureSpace>(
            build_gasket_graph(L, cfg_.pair_budget_points())));
    } else if (kind == "line") {
      for (int n : fam.value("n", std::vector<int>{}))
        levels.push_back(std::make_shared<const MetricMeasureSpace>(
            build_box_grid(1, n, fam.value("halfwidth", 8.0), cfg_.pair_budget_points())));
    } else {
      throw ConfigError("config: exponent family kind '" + kind + "' unknown");
    }
    if (levels.size() < 3)
      throw ConfigError("config: exponent family needs at least 3 levels");
    std::vector<std::vector<double>> devs;
    std::vector<double> lvls;
    const int k_lo = fam.value("k_lo", 1);
    for (const auto& sp : levels) {
      GridFunction u = build_function_from(fspec, sp, nullptr, seed_);
      devs.push_back(deviation_profile(*sp, u, k_lo, default_k_max(*sp), threads_));
      lvls.push_back(std::log2(1.0 / sp->resolution()));
    }
    return {devs, lvls};
  }

  void flush(bool incomplete) {
    report_["incomplete"] = incomplete;
    write_json(out_ / "report.json", report_);
  }

  void write_summary(bool all_pass) {
    std::ofstream s(out_ / "summary.txt");
    s << "hklab run summary\n";
    s << "seed: " << seed_ << "\n";
    s << "threads: " << threads_ << "\n\n";
    for (const auto& [name, secs] : timing_) {
      const bool p = report_["pass"].value(name, false);
      s << name << ": " << (p ? "PASS" : "FAIL") << "  (" << fmt_g17(secs) << " s)\n";
    }
    s << "\noverall: " << (all_pass ? "PASS" : "FAIL") << "\n";
  }

  ExperimentConfig cfg_;
  fs::path out_;
  std::uint64_t seed_;
  unsigned threads_;
  std::string suite_filter_;
  Json report_;
  std::vector<std::pair<std::string, double>> timing_;
  std::map<std::string, std::shared_ptr<const MetricMeasureSpace>> spaces_;
  std::map<std::string, std::unique_ptr<HeatKernelModel>> models_;
};

/// CLI entry point shared by the binary and the tests.
/// Flags: --config PATH, --out DIR, --seed N, --threads N, --suite NAME,
/// --override key=value (repeatable). Environment: HKLAB_OUT, HKLAB_THREADS.
int run_cli(const std::vector<std::string>& args);

}  // namespace hklab
