#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "hklab/chain.hpp"
#include "hklab/config.hpp"
#include "hklab/energy.hpp"
#include "hklab/exponent.hpp"
#include "hklab/kernel.hpp"
#include "hklab/moment.hpp"

namespace hklab {

// ---------------------------------------------------------------------------
// JSON views. Reports feed report.json; doubles go through nlohmann's
// shortest-round-trip writer, which is byte-stable for identical values.
// ---------------------------------------------------------------------------

inline Json to_json(const MetricMeasureSpace::MetricCheck& c) {
  return Json{{"symmetry_violation", c.max_symmetry_violation},
              {"triangle_violation", c.max_triangle_violation},
              {"triples", c.triples_checked}};
}

inline Json to_json(const AhlforsFit& f) {
  return Json{{"alpha_est", f.alpha_est},     {"alpha_stderr", f.alpha_stderr},
              {"c_lo", f.c_lo},               {"c_hi", f.c_hi},
              {"radii", f.r_grid},            {"grid_shrunk", f.grid_shrunk},
              {"centers", f.centers_used}};
}

inline Json to_json(const ConservativeReport& r) {
  return Json{{"t", r.t},
              {"max_residual", r.max_residual},
              {"interior_residual", r.interior_residual},
              {"boundary_residual", r.boundary_residual},
              {"n_interior", r.n_interior},
              {"under_resolved", r.under_resolved}};
}

inline Json to_json(const SemigroupReport& r) {
  return Json{{"s", r.s}, {"t", r.t}, {"max_residual", r.max_residual},
              {"pairs", r.pairs_checked}};
}

inline Json to_json(const SymmetryReport& r) {
  return Json{{"max_asymmetry", r.max_abs_asymmetry},
              {"min_value", r.min_value},
              {"pairs", r.pairs_checked}};
}

inline Json to_json(const TwoSidedReport& r) {
  Json viol = Json::array();
  for (const auto& v : r.samples)
    viol.push_back(Json{{"t", v.t}, {"i", v.i}, {"j", v.j}, {"s", v.s},
                        {"margin", v.margin}, {"side", v.upper ? "upper" : "lower"}});
  return Json{{"checked", r.checked},
              {"skipped_beyond_band", r.skipped_beyond_band},
              {"lower_violations", r.lower_violations},
              {"upper_violations", r.upper_violations},
              {"worst_lower_margin", r.worst_lower_margin},
              {"worst_upper_margin", r.worst_upper_margin},
              {"phi1_at_1", r.phi1_at_1},
              {"phi1_positive_at_1", r.phi1_positive_at_1},
              {"sample_violations", viol}};
}

inline Json to_json(const MomentResult& m) {
  Json j{{"gamma", m.gamma}, {"divergent", m.divergent}};
  if (!m.divergent) {
    j["value"] = m.value;
    j["quad_error"] = m.quad_error;
    j["tail_bound"] = m.tail_bound;
  }
  j["octaves"] = m.octaves_used;
  return j;
}

inline Json to_json(const TailThreshold& t) {
  return Json{{"T", t.T}, {"tail_at_T", t.tail_at_T}, {"vacuous", t.vacuous},
              {"full_moment", t.full_moment}};
}

inline Json to_json(const EnergyLimit& e) {
  return Json{{"estimate", e.estimate},
              {"monotone", e.monotone},
              {"worst_monotone_slip", e.worst_monotone_slip},
              {"diverging", e.diverging}};
}

inline Json to_json(const EnergyCurve& c) {
  Json pts = Json::array();
  for (const auto& p : c.points)
    pts.push_back(Json{{"t", p.t}, {"E_t", p.e_t}, {"A", p.a_far}, {"B", p.b_near},
                       {"identity_residual", p.identity_residual}});
  return Json{{"points", pts}, {"monotone", c.monotone},
              {"worst_monotone_slip", c.worst_monotone_slip}};
}

inline Json to_json(const BesovReport& b) {
  Json scales = Json::array();
  for (const auto& s : b.scales)
    scales.push_back(Json{{"k", s.k}, {"r", s.r}, {"deviation", s.deviation},
                          {"scaled", s.scaled}});
  return Json{{"sigma", b.sigma}, {"scales", scales}, {"W_sigma", b.w_sigma},
              {"argmax_k", b.argmax_k}};
}

inline Json to_json(const DecayFit& f) {
  return Json{{"verdict", to_string(f.verdict)}, {"slope", f.slope},
              {"slope_stderr", f.slope_stderr}, {"points", f.points_used}};
}

inline Json to_json(const ChainReport& r) {
  Json pts = Json::array();
  for (const auto& p : r.points) {
    Json splits = Json::array();
    for (const auto& s : p.splits)
      splits.push_back(Json{{"delta", s.delta}, {"T", s.T}, {"vacuous", s.vacuous},
                            {"applicable", s.applicable}, {"P1", s.P1}, {"P2", s.P2},
                            {"s3_le_split", s.s3_le_split}, {"sub_low_ok", s.sub_low_ok},
                            {"sub_high_ok", s.sub_high_ok}});
    Json shells = Json::array();
    for (const auto& st : p.shell_terms)
      shells.push_back(Json{{"k", st.k}, {"s_k", st.s_k}, {"phi2", st.phi2_at_s_k},
                            {"kernel_side", st.kernel_side}, {"bound_side", st.bound_side},
                            {"ok", st.ok}});
    pts.push_back(Json{{"t", p.t}, {"B", p.B}, {"A", p.A}, {"S1", p.S1}, {"S2", p.S2},
                       {"S3", p.S3}, {"b_le_s1", p.b_le_s1}, {"s1_le_s2", p.s1_le_s2},
                       {"s2_le_s3", p.s2_le_s3}, {"sum_le_integral", p.sum_le_integral},
                       {"far_bound", p.far_bound}, {"a_le_far_bound", p.a_le_far_bound},
                       {"shells", shells}, {"splits", splits}});
  }
  return Json{{"sigma", r.sigma},
              {"eps", r.eps},
              {"alpha", r.params.alpha},
              {"beta", r.params.beta},
              {"function", r.function_name},
              {"k_deep", r.k_deep},
              {"W_sigma", r.w_sigma},
              {"W_sigma_degenerate", r.w_sigma_degenerate},
              {"C_meas", r.c_meas},
              {"C_theory", r.c_theory},
              {"phi2_scale", r.phi2_scale},
              {"fit_B_raw", to_json(r.fit_b_raw)},
              {"fit_S3", to_json(r.fit_s3)},
              {"fit_P1", to_json(r.fit_p1)},
              {"A_last_over_first", r.a_last_over_first},
              {"all_chain_ok", r.all_chain_ok},
              {"all_splits_ok", r.all_splits_ok},
              {"far_bound_ok", r.far_bound_ok},
              {"points", pts}};
}

inline Json to_json(const TrivialityResult& t) {
  return Json{{"sigma", t.sigma},
              {"level_log2_invres", t.level_log2_invres},
              {"W_values", t.w_values},
              {"growth_exponent", t.growth_exponent},
              {"verdict", to_string(t.verdict)}};
}

inline Json to_json(const BetaStarBisect& b) {
  return Json{{"beta_star_est", b.beta_star_est}, {"bracket_lo", b.bracket_lo},
              {"bracket_hi", b.bracket_hi}, {"ok", b.ok}, {"note", b.note}};
}

inline Json to_json(const ExponentReport& r) {
  return Json{{"alpha_est", r.alpha_est},
              {"alpha_stderr", r.alpha_stderr},
              {"beta_deviation", r.beta_deviation},
              {"beta_deviation_stderr", r.beta_deviation_stderr},
              {"beta_collapse", r.beta_collapse},
              {"beta_routes_agree", r.beta_routes_agree},
              {"beta_defined", r.beta_defined},
              {"beta_est", r.beta_est},
              {"beta_star_defined", r.beta_star_defined},
              {"beta_star_est", r.beta_star_est},
              {"beta_star_bracket", r.beta_star_bracket},
              {"provenance", r.provenance}};
}

// ---------------------------------------------------------------------------
// CSV emitters: one-line header, %.17g fields, no timestamps.
// ---------------------------------------------------------------------------

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("csv: cannot open " + path.string());
    out_ << header << "\n";
  }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i)
      out_ << fields[i] << (i + 1 < fields.size() ? "," : "");
    out_ << "\n";
  }
  static std::string num(double v) { return fmt_g17(v); }
  static std::string num(const Json& j) { return fmt_g17(j.get<double>()); }

 private:
  std::ofstream out_;
};

inline void write_space_csv(const std::filesystem::path& path, const MetricMeasureSpace& s) {
  std::string header = "id";
  for (int c = 0; c < s.dim(); ++c) header += ",x" + std::to_string(c);
  header += ",weight";
  CsvWriter csv(path, header);
  for (int i = 0; i < s.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (int c = 0; c < s.dim(); ++c) row.push_back(CsvWriter::num(s.points()(i, c)));
    row.push_back(CsvWriter::num(s.weight(i)));
    csv.row(row);
  }
}

inline void write_collapse_csv(const std::filesystem::path& path, const CollapseCloud& cloud) {
  CsvWriter csv(path, "s,value,t,pair");
  for (const auto& p : cloud.points)
    csv.row({CsvWriter::num(p.s), CsvWriter::num(p.v), CsvWriter::num(p.t),
             std::to_string(p.i) + "-" + std::to_string(p.j)});
}

inline void write_energy_curve_csv(const std::filesystem::path& path, const EnergyCurve& c) {
  CsvWriter csv(path, "t,E_t,A,B,identity_residual");
  for (const auto& p : c.points)
    csv.row({CsvWriter::num(p.t), CsvWriter::num(p.e_t), CsvWriter::num(p.a_far),
             CsvWriter::num(p.b_near), CsvWriter::num(p.identity_residual)});
}

inline void write_besov_csv(const std::filesystem::path& path,
                            const std::vector<BesovReport>& reports) {
  CsvWriter csv(path, "sigma,k,r,deviation,scaled");
  for (const auto& rep : reports)
    for (const auto& s : rep.scales)
      csv.row({CsvWriter::num(rep.sigma), std::to_string(s.k), CsvWriter::num(s.r),
               CsvWriter::num(s.deviation), CsvWriter::num(s.scaled)});
}

inline void write_chain_overlay_csv(const std::filesystem::path& path, const ChainReport& r) {
  CsvWriter csv(path, "t,B,S1,S2,S3");
  for (const auto& p : r.points)
    csv.row({CsvWriter::num(p.t), CsvWriter::num(p.B), CsvWriter::num(p.S1),
             CsvWriter::num(p.S2), CsvWriter::num(p.S3)});
}

inline void write_chain_split_csv(const std::filesystem::path& path, const ChainReport& r) {
  CsvWriter csv(path, "t,delta,T,applicable,P1,P2,s3_le_split");
  for (const auto& p : r.points)
    for (const auto& s : p.splits)
      csv.row({CsvWriter::num(p.t), CsvWriter::num(s.delta), CsvWriter::num(s.T),
               s.applicable ? "1" : "0", CsvWriter::num(s.P1), CsvWriter::num(s.P2),
               s.s3_le_split ? "1" : "0"});
}

inline void write_moment_csv(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, MomentResult>>& rows) {
  CsvWriter csv(path, "profile,gamma,finite,value,quad_error,tail_bound");
  for (const auto& [name, m] : rows)
    csv.row({name, CsvWriter::num(m.gamma), m.divergent ? "DIVERGENT" : "finite",
             m.divergent ? "" : CsvWriter::num(m.value), CsvWriter::num(m.quad_error),
             CsvWriter::num(m.tail_bound)});
}

inline void write_gsigma_csv(const std::filesystem::path& path,
                             const std::vector<TrivialityResult>& rows) {
  CsvWriter csv(path, "sigma,growth_exponent,verdict");
  for (const auto& r : rows)
    csv.row({CsvWriter::num(r.sigma), CsvWriter::num(r.growth_exponent),
             to_string(r.verdict)});
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

/// Re-emits a plot series from a persisted report.json. Kinds:
/// "chain-overlay" (t,B,S1,S2,S3), "energy-curve" (t,E_t,A,B),
/// "wsigma-profile" (sigma,k,r,scaled), "g-sigma" (sigma,g,verdict).
/// `selector` picks the run by kernel name; a missing series raises a
/// named error.
inline void emit_plot_data(const Json& report, const std::string& kind,
                           const std::string& selector, const std::filesystem::path& path) {
  auto stage_runs = [&](const char* stage) -> const Json& {
    static const Json empty = Json::array();
    if (!report.contains("stages") || !report["stages"].contains(stage)) return empty;
    const Json& st = report["stages"][stage];
    return st.contains("runs") ? st["runs"] : empty;
  };
  auto missing = [&]() -> std::runtime_error {
    return std::runtime_error("emit_plot_data: no series '" + kind + "' for '" + selector +
                              "' in this report");
  };
  if (kind == "chain-overlay") {
    for (const auto& run : stage_runs("chain")) {
      if (run.value("kernel", "") != selector) continue;
      for (const auto& rep : run.value("reports", Json::array())) {
        CsvWriter csv(path, "t,B,S1,S2,S3");
        for (const auto& p : rep["points"])
          csv.row({CsvWriter::num(p["t"]), CsvWriter::num(p["B"]), CsvWriter::num(p["S1"]),
                   CsvWriter::num(p["S2"]), CsvWriter::num(p["S3"])});
        return;
      }
    }
    throw missing();
  }
  if (kind == "energy-curve") {
    for (const auto& run : stage_runs("energy")) {
      if (run.value("kernel", "") != selector) continue;
      for (const auto& f : run.value("functions", Json::array())) {
        CsvWriter csv(path, "t,E_t,A,B");
        for (const auto& p : f["curve"]["points"])
          csv.row({CsvWriter::num(p["t"]), CsvWriter::num(p["E_t"]), CsvWriter::num(p["A"]),
                   CsvWriter::num(p["B"])});
        return;
      }
    }
    throw missing();
  }
  if (kind == "wsigma-profile") {
    for (const auto& run : stage_runs("energy")) {
      if (run.value("kernel", "") != selector) continue;
      for (const auto& f : run.value("functions", Json::array())) {
        if (!f.contains("besov")) continue;
        CsvWriter csv(path, "sigma,k,r,scaled");
        for (const auto& rep : f["besov"])
          for (const auto& sc : rep["scales"])
            csv.row({CsvWriter::num(rep["sigma"]), std::to_string(sc["k"].get<int>()),
                     CsvWriter::num(sc["r"]), CsvWriter::num(sc["scaled"])});
        return;
      }
    }
    throw missing();
  }
  if (kind == "g-sigma") {
    for (const auto& run : stage_runs("exponent")) {
      if (!run.contains("triviality")) continue;
      CsvWriter csv(path, "sigma,growth_exponent,verdict");
      for (const auto& t : run["triviality"])
        csv.row({CsvWriter::num(t["sigma"]), CsvWriter::num(t["growth_exponent"]),
                 t["verdict"].get<std::string>()});
      return;
    }
    throw missing();
  }
  throw std::runtime_error("emit_plot_data: unknown series kind '" + kind + "'");
}

}  // namespace hklab
