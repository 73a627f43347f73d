#pragma once

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hklab/common.hpp"
#include "hklab/function.hpp"
#include "hklab/kernel.hpp"
#include "hklab/space.hpp"

namespace hklab {

using Json = nlohmann::ordered_json;

/// Experiment configuration: one structured JSON file holds every knob, so
/// a run is reproducible from the file plus the seed alone. Environment
/// variables may override only the output root (HKLAB_OUT) and the thread
/// count (HKLAB_THREADS).
///
/// Schema (see README.md for the full reference):
///   seed, threads, output_dir, pair_budget_points
///   spaces:    [{name, kind: box-grid|gasket, dim, n_per_side, halfwidth | level}]
///   kernels:   [{name, space, variant: spectral|gaussian, renormalization: number|"auto",
///                alpha, beta}]
///   profiles:  [{name, kind: stretched-exponential|polynomial|calibrated,
///                amplitude, rate, stretch | exponent}]
///   functions: [{name, family: bump|tent|coordinate|eigenfunction|random|harmonic|constant,
///                center, width, axis, index, corner_values, value}]
///   suites:    {space: [...], kernel: [...], energy: [...], moment: [...],
///               chain: [...], exponent: [...]}   (per-stage run lists)
class ExperimentConfig {
 public:
  Json raw;

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    ExperimentConfig cfg;
    try {
      in >> cfg.raw;
    } catch (const std::exception& e) {
      throw ConfigError("config: parse failure in '" + path + "': " + e.what());
    }
    return cfg;
  }

  static ExperimentConfig from_json(Json j) {
    ExperimentConfig cfg;
    cfg.raw = std::move(j);
    return cfg;
  }

  /// Applies a dotted-path override "a.b.c=value"; values parse as JSON
  /// when possible and fall back to strings.
  void apply_override(const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + kv + "': expected key=value");
    std::string path = kv.substr(0, eq), value = kv.substr(eq + 1);
    Json parsed;
    try {
      parsed = Json::parse(value);
    } catch (...) {
      parsed = value;
    }
    Json* node = &raw;
    std::size_t pos = 0;
    while (true) {
      auto dot = path.find('.', pos);
      std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
      if (dot == std::string::npos) {
        (*node)[key] = parsed;
        return;
      }
      node = &(*node)[key];
      pos = dot + 1;
    }
  }

  std::uint64_t seed() const { return raw.value("seed", std::uint64_t{1}); }
  unsigned threads() const { return raw.value("threads", 0u); }
  std::string output_dir() const { return raw.value("output_dir", std::string("out")); }
  std::size_t pair_budget_points() const {
    return raw.value("pair_budget_points", std::size_t{4096});
  }

  const Json& section(const char* name) const {
    static const Json empty = Json::array();
    auto it = raw.find(name);
    return it == raw.end() ? empty : *it;
  }
  Json suite(const char* name) const {
    auto it = raw.find("suites");
    if (it == raw.end()) return Json::array();
    auto jt = it->find(name);
    return jt == it->end() ? Json::array() : *jt;
  }

  const Json& find_named(const char* section_name, const std::string& name,
                         const std::string& where) const {
    for (const auto& item : section(section_name))
      if (item.value("name", "") == name) return item;
    throw ConfigError("config: " + where + " references unknown " + section_name + " entry '" +
                      name + "'");
  }
};

// ---------------------------------------------------------------------------
// Builders from config entries
// ---------------------------------------------------------------------------

namespace detail {
inline double require_number(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number())
    throw ConfigError("config: missing numeric field '" + std::string(key) + "' in " + where);
  return j[key].get<double>();
}
inline std::string require_string(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string())
    throw ConfigError("config: missing string field '" + std::string(key) + "' in " + where);
  return j[key].get<std::string>();
}
}  // namespace detail

inline std::shared_ptr<const MetricMeasureSpace> build_space_from(const Json& spec,
                                                                  std::size_t budget) {
  const std::string name = spec.value("name", "<unnamed>");
  const std::string kind = detail::require_string(spec, "kind", "space '" + name + "'");
  try {
    if (kind == "box-grid") {
      const int dim = static_cast<int>(detail::require_number(spec, "dim", name));
      const int n = static_cast<int>(detail::require_number(spec, "n_per_side", name));
      const double h = detail::require_number(spec, "halfwidth", name);
      return std::make_shared<const MetricMeasureSpace>(build_box_grid(dim, n, h, budget));
    }
    if (kind == "gasket") {
      const int level = static_cast<int>(detail::require_number(spec, "level", name));
      return std::make_shared<const MetricMeasureSpace>(build_gasket_graph(level, budget));
    }
  } catch (const BudgetError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: space '" + name + "': " + e.what());
  }
  throw ConfigError("config: space '" + name + "' has unknown kind '" + kind + "'");
}

/// Default renormalizations: second-difference scaling 1/spacing^2 on box
/// grids, the resistance scaling 5^L on the gasket.
inline double auto_renormalization(const MetricMeasureSpace& space) {
  if (space.kind() == SpaceKind::Gasket) {
    const int level = static_cast<int>(std::lround(-std::log2(space.resolution())));
    return std::pow(5.0, level);
  }
  return 1.0 / (space.resolution() * space.resolution());
}

inline HKParameters default_parameters(const MetricMeasureSpace& space) {
  if (space.kind() == SpaceKind::Gasket)
    return HKParameters(std::log(3.0) / std::log(2.0), std::log(5.0) / std::log(2.0));
  return HKParameters(static_cast<double>(space.dim()), 2.0);
}

inline HeatKernelModel build_kernel_from(const Json& spec,
                                         std::shared_ptr<const MetricMeasureSpace> space) {
  const std::string name = spec.value("name", "<unnamed>");
  const std::string variant = detail::require_string(spec, "variant", "kernel '" + name + "'");
  HKParameters params = default_parameters(*space);
  if (spec.contains("alpha")) params.alpha = spec["alpha"].get<double>();
  if (spec.contains("beta")) params.beta = spec["beta"].get<double>();
  try {
    if (variant == "gaussian") return HeatKernelModel::gaussian(space, params.alpha);
    if (variant == "spectral") {
      double renorm = auto_renormalization(*space);
      if (spec.contains("renormalization") && spec["renormalization"].is_number())
        renorm = spec["renormalization"].get<double>();
      return build_spectral_kernel(space, GeneratorKind::Combinatorial, renorm, params);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: kernel '" + name + "': " + e.what());
  }
  throw ConfigError("config: kernel '" + name + "' has unknown variant '" + variant + "'");
}

inline DecayProfile build_profile_from(const Json& spec) {
  const std::string name = spec.value("name", "<unnamed>");
  const std::string kind = detail::require_string(spec, "kind", "profile '" + name + "'");
  try {
    if (kind == "stretched-exponential")
      return DecayProfile::stretched_exponential(detail::require_number(spec, "amplitude", name),
                                                 detail::require_number(spec, "rate", name),
                                                 detail::require_number(spec, "stretch", name));
    if (kind == "polynomial")
      return DecayProfile::polynomial(detail::require_number(spec, "amplitude", name),
                                      detail::require_number(spec, "exponent", name));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: profile '" + name + "': " + e.what());
  }
  if (kind == "calibrated")
    throw ConfigError("config: profile '" + name +
                      "' is calibrated at run time and cannot be built directly");
  throw ConfigError("config: profile '" + name + "' has unknown kind '" + kind + "'");
}

inline GridFunction build_function_from(const Json& spec,
                                        std::shared_ptr<const MetricMeasureSpace> space,
                                        const HeatKernelModel* model, std::uint64_t seed) {
  const std::string name = spec.value("name", "<unnamed>");
  const std::string family = detail::require_string(spec, "family", "function '" + name + "'");
  auto center_of = [&](const Json& j) {
    std::vector<double> c(space->dim(), 0.0);
    if (j.contains("center")) c = j["center"].get<std::vector<double>>();
    if (static_cast<int>(c.size()) != space->dim())
      throw ConfigError("config: function '" + name + "': center dimension mismatch");
    return c;
  };
  try {
    if (family == "bump")
      return make_bump(space, center_of(spec), spec.value("width", 2.0), name);
    if (family == "tent")
      return make_tent(space, center_of(spec), spec.value("width", 2.0), name);
    if (family == "coordinate") return make_coordinate(space, spec.value("axis", 0), name);
    if (family == "constant") return make_constant(space, spec.value("value", 1.0), name);
    if (family == "random")
      return make_random(space, seed + std::hash<std::string>{}(name), name);
    if (family == "eigenfunction") {
      if (!model || model->variant() != KernelVariant::Spectral)
        throw ConfigError("config: function '" + name +
                          "' needs a spectral kernel for its eigenfunction");
      return make_eigenfunction(*model, spec.value("index", 1), name);
    }
    if (family == "harmonic") {
      std::vector<double> cv = {0.0, 1.0, 0.3};
      if (spec.contains("corner_values")) cv = spec["corner_values"].get<std::vector<double>>();
      if (cv.size() != 3)
        throw ConfigError("config: function '" + name + "': corner_values needs 3 entries");
      return make_gasket_harmonic(space, cv[0], cv[1], cv[2], name);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: function '" + name + "': " + e.what());
  }
  throw ConfigError("config: function '" + name + "' has unknown family '" + family + "'");
}

/// Geometric t grid between the model's resolution floor and t_max.
inline std::vector<double> default_t_grid(const HeatKernelModel& model, double t_max = 1.0,
                                          double ratio = 2.0) {
  std::vector<double> ts;
  for (double t = t_max; t >= model.t_min() * (1.0 - 1e-12); t /= ratio) ts.push_back(t);
  return ts;
}

/// Deepest dyadic scale whose balls still resolve: 2^-k >= 2 resolution.
inline int default_k_max(const MetricMeasureSpace& space) {
  const int k = static_cast<int>(
      std::floor(-std::log2(2.0 * space.resolution() * (1.0 - 1e-12))));
  require(k >= 1, "k_max: space too coarse for any dyadic scale below 1");
  return k;
}

/// Parses an explicit t grid (array) or builds the default one. Throws
/// ConfigError naming the offending entry when a value dips below the
/// resolution floor.
inline std::vector<double> t_grid_from(const Json& run, const HeatKernelModel& model,
                                       const std::string& where) {
  if (run.contains("t") && run["t"].is_array()) {
    std::vector<double> ts = run["t"].get<std::vector<double>>();
    for (double t : ts)
      if (t < model.t_min() * (1.0 - 1e-12))
        throw ConfigError("config: " + where + ": field 't' contains " + fmt_g17(t) +
                          " below the resolution floor t_min = " + fmt_g17(model.t_min()));
    return ts;
  }
  return default_t_grid(model, run.value("t_max", 1.0), run.value("t_ratio", 2.0));
}

}  // namespace hklab
