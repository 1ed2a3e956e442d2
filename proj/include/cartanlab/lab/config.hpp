#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cartanlab/grid_field.hpp"
#include "cartanlab/int_matrix.hpp"
#include "cartanlab/json_io.hpp"

namespace cartanlab::lab {

using Element = std::vector<std::int64_t>;

struct SolverConfig {
  int grid = 64;
  double tol = 1e-6;
  Interpolation interpolation = Interpolation::Cubic;
  int max_iterations = 400;
  /// 1-based generator the semiconjugacy is solved against.
  int generator = 1;
  std::size_t test_points = 10007;
};

struct AnalysisConfig {
  std::int64_t steps = 1000000;
  int trials = 16;
  std::int64_t burn_in = 1000;
  /// Empty means the unit vectors plus their sum.
  std::vector<Element> elements;
  std::int64_t chamber_steps = 100000;
  int chamber_trials = 4;
  int search_radius = 5;
  int leaves = 10;
  double leaf_radius = 0.1;
  double leaf_step = 1e-3;
  int stable_iterations = 60;
  /// Sample offset (in leaf steps) of the second chart in the affinity check.
  int affinity_offset = 30;
  double affinity_spacing = 0.01;
  int fiber_targets = 20;
  double fiber_delta = 1e-3;
  std::size_t density_samples = 1000000;
  std::size_t surjectivity_samples = 100000;
  bool determinism_check = true;
};

struct Tolerances {
  double exponent = 1e-3;
  double exponent_sum = 1e-3;
  double pesin = 2e-3;
  double oracle = 5e-5;
  double equivariance = 1e-5;
  double chart = 1e-6;
  double affinity = 1e-5;
  double slope = 1e-6;
  double tail = 1e-10;
  double leaf_factor = 10.0;
  /// Lower bound used for the solver residual in "k x residual" checks,
  /// since an exact solve (epsilon = 0) has residual zero.
  double residual_floor = 1e-13;
};

struct ExperimentConfig {
  std::string preset;
  std::vector<IntMatrix> generators;
  int box_radius = 3;
  /// "conjugated" (phi o A o phi^{-1}) or "single-map" (A + eps v for the
  /// solver generator only).
  std::string family = "conjugated";
  double epsilon = 0.0;
  /// Displacement modes as JSON; absent means the default cyclic sine field.
  std::optional<Json> modes;
  SolverConfig solver;
  AnalysisConfig analysis;
  Tolerances tolerances;
  std::optional<std::uint64_t> seed;
  std::string out = "cartanlab-out";

  int rank() const { return static_cast<int>(generators.size()); }
  int dim() const { return generators.empty() ? 0 : generators.front().size(); }

  std::vector<Element> elements() const {
    if (!analysis.elements.empty()) return analysis.elements;
    std::vector<Element> out;
    Element all(rank(), 1);
    for (int j = 0; j < rank(); ++j) {
      Element e(rank(), 0);
      e[j] = 1;
      out.push_back(e);
    }
    out.push_back(all);
    return out;
  }

  std::uint64_t require_seed(const std::string& what) const {
    require(seed.has_value(), ErrorCode::Config, what + " is stochastic and needs a seed (config \"seed\" or --seed)");
    return *seed;
  }
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"cubic-2cos-pi-9"};
  return names;
}

/// Named starting configurations.
inline ExperimentConfig preset(const std::string& name) {
  if (name == "cubic-2cos-pi-9") {
    ExperimentConfig c;
    c.preset = name;
    IntMatrix cm{{0, 1, 0}, {0, 0, 1}, {1, 3, 0}};
    c.generators = {cm, cm * cm - IntMatrix::identity(3).scaled(2)};
    c.epsilon = 0.05;
    return c;
  }
  std::string list;
  for (const auto& n : preset_names()) list += (list.empty() ? "" : ", ") + n;
  throw LabError(ErrorCode::Config, "unknown preset '" + name + "'; known presets: " + list);
}

/// Built-in defaults: the first preset.
inline ExperimentConfig default_config() { return preset(preset_names().front()); }

namespace detail {

inline void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  require(j.is_object(), ErrorCode::Config, where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    require(ok.count(item.key()) > 0, ErrorCode::Config, "unknown key '" + item.key() + "' in " + where);
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw LabError(ErrorCode::Config, where + "." + key + " has the wrong type");
  }
}

inline void read_positive(const Json& j, const char* key, double& out, const std::string& where) {
  read(j, key, out, where);
  require(out > 0.0, ErrorCode::Config, where + "." + key + " must be positive");
}

template <class I>
void read_count(const Json& j, const char* key, I& out, const std::string& where, I minimum = 1) {
  if (!j.contains(key)) return;
  require(j.at(key).is_number_integer(), ErrorCode::Config, where + "." + key + " must be an integer");
  auto v = j.at(key).get<std::int64_t>();
  require(v >= static_cast<std::int64_t>(minimum), ErrorCode::Config,
          where + "." + key + " must be at least " + std::to_string(minimum));
  out = static_cast<I>(v);
}

}  // namespace detail

/// Applies a JSON document on top of `base`. Unknown keys anywhere are
/// rejected with a Config error.
inline ExperimentConfig apply_config(ExperimentConfig c, const Json& j) {
  using detail::read;
  using detail::read_count;
  using detail::read_positive;
  detail::check_keys(j, "config", {"preset", "action", "perturbation", "solver", "analysis", "tolerances", "seed", "out"});
  if (j.contains("preset")) {
    std::string name;
    read(j, "preset", name, "config");
    auto p = preset(name);
    c.preset = p.preset;
    c.generators = p.generators;
    c.family = p.family;
    c.epsilon = p.epsilon;
    c.modes.reset();
  }
  if (j.contains("action")) {
    const Json& a = j.at("action");
    detail::check_keys(a, "action", {"generators", "box_radius"});
    if (a.contains("generators")) {
      std::vector<std::vector<std::vector<std::int64_t>>> gens;
      read(a, "generators", gens, "action");
      auto before = c.generators;
      c.generators.clear();
      for (const auto& g : gens) {
        require(!g.empty(), ErrorCode::Config, "action.generators holds an empty matrix");
        for (const auto& row : g)
          require(row.size() == g.size(), ErrorCode::Config, "action.generators must hold square matrices");
        c.generators.push_back(IntMatrix::from_rows(g));
      }
      // explicit matrices identical to the preset keep its name
      if (c.generators != before) c.preset.clear();
    }
    read_count(a, "box_radius", c.box_radius, "action");
  }
  if (j.contains("perturbation")) {
    const Json& p = j.at("perturbation");
    detail::check_keys(p, "perturbation", {"family", "epsilon", "modes"});
    read(p, "family", c.family, "perturbation");
    require(c.family == "conjugated" || c.family == "single-map", ErrorCode::Config,
            "perturbation.family must be 'conjugated' or 'single-map'");
    read(p, "epsilon", c.epsilon, "perturbation");
    require(c.epsilon >= 0.0, ErrorCode::Config, "perturbation.epsilon must be >= 0");
    if (p.contains("modes")) {
      require(p.at("modes").is_array(), ErrorCode::Config, "perturbation.modes must be an array");
      c.modes = p.at("modes");
    }
  }
  if (j.contains("solver")) {
    const Json& s = j.at("solver");
    const std::string w = "solver";
    detail::check_keys(s, w, {"grid", "tol", "interpolation", "max_iterations", "generator", "test_points"});
    read_count(s, "grid", c.solver.grid, w, 4);
    read_positive(s, "tol", c.solver.tol, w);
    if (s.contains("interpolation")) {
      std::string name;
      read(s, "interpolation", name, w);
      c.solver.interpolation = interpolation_from_string(name);
    }
    read_count(s, "max_iterations", c.solver.max_iterations, w);
    read_count(s, "generator", c.solver.generator, w);
    read_count(s, "test_points", c.solver.test_points, w);
  }
  if (j.contains("analysis")) {
    const Json& a = j.at("analysis");
    const std::string w = "analysis";
    detail::check_keys(a, w,
                       {"steps", "trials", "burn_in", "elements", "chamber_steps", "chamber_trials", "search_radius", "leaves",
                        "leaf_radius", "leaf_step", "stable_iterations", "affinity_offset", "affinity_spacing",
                        "fiber_targets", "fiber_delta", "density_samples", "surjectivity_samples", "determinism_check"});
    auto& an = c.analysis;
    read_count(a, "steps", an.steps, w);
    read_count(a, "trials", an.trials, w);
    read_count(a, "burn_in", an.burn_in, w, std::int64_t{0});
    read(a, "elements", an.elements, w);
    read_count(a, "chamber_steps", an.chamber_steps, w);
    read_count(a, "chamber_trials", an.chamber_trials, w);
    read_count(a, "search_radius", an.search_radius, w);
    read_count(a, "leaves", an.leaves, w, 0);
    read_positive(a, "leaf_radius", an.leaf_radius, w);
    read_positive(a, "leaf_step", an.leaf_step, w);
    read_count(a, "stable_iterations", an.stable_iterations, w, 6);
    read_count(a, "affinity_offset", an.affinity_offset, w);
    read_positive(a, "affinity_spacing", an.affinity_spacing, w);
    read_count(a, "fiber_targets", an.fiber_targets, w, 0);
    read_positive(a, "fiber_delta", an.fiber_delta, w);
    read_count(a, "density_samples", an.density_samples, w, std::size_t{0});
    read_count(a, "surjectivity_samples", an.surjectivity_samples, w, std::size_t{0});
    read(a, "determinism_check", an.determinism_check, w);
  }
  if (j.contains("tolerances")) {
    const Json& t = j.at("tolerances");
    const std::string w = "tolerances";
    detail::check_keys(t, w,
                       {"exponent", "exponent_sum", "pesin", "oracle", "equivariance", "chart", "affinity", "slope", "tail",
                        "leaf_factor", "residual_floor"});
    auto& tl = c.tolerances;
    read_positive(t, "exponent", tl.exponent, w);
    read_positive(t, "exponent_sum", tl.exponent_sum, w);
    read_positive(t, "pesin", tl.pesin, w);
    read_positive(t, "oracle", tl.oracle, w);
    read_positive(t, "equivariance", tl.equivariance, w);
    read_positive(t, "chart", tl.chart, w);
    read_positive(t, "affinity", tl.affinity, w);
    read_positive(t, "slope", tl.slope, w);
    read_positive(t, "tail", tl.tail, w);
    read_positive(t, "leaf_factor", tl.leaf_factor, w);
    read_positive(t, "residual_floor", tl.residual_floor, w);
  }
  if (j.contains("seed")) {
    require(j.at("seed").is_number_unsigned(), ErrorCode::Config, "seed must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  read(j, "out", c.out, "config");
  return c;
}

/// Checks cross-field consistency after all sources are merged.
inline void validate(const ExperimentConfig& c) {
  require(c.rank() >= 2, ErrorCode::Config, "the action needs at least 2 generators");
  require(c.dim() == c.rank() + 1, ErrorCode::Config, "generators must be (k+1)x(k+1) for k generators");
  for (const auto& g : c.generators) require(g.size() == c.dim(), ErrorCode::Config, "generators differ in size");
  require(c.dim() == 3 || c.dim() == 4, ErrorCode::Config, "supported torus dimensions are 3 and 4");
  require(c.solver.generator >= 1 && c.solver.generator <= c.rank(), ErrorCode::Config, "solver.generator out of range");
  for (const auto& e : c.analysis.elements)
    require(static_cast<int>(e.size()) == c.rank(), ErrorCode::Config, "analysis.elements entries need k components");
  require(c.analysis.leaf_step <= c.analysis.leaf_radius, ErrorCode::Config, "leaf_step must not exceed leaf_radius");
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  if (!c.preset.empty()) j["preset"] = c.preset;
  Json gens = Json::array();
  for (const auto& g : c.generators) gens.push_back(g.rows());
  j["action"] = Json{{"generators", gens}, {"box_radius", c.box_radius}};
  Json pert{{"family", c.family}, {"epsilon", c.epsilon}};
  if (c.modes) pert["modes"] = *c.modes;
  j["perturbation"] = pert;
  j["solver"] = Json{{"grid", c.solver.grid},
                     {"tol", c.solver.tol},
                     {"interpolation", to_string(c.solver.interpolation)},
                     {"max_iterations", c.solver.max_iterations},
                     {"generator", c.solver.generator},
                     {"test_points", c.solver.test_points}};
  const auto& a = c.analysis;
  j["analysis"] = Json{{"steps", a.steps},
                       {"trials", a.trials},
                       {"burn_in", a.burn_in},
                       {"elements", c.elements()},
                       {"chamber_steps", a.chamber_steps},
                       {"chamber_trials", a.chamber_trials},
                       {"search_radius", a.search_radius},
                       {"leaves", a.leaves},
                       {"leaf_radius", a.leaf_radius},
                       {"leaf_step", a.leaf_step},
                       {"stable_iterations", a.stable_iterations},
                       {"affinity_offset", a.affinity_offset},
                       {"affinity_spacing", a.affinity_spacing},
                       {"fiber_targets", a.fiber_targets},
                       {"fiber_delta", a.fiber_delta},
                       {"density_samples", a.density_samples},
                       {"surjectivity_samples", a.surjectivity_samples},
                       {"determinism_check", a.determinism_check}};
  const auto& t = c.tolerances;
  j["tolerances"] = Json{{"exponent", t.exponent},         {"exponent_sum", t.exponent_sum}, {"pesin", t.pesin},
                         {"oracle", t.oracle},             {"equivariance", t.equivariance}, {"chart", t.chart},
                         {"affinity", t.affinity},         {"slope", t.slope},               {"tail", t.tail},
                         {"leaf_factor", t.leaf_factor}, {"residual_floor", t.residual_floor}};
  if (c.seed) j["seed"] = *c.seed;
  j["out"] = c.out;
  return j;
}

/// Defaults < file < command-line flags.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

inline ExperimentConfig load_config(const std::string& path, const Overrides& flags) {
  ExperimentConfig c = apply_config(default_config(), parse_json(read_text_file(path), path));
  if (flags.seed) c.seed = flags.seed;
  if (flags.out) c.out = *flags.out;
  validate(c);
  return c;
}

}  // namespace cartanlab::lab
