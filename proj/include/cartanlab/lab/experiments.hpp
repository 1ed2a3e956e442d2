#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cartanlab/cartanlab.hpp"
#include "cartanlab/lab/artifacts.hpp"
#include "cartanlab/lab/config.hpp"

namespace cartanlab::lab {

/// One PASS/FAIL line. Acceptance criteria carry their number in `criterion`.
struct Check {
  int criterion = 0;
  std::string name;
  bool pass = false;
  std::string detail;

  std::string line() const {
    std::string s = pass ? "PASS" : "FAIL";
    s += criterion > 0 ? " criterion " + std::to_string(criterion) + " " + name : " " + name;
    if (!detail.empty()) s += ": " + detail;
    return s;
  }
};

struct RunResult {
  std::string subcommand;
  Json results = Json::object();
  std::vector<Check> checks;
  Artifacts artifacts;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  std::vector<std::string> failing() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (!c.pass) out.push_back(c.criterion > 0 ? "criterion " + std::to_string(c.criterion) + " " + c.name : c.name);
    return out;
  }
};

// Random streams, one per kind of work, so adding work of one kind does not
// shift the draws of another.
inline constexpr std::uint64_t kStreamExponents = 100;
inline constexpr std::uint64_t kStreamChambers = 200;
inline constexpr std::uint64_t kStreamLeaves = 300;
inline constexpr std::uint64_t kStreamFiber = 400;

template <int Dim>
struct Context {
  ExperimentConfig cfg;
  CartanAction action;
  std::optional<PerturbedAction<Dim>> alpha;

  explicit Context(ExperimentConfig c) : cfg(std::move(c)), action(build_cartan_action(cfg.generators, cfg.box_radius)) {}

  TrigField<Dim> field() const { return cfg.modes ? trig_field_from_json<Dim>(*cfg.modes) : cyclic_sine_field<Dim>(); }

  bool conjugated() const { return cfg.family == "conjugated"; }

  const PerturbedAction<Dim>& perturbed() {
    if (!alpha) {
      if (conjugated()) {
        alpha = make_conjugated_action(TorusDiffeo<Dim>(field(), cfg.epsilon), action);
      } else {
        alpha = PerturbedAction<Dim>::single_map(action.generators()[cfg.solver.generator - 1], field(), cfg.epsilon);
      }
    }
    return *alpha;
  }

  /// Generator index inside `perturbed()` that the solver targets.
  int solver_generator() const { return conjugated() ? cfg.solver.generator - 1 : 0; }

  void require_conjugated(const std::string& what) const {
    require(conjugated(), ErrorCode::Config, what + " needs perturbation.family = \"conjugated\"");
  }

  Vec<Dim> sample_point(std::uint64_t stream, std::uint64_t index) {
    Rng rng(sub_seed(cfg.require_seed("sampling"), stream, index));
    Vec<Dim> u;
    for (int i = 0; i < Dim; ++i) u[i] = rng.uniform();
    return perturbed().sample_from_uniform(u);
  }
};

inline Json element_json(const Element& m) { return Json(m); }

template <int Dim>
Json vec_json(const Vec<Dim>& v) {
  Json a = Json::array();
  for (int i = 0; i < Dim; ++i) a.push_back(v[i]);
  return a;
}

/// Linear Lyapunov values of m for the action in `ctx`, in functional order.
/// For a single map the functionals are n log|lambda_i| of the solver generator.
template <int Dim>
std::vector<double> linear_values(const Context<Dim>& ctx, const Element& m) {
  std::vector<double> out;
  if (ctx.conjugated()) {
    Eigen::VectorXd v = ctx.action.spectrum().values(to_real(m));
    out.assign(v.data(), v.data() + v.size());
  } else {
    auto es = eigenstructure(ctx.action.generators()[ctx.cfg.solver.generator - 1]);
    for (double l : es.values) out.push_back(static_cast<double>(m.at(0)) * std::log(std::abs(l)));
  }
  return out;
}

/// For each functional i, the rank of its linear value in descending order,
/// which is the slot of the matching sorted estimate.
inline std::vector<int> descending_ranks(const std::vector<double>& linear) {
  std::vector<int> order(linear.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return linear[a] > linear[b]; });
  std::vector<int> rank(linear.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);
  return rank;
}

inline Json base_run_json(const std::string& sub, const ExperimentConfig& cfg) {
  return Json{{"subcommand", sub}, {"config", to_json(cfg)}};
}

inline void finish(RunResult& r, const ExperimentConfig& cfg) {
  Json j = base_run_json(r.subcommand, cfg);
  j["results"] = r.results;
  Json checks = Json::array();
  for (const auto& c : r.checks) {
    Json row;
    if (c.criterion > 0) row["criterion"] = c.criterion;
    row["name"] = c.name;
    row["status"] = c.pass ? "PASS" : "FAIL";
    row["detail"] = c.detail;
    checks.push_back(row);
  }
  j["checks"] = checks;
  j["status"] = r.ok() ? "PASS" : "FAIL";
  r.artifacts.add_json("run.json", j);
}

/// Runs `body`, turning numerical LabErrors into a failed check. Config
/// errors propagate (they are the caller's fault, not a numerical outcome).
template <class F>
Check guarded(int criterion, const std::string& name, F&& body) {
  try {
    return body();
  } catch (const LabError& e) {
    if (e.code() == ErrorCode::Config || e.code() == ErrorCode::Io) throw;
    return Check{criterion, name, false, std::string(to_string(e.code())) + ": " + e.what()};
  }
}

// ---------------------------------------------------------------- gen-action

template <int Dim>
void run_gen_action(Context<Dim>& ctx, RunResult& r) {
  Json gens = Json::array();
  for (std::size_t j = 0; j < ctx.action.generators().size(); ++j) {
    const auto& g = ctx.action.generators()[j];
    auto es = eigenstructure(g);
    gens.push_back(Json{{"index", j + 1},
                        {"det", g.det()},
                        {"characteristic_polynomial", characteristic_polynomial(g.matrix())},
                        {"eigenvalues", es.values}});
  }
  Json basis = Json::array();
  for (int i = 0; i < ctx.action.eigenbasis().cols(); ++i) {
    Json col = Json::array();
    for (int q = 0; q < ctx.action.eigenbasis().rows(); ++q) col.push_back(ctx.action.eigenbasis()(q, i));
    basis.push_back(col);
  }
  r.results["action"] = to_json(ctx.action);
  r.results["generators"] = gens;
  r.results["eigenbasis"] = basis;
  r.artifacts.add_json("action.json", to_json(ctx.action));
}

// ---------------------------------------------------------------------- weyl

template <int Dim>
ChamberArrangement chambers(const Context<Dim>& ctx) {
  return enumerate_chambers(ctx.action.spectrum(), ctx.cfg.analysis.search_radius);
}

template <int Dim>
Check check_chamber_count(const Context<Dim>& ctx, const ChamberArrangement& arr) {
  const std::size_t n = ctx.action.dim();
  const std::size_t expected = (std::size_t{1} << n) - 2;
  SignPattern all_plus{std::vector<int>(n, 1)}, all_minus{std::vector<int>(n, -1)};
  bool ok = arr.chambers.size() == expected && !arr.find(all_plus) && !arr.find(all_minus);
  for (const auto& c : arr.chambers) {
    auto p = sign_pattern(ctx.action.spectrum(), to_real(c.representative));
    ok = ok && p && *p == c.pattern;
  }
  return Check{1, "weyl-chamber-count", ok,
               std::to_string(arr.chambers.size()) + " chambers (expected " + std::to_string(expected) +
                   "), all-plus and all-minus " + (arr.find(all_plus) || arr.find(all_minus) ? "present" : "absent")};
}

template <int Dim>
Check check_property_c(const Context<Dim>& ctx, const ChamberArrangement& arr, Json* out) {
  auto w = property_c_witnesses(arr);
  bool ok = true;
  std::string detail;
  Json js = Json::array();
  for (std::size_t i = 0; i < w.size(); ++i) {
    Eigen::VectorXd v = ctx.action.spectrum().values(to_real(w[i]));
    for (Eigen::Index q = 0; q < v.size(); ++q) ok = ok && (static_cast<std::size_t>(q) == i ? v[q] < 0 : v[q] > 0);
    std::string ms;
    for (auto x : w[i]) ms += (ms.empty() ? "" : ",") + std::to_string(x);
    detail += (detail.empty() ? "" : " ") + ("i" + std::to_string(i + 1) + "->(" + ms + ")");
    js.push_back(Json{{"i", i + 1}, {"m", w[i]}});
  }
  if (out) *out = js;
  return Check{2, "property-c", ok, detail};
}

template <int Dim>
void run_weyl(Context<Dim>& ctx, RunResult& r) {
  ChamberArrangement arr;
  r.checks.push_back(guarded(1, "weyl-chamber-count", [&] {
    arr = chambers(ctx);
    return check_chamber_count(ctx, arr);
  }));
  if (!r.checks.back().pass && arr.chambers.empty()) return;
  Json witnesses;
  r.checks.push_back(guarded(2, "property-c", [&] { return check_property_c(ctx, arr, &witnesses); }));
  Json ch = to_json(arr);
  ch["count"] = arr.chambers.size();
  r.artifacts.add_json("chambers.json", ch);
  r.results["chamber_count"] = arr.chambers.size();
  r.results["witnesses"] = witnesses;
  Json zs = Json::array();
  try {
    for (const auto& t : zero_sum_chamber_elements(arr)) zs.push_back(std::vector<double>(t.data(), t.data() + t.size()));
    r.results["zero_sum_elements"] = zs;
  } catch (const LabError& e) {
    r.checks.push_back(Check{0, "zero-sum-elements", false, e.what()});
  }
}

// ------------------------------------------------------------------- perturb

template <int Dim>
void run_perturb(Context<Dim>& ctx, RunResult& r) {
  const auto& alpha = ctx.perturbed();
  KroneckerSequence seq(Dim);
  const std::size_t n = 100;
  double comm = 0.0, homotopy = 0.0, min_det = std::numeric_limits<double>::infinity(), round_trip = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    Vec<Dim> x;
    for (int i = 0; i < Dim; ++i) x[i] = seq.coord(s, i);
    for (int j = 0; j < alpha.rank(); ++j) {
      auto st = alpha.generator_step(j, 1, x);
      // det Df carries the sign of det A when f is homotopic to A
      const double sign = alpha.linear_generator(j).det() > 0 ? 1.0 : -1.0;
      min_det = std::min(min_det, sign * st.jacobian.determinant());
      Vec<Dim> back = alpha.generator_lift(j, -1, st.point);
      round_trip = std::max(round_trip, (back - x).norm());
      for (int a = 0; a < Dim; ++a) {
        Vec<Dim> e = Vec<Dim>::Zero();
        e[a] = 1.0;
        Vec<Dim> d = alpha.generator_lift(j, 1, x + e) - alpha.generator_lift(j, 1, x) - alpha.linear_matrix(j) * e;
        homotopy = std::max(homotopy, d.norm());
      }
      for (int q = j + 1; q < alpha.rank(); ++q) {
        Vec<Dim> ab = alpha.eval(std::vector<Letter>{{q, 1}, {j, 1}}, x);
        Vec<Dim> ba = alpha.eval(std::vector<Letter>{{j, 1}, {q, 1}}, x);
        comm = std::max(comm, wrap_displacement<Dim>(ab - ba).norm());
      }
    }
  }
  r.results["family"] = ctx.cfg.family;
  r.results["homotopy_residual"] = homotopy;
  r.results["inverse_round_trip"] = round_trip;
  r.results["min_orientation_det"] = min_det;
  r.checks.push_back(Check{0, "homotopy-class", homotopy < 1e-12, "sup |f(x+e)-f(x)-Ae| = " + sci(homotopy)});
  r.checks.push_back(Check{0, "inverse-round-trip", round_trip < 1e-12, "sup |f^-1 f x - x| = " + sci(round_trip)});
  if (ctx.conjugated()) {
    TorusDiffeo<Dim> phi = alpha.phi();
    r.results["diffeo"] = to_json(phi);
    r.results["derivative_bound"] = phi.derivative_bound();
    r.results["margin"] = phi.margin();
    r.results["commutation_residual"] = comm;
    r.checks.push_back(Check{0, "commutation", comm < 1e-10, "sup |f1 f2 x - f2 f1 x| = " + sci(comm)});
    r.checks.push_back(Check{0, "orientation", min_det > 0, "min det Df = " + sci(min_det)});
    if (ctx.cfg.analysis.density_samples > 0) {
      auto d = invariant_density_check(alpha, ctx.cfg.analysis.density_samples);
      r.results["density"] = Json{{"samples", d.samples}, {"transfer_residual", d.transfer_residual}, {"integral", d.integral}};
      r.checks.push_back(Check{0, "density-transfer", d.transfer_residual < 1e-9, "max residual " + sci(d.transfer_residual)});
      r.checks.push_back(
          Check{0, "density-integral", std::abs(d.integral - 1.0) < 1e-4, "|int g - 1| = " + sci(std::abs(d.integral - 1.0))});
    }
  } else {
    r.results["epsilon"] = ctx.cfg.epsilon;
    r.results["modes"] = to_json(ctx.field());
  }
}

// ------------------------------------------------------------------ semiconj

template <int Dim>
struct SemiconjOutcome {
  std::optional<SemiconjugacyField<Dim>> field;
  Check check;
};

template <int Dim>
SemiconjOutcome<Dim> solve_semiconjugacy(Context<Dim>& ctx, RunResult& r) {
  const auto& alpha = ctx.perturbed();
  FranksOptions opt;
  opt.grid = ctx.cfg.solver.grid;
  opt.tol = ctx.cfg.solver.tol;
  opt.interpolation = ctx.cfg.solver.interpolation;
  opt.max_iterations = ctx.cfg.solver.max_iterations;
  opt.test_points = ctx.cfg.solver.test_points;
  const int gen = ctx.solver_generator();
  SemiconjOutcome<Dim> out;
  out.check = guarded(3, "franks-solver", [&] {
    auto h = solve_franks(alpha, gen, opt);
    auto es = eigenstructure(alpha.linear_generator(gen));
    double bound = 0.0;
    for (double l : es.values) bound = std::max(bound, std::abs(l) > 1 ? 1.0 / std::abs(l) : std::abs(l));
    auto eq = check_equivariance(h, alpha, opt.test_points);
    Json sc{{"generator", gen + 1},
            {"grid", opt.grid},
            {"interpolation", to_string(opt.interpolation)},
            {"tol", opt.tol},
            {"residual", h.residual},
            {"iterations", h.iterations},
            {"contraction_rate", h.contraction_rate},
            {"contraction_bound", bound},
            {"equivariance", eq}};
    bool ok = h.residual < opt.tol && h.contraction_rate <= bound + 0.05;
    std::string detail = "residual " + sci(h.residual) + ", rate " + sci(h.contraction_rate, 3);
    if (ctx.conjugated()) {
      double dist = oracle_distance(h, alpha, opt.test_points);
      sc["oracle_distance"] = dist;
      ok = ok && dist < ctx.cfg.tolerances.oracle;
      detail += ", oracle distance " + sci(dist);
      for (std::size_t j = 0; j < eq.size(); ++j)
        if (static_cast<int>(j) != gen) {
          ok = ok && eq[j] < ctx.cfg.tolerances.equivariance;
          detail += ", generator " + std::to_string(j + 1) + " equivariance " + sci(eq[j]);
        }
    }
    if (ctx.cfg.analysis.surjectivity_samples > 0)
      sc["surjectivity"] = surjectivity_diagnostic(h, ctx.cfg.analysis.surjectivity_samples);
    Json prov{{"subcommand", r.subcommand}, {"preset", ctx.cfg.preset}, {"family", ctx.cfg.family},
              {"epsilon", ctx.cfg.epsilon}};
    r.artifacts.add("semiconj.bin", encode_field(h));
    r.artifacts.add_json("semiconj.json", field_sidecar(h, opt, prov));
    r.results["semiconjugacy"] = sc;
    out.field = std::move(h);
    return Check{3, "franks-solver", ok, detail};
  });
  return out;
}

template <int Dim>
void run_semiconj(Context<Dim>& ctx, RunResult& r) {
  auto s = solve_semiconjugacy(ctx, r);
  r.checks.push_back(s.check);
}

// ------------------------------------------------------------------ lyapunov

template <int Dim>
struct ExponentRow {
  Element m;
  std::vector<double> estimate, stderr_, linear;  // functional order
};

template <int Dim>
ExponentRow<Dim> exponent_row(Context<Dim>& ctx, const Element& m, std::int64_t steps, int trials, std::uint64_t stream) {
  ExponentOptions o;
  o.steps = steps;
  o.trials = trials;
  o.burn_in = ctx.cfg.analysis.burn_in;
  o.seed = ctx.cfg.require_seed("exponent estimation");
  o.stream = stream;
  auto est = estimate_exponents(ctx.perturbed(), m, o);
  ExponentRow<Dim> row;
  row.m = m;
  row.linear = linear_values(ctx, m);
  auto rank = descending_ranks(row.linear);
  for (int i = 0; i < Dim; ++i) {
    row.estimate.push_back(est.mean[rank[i]]);
    row.stderr_.push_back(est.stderr_[rank[i]]);
  }
  return row;
}

template <int Dim>
std::string exponents_csv(const std::vector<ExponentRow<Dim>>& rows, int k) {
  std::vector<std::string> header;
  for (int j = 0; j < k; ++j) header.push_back("m" + std::to_string(j + 1));
  for (const char* h : {"i", "estimate", "stderr", "linear_value"}) header.push_back(h);
  CsvWriter csv(header);
  for (const auto& r : rows)
    for (int i = 0; i < Dim; ++i) {
      std::vector<std::string> cells;
      for (auto v : r.m) cells.push_back(std::to_string(v));
      cells.push_back(std::to_string(i + 1));
      cells.push_back(fmt(r.estimate[i]));
      cells.push_back(fmt(r.stderr_[i]));
      cells.push_back(fmt(r.linear[i]));
      csv.row_strings(cells);
    }
  return csv.str();
}

template <int Dim>
Check check_exponent_rigidity(const std::vector<ExponentRow<Dim>>& rows, const Tolerances& tol) {
  double worst = 0.0, worst_sum = 0.0;
  bool within_stderr = true;
  for (const auto& r : rows) {
    double s = 0.0;
    for (int i = 0; i < Dim; ++i) {
      double d = std::abs(r.estimate[i] - r.linear[i]);
      worst = std::max(worst, d);
      within_stderr = within_stderr && d <= std::max(3.0 * r.stderr_[i], 1e-12) + 1e-7;
      s += r.estimate[i];
    }
    worst_sum = std::max(worst_sum, std::abs(s));
  }
  bool ok = worst < tol.exponent && worst_sum < tol.exponent_sum;
  return Check{4, "exponent-rigidity", ok,
               "max |estimate - linear| " + sci(worst) + ", max |sum| " + sci(worst_sum) +
                   (within_stderr ? ", within 3 stderr" : ", outside 3 stderr on some row")};
}

template <int Dim>
Check check_pesin(const Context<Dim>& ctx, const std::vector<ExponentRow<Dim>>& rows, Json* out) {
  const double tol = ctx.cfg.tolerances.pesin;
  double worst_gap = 0.0, worst_deficit = 0.0;
  Json js = Json::array();
  for (const auto& r : rows) {
    auto p = pesin_sums(r.estimate, ctx.action.spectrum(), r.m);
    worst_gap = std::max(worst_gap, p.sum_gap());
    worst_deficit = std::max({worst_deficit, p.max_abs_log_eigenvalue - p.positive_sum,
                              p.max_abs_log_eigenvalue - p.negative_sum_abs});
    js.push_back(Json{{"m", r.m},
                      {"positive_sum", p.positive_sum},
                      {"negative_sum_abs", p.negative_sum_abs},
                      {"linear_positive_sum", p.linear_positive_sum},
                      {"linear_negative_sum_abs", p.linear_negative_sum_abs},
                      {"max_abs_log_eigenvalue", p.max_abs_log_eigenvalue}});
  }
  if (out) *out = js;
  // For k = 2 the entropy bound is attained by the linear spectrum, so
  // dominance is tested up to the same estimation slack as the sum gap.
  bool ok = worst_gap < tol && worst_deficit < tol;
  return Check{6, "pesin-sums", ok, "max |pos - |neg|| " + sci(worst_gap) + ", max bound deficit " + sci(worst_deficit)};
}

template <int Dim>
void run_lyapunov(Context<Dim>& ctx, RunResult& r) {
  std::vector<Element> elems = ctx.conjugated() ? ctx.cfg.elements() : std::vector<Element>{{1}};
  std::vector<ExponentRow<Dim>> rows;
  for (std::size_t e = 0; e < elems.size(); ++e)
    rows.push_back(exponent_row(ctx, elems[e], ctx.cfg.analysis.steps, ctx.cfg.analysis.trials, kStreamExponents + e));
  r.artifacts.add("exponents.csv", exponents_csv(rows, static_cast<int>(elems.front().size())));
  if (!ctx.conjugated()) {
    r.results["diagnostic"] = "single-map orbits start from uniform points, which need not follow an invariant measure";
    return;
  }
  r.checks.push_back(check_exponent_rigidity(rows, ctx.cfg.tolerances));
  Json pesin;
  r.checks.push_back(check_pesin(ctx, rows, &pesin));
  r.results["pesin"] = pesin;
}

template <int Dim>
Check check_chamber_preservation(Context<Dim>& ctx, const ChamberArrangement& arr, Json* out) {
  int matched = 0;
  std::string bad;
  Json js = Json::array();
  for (std::size_t c = 0; c < arr.chambers.size(); ++c) {
    const auto& ch = arr.chambers[c];
    auto row = exponent_row(ctx, ch.representative, ctx.cfg.analysis.chamber_steps, ctx.cfg.analysis.chamber_trials,
                            kStreamChambers + c);
    SignPattern p;
    for (double v : row.estimate) p.signs.push_back(v > 0 ? 1 : -1);
    if (p == ch.pattern) ++matched;
    else bad += " " + ch.pattern.str() + "->" + p.str();
    js.push_back(Json{{"pattern", ch.pattern.str()}, {"representative", ch.representative}, {"estimated_pattern", p.str()},
                      {"estimate", row.estimate}});
  }
  if (out) *out = js;
  return Check{5, "chamber-preservation", matched == static_cast<int>(arr.chambers.size()),
               std::to_string(matched) + "/" + std::to_string(arr.chambers.size()) + " patterns match" + bad};
}

// ----------------------------------------------------------------- linearize

template <int Dim>
struct LeafStudy {
  std::vector<Leaf<Dim>> leaves;
  Json per_leaf = Json::array();
  std::string chart_csv;
};

/// The element whose leaves are studied: the property (C) witness for the
/// last functional (for the single map, the map itself).
template <int Dim>
Element leaf_element(const Context<Dim>& ctx) {
  if (!ctx.conjugated()) return {1};
  return property_c_witnesses(chambers(ctx)).back();
}

template <int Dim>
Check check_linearization(Context<Dim>& ctx, LeafStudy<Dim>& study) {
  const auto& an = ctx.cfg.analysis;
  const auto& tol = ctx.cfg.tolerances;
  StableLineField<Dim> field(ctx.perturbed(), leaf_element(ctx), an.stable_iterations);
  DensityOptions dopt;
  dopt.tail_tol = tol.tail;
  double worst_eq = 0.0, worst_aff = 0.0, worst_slope = 0.0, worst_rho_center = 0.0;
  bool stable_ok = true, positive = true;
  int flips = 0;
  for (int l = 0; l < an.leaves; ++l) {
    Vec<Dim> x = ctx.sample_point(kStreamLeaves, static_cast<std::uint64_t>(l));
    auto leaf = trace_leaf(field, x, an.leaf_radius, an.leaf_step);
    flips += leaf.flips;
    study.leaves.push_back(leaf);
    auto cx = linearization_chart(field, leaf, dopt);
    auto cfx = linearization_chart(field, trace_leaf(field, field.step(x).point, an.leaf_radius, an.leaf_step), dopt);
    std::size_t iy = std::min<std::size_t>(cx.leaf.center + an.affinity_offset, cx.leaf.size() - 1);
    auto cy = linearization_chart(field, trace_leaf(field, Vec<Dim>(cx.leaf.points[iy]), an.leaf_radius, an.leaf_step), dopt);
    auto eq = chart_equivariance(field, cx, cfx);
    auto af = affinity_check(cx, iy, cy, an.affinity_spacing);
    auto st = cutoff_stability(cx);
    worst_rho_center = std::max(worst_rho_center, std::abs(cx.rho[cx.leaf.center] - 1.0));
    for (double v : cx.rho) positive = positive && v > 0;
    worst_eq = std::max(worst_eq, eq.residual);
    worst_aff = std::max(worst_aff, af.max_second_difference);
    worst_slope = std::max(worst_slope, af.slope_error());
    stable_ok = stable_ok && st.ok();
    study.per_leaf.push_back(Json{{"center", vec_json<Dim>(x)},
                                  {"cutoff", cx.cutoff},
                                  {"tail_bound", cx.tail_bound},
                                  {"rate", cx.rate},
                                  {"rho_min", *std::min_element(cx.rho.begin(), cx.rho.end())},
                                  {"rho_max", *std::max_element(cx.rho.begin(), cx.rho.end())},
                                  {"chart_equivariance", eq.residual},
                                  {"leaf_invariance", eq.leaf_distance},
                                  {"second_difference", af.max_second_difference},
                                  {"slope", af.slope},
                                  {"product_slope", af.product_slope},
                                  {"cutoff_change", st.max_H_change},
                                  {"cutoff_allowed", st.allowed_H_change},
                                  {"flips", leaf.flips}});
    if (l == 0) {
      CsvWriter csv({"s", "rho", "H"});
      for (std::size_t i = 0; i < cx.leaf.size(); ++i) csv.row_strings({fmt(cx.leaf.arclength(i)), fmt(cx.rho[i]), fmt(cx.H[i])});
      study.chart_csv = csv.str();
    }
  }
  bool ok = worst_rho_center == 0.0 && positive && worst_eq < tol.chart && worst_aff < tol.affinity &&
            worst_slope < tol.slope && stable_ok;
  return Check{7, "linearization", ok,
               std::to_string(an.leaves) + " leaves: rho(x)-1 " + sci(worst_rho_center) + ", equivariance " + sci(worst_eq) +
                   ", second difference " + sci(worst_aff) + ", slope error " + sci(worst_slope) + ", cutoff stability " +
                   (stable_ok ? "ok" : "violated") + ", flips " + std::to_string(flips)};
}

template <int Dim>
void run_linearize(Context<Dim>& ctx, RunResult& r) {
  LeafStudy<Dim> study;
  r.checks.push_back(guarded(7, "linearization", [&] { return check_linearization(ctx, study); }));
  r.results["element"] = leaf_element(ctx);
  r.results["leaves"] = study.per_leaf;
  if (!study.chart_csv.empty()) r.artifacts.add("chart.csv", study.chart_csv);
}

// -------------------------------------------------------------------- verify

template <int Dim>
Check check_leaf_inclusion(Context<Dim>& ctx, const SemiconjugacyField<Dim>& h, const std::vector<Leaf<Dim>>& leaves) {
  StableLineField<Dim> field(ctx.perturbed(), leaf_element(ctx), ctx.cfg.analysis.stable_iterations);
  const double limit = ctx.cfg.tolerances.leaf_factor * std::max(h.residual, ctx.cfg.tolerances.residual_floor);
  double worst = 0.0;
  for (const auto& leaf : leaves) worst = std::max(worst, leaf_line_distance(h, leaf, field.linear_direction()));
  return Check{8, "leaf-semiconjugacy-inclusion", !leaves.empty() && worst < limit,
               std::to_string(leaves.size()) + " leaves, max distance to linear stable line " + sci(worst) + " (limit " +
                   sci(limit) + ")"};
}

template <int Dim>
Check check_fibers(Context<Dim>& ctx, const SemiconjugacyField<Dim>& h) {
  int ones = 0;
  std::string bad;
  const int n = ctx.cfg.analysis.fiber_targets;
  for (int t = 0; t < n; ++t) {
    Rng rng(sub_seed(ctx.cfg.require_seed("fiber sampling"), kStreamFiber, static_cast<std::uint64_t>(t)));
    Vec<Dim> y;
    for (int i = 0; i < Dim; ++i) y[i] = rng.uniform();
    int s = fiber_cardinality(h, TorusPoint<Dim>::reduce(y), ctx.cfg.analysis.fiber_delta);
    if (s == 1) ++ones;
    else bad += " target " + std::to_string(t) + " s=" + std::to_string(s);
  }
  return Check{9, "fiber-cardinality", ones == n,
               std::to_string(ones) + "/" + std::to_string(n) + " targets with s = 1 at delta " + sci(ctx.cfg.analysis.fiber_delta, 1) + bad};
}

/// Criteria 1 through 9; criterion 10 is added by run_verify.
template <int Dim>
void verify_core(Context<Dim>& ctx, RunResult& r) {
  ctx.require_conjugated("verify");
  ctx.cfg.require_seed("verify");
  ChamberArrangement arr;
  r.checks.push_back(guarded(1, "weyl-chamber-count", [&] {
    arr = chambers(ctx);
    return check_chamber_count(ctx, arr);
  }));
  Json witnesses;
  r.checks.push_back(guarded(2, "property-c", [&] { return check_property_c(ctx, arr, &witnesses); }));
  if (!arr.chambers.empty()) {
    Json ch = to_json(arr);
    ch["count"] = arr.chambers.size();
    r.artifacts.add_json("chambers.json", ch);
    r.results["chamber_count"] = arr.chambers.size();
    r.results["witnesses"] = witnesses;
  }

  auto sc = solve_semiconjugacy(ctx, r);
  r.checks.push_back(sc.check);

  std::vector<ExponentRow<Dim>> rows;
  r.checks.push_back(guarded(4, "exponent-rigidity", [&] {
    auto elems = ctx.cfg.elements();
    for (std::size_t e = 0; e < elems.size(); ++e)
      rows.push_back(exponent_row(ctx, elems[e], ctx.cfg.analysis.steps, ctx.cfg.analysis.trials, kStreamExponents + e));
    r.artifacts.add("exponents.csv", exponents_csv(rows, ctx.action.rank()));
    return check_exponent_rigidity(rows, ctx.cfg.tolerances);
  }));

  Json preserved;
  r.checks.push_back(guarded(5, "chamber-preservation", [&] {
    require(!arr.chambers.empty(), ErrorCode::MissingChamber, "no chambers enumerated");
    return check_chamber_preservation(ctx, arr, &preserved);
  }));
  r.results["chamber_exponents"] = preserved;

  Json pesin;
  r.checks.push_back(guarded(6, "pesin-sums", [&] {
    require(!rows.empty(), ErrorCode::NoConvergence, "no exponent estimates");
    return check_pesin(ctx, rows, &pesin);
  }));
  r.results["pesin"] = pesin;

  LeafStudy<Dim> study;
  r.checks.push_back(guarded(7, "linearization", [&] { return check_linearization(ctx, study); }));
  r.results["leaves"] = study.per_leaf;
  if (!study.chart_csv.empty()) r.artifacts.add("chart.csv", study.chart_csv);

  r.checks.push_back(guarded(8, "leaf-semiconjugacy-inclusion", [&] {
    require(sc.field.has_value(), ErrorCode::NoConvergence, "semiconjugacy unavailable");
    return check_leaf_inclusion(ctx, *sc.field, study.leaves);
  }));
  r.checks.push_back(guarded(9, "fiber-cardinality", [&] {
    require(sc.field.has_value(), ErrorCode::NoConvergence, "semiconjugacy unavailable");
    return check_fibers(ctx, *sc.field);
  }));
}

// ------------------------------------------------------------------ dispatch

template <int Dim>
RunResult run_dim(const std::string& sub, const ExperimentConfig& cfg) {
  Context<Dim> ctx(cfg);
  RunResult r;
  r.subcommand = sub;
  if (sub == "gen-action") run_gen_action(ctx, r);
  else if (sub == "weyl") run_weyl(ctx, r);
  else if (sub == "perturb") run_perturb(ctx, r);
  else if (sub == "semiconj") run_semiconj(ctx, r);
  else if (sub == "lyapunov") run_lyapunov(ctx, r);
  else if (sub == "linearize") run_linearize(ctx, r);
  else if (sub == "verify") verify_core(ctx, r);
  else throw LabError(ErrorCode::Config, "unknown subcommand '" + sub + "'");
  return r;
}

inline RunResult run_once(const std::string& sub, const ExperimentConfig& cfg) {
  validate(cfg);
  RunResult r = cfg.dim() == 3 ? run_dim<3>(sub, cfg) : run_dim<4>(sub, cfg);
  finish(r, cfg);
  return r;
}

/// Full acceptance suite. With determinism_check on, the suite runs a second
/// time with a different worker count and every artifact must match byte
/// for byte (criterion 10).
inline RunResult run_verify(const ExperimentConfig& cfg) {
  RunResult first = run_once("verify", cfg);
  if (!cfg.analysis.determinism_check) return first;
  unsigned before = thread_override();
  thread_override() = thread_count() == 1 ? 3 : 1;
  RunResult second;
  try {
    second = run_once("verify", cfg);
  } catch (...) {
    thread_override() = before;
    throw;
  }
  thread_override() = before;
  std::string differing;
  for (const auto& [name, bytes] : first.artifacts.files()) {
    auto it = second.artifacts.files().find(name);
    if (it == second.artifacts.files().end() || it->second != bytes) differing += " " + name;
  }
  if (second.artifacts.files().size() != first.artifacts.files().size()) differing += " (file sets differ)";
  first.checks.push_back(Check{10, "determinism", differing.empty(),
                               differing.empty() ? std::to_string(first.artifacts.files().size()) +
                                                       " artifacts byte-identical across a rerun with a different worker count"
                                                 : "differing:" + differing});
  finish(first, cfg);
  return first;
}

inline RunResult run(const std::string& sub, const ExperimentConfig& cfg) {
  return sub == "verify" ? run_verify(cfg) : run_once(sub, cfg);
}

}  // namespace cartanlab::lab
