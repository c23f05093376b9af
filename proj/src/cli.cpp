#include "slt/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <regex>
#include <sstream>

namespace slt::cli {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Numbers may be written as JSON numbers or as strings such as "1/64",
// "pi/2", "3*pi/4" or "0.75pi".
std::optional<double> parse_scalar(std::string_view text) {
  static const std::regex re(
      R"(^\s*([+-])?\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*(\*?\s*pi)?\s*(?:/\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?))?\s*$)");
  std::cmatch m;
  const std::string s(text);
  if (!std::regex_match(s.c_str(), m, re)) return std::nullopt;
  if (!m[2].matched && !m[3].matched) return std::nullopt;
  double v = m[2].matched ? std::stod(m[2].str()) : 1.0;
  if (m[3].matched) v *= std::numbers::pi;
  if (m[4].matched) v /= std::stod(m[4].str());
  if (m[1].matched && m[1].str() == "-") v = -v;
  return v;
}

struct Ctx {
  std::string_view text;

  // Best effort: the line of the first occurrence of each path component in
  // turn. Good enough to point at a key in a hand-written file.
  int line_of(const std::string& key) const {
    std::size_t pos = 0;
    std::size_t start = 0;
    while (start <= key.size()) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      const auto at = text.find("\"" + part + "\"", pos);
      if (at == std::string_view::npos) return 0;
      pos = at;
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  [[noreturn]] void fail_at(const std::string& key, const std::string& message) const {
    std::string where = "key '" + key + "'";
    if (const int line = line_of(key); line > 0) where += " (line " + std::to_string(line) + ")";
    fail(ErrorCode::ConfigError, where + ": " + message);
  }
};

// A JSON object with its dotted path; a missing block is an empty node.
struct Node {
  const Ctx* ctx = nullptr;
  const Json* json = nullptr;
  std::string path;

  std::string key(std::string_view k) const { return path.empty() ? std::string(k) : path + "." + std::string(k); }
  bool has(const char* k) const { return json && json->contains(k); }

  void allow(std::initializer_list<std::string_view> keys) const {
    if (!json) return;
    for (const auto& [k, v] : json->items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) ctx->fail_at(key(k), "unknown key");
    }
  }

  Node child(const char* k) const {
    if (!has(k)) return {ctx, nullptr, key(k)};
    const Json& j = json->at(k);
    if (!j.is_object()) ctx->fail_at(key(k), "expected an object");
    return {ctx, &j, key(k)};
  }

  double to_number(const Json& j, const std::string& k) const {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
      if (auto v = parse_scalar(j.get<std::string>())) return *v;
      ctx->fail_at(k, "cannot read '" + j.get<std::string>() + "' as a number");
    }
    ctx->fail_at(k, "expected a number");
  }

  double number(const char* k, double def) const { return has(k) ? to_number(json->at(k), key(k)) : def; }

  std::optional<double> maybe_number(const char* k) const {
    if (!has(k)) return std::nullopt;
    return to_number(json->at(k), key(k));
  }

  double positive(const char* k, double def) const {
    const double v = number(k, def);
    if (!(v > 0.0) || !std::isfinite(v)) ctx->fail_at(key(k), "must be positive");
    return v;
  }

  int integer(const char* k, int def, int lo) const {
    if (!has(k)) return def;
    const Json& j = json->at(k);
    if (!j.is_number_integer()) ctx->fail_at(key(k), "expected an integer");
    const auto v = j.get<std::int64_t>();
    if (v < lo || v > std::numeric_limits<int>::max()) ctx->fail_at(key(k), "must be at least " + std::to_string(lo));
    return static_cast<int>(v);
  }

  bool boolean(const char* k, bool def) const {
    if (!has(k)) return def;
    if (!json->at(k).is_boolean()) ctx->fail_at(key(k), "expected true or false");
    return json->at(k).get<bool>();
  }

  std::string string(const char* k, const std::string& def) const {
    if (!has(k)) return def;
    if (!json->at(k).is_string()) ctx->fail_at(key(k), "expected a string");
    return json->at(k).get<std::string>();
  }

  std::vector<double> numbers(const char* k) const {
    std::vector<double> out;
    if (!has(k)) return out;
    const Json& j = json->at(k);
    if (!j.is_array()) ctx->fail_at(key(k), "expected an array");
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(to_number(j[i], key(k) + "[" + std::to_string(i) + "]"));
    return out;
  }
};

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is one past the offending character.
    const std::size_t at = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto before = text.substr(0, at);
    const int line = 1 + static_cast<int>(std::count(before.begin(), before.end(), '\n'));
    const auto nl = before.rfind('\n');
    const std::size_t column = at - (nl == std::string_view::npos ? 0 : nl + 1) + 1;
    fail(ErrorCode::ConfigError, "JSON syntax error at line " + std::to_string(line) + ", column " +
                                     std::to_string(column));
  }
}

RunConfig parse_config_json(const Json& root, const Ctx& ctx, const fs::path& base_dir, Command command) {
  if (!root.is_object()) fail(ErrorCode::ConfigError, "configuration must be a JSON object");
  const Node top{&ctx, &root, ""};
  top.allow({"problem", "domain", "grid", "solver", "oracle", "verify", "diagnose", "output", "seed"});
  RunConfig cfg;

  const Node pr = top.child("problem");
  pr.allow({"n", "theta", "f", "phi", "bc", "epsilon", "offset", "lambda"});
  cfg.n = pr.integer("n", 2, 2);
  if (cfg.n > 3) ctx.fail_at(pr.key("n"), "dimension must be 2 or 3");
  if (!pr.has("theta")) ctx.fail_at(pr.key("theta"), "missing");
  cfg.theta = pr.number("theta", 0.0);
  if (phase_classify(cfg.theta, cfg.n).cls == PhaseClass::Invalid) {
    ctx.fail_at(pr.key("theta"), "phase must lie in [(n-2)pi/2, n pi/2)");
  }
  cfg.f_spec = pr.string("f", cfg.f_spec);
  cfg.phi_spec = pr.string("phi", cfg.phi_spec);
  try {
    cfg.f = parse_coefficient(cfg.f_spec, base_dir);
  } catch (const Error& e) {
    ctx.fail_at(pr.key("f"), e.what());
  }
  try {
    cfg.phi = parse_coefficient(cfg.phi_spec, base_dir);
  } catch (const Error& e) {
    ctx.fail_at(pr.key("phi"), e.what());
  }
  const std::string bc = pr.string("bc", command == Command::Classical ? "classical" : "robin");
  if (bc == "robin") {
    cfg.bc = BcMode::Robin;
  } else if (bc == "classical") {
    cfg.bc = BcMode::Classical;
  } else if (bc == "epsilon") {
    cfg.bc = BcMode::Epsilon;
  } else {
    ctx.fail_at(pr.key("bc"), "expected robin, classical or epsilon");
  }
  cfg.epsilon = pr.positive("epsilon", 1.0);
  cfg.offset = pr.number("offset", 0.0);
  cfg.lambda = pr.number("lambda", 0.0);

  const Node dm = top.child("domain");
  dm.allow({"kind", "radius", "axes", "fourier"});
  cfg.domain.dim = cfg.n;
  const std::string kind = dm.string("kind", "ball");
  if (kind == "ball") {
    cfg.domain.kind = BodyKind::Ball;
    cfg.domain.radius = dm.positive("radius", 1.0);
  } else if (kind == "ellipsoid") {
    cfg.domain.kind = BodyKind::Ellipsoid;
    cfg.domain.axes = dm.numbers("axes");
  } else if (kind == "support2d") {
    cfg.domain.kind = BodyKind::Support2d;
    cfg.domain.fourier = dm.numbers("fourier");
  } else {
    ctx.fail_at(dm.key("kind"), "expected ball, ellipsoid or support2d");
  }
  try {
    cfg.body = make_domain(cfg.domain);
  } catch (const Error& e) {
    ctx.fail_at(dm.key("kind"), e.what());
  }

  const Node gr = top.child("grid");
  gr.allow({"h", "h_list", "probe_order"});
  cfg.h = gr.positive("h", cfg.h);
  cfg.h_list = gr.numbers("h_list");
  cfg.grid.probe_order = gr.integer("probe_order", cfg.grid.probe_order, 1);
  if (cfg.grid.probe_order > 2) ctx.fail_at(gr.key("probe_order"), "must be 1 or 2");

  const Node so = top.child("solver");
  so.allow({"newton", "homotopy", "epsilon", "perturbation"});
  const Node nw = so.child("newton");
  nw.allow({"tol", "max_iter", "backtrack", "min_step", "phase_guard", "linear"});
  cfg.newton.tol_residual = nw.positive("tol", cfg.newton.tol_residual);
  cfg.newton.max_iter = nw.integer("max_iter", cfg.newton.max_iter, 1);
  cfg.newton.backtrack = nw.positive("backtrack", cfg.newton.backtrack);
  if (cfg.newton.backtrack >= 1.0) ctx.fail_at(nw.key("backtrack"), "must lie in (0, 1)");
  cfg.newton.min_step = nw.positive("min_step", cfg.newton.min_step);
  cfg.newton.phase_guard = nw.positive("phase_guard", cfg.newton.phase_guard);
  const std::string linear = nw.string("linear", "auto");
  if (linear == "auto") {
    cfg.newton.linear = LinearSolverKind::Auto;
  } else if (linear == "direct") {
    cfg.newton.linear = LinearSolverKind::Direct;
  } else if (linear == "iterative") {
    cfg.newton.linear = LinearSolverKind::Iterative;
  } else {
    ctx.fail_at(nw.key("linear"), "expected auto, direct or iterative");
  }
  const Node hs = so.child("homotopy");
  hs.allow({"initial_step", "min_step", "max_step"});
  cfg.homotopy.initial_step = hs.positive("initial_step", cfg.homotopy.initial_step);
  cfg.homotopy.min_step = hs.positive("min_step", cfg.homotopy.min_step);
  cfg.homotopy.max_step = hs.positive("max_step", cfg.homotopy.max_step);
  if (cfg.homotopy.min_step > cfg.homotopy.initial_step || cfg.homotopy.initial_step > cfg.homotopy.max_step) {
    ctx.fail_at(hs.key("initial_step"), "need min_step <= initial_step <= max_step");
  }
  const Node ep = so.child("epsilon");
  ep.allow({"halving", "values"});
  if (ep.has("values") && ep.has("halving")) ctx.fail_at(ep.key("values"), "give either values or halving");
  if (ep.has("values")) {
    cfg.eps_path.eps_values = ep.numbers("values");
    const auto& v = cfg.eps_path.eps_values;
    if (v.empty()) ctx.fail_at(ep.key("values"), "empty eps path");
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!(v[k] > 0.0) || (k > 0 && !(v[k] < v[k - 1]))) {
        ctx.fail_at(ep.key("values"), "eps values must be positive and strictly decreasing");
      }
    }
  } else {
    cfg.eps_path = EpsilonPath::halving(ep.integer("halving", 8, 0));
  }
  cfg.perturbation = so.number("perturbation", 0.0);
  if (!(cfg.perturbation >= 0.0)) ctx.fail_at(so.key("perturbation"), "must be non-negative");

  if (top.has("seed")) {
    const Json& s = root.at("seed");
    if (!s.is_number_unsigned()) ctx.fail_at("seed", "expected a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }

  const Node oc = top.child("oracle");
  oc.allow({"steps"});
  cfg.oracle_steps = oc.integer("steps", cfg.oracle_steps, 2);

  const Node vf = top.child("verify");
  vf.allow({"count", "f"});
  cfg.verify_count = vf.integer("count", cfg.verify_count, 0);
  cfg.verify_f = vf.positive("f", cfg.verify_f);

  const Node dg = top.child("diagnose");
  dg.allow({"field", "B0", "B", "a0", "b", "mu", "M0", "sweep"});
  if (dg.has("field")) cfg.field = base_dir / dg.string("field", "");
  cfg.diag.B0 = dg.number("B0", cfg.diag.B0);
  cfg.diag.B = dg.number("B", cfg.diag.B);
  cfg.diag.a0 = dg.number("a0", cfg.diag.a0);
  cfg.diag.b = dg.number("b", cfg.diag.b);
  cfg.diag.mu = dg.number("mu", cfg.diag.mu);
  cfg.diag.M0 = dg.maybe_number("M0");
  if (dg.has("sweep")) cfg.diag.sweep = dg.numbers("sweep");

  const Node out = top.child("output");
  out.allow({"field", "profile"});
  cfg.write_field = out.boolean("field", true);
  cfg.write_profile = out.boolean("profile", true);

  // Cross-field checks that depend on the command.
  switch (command) {
    case Command::Solve:
      if (cfg.bc != BcMode::Robin) ctx.fail_at(pr.key("bc"), "solve needs the robin boundary condition");
      break;
    case Command::Classical:
      if (cfg.bc != BcMode::Classical) ctx.fail_at(pr.key("bc"), "classical needs the classical boundary condition");
      break;
    case Command::Oracle:
      if (cfg.bc == BcMode::Epsilon) ctx.fail_at(pr.key("bc"), "oracle supports robin and classical");
      if (!cfg.body.is_ball()) ctx.fail_at(dm.key("kind"), "oracle needs a ball");
      if (!cfg.f.is_radial()) ctx.fail_at(pr.key("f"), "oracle needs a radial f");
      if (!cfg.phi.is_radial()) ctx.fail_at(pr.key("phi"), "oracle needs a radial phi");
      break;
    case Command::Convergence: {
      if (cfg.bc == BcMode::Epsilon) ctx.fail_at(pr.key("bc"), "convergence supports robin and classical");
      const auto& hl = cfg.h_list;
      if (hl.size() < 2) ctx.fail_at(gr.key("h_list"), "convergence needs at least two spacings");
      for (std::size_t k = 0; k < hl.size(); ++k) {
        if (!(hl[k] > 0.0) || (k > 0 && !(hl[k] < hl[k - 1]))) {
          ctx.fail_at(gr.key("h_list"), "spacings must be positive and strictly decreasing");
        }
      }
      break;
    }
    case Command::Diagnose:
      if (cfg.field.empty()) ctx.fail_at(dg.key("field"), "missing");
      break;
    case Command::Verify:
      break;
  }
  return cfg;
}

// JSON views of the reports.

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json newton_json(const NewtonReport& r) {
  return Json{{"iterations", r.iterations},
              {"converged", r.converged},
              {"residual_history", r.residual_history},
              {"step_history", r.step_history},
              {"linear_iterations", r.linear_iterations},
              {"tail_ratio", r.tail_ratio},
              {"quadratic_tail", r.quadratic_tail}};
}

Json homotopy_json(const HomotopyReport& r) {
  Json steps = Json::array();
  for (const auto& s : r.steps) {
    Json j{{"t", s.t},
           {"step", s.step},
           {"accepted", s.accepted},
           {"newton_iterations", s.newton_iterations},
           {"final_residual", s.final_residual},
           {"tail_ratio", s.tail_ratio},
           {"quadratic_tail", s.quadratic_tail}};
    if (!s.failure.empty()) j["failure"] = s.failure;
    steps.push_back(j);
  }
  return Json{{"steps", steps},
              {"halvings", r.halvings},
              {"total_newton", r.total_newton},
              {"last_newton", newton_json(r.last_newton)}};
}

Json estimate_json(const EstimateReport& e) {
  return Json{{"c0", e.c0},
              {"c1", e.c1},
              {"c1_boundary", e.c1_boundary},
              {"dnn", e.dnn},
              {"d2", e.d2},
              {"min_laplacian", e.min_laplacian},
              {"phase_residual", e.phase_residual}};
}

Json extremum_json(const Extremum& e) {
  return Json{{"value", e.value},
              {"node", e.node},
              {"position", e.node >= 0 ? vec_json(e.position) : Json::array()},
              {"depth", e.depth},
              {"on_band", e.on_band}};
}

Json sweep_json(const std::vector<SweepEntry>& sweep) {
  Json a = Json::array();
  for (const auto& s : sweep) a.push_back(Json{{"constant", s.constant}, {"on_band", s.on_band}});
  return a;
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json barrier_json(const BarrierReport& r) {
  return Json{{"B0", r.B0},
              {"upper_min", extremum_json(r.upper_min)},
              {"lower_max", extremum_json(r.lower_max)},
              {"on_band", r.on_band},
              {"sweep", sweep_json(r.sweep)},
              {"smallest_B0", optional_json(r.smallest_B0)},
              {"collar_nodes", r.collar_nodes}};
}

Json ltu_json(const LtuReport& r) {
  return Json{{"B", r.B},
              {"max", extremum_json(r.max)},
              {"max_partial", extremum_json(r.max_partial)},
              {"all_directions_on_band", r.all_directions_on_band},
              {"directions", r.directions},
              {"sweep", sweep_json(r.sweep)},
              {"smallest_B", optional_json(r.smallest_B)}};
}

Json aux_json(const AuxReport& r) {
  return Json{{"functional", r.functional == AuxFunctional::Collar ? "collar" : "path"},
              {"max", extremum_json(r.max)},
              {"M0", r.M0}};
}

Json lemma_json(const LemmaSuiteReport& r) {
  return Json{{"count", r.count},
              {"upper_pass", r.upper_pass},
              {"inverse_pass", r.inverse_pass},
              {"lower_pass", r.lower_pass},
              {"mean_zero_pass", r.mean_zero_pass},
              {"wy_pass", r.wy_pass},
              {"wy_checked", r.wy_checked},
              {"worst_upper", r.worst_upper},
              {"worst_inverse", r.worst_inverse},
              {"worst_lower", r.worst_lower},
              {"worst_mean_zero", r.worst_mean_zero},
              {"worst_wy", r.worst_wy},
              {"min_trace_gap", r.min_trace_gap},
              {"passed", r.passed()}};
}

Json comparison_json(const OracleComparison& c) {
  Json j{{"max_error", c.max_error}, {"l2_error", c.l2_error}};
  if (c.has_lambda) j["lambda_error"] = c.lambda_error;
  return j;
}

Json error_json(const Error& e) { return Json{{"code", to_string(e.code())}, {"message", e.what()}}; }

Json resolved_json(const RunConfig& c) {
  Json eps = Json::array();
  for (double e : c.eps_path.eps_values) eps.push_back(e);
  return Json{{"n", c.n},
              {"theta", c.theta},
              {"f", c.f.describe()},
              {"phi", c.phi.describe()},
              {"bc", to_string(c.bc)},
              {"h", c.h},
              {"h_list", c.h_list},
              {"probe_order", c.grid.probe_order},
              {"newton_tol", c.newton.tol_residual},
              {"newton_max_iter", c.newton.max_iter},
              {"eps_path", eps},
              {"perturbation", c.perturbation},
              {"seed", c.seed}};
}

RadialProblem radial_problem(const RunConfig& c, RadialBc bc) {
  RadialProblem rp;
  rp.n = c.n;
  rp.theta = c.theta;
  rp.radius = c.body.radius();
  rp.f = radial_profile(c.f);
  rp.bc = bc;
  rp.phi = c.phi.c0() + c.phi.c2() * rp.radius * rp.radius;
  rp.steps = c.oracle_steps;
  return rp;
}

bool oracle_applies(const RunConfig& c) { return c.body.is_ball() && c.f.is_radial() && c.phi.is_radial(); }

void write_field(const fs::path& path, const Field& u) {
  std::ofstream out(path);
  write_csv(out, u);
  if (!out) fail(ErrorCode::ConfigError, "cannot write " + path.string());
}

struct Outcome {
  Json result = Json::object();
  bool ok = true;
  Json files = Json::array();
};

Perturbation perturbation_of(const RunConfig& c) { return {c.perturbation, c.seed}; }

double residual_norm(const DiscreteProblem& p, const Field& u) {
  return residual(p, u).residual.lpNorm<Eigen::Infinity>();
}

Outcome run_solve(const RunConfig& c, const fs::path& out) {
  Outcome o;
  const auto r = homotopy_solve(c.problem_spec(), c.homotopy, c.newton, perturbation_of(c));
  o.result["unknowns"] = r.u.grid->unknown_count();
  o.result["residual"] = residual_norm(r.problem, r.u);
  o.result["newton"] = newton_json(r.report.last_newton);
  o.result["homotopy"] = homotopy_json(r.report);
  o.result["estimates"] = estimate_json(estimate_report(r.problem, r.u, c.newton.tol_residual));
  if (oracle_applies(c)) {
    try {
      o.result["oracle"] = comparison_json(compare(radial_solve(radial_problem(c, RadialBc::Robin)), r.u));
    } catch (const Error& e) {
      o.result["oracle"] = Json{{"error", error_json(e)}};
    }
  }
  if (c.write_field) {
    write_field(out / "field.csv", r.u);
    o.files.push_back("field.csv");
  }
  return o;
}

Json eps_steps_json(const std::vector<EpsilonStep>& steps) {
  Json a = Json::array();
  for (const auto& s : steps) {
    a.push_back(Json{{"eps", s.eps},
                     {"lambda", s.lambda},
                     {"spread", s.spread},
                     {"max_grad", s.max_grad},
                     {"newton_iterations", s.newton_iterations},
                     {"final_residual", s.final_residual}});
  }
  return a;
}

Outcome run_classical(const RunConfig& c, const fs::path& out) {
  Outcome o;
  const auto r = classical_solve(c.problem_spec(), c.eps_path, c.homotopy, c.newton, perturbation_of(c));
  o.result["lambda"] = r.lambda;
  o.result["unknowns"] = r.u.grid->unknown_count();
  o.result["residual"] = residual_norm(r.problem, r.u);
  o.result["eps_path"] = eps_steps_json(r.report.steps);
  o.result["homotopy"] = homotopy_json(r.report.homotopy);
  o.result["estimates"] = estimate_json(estimate_report(r.problem, r.u, c.newton.tol_residual));
  if (oracle_applies(c)) {
    try {
      const auto rs = radial_solve(radial_problem(c, RadialBc::Classical));
      Json cmp = comparison_json(compare(rs, r.u, r.lambda));
      cmp["lambda"] = rs.lambda;
      o.result["oracle"] = cmp;
    } catch (const Error& e) {
      o.result["oracle"] = Json{{"error", error_json(e)}};
    }
  }
  if (c.write_field) {
    write_field(out / "field.csv", r.u);
    o.files.push_back("field.csv");
  }
  return o;
}

Outcome run_oracle(const RunConfig& c, const fs::path& out) {
  Outcome o;
  const auto rs = radial_solve(radial_problem(c, c.bc == BcMode::Classical ? RadialBc::Classical : RadialBc::Robin));
  if (c.bc == BcMode::Classical) o.result["lambda"] = rs.lambda;
  o.result["steps"] = c.oracle_steps;
  o.result["midpoint_residual"] = rs.midpoint_residual;
  o.result["branch_ok"] = rs.branch_ok;
  o.result["psi_R"] = rs.psi.back();
  o.result["u_0"] = rs.u.front();
  o.result["u_R"] = rs.u.back();
  if (c.write_profile) {
    std::ofstream f(out / "profile.csv");
    write_csv(f, rs);
    if (!f) fail(ErrorCode::ConfigError, "cannot write profile.csv");
    o.files.push_back("profile.csv");
  }
  return o;
}

Outcome run_verify(const RunConfig& c) {
  Outcome o;
  const auto rep = run_lemma_suites(c.n, c.theta, c.verify_f, c.verify_count, c.seed);
  o.result = lemma_json(rep);
  o.ok = rep.passed();
  return o;
}

Outcome run_diagnose(const RunConfig& c) {
  Outcome o;
  const auto grid = build_grid(c.body, c.h, c.grid);
  const Field u = read_field_csv(c.field, grid);
  BoundaryClosure bc;
  bc.mode = c.bc;
  bc.phi = c.phi;
  bc.epsilon = c.epsilon;
  bc.offset = c.offset;
  bc.lambda_fixed = c.lambda;
  const auto p = make_problem(grid, phase_classify(c.theta, c.n), c.f, bc);
  // Each diagnostic reports on its own; one failing does not hide the rest.
  auto guarded = [&](const char* name, auto&& fn) {
    try {
      o.result[name] = fn();
    } catch (const Error& e) {
      o.result[name] = Json{{"error", error_json(e)}};
      o.ok = false;
    }
  };
  guarded("estimates", [&] { return estimate_json(estimate_report(p, u, c.newton.tol_residual)); });
  guarded("barrier", [&] { return barrier_json(barrier_diag(p, u, c.diag)); });
  guarded("ltu", [&] { return ltu_json(ltu_diag(p, u, c.diag)); });
  guarded("collar_aux", [&] { return aux_json(gradient_aux_diag(p, u, c.diag, AuxFunctional::Collar)); });
  if (c.bc == BcMode::Epsilon) {
    guarded("path_aux", [&] { return aux_json(gradient_aux_diag(p, u, c.diag, AuxFunctional::Path)); });
  }
  return o;
}

std::vector<double> observed_orders(const std::vector<double>& h, const std::vector<double>& e) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < e.size(); ++k) {
    out.push_back(e[k] > 0.0 && e[k + 1] > 0.0 ? std::log(e[k] / e[k + 1]) / std::log(h[k] / h[k + 1])
                                               : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

// Max over the coarse interior nodes of |coarse - fine|, after removing the
// mean difference when the level of u is not fixed.
double successive_difference(const Field& coarse, const Field& fine, bool centre) {
  const Grid& g = *coarse.grid;
  Eigen::VectorXd d(g.interior_count());
  for (int i = 0; i < g.interior_count(); ++i) d(i) = coarse.values(i) - interpolate_quadratic(fine, g.position(i));
  if (centre) d.array() -= d.mean();
  return d.lpNorm<Eigen::Infinity>();
}

Outcome run_convergence(const RunConfig& c) {
  Outcome o;
  const bool classical = c.bc == BcMode::Classical;
  const bool oracle = oracle_applies(c);
  std::optional<RadialSolution> rs;
  if (oracle) rs = radial_solve(radial_problem(c, classical ? RadialBc::Classical : RadialBc::Robin));

  Json runs = Json::array();
  std::vector<Field> fields;
  std::vector<double> lambdas, max_err, l2_err, lambda_err;
  for (double h : c.h_list) {
    ProblemSpec spec = c.problem_spec();
    spec.h = h;
    Json run{{"h", h}};
    if (classical) {
      const auto r = classical_solve(spec, c.eps_path, c.homotopy, c.newton, perturbation_of(c));
      run["lambda"] = r.lambda;
      lambdas.push_back(r.lambda);
      fields.push_back(r.u);
    } else {
      fields.push_back(homotopy_solve(spec, c.homotopy, c.newton, perturbation_of(c)).u);
    }
    run["unknowns"] = fields.back().grid->unknown_count();
    if (rs) {
      const auto cmp = compare(*rs, fields.back(), classical ? std::optional<double>(lambdas.back()) : std::nullopt);
      run["max_error"] = cmp.max_error;
      run["l2_error"] = cmp.l2_error;
      max_err.push_back(cmp.max_error);
      l2_err.push_back(cmp.l2_error);
      if (classical) {
        run["lambda_error"] = cmp.lambda_error;
        lambda_err.push_back(cmp.lambda_error);
      }
    }
    runs.push_back(run);
  }
  o.result["runs"] = runs;
  Json orders = Json::object();
  if (rs) {
    o.result["reference"] = "oracle";
    orders["max_error"] = observed_orders(c.h_list, max_err);
    orders["l2_error"] = observed_orders(c.h_list, l2_err);
    if (classical) orders["lambda_error"] = observed_orders(c.h_list, lambda_err);
  } else {
    // Without a closed-form reference the differences between successive
    // grids decay at the same rate as the error.
    o.result["reference"] = "successive";
    std::vector<double> diffs, ldiffs;
    for (std::size_t k = 0; k + 1 < fields.size(); ++k) {
      diffs.push_back(successive_difference(fields[k], fields[k + 1], classical));
      if (classical) ldiffs.push_back(std::abs(lambdas[k] - lambdas[k + 1]));
    }
    o.result["successive_max_difference"] = diffs;
    const std::vector<double> hs(c.h_list.begin(), c.h_list.end() - 1);
    orders["max_error"] = observed_orders(hs, diffs);
    if (classical) {
      o.result["successive_lambda_difference"] = ldiffs;
      orders["lambda_error"] = observed_orders(hs, ldiffs);
    }
  }
  o.result["orders"] = orders;
  return o;
}

Json versions_json() {
  return Json{{"slt", kVersion},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"compiler", __VERSION__}};
}

}  // namespace

std::optional<Command> parse_command(std::string_view name) {
  for (Command c : {Command::Solve, Command::Classical, Command::Oracle, Command::Verify, Command::Diagnose,
                    Command::Convergence}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view to_string(Command command) {
  switch (command) {
    case Command::Solve: return "solve";
    case Command::Classical: return "classical";
    case Command::Oracle: return "oracle";
    case Command::Verify: return "verify";
    case Command::Diagnose: return "diagnose";
    case Command::Convergence: return "convergence";
  }
  return "unknown";
}

ProblemSpec RunConfig::problem_spec() const {
  ProblemSpec s;
  s.body = body;
  s.phase = phase_classify(theta, n);
  s.f = f;
  s.bc.mode = bc;
  s.bc.phi = phi;
  s.h = h;
  s.grid_options = grid;
  return s;
}

Coefficient parse_coefficient(std::string_view spec, const fs::path& base_dir) {
  const std::string s = trim(spec);
  const auto space = s.find_first_of(" \t");
  const std::string form = s.substr(0, space);
  const std::string rest = space == std::string::npos ? std::string() : trim(s.substr(space));
  auto number = [&](const std::string& t) {
    const auto v = parse_scalar(t);
    if (!v) fail(ErrorCode::ConfigError, "cannot read '" + t + "' as a number in '" + s + "'");
    return *v;
  };
  if (form == "const") return Coefficient::constant(number(rest));
  if (form == "quadratic") {
    std::string t;
    for (char ch : rest) {
      if (!std::isspace(static_cast<unsigned char>(ch))) t += ch;
    }
    if (t.size() < 4 || t.substr(t.size() - 3) != "*r2") {
      fail(ErrorCode::ConfigError, "expected 'quadratic a + b*r2', got '" + s + "'");
    }
    t.resize(t.size() - 3);
    // The split is the last sign that is not part of an exponent.
    std::size_t at = std::string::npos;
    for (std::size_t k = t.size(); k-- > 1;) {
      if ((t[k] == '+' || t[k] == '-') && t[k - 1] != 'e' && t[k - 1] != 'E') {
        at = k;
        break;
      }
    }
    if (at == std::string::npos) fail(ErrorCode::ConfigError, "expected 'quadratic a + b*r2', got '" + s + "'");
    const double a = number(t.substr(0, at));
    const double b = number(t.substr(at + 1));
    return Coefficient::quadratic(a, t[at] == '-' ? -b : b);
  }
  if (form == "csv") {
    if (rest.empty()) fail(ErrorCode::ConfigError, "csv form needs a file name");
    const fs::path path = base_dir / rest;
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigError, "cannot open " + path.string());
    return Coefficient::read_csv(in);
  }
  fail(ErrorCode::ConfigError, "unknown coefficient form '" + s + "' (const, quadratic or csv)");
}

RunConfig parse_config(std::string_view text, const fs::path& base_dir, Command command) {
  const Ctx ctx{text};
  return parse_config_json(parse_json(text), ctx, base_dir, command);
}

Field read_field_csv(const fs::path& path, const GridPtr& grid) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot open field file " + path.string());
  const Grid& g = *grid;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ConfigError, "empty field file " + path.string());
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) header.push_back(trim(col));
  }
  static constexpr std::array<const char*, 3> names{"x", "y", "z"};
  std::vector<int> coord(g.dim(), -1);
  int value_col = -1;
  for (int k = 0; k < static_cast<int>(header.size()); ++k) {
    for (int a = 0; a < g.dim(); ++a) {
      if (header[k] == names[a]) coord[a] = k;
    }
    if (header[k] == "u") value_col = k;
  }
  if (value_col < 0 || std::count(coord.begin(), coord.end(), -1) > 0) {
    fail(ErrorCode::ConfigError, "field file needs columns x,y" + std::string(g.dim() == 3 ? ",z" : "") + ",u");
  }
  Field u{grid, Eigen::VectorXd::Zero(g.unknown_count())};
  std::vector<char> seen(g.unknown_count(), 0);
  int line_no = 1;
  const double h = g.spacing();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < header.size()) {
      fail(ErrorCode::ConfigError, path.string() + ":" + std::to_string(line_no) + ": too few columns");
    }
    std::array<int, kMaxDim> idx{0, 0, 0};
    double v = 0.0;
    try {
      for (int a = 0; a < g.dim(); ++a) {
        const double x = std::stod(cells[coord[a]]);
        idx[a] = static_cast<int>(std::lround(x / h));
        if (std::abs(x - idx[a] * h) > 1e-9 * std::max(1.0, std::abs(x))) {
          fail(ErrorCode::ConfigError, path.string() + ":" + std::to_string(line_no) + ": node is off the grid");
        }
      }
      v = std::stod(cells[value_col]);
    } catch (const std::logic_error&) {
      fail(ErrorCode::ConfigError, path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    const int i = g.unknown_at(idx);
    if (i < 0) fail(ErrorCode::ConfigError, path.string() + ":" + std::to_string(line_no) + ": node is not an unknown");
    u.values(i) = v;
    seen[i] = 1;
  }
  const auto missing = std::count(seen.begin(), seen.end(), 0);
  if (missing > 0) {
    fail(ErrorCode::ConfigError, "field file misses " + std::to_string(missing) + " of the grid's unknowns");
  }
  return u;
}

int run(const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  Json summary;
  summary["schema"] = 1;
  summary["command"] = to_string(options.command);
  summary["versions"] = versions_json();
  int code = 0;

  std::error_code ec;
  fs::create_directories(options.out, ec);
  if (ec) {
    std::cerr << "slt: cannot create output directory " << options.out << ": " << ec.message() << '\n';
    return 2;
  }

  try {
    std::ifstream in(options.config);
    if (!in) fail(ErrorCode::ConfigError, "cannot read config file " + options.config.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const Ctx ctx{text};
    const Json raw = parse_json(text);
    RunConfig cfg = parse_config_json(raw, ctx, options.config.parent_path(), options.command);
    if (options.seed) cfg.seed = *options.seed;
    Json echo = raw;
    echo["seed"] = cfg.seed;
    summary["config"] = echo;
    summary["resolved"] = resolved_json(cfg);
    if (options.threads > 0) set_thread_count(options.threads);

    Outcome o;
    switch (options.command) {
      case Command::Solve: o = run_solve(cfg, options.out); break;
      case Command::Classical: o = run_classical(cfg, options.out); break;
      case Command::Oracle: o = run_oracle(cfg, options.out); break;
      case Command::Verify: o = run_verify(cfg); break;
      case Command::Diagnose: o = run_diagnose(cfg); break;
      case Command::Convergence: o = run_convergence(cfg); break;
    }
    summary["status"] = o.ok ? "ok" : "failed";
    summary["result"] = o.result;
    summary["files"] = o.files;
    if (!o.ok) code = 1;
  } catch (const Error& e) {
    code = e.code() == ErrorCode::ConfigError ? 2 : 1;
    summary["status"] = "error";
    summary["error"] = error_json(e);
  } catch (const std::exception& e) {
    code = 1;
    summary["status"] = "error";
    summary["error"] = Json{{"code", "Internal"}, {"message", e.what()}};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  summary["timing"] = Json{{"seconds", seconds}, {"threads", thread_count()}};

  const fs::path path = options.out / "summary.json";
  std::ofstream out(path);
  out << summary.dump(2) << '\n';
  if (!out) {
    std::cerr << "slt: cannot write " << path << '\n';
    return code == 0 ? 1 : code;
  }
  if (code == 0) {
    std::cout << "slt " << to_string(options.command) << ": ok, summary in " << path.string() << '\n';
  } else if (summary.contains("error")) {
    std::cerr << "slt " << to_string(options.command) << ": " << summary["error"]["message"].get<std::string>()
              << '\n';
  } else {
    std::cerr << "slt " << to_string(options.command) << ": checks failed, see " << path.string() << '\n';
  }
  return code;
}

int main(int argc, char** argv) {
  CLI::App app{"Neumann problems for special Lagrangian type equations: solver and verification harness", "slt"};
  std::string command;
  RunOptions opts;
  std::uint64_t seed = 0;
  app.add_option("command", command, "solve | classical | oracle | verify | diagnose | convergence")
      ->required()
      ->check(CLI::IsMember({"solve", "classical", "oracle", "verify", "diagnose", "convergence"}));
  app.add_option("--config", opts.config, "JSON run configuration")->required();
  app.add_option("--out", opts.out, "output directory (created if missing)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed, overrides the config");
  app.add_option("--threads", opts.threads, "worker threads")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  opts.command = *parse_command(command);
  if (seed_opt->count() > 0) opts.seed = seed;
  return run(opts);
}

}  // namespace slt::cli
