#include "covsteer/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace covsteer {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw Error(ErrorKind::Config, field + ": " + msg);
}

std::string join(const std::string& parent, const std::string& key) { return parent.empty() ? key : parent + "." + key; }

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) fail(join(where, item.key()), "unknown field");
  }
}

const json& require_object(const json& parent, const std::string& where, const char* key) {
  const auto it = parent.find(key);
  if (it == parent.end()) fail(join(where, key), "missing");
  if (!it->is_object()) fail(join(where, key), "expected an object");
  return *it;
}

const json* optional_field(const json& parent, const char* key) {
  const auto it = parent.find(key);
  return it == parent.end() ? nullptr : &*it;
}

double as_number(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(field, "must be finite");
  return v;
}

long long as_integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) fail(field, "expected an integer");
  return j.get<long long>();
}

int as_positive_int(const json& j, const std::string& field) {
  const long long v = as_integer(j, field);
  if (v <= 0 || v > 1'000'000) fail(field, "must be a positive integer");
  return static_cast<int>(v);
}

double number_or(const json& parent, const std::string& where, const char* key, double fallback) {
  const json* j = optional_field(parent, key);
  return j ? as_number(*j, join(where, key)) : fallback;
}

int int_or(const json& parent, const std::string& where, const char* key, int fallback) {
  const json* j = optional_field(parent, key);
  return j ? as_positive_int(*j, join(where, key)) : fallback;
}

Eigen::MatrixXd as_matrix(const json& j, const std::string& field, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array()) fail(field, "expected a flat row-major array");
  if (static_cast<Eigen::Index>(j.size()) != rows * cols) {
    fail(field, "expected " + std::to_string(rows * cols) + " entries (" + std::to_string(rows) + "x" +
                    std::to_string(cols) + "), got " + std::to_string(j.size()));
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = as_number(j[static_cast<std::size_t>(r * cols + c)], field + "[" + std::to_string(r * cols + c) + "]");
    }
  }
  return m;
}

const json& require_field(const json& parent, const std::string& where, const char* key) {
  const auto it = parent.find(key);
  if (it == parent.end()) fail(join(where, key), "missing");
  return *it;
}

GaussianD parse_gaussian(const json& parent, const char* key, int nx) {
  const json& g = require_object(parent, "", key);
  reject_unknown(g, key, {"mean", "cov"});
  const std::string where = key;
  const Eigen::VectorXd mean = as_matrix(require_field(g, where, "mean"), where + ".mean", nx, 1);
  const Eigen::MatrixXd cov = as_matrix(require_field(g, where, "cov"), where + ".cov", nx, nx);
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    fail(where + ".cov", "not symmetric");
  }
  GaussianD out(mean, cov);
  if (!is_positive_definite(out)) {
    throw Error(ErrorKind::NotPositiveDefinite, where + ".cov: not positive definite");
  }
  return out;
}

Stage parse_stage(const json& obj, const std::string& where, int nx, int nu, int nw) {
  return Stage{as_matrix(require_field(obj, where, "A"), join(where, "A"), nx, nx),
               as_matrix(require_field(obj, where, "B"), join(where, "B"), nx, nu),
               as_matrix(require_field(obj, where, "G"), join(where, "G"), nx, nw)};
}

void parse_solver(const json& doc, Scenario& s) {
  const json* solver = optional_field(doc, "solver");
  if (!solver) return;
  if (!solver->is_object()) fail("solver", "expected an object");
  reject_unknown(*solver, "solver", {"epsilon", "max_iters", "inner_tol", "inner_max_iters", "qn"});
  s.ccp.epsilon = number_or(*solver, "solver", "epsilon", s.ccp.epsilon);
  s.ccp.max_iters = int_or(*solver, "solver", "max_iters", s.ccp.max_iters);
  s.ccp.inner_tol = number_or(*solver, "solver", "inner_tol", s.ccp.inner_tol);
  s.ccp.inner_max_iters = int_or(*solver, "solver", "inner_max_iters", s.ccp.inner_max_iters);
  if (!(s.ccp.epsilon > 0.0)) fail("solver.epsilon", "must be positive");
  if (!(s.ccp.inner_tol > 0.0)) fail("solver.inner_tol", "must be positive");

  if (const json* qn = optional_field(*solver, "qn")) {
    if (!qn->is_object()) fail("solver.qn", "expected an object");
    const std::string w = "solver.qn";
    reject_unknown(*qn, w, {"memory", "grad_tol", "rel_f_tol", "max_iters", "c1", "c2", "max_line_search"});
    s.qn.memory = int_or(*qn, w, "memory", s.qn.memory);
    s.qn.grad_tol = number_or(*qn, w, "grad_tol", s.qn.grad_tol);
    s.qn.rel_f_tol = number_or(*qn, w, "rel_f_tol", s.qn.rel_f_tol);
    s.qn.max_iters = int_or(*qn, w, "max_iters", s.qn.max_iters);
    s.qn.c1 = number_or(*qn, w, "c1", s.qn.c1);
    s.qn.c2 = number_or(*qn, w, "c2", s.qn.c2);
    s.qn.max_line_search = int_or(*qn, w, "max_line_search", s.qn.max_line_search);
    try {
      s.qn.validate();
    } catch (const Error& e) {
      fail(w, e.what());
    }
  }
}

}  // namespace

json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, path + ": cannot open");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) fail(item, "override must look like key=value");
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);

    json* node = &doc;
    std::stringstream path(key);
    std::string token;
    std::string walked;
    while (std::getline(path, token, '.')) {
      if (token.empty()) fail(key, "empty path component");
      walked = join(walked, token);
      if (node->is_array()) {
        std::size_t idx = 0;
        try {
          idx = std::stoul(token);
        } catch (const std::exception&) {
          fail(walked, "expected an array index");
        }
        if (idx >= node->size()) fail(walked, "index out of range");
        node = &(*node)[idx];
      } else {
        if (node->is_null()) *node = json::object();
        if (!node->is_object()) fail(walked, "cannot descend into a non-object");
        node = &(*node)[token];
      }
    }
    json value = json::parse(text, nullptr, false);
    *node = value.is_discarded() ? json(text) : std::move(value);
  }
}

Scenario parse_scenario(const json& doc) {
  if (!doc.is_object()) fail("<root>", "expected an object");
  reject_unknown(doc, "", {"version", "system", "horizon", "gamma", "lambda", "cost", "init", "goal", "solver", "seed"});
  if (as_integer(require_field(doc, "", "version"), "version") != 1) fail("version", "only version 1 is supported");

  Scenario s;
  if (const json* cost = optional_field(doc, "cost")) {
    if (!cost->is_string()) fail("cost", "expected \"wasserstein\" or \"kl\"");
    s.cost = parse_cost(cost->get<std::string>());
  }

  const json& sys = require_object(doc, "", "system");
  const int nx = as_positive_int(require_field(sys, "system", "n_x"), "system.n_x");
  const int nu = as_positive_int(require_field(sys, "system", "n_u"), "system.n_u");
  const int nw = as_positive_int(require_field(sys, "system", "n_w"), "system.n_w");
  const json* horizon_field = optional_field(doc, "horizon");
  LtvSystem system;
  if (const json* stages = optional_field(sys, "stages")) {
    reject_unknown(sys, "system", {"n_x", "n_u", "n_w", "stages"});
    if (!stages->is_array() || stages->empty()) fail("system.stages", "expected a non-empty array");
    std::vector<Stage> list;
    for (std::size_t k = 0; k < stages->size(); ++k) {
      const std::string where = "system.stages[" + std::to_string(k) + "]";
      if (!(*stages)[k].is_object()) fail(where, "expected an object");
      reject_unknown((*stages)[k], where, {"A", "B", "G"});
      list.push_back(parse_stage((*stages)[k], where, nx, nu, nw));
    }
    if (horizon_field && as_positive_int(*horizon_field, "horizon") != static_cast<int>(list.size())) {
      fail("horizon", "does not match the number of system.stages");
    }
    system = LtvSystem(std::move(list));
  } else {
    reject_unknown(sys, "system", {"n_x", "n_u", "n_w", "A", "B", "G"});
    if (!horizon_field) fail("horizon", "missing");
    s.time_invariant = true;
    s.invariant_stage = parse_stage(sys, "system", nx, nu, nw);
    system = LtvSystem::time_invariant(s.invariant_stage.A, s.invariant_stage.B, s.invariant_stage.G,
                                       as_positive_int(*horizon_field, "horizon"));
  }

  s.problem.system = std::move(system);
  s.problem.init = parse_gaussian(doc, "init", nx);
  s.problem.goal = parse_gaussian(doc, "goal", nx);
  s.problem.gamma = number_or(doc, "", "gamma", 1.0);
  if (!(s.problem.gamma > 0.0)) fail("gamma", "must be positive");
  s.problem.lambda = number_or(doc, "", "lambda", s.cost == CostKind::KL ? 70.0 : 10.0);
  if (!(s.problem.lambda > 0.0)) fail("lambda", "must be positive");

  parse_solver(doc, s);
  if (const json* seed = optional_field(doc, "seed")) {
    if (!seed->is_number_unsigned()) fail("seed", "expected a non-negative integer");
    s.seed = seed->get<std::uint64_t>();
  }
  s.problem.validate();
  return s;
}

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = load_config_json(path);
  apply_overrides(doc, overrides);
  return parse_scenario(doc);
}

ProblemFamily problem_family(const Scenario& scenario) {
  return [scenario](int horizon, double gamma) {
    SteeringProblem p = scenario.problem;
    p.gamma = gamma;
    if (horizon != p.horizon()) {
      if (!scenario.time_invariant) {
        throw Error(ErrorKind::Config, "horizon: a per-stage system cannot be re-instantiated at N = " +
                                           std::to_string(horizon));
      }
      const Stage& st = scenario.invariant_stage;
      p.system = LtvSystem::time_invariant(st.A, st.B, st.G, horizon);
    }
    p.validate();
    return p;
  };
}

}  // namespace covsteer
