#include "covsteer/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace covsteer {

using json = nlohmann::json;

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidInput, field + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.front().size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorKind::DimMismatch, field + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw Error(ErrorKind::InvalidInput, field + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidInput, field + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::InvalidInput, field + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

const json& member(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) throw Error(ErrorKind::InvalidInput, std::string("policy: missing field '") + key + "'");
  return *it;
}

}  // namespace

json gaussian_to_json(const GaussianD& g) { return {{"mean", vector_to_json(g.mean())}, {"cov", matrix_to_json(g.cov())}}; }

json policy_to_json(const Policy& policy, const BlockOperators& ops) {
  json doc{{"version", 1}, {"n_x", ops.nx}, {"n_u", ops.nu}, {"horizon", ops.horizon}};
  if (const auto* h = std::get_if<HistoryPolicy>(&policy)) {
    doc["kind"] = "history";
    const Eigen::MatrixXd theta = h->form == Parameterization::Theta ? h->gain : theta_from_k(h->gain, ops);
    const Eigen::MatrixXd K = h->form == Parameterization::K ? h->gain : k_from_theta(h->gain, ops);
    doc["form"] = h->form == Parameterization::Theta ? "theta" : "K";
    doc["theta"] = matrix_to_json(theta);
    doc["K"] = matrix_to_json(K);
    doc["feedforward"] = vector_to_json(h->feedforward);
  } else {
    const auto& m = std::get<MemorylessPolicy>(policy);
    doc["kind"] = "memoryless";
    json gains = json::array();
    for (const auto& g : m.gains) gains.push_back(matrix_to_json(g));
    doc["gains"] = std::move(gains);
    doc["feedforward"] = vector_to_json(m.feedforward);
  }
  return doc;
}

Policy policy_from_json(const json& doc, const BlockOperators& ops) {
  if (!doc.is_object()) throw Error(ErrorKind::InvalidInput, "policy: expected an object");
  const auto dim = [&](const char* key, int expected) {
    const json& v = member(doc, key);
    if (!v.is_number_integer() || v.get<long long>() != expected) {
      throw Error(ErrorKind::DimMismatch, std::string("policy: ") + key + " does not match the scenario (expected " +
                                              std::to_string(expected) + ")");
    }
  };
  dim("n_x", ops.nx);
  dim("n_u", ops.nu);
  dim("horizon", ops.horizon);
  const Eigen::VectorXd uff = vector_from_json(member(doc, "feedforward"), "policy.feedforward");
  if (uff.size() != ops.mask.rows()) throw Error(ErrorKind::DimMismatch, "policy.feedforward: wrong length");

  const json& kind = member(doc, "kind");
  if (kind == "history") {
    const bool theta_form = member(doc, "form") == "theta";
    const char* key = theta_form ? "theta" : "K";
    const Eigen::MatrixXd gain = matrix_from_json(member(doc, key), std::string("policy.") + key);
    if (gain.rows() != ops.mask.rows() || gain.cols() != ops.mask.cols()) {
      throw Error(ErrorKind::DimMismatch, std::string("policy.") + key + ": wrong shape");
    }
    ops.mask.require(gain, "policy gain");
    return HistoryPolicy{gain, uff, theta_form ? Parameterization::Theta : Parameterization::K};
  }
  if (kind == "memoryless") {
    const json& gains = member(doc, "gains");
    if (!gains.is_array() || static_cast<int>(gains.size()) != ops.horizon) {
      throw Error(ErrorKind::DimMismatch, "policy.gains: expected one gain per stage");
    }
    MemorylessPolicy m;
    for (std::size_t k = 0; k < gains.size(); ++k) {
      Eigen::MatrixXd g = matrix_from_json(gains[k], "policy.gains");
      if (g.rows() != ops.nu || g.cols() != ops.nx) throw Error(ErrorKind::DimMismatch, "policy.gains: wrong shape");
      m.gains.push_back(std::move(g));
    }
    m.feedforward = uff;
    return m;
  }
  throw Error(ErrorKind::InvalidInput, "policy.kind: expected \"history\" or \"memoryless\"");
}

json report_to_json(const SolveReport& report, const std::string& solver, const std::string& cost,
                    const std::vector<GaussianD>& stages) {
  json doc{{"version", 1},
           {"solver", solver},
           {"cost", cost},
           {"termination", std::string(to_string(report.termination))},
           {"converged", converged(report.termination)},
           {"iterations", report.iterations},
           {"wall_seconds", report.wall_seconds},
           {"final_objective", report.final_objective()},
           {"objective_trace", report.objective_trace},
           {"trace_wall_ms", report.trace_wall_ms},
           {"terminal", gaussian_to_json(report.terminal)}};
  json st = json::array();
  for (std::size_t k = 0; k < stages.size(); ++k) {
    json g = gaussian_to_json(stages[k]);
    g["stage"] = k;
    st.push_back(std::move(g));
  }
  doc["stages"] = std::move(st);
  return doc;
}

void write_json_file(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, path + ": cannot write");
  out << doc.dump(2) << '\n';
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, path + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidInput, path + ": " + e.what());
  }
}

void write_ellipses_csv(std::ostream& os, const std::vector<GaussianD>& stages, double n_sigma, int n_points) {
  os << "stage,point_index,x,y\n";
  if (!stages.empty() && stages.front().dim() < 2) return;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const GaussianD& g = stages[k];
    const GaussianD planar = g.dim() == 2 ? g : GaussianD(g.mean().head(2), g.cov().topLeftCorner(2, 2));
    const auto pts = confidence_ellipse(planar, n_sigma, n_points);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      os << k << ',' << i << ',' << format_number(pts[i](0)) << ',' << format_number(pts[i](1)) << '\n';
    }
  }
}

void write_trace_csv(std::ostream& os, const SolveReport& report) {
  os << "iter,objective,delta,wall_ms\n";
  const auto& f = report.objective_trace;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double delta = i == 0 ? 0.0 : f[i - 1] - f[i];
    const double ms = i < report.trace_wall_ms.size() ? report.trace_wall_ms[i] : 0.0;
    os << i << ',' << format_number(f[i]) << ',' << format_number(delta) << ',' << format_number(ms) << '\n';
  }
}

void write_paths_csv(std::ostream& os, const RolloutBatch& batch, int max_paths) {
  const Eigen::Index nx = batch.states.rows();
  os << "path_id,stage";
  for (Eigen::Index i = 0; i < nx; ++i) os << ",x" << i + 1;
  os << '\n';
  const int paths = std::min(batch.n_paths, max_paths);
  for (int p = 0; p < paths; ++p) {
    for (int k = 0; k <= batch.horizon; ++k) {
      os << p << ',' << k;
      const auto x = batch.states.col(Eigen::Index(p) * (batch.horizon + 1) + k);
      for (Eigen::Index i = 0; i < nx; ++i) os << ',' << format_number(x(i));
      os << '\n';
    }
  }
}

void write_empirical_csv(std::ostream& os, const RolloutBatch& batch) {
  const Eigen::Index nx = batch.states.rows();
  os << "stage,n";
  for (Eigen::Index i = 0; i < nx; ++i) os << ",mean_" << i + 1;
  for (Eigen::Index i = 0; i < nx; ++i) {
    for (Eigen::Index j = 0; j < nx; ++j) os << ",cov_" << i + 1 << '_' << j + 1;
  }
  os << '\n';
  for (int k = 0; k <= batch.horizon; ++k) {
    const GaussianD g = empirical_moments(batch, k);
    os << k << ',' << batch.n_paths;
    for (Eigen::Index i = 0; i < nx; ++i) os << ',' << format_number(g.mean()(i));
    for (Eigen::Index i = 0; i < nx; ++i) {
      for (Eigen::Index j = 0; j < nx; ++j) os << ',' << format_number(g.cov()(i, j));
    }
    os << '\n';
  }
}

}  // namespace covsteer
