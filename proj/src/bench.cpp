#include "covsteer/bench.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <iomanip>
#include <ostream>

#include "covsteer/kl_nlp.hpp"
#include "covsteer/wasserstein_nlp.hpp"

namespace covsteer {

std::string to_string(SolverKind s) { return s == SolverKind::CCP ? "CCP" : "NLP"; }
std::string to_string(CostKind c) { return c == CostKind::Wasserstein ? "wasserstein" : "kl"; }

SolverKind parse_solver(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "ccp") return SolverKind::CCP;
  if (lower == "nlp") return SolverKind::NLP;
  throw Error(ErrorKind::Config, "unknown solver '" + name + "' (expected CCP or NLP)");
}

CostKind parse_cost(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "wasserstein") return CostKind::Wasserstein;
  if (lower == "kl") return CostKind::KL;
  throw Error(ErrorKind::Config, "cost: unknown value '" + name + "' (expected wasserstein or kl)");
}

namespace {

SolveReport solve_once(SolverKind solver, CostKind cost, const SteeringProblem& problem, const BenchSettings& settings) {
  BlockOperators ops = assemble(problem);
  if (cost == CostKind::KL) {
    if (solver == SolverKind::CCP) {
      throw Error(ErrorKind::InvalidInput, "CCP applies only to the Wasserstein cost");
    }
    return qn_minimize(KlObjective(problem, std::move(ops)), settings.qn);
  }
  if (solver == SolverKind::CCP) return ccp_minimize(DcObjective(problem, std::move(ops)), settings.ccp);
  return nlp_minimize(WassersteinKObjective(problem, std::move(ops)), settings.qn);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<BenchRecord> run_bench(const ProblemFamily& family, CostKind cost, const std::vector<int>& horizons,
                                   const std::vector<double>& gammas, const std::vector<SolverKind>& solvers,
                                   const BenchSettings& settings) {
  if (settings.repetitions < 1) throw Error(ErrorKind::InvalidInput, "run_bench: repetitions must be positive");
  std::vector<BenchRecord> records;
  for (int N : horizons) {
    for (double gamma : gammas) {
      for (SolverKind solver : solvers) {
        BenchRecord rec;
        rec.solver = solver;
        rec.cost = cost;
        rec.N = N;
        rec.gamma = gamma;
        try {
          const SteeringProblem problem = family(N, gamma);
          std::vector<double> times;
          for (int r = 0; r < settings.repetitions; ++r) {
            const auto start = std::chrono::steady_clock::now();
            const SolveReport report = solve_once(solver, cost, problem, settings);
            times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
            rec.iterations = report.iterations;
            rec.final_objective = report.final_objective();
            if (!converged(report.termination)) rec.error = "MaxIters";
          }
          rec.wall_seconds = median(std::move(times));
        } catch (const std::exception& e) {
          rec.error = e.what();
        }
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
  const auto old_precision = os.precision(17);
  os << "solver,cost,N,gamma,wall_seconds,iterations,final_objective,error\n";
  for (const auto& r : records) {
    os << to_string(r.solver) << ',' << to_string(r.cost) << ',' << r.N << ',' << r.gamma << ',' << r.wall_seconds
       << ',' << r.iterations << ',' << r.final_objective << ',' << csv_field(r.error) << '\n';
  }
  os.precision(old_precision);
}

}  // namespace covsteer
