#include "falconn/falsify/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "falconn/error.hpp"
#include "falconn/ocp/problem.hpp"
#include "falconn/sim/trace_io.hpp"
#include "falconn/stl/parser.hpp"
#include "falconn/stl/robustness.hpp"
#include "falconn/surrogate/lifting.hpp"
#include "falconn/symreg/symbolic_model.hpp"

namespace falconn::falsify {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr int kDatasetSchemaVersion = 1;
constexpr std::uint64_t kTrainSeedOffset = 1000;
constexpr std::uint64_t kSymregSeedOffset = 2000;
constexpr std::uint64_t kFallbackSeedOffset = 3000;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string indexed(const char* pattern, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, i);
  return buf;
}

void note(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n';
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Prefixes every solver log line with the iteration index.
class PrefixBuf : public std::stringbuf {
 public:
  PrefixBuf(std::ostream* out, std::string prefix) : out_(out), prefix_(std::move(prefix)) {}
  ~PrefixBuf() override { flush_lines(); }

 protected:
  int sync() override {
    flush_lines();
    return 0;
  }
  int_type overflow(int_type c) override {
    const int_type r = std::stringbuf::overflow(c);
    if (c == '\n') flush_lines();
    return r;
  }

 private:
  void flush_lines() {
    std::string s = str();
    std::size_t start = 0, nl;
    while ((nl = s.find('\n', start)) != std::string::npos) {
      *out_ << prefix_ << s.substr(start, nl - start + 1);
      start = nl + 1;
    }
    str(s.substr(start));
  }
  std::ostream* out_;
  std::string prefix_;
};

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::kInitializer: return "initializer";
    case Provenance::kOcpCandidate: return "ocp-candidate";
    case Provenance::kFluke: return "fluke";
  }
  return "unknown";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "initializer") return Provenance::kInitializer;
  if (s == "ocp-candidate") return Provenance::kOcpCandidate;
  if (s == "fluke") return Provenance::kFluke;
  throw SchemaError("unknown provenance tag '" + s + "'");
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kFalsified: return "falsified";
    case Outcome::kFlukeOnly: return "fluke-only";
    case Outcome::kBudgetExhausted: return "budget-exhausted";
  }
  return "unknown";
}

int exit_code(Outcome o) { return o == Outcome::kFalsified ? 0 : 3; }

void Dataset::add(sim::Trace trace, Provenance tag) {
  if (!traces_.empty()) {
    const sim::Trace& first = traces_.front();
    if (trace.plant != first.plant || trace.period != first.period ||
        trace.size() != first.size() || trace.input_names != first.input_names ||
        trace.output_names != first.output_names) {
      throw SchemaError("trace does not match the dataset's plant and grid");
    }
  }
  traces_.push_back(std::move(trace));
  tags_.push_back(tag);
}

sim::InputSignal corners_random(const sim::SutSpec& sut, double horizon, double segment,
                                std::uint64_t seed) {
  if (!(horizon > 0.0) || !(segment > 0.0)) throw ConfigError("horizon and segment must be positive");
  std::mt19937_64 rng(seed);
  std::vector<double> bp;
  const auto n = static_cast<std::size_t>(std::ceil(horizon / segment - 1e-9));
  for (std::size_t i = 0; i < std::max<std::size_t>(n, 1); ++i) bp.push_back(i * segment);
  const auto m = sut.input_min.size();
  Eigen::MatrixXd v(static_cast<Eigen::Index>(bp.size()), m);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index c = 0; c < m; ++c) {
      v(i, c) = (rng() & 1u) ? sut.input_max(c) : sut.input_min(c);
    }
  }
  return sim::InputSignal(sut.input_names, std::move(bp), std::move(v), horizon);
}

Dataset initialize_data(const sim::SutSpec& sut, double horizon, const RunConfig& config) {
  Dataset d;
  d.add(sim::run_experiment(sut, corners_random(sut, horizon, config.segment, config.seed)),
        Provenance::kInitializer);
  return d;
}

Validation validate_candidate(const sim::SutSpec& sut, const sim::InputSignal& u,
                              const stl::Formula& spec) {
  Validation v;
  v.trace = sim::run_experiment(sut, u);
  v.robustness = stl::robustness_exact(spec, v.trace.signal(), 0);
  v.counterexample = v.robustness < 0.0;
  return v;
}

double campaign_horizon(const RunConfig& config, const stl::Formula& spec) {
  const double need = stl::formula_horizon(spec);
  const double h = config.horizon > 0.0 ? config.horizon : need;
  if (!(h > 0.0)) throw HorizonError("campaign horizon must be positive");
  if (need > h + 1e-9) {
    throw HorizonError("spec horizon " + fmt(need) + " s exceeds the campaign horizon " + fmt(h) +
                       " s");
  }
  return h;
}

CampaignResult run_campaign(const RunConfig& config, std::ostream* log) {
  config.validate();
  const sim::SutSpec sut = sim::make_plant(config.plant);
  const stl::Formula spec = stl::parse_formula(config.spec);
  const double horizon = campaign_horizon(config, spec);
  const double dt = config.dt > 0.0 ? config.dt : ocp::default_collocation_step(horizon);
  std::vector<int> orders = config.orders;
  if (orders.empty()) orders.assign(sut.output_names.size(), 2);
  if (orders.size() != sut.output_names.size()) {
    throw ConfigError("orders must list one entry per plant output");
  }
  const surrogate::StateLifting lifting = surrogate::build_lifting(orders);
  const surrogate::KnownDynamics known = surrogate::known_dynamics(config.known_dynamics, lifting);

  CampaignResult result;
  std::vector<double> rho;  // exact robustness per dataset trace

  {
    const auto t0 = Clock::now();
    const Validation v =
        validate_candidate(sut, corners_random(sut, horizon, config.segment, config.seed), spec);
    IterationRecord r;
    r.iteration = 0;
    r.robustness = v.robustness;
    r.counterexample = v.counterexample;
    r.provenance = Provenance::kInitializer;
    r.trace_file = indexed("traces/trace_%03zu.csv", 0);
    r.timings.experiment = seconds_since(t0);
    result.dataset.add(v.trace, Provenance::kInitializer);
    rho.push_back(v.robustness);
    result.records.push_back(r);
    result.checkpoints.emplace_back();
    result.experiments = 1;
    note(log, "iteration 0: initializer robustness " + fmt(v.robustness));
    if (v.counterexample) {
      result.outcome = Outcome::kFalsified;
      result.counterexample = v.trace.input_signal();
      result.counterexample_robustness = v.robustness;
      return result;
    }
  }

  bool any_fluke = false;
  for (int k = 1; k <= config.budget; ++k) {
    IterationRecord r;
    r.iteration = k;
    std::string checkpoint;
    std::optional<sim::InputSignal> candidate;
    bool converged = false;
    const std::string tag = "iteration " + std::to_string(k) + ": ";

    try {
      auto t0 = Clock::now();
      surrogate::TrainConfig tc = config.train;
      tc.seed = config.seed + kTrainSeedOffset + static_cast<std::uint64_t>(k);
      const surrogate::TrainResult trained =
          surrogate::train(result.dataset.traces(), tc, lifting, known);
      r.train_loss = trained.loss;
      r.timings.train = seconds_since(t0);
      checkpoint = surrogate::checkpoint_json(trained.model, tc);
      r.model_file = indexed("models/surrogate_%03zu.json", static_cast<std::size_t>(k));
      note(log, tag + "training loss " + fmt(trained.loss));

      t0 = Clock::now();
      symreg::SrConfig sc = config.symreg;
      sc.seed = config.seed + kSymregSeedOffset + static_cast<std::uint64_t>(k);
      const symreg::SelectionReport rep =
          symreg::distill(trained.model, result.dataset.traces(), sc, tc.solve_step);
      r.symbolic_model = rep.model.to_string();
      while (!r.symbolic_model.empty() && r.symbolic_model.back() == '\n') r.symbolic_model.pop_back();
      r.timings.distill = seconds_since(t0);
      note(log, tag + "symbolic model " + r.symbolic_model);

      t0 = Clock::now();
      const auto least = static_cast<std::size_t>(
          std::min_element(rho.begin(), rho.end()) - rho.begin());
      const sim::Trace& seed_trace = result.dataset.traces()[least];
      ocp::TranscribeOptions to;
      to.dt = dt;
      to.horizon = horizon;
      to.k = config.k;
      to.x0 = surrogate::initial_state(lifting, seed_trace);
      to.u_min = sut.input_min;
      to.u_max = sut.input_max;
      to.state_bound = config.state_bound;
      const ocp::OcpProblem problem = ocp::transcribe(rep.model, spec, to);
      const Eigen::VectorXd w0 = ocp::warm_start(problem, seed_trace.input_signal());
      const Eigen::VectorXd c0 = problem.defects(w0);
      r.warm_start_residual = c0.size() ? c0.lpNorm<Eigen::Infinity>() : 0.0;
      Eigen::VectorXd g0;
      const double j0 = problem.objective(w0, g0);

      ocp::SolverOptions so = config.solver;
      std::unique_ptr<PrefixBuf> buf;
      std::unique_ptr<std::ostream> solver_log;
      if (log) {
        buf = std::make_unique<PrefixBuf>(log, tag);
        solver_log = std::make_unique<std::ostream>(buf.get());
        so.log = solver_log.get();
      }
      const ocp::NlpSolution sol = ocp::make_solver(config.solver_method, so)->solve(problem, w0);
      if (solver_log) solver_log->flush();
      r.ocp_status = ocp::to_string(sol.status);
      r.ocp_objective = sol.objective;
      r.ocp_residual = sol.residual;
      r.ocp_iterations = sol.iterations;
      r.timings.ocp = seconds_since(t0);
      note(log, tag + "ocp " + r.ocp_status + " objective " + fmt(sol.objective) + " residual " +
                    fmt(sol.residual));
      const bool improved = !sol.best_objective.empty() &&
                            sol.best_objective.back() > j0 + 1e-9 * std::max(1.0, std::abs(j0));
      if (!improved) {
        // The warm-start input is already in the dataset, so repeating it
        // cannot change the outcome.
        r.fallback = "ocp: " + r.ocp_status + " without improvement over the warm start";
      } else {
        candidate = sim::resample_input(ocp::extract_input(sol, problem, sut.input_names),
                                        sut.period);
        converged = sol.status == ocp::SolveStatus::kConverged;
      }
    } catch (const TrainingError& e) {
      r.fallback = std::string("train: ") + e.what();
    } catch (const DistillationError& e) {
      r.fallback = std::string("distill: ") + e.what();
    } catch (const DivergenceError& e) {
      r.fallback = std::string("divergence: ") + e.what();
    }

    if (!candidate) {
      note(log, tag + "fallback (" + r.fallback + ")");
      candidate = corners_random(sut, horizon, config.segment,
                                 config.seed + kFallbackSeedOffset + static_cast<std::uint64_t>(k));
    }

    const auto t0 = Clock::now();
    const Validation v = validate_candidate(sut, *candidate, spec);
    r.timings.experiment = seconds_since(t0);
    ++result.experiments;
    r.robustness = v.robustness;
    r.counterexample = v.counterexample && converged && r.fallback.empty();
    r.fluke = v.counterexample && !r.counterexample;
    r.provenance = r.fluke                 ? Provenance::kFluke
                   : r.fallback.empty()    ? Provenance::kOcpCandidate
                                           : Provenance::kInitializer;
    r.trace_file = indexed("traces/trace_%03zu.csv", result.dataset.size());
    result.dataset.add(v.trace, r.provenance);
    rho.push_back(v.robustness);
    any_fluke = any_fluke || r.fluke;
    note(log, tag + "plant robustness " + fmt(v.robustness) +
                  (r.counterexample ? " (counterexample)" : r.fluke ? " (fluke)" : ""));
    result.records.push_back(r);
    result.checkpoints.push_back(std::move(checkpoint));
    if (r.counterexample) {
      result.outcome = Outcome::kFalsified;
      result.counterexample = *candidate;
      result.counterexample_robustness = v.robustness;
      return result;
    }
  }
  result.outcome = any_fluke ? Outcome::kFlukeOnly : Outcome::kBudgetExhausted;
  return result;
}

std::string record_json(const IterationRecord& r) {
  json j;
  j["iteration"] = r.iteration;
  j["robustness"] = r.robustness;
  j["ocp_status"] = r.ocp_status;
  j["ocp_objective"] = r.ocp_objective;
  j["ocp_residual"] = r.ocp_residual;
  j["ocp_iterations"] = r.ocp_iterations;
  j["warm_start_residual"] = r.warm_start_residual;
  j["fluke"] = r.fluke;
  j["counterexample"] = r.counterexample;
  j["fallback"] = r.fallback;
  j["train_loss"] = r.train_loss;
  j["symbolic_model"] = r.symbolic_model;
  j["provenance"] = to_string(r.provenance);
  j["trace_file"] = r.trace_file;
  j["model_file"] = r.model_file;
  return j.dump();
}

std::string timings_json(const IterationRecord& r) {
  json j;
  j["iteration"] = r.iteration;
  j["train_s"] = r.timings.train;
  j["distill_s"] = r.timings.distill;
  j["ocp_s"] = r.timings.ocp;
  j["experiment_s"] = r.timings.experiment;
  return j.dump();
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("write failed for " + p.string());
}

json signal_json(const sim::InputSignal& u) {
  json j;
  j["channels"] = u.channels();
  j["breakpoints"] = u.breakpoints();
  j["horizon"] = u.horizon();
  json rows = json::array();
  for (Eigen::Index i = 0; i < u.values().rows(); ++i) {
    std::vector<double> row(u.values().row(i).begin(), u.values().row(i).end());
    rows.push_back(row);
  }
  j["values"] = rows;
  return j;
}

}  // namespace

void persist_run(const CampaignResult& result, const RunConfig& config,
                 const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "traces");
  fs::create_directories(dir / "models");
  write_text(dir / "config.toml", format_config(config));

  json ds;
  ds["schema_version"] = kDatasetSchemaVersion;
  json entries = json::array();
  for (std::size_t i = 0; i < result.dataset.size(); ++i) {
    const std::string file = indexed("traces/trace_%03zu.csv", i);
    sim::save_trace(result.dataset.traces()[i], dir / file);
    entries.push_back({{"file", file}, {"provenance", to_string(result.dataset.provenance()[i])}});
  }
  ds["traces"] = entries;
  write_text(dir / "dataset.json", ds.dump(2) + "\n");

  std::string iterations, timings;
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const IterationRecord& r = result.records[i];
    iterations += record_json(r) + "\n";
    timings += timings_json(r) + "\n";
    if (i < result.checkpoints.size() && !result.checkpoints[i].empty() && !r.model_file.empty()) {
      write_text(dir / r.model_file, result.checkpoints[i]);
    }
  }
  write_text(dir / "iterations.jsonl", iterations);
  write_text(dir / "timings.jsonl", timings);

  json res;
  res["outcome"] = to_string(result.outcome);
  res["experiments"] = result.experiments;
  res["iterations"] = result.records.size();
  if (result.counterexample) {
    res["counterexample_robustness"] = result.counterexample_robustness;
    res["counterexample_trace"] = result.records.back().trace_file;
    res["counterexample_input"] = signal_json(*result.counterexample);
  }
  res["input_hold"] = "zero-order hold at the plant sampling period";
  write_text(dir / "result.json", res.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "dataset.json");
  if (!in) throw SchemaError("missing dataset.json in " + dir.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed dataset.json: ") + e.what());
  }
  if (!j.contains("schema_version") || j["schema_version"] != kDatasetSchemaVersion) {
    throw SchemaError("unsupported dataset schema version");
  }
  Dataset d;
  try {
    for (const auto& e : j.at("traces")) {
      d.add(sim::load_trace(dir / e.at("file").get<std::string>()),
            provenance_from_string(e.at("provenance").get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed dataset.json: ") + e.what());
  }
  return d;
}

}  // namespace falconn::falsify
