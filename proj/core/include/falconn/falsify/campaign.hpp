#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "falconn/falsify/config.hpp"
#include "falconn/sim/input_signal.hpp"
#include "falconn/sim/system.hpp"
#include "falconn/stl/formula.hpp"

namespace falconn::falsify {

enum class Provenance { kInitializer, kOcpCandidate, kFluke };
std::string to_string(Provenance p);
/// Throws SchemaError on an unknown tag.
Provenance provenance_from_string(const std::string& s);

/// Traces in acquisition order, all from one plant on one grid.
class Dataset {
 public:
  /// Throws SchemaError if the trace does not match the plant, period or
  /// horizon of the traces already present.
  void add(sim::Trace trace, Provenance tag);

  std::size_t size() const { return traces_.size(); }
  bool empty() const { return traces_.empty(); }
  const std::vector<sim::Trace>& traces() const { return traces_; }
  const std::vector<Provenance>& provenance() const { return tags_; }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<sim::Trace> traces_;
  std::vector<Provenance> tags_;
};

struct StageTimings {
  double train = 0.0;
  double distill = 0.0;
  double ocp = 0.0;
  double experiment = 0.0;
};

struct IterationRecord {
  int iteration = 0;  // 0 is the initializer experiment
  double robustness = 0.0;
  /// "none" when no OCP was solved (initializer or fallback).
  std::string ocp_status = "none";
  double ocp_objective = 0.0;
  double ocp_residual = 0.0;
  int ocp_iterations = 0;
  /// Max defect of the warm start; negative when no warm start was built.
  double warm_start_residual = -1.0;
  bool fluke = false;
  bool counterexample = false;
  /// Set when a stage failed and a corners-random input replaced the
  /// candidate; names the failing stage and error.
  std::string fallback;
  double train_loss = 0.0;
  std::string symbolic_model;
  Provenance provenance = Provenance::kInitializer;
  std::string trace_file;
  std::string model_file;
  StageTimings timings;
};

enum class Outcome { kFalsified, kFlukeOnly, kBudgetExhausted };
std::string to_string(Outcome o);
/// 0 falsified, 3 otherwise.
int exit_code(Outcome o);

struct CampaignResult {
  Outcome outcome = Outcome::kBudgetExhausted;
  std::optional<sim::InputSignal> counterexample;
  double counterexample_robustness = 0.0;
  int experiments = 0;
  std::vector<IterationRecord> records;
  Dataset dataset;
  /// Surrogate checkpoint JSON per record (empty when no model was trained).
  std::vector<std::string> checkpoints;
};

/// Corners-random piecewise-constant input: one bound per channel per
/// segment, last segment truncated at the horizon.
sim::InputSignal corners_random(const sim::SutSpec& sut, double horizon, double segment,
                                std::uint64_t seed);

/// One corners-random experiment, tagged as initializer.
Dataset initialize_data(const sim::SutSpec& sut, double horizon, const RunConfig& config);

struct Validation {
  sim::Trace trace;
  double robustness = 0.0;
  bool counterexample = false;  // robustness < 0
};

Validation validate_candidate(const sim::SutSpec& sut, const sim::InputSignal& u,
                              const stl::Formula& spec);

/// Experiment horizon of a run: the configured one, or the spec horizon.
/// Throws HorizonError when the spec does not fit.
double campaign_horizon(const RunConfig& config, const stl::Formula& spec);

/// Learn, distill, optimize and validate until a converged OCP candidate
/// violates the spec on the plant or the budget runs out. `log` receives one
/// line per stage when set.
CampaignResult run_campaign(const RunConfig& config, std::ostream* log = nullptr);

/// JSON object of a record without its timings.
std::string record_json(const IterationRecord& r);
std::string timings_json(const IterationRecord& r);

/// Writes config.toml, traces/, models/, dataset.json, iterations.jsonl,
/// timings.jsonl and result.json under `dir`. The file references in the
/// records are relative to `dir`.
void persist_run(const CampaignResult& result, const RunConfig& config,
                 const std::filesystem::path& dir);

/// Reads dataset.json and every trace it lists. Throws SchemaError.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace falconn::falsify
