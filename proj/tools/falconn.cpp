#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "falconn/error.hpp"
#include "falconn/falsify/campaign.hpp"
#include "falconn/sim/trace_io.hpp"
#include "falconn/stl/parser.hpp"
#include "falconn/stl/robustness.hpp"
#include "falconn/surrogate/model.hpp"
#include "falconn/symreg/symbolic_model.hpp"

namespace fs = std::filesystem;
using namespace falconn;

namespace {

constexpr int kExitError = 2;

sim::Trace read_trace(const fs::path& csv) {
  return fs::exists(sim::manifest_path(csv)) ? sim::load_trace(csv)
                                             : sim::load_trace_csv_only(csv);
}

int cmd_falsify(const std::string& config_path, const std::string& out_override,
                const std::optional<std::uint64_t>& seed) {
  falsify::RunConfig cfg = falsify::load_config(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (seed) cfg.seed = *seed;
  if (cfg.output_dir.empty()) cfg.output_dir = "falconn_run";
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  std::ofstream log(cfg.output_dir / "run.log");
  if (!log) throw Error("cannot write " + (cfg.output_dir / "run.log").string());
  const falsify::CampaignResult r = falsify::run_campaign(cfg, &log);
  falsify::persist_run(r, cfg, cfg.output_dir);
  std::printf("outcome %s\nexperiments %d\n", falsify::to_string(r.outcome).c_str(),
              r.experiments);
  if (r.counterexample) std::printf("robustness %.6f\n", r.counterexample_robustness);
  std::printf("run directory %s\n", cfg.output_dir.string().c_str());
  return falsify::exit_code(r.outcome);
}

int cmd_monitor(const std::string& trace_path, const std::string& spec_text) {
  const stl::Formula spec = stl::parse_formula(spec_text);
  const sim::Trace tr = read_trace(trace_path);
  const double rho = stl::robustness_exact(spec, tr.signal(), 0);
  std::printf("%.6f\n", rho);
  return rho < 0.0 ? 1 : 0;
}

int cmd_simulate(const std::string& plant, const std::string& input_path,
                 const std::string& out_path) {
  const sim::SutSpec sut = sim::make_plant(plant);
  const sim::Trace in = sim::load_trace_csv_only(input_path);
  if (in.input_names != sut.input_names) {
    throw BoundViolationError("input columns do not match the inputs of " + plant);
  }
  if (in.size() < 2) throw SchemaError("input file needs at least two rows");
  const sim::Trace out = sim::run_experiment(sut, in.input_signal());
  sim::save_trace(out, out_path);
  std::printf("wrote %zu samples to %s\n", out.size(), out_path.c_str());
  return 0;
}

int cmd_distill(const std::string& model_path, const std::string& dataset_dir,
                std::uint64_t seed) {
  surrogate::TrainConfig tc;
  const surrogate::SurrogateModel model = surrogate::load_checkpoint(model_path, &tc);
  const falsify::Dataset data = falsify::load_dataset(dataset_dir);
  symreg::SrConfig sc;
  sc.seed = seed;
  const symreg::SelectionReport rep =
      symreg::distill(model, data.traces(), sc, tc.solve_step);
  std::printf("%s\n", rep.model.to_string().c_str());
  std::printf("trajectory mse %.6g\n", rep.model.trajectory_mse);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-based falsification of input-driven systems against STL specs"};
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed;
  auto* f = app.add_subcommand("falsify", "Run a falsification campaign");
  f->add_option("--config", config, "Run configuration file")->required()->check(CLI::ExistingFile);
  f->add_option("--out", out, "Run directory (overrides output_dir)");
  f->add_option("--seed", seed, "Master seed (overrides seed)");

  std::string trace, spec;
  auto* m = app.add_subcommand("monitor", "Exact robustness of a trace at t=0");
  m->add_option("--trace", trace, "Trace CSV")->required()->check(CLI::ExistingFile);
  m->add_option("--spec", spec, "Specification")->required();

  std::string plant, input, sim_out;
  auto* s = app.add_subcommand("simulate", "Run a built-in plant on an input CSV");
  s->add_option("--plant", plant, "Plant name")->required();
  s->add_option("--input", input, "Input CSV (time,u_<name>...)")->required()->check(CLI::ExistingFile);
  s->add_option("--out", sim_out, "Output trace CSV")->required();

  std::string model, dataset;
  std::uint64_t distill_seed = 0;
  auto* d = app.add_subcommand("distill", "Distill a surrogate checkpoint into symbolic form");
  d->add_option("--model", model, "Surrogate checkpoint JSON")->required()->check(CLI::ExistingFile);
  d->add_option("--dataset", dataset, "Run directory with dataset.json")->required();
  d->add_option("--seed", distill_seed, "Symbolic regression seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*f) return cmd_falsify(config, out, seed);
    if (*m) return cmd_monitor(trace, spec);
    if (*s) return cmd_simulate(plant, input, sim_out);
    if (*d) return cmd_distill(model, dataset, distill_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
