#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "falconn/error.hpp"
#include "falconn/falsify/campaign.hpp"
#include "falconn/sim/trace_io.hpp"
#include "falconn/stl/parser.hpp"
#include "support/toy_plants.hpp"

namespace falconn::falsify {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("falconn_falsify_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig quick_config(const std::string& spec, int budget, std::uint64_t seed) {
  RunConfig c;
  c.plant = "LinearSecondOrder";
  c.spec = spec;
  c.budget = budget;
  c.seed = seed;
  return c;
}

TEST(CornersRandom, SegmentsAndBounds) {
  const sim::SutSpec sut = sim::make_plant("MagLevAnalog");
  const sim::InputSignal u = corners_random(sut, 40.0, 5.0, 7);
  EXPECT_EQ(u.num_segments(), 8u);
  EXPECT_EQ(u.horizon(), 40.0);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_DOUBLE_EQ(u.breakpoints()[i], 5.0 * static_cast<double>(i));
    const double v = u.values()(static_cast<Eigen::Index>(i), 0);
    EXPECT_TRUE(v == 1.0 || v == 3.0) << v;
  }
}

TEST(CornersRandom, SeededAndVaried) {
  const sim::SutSpec sut = sim::make_plant("MagLevAnalog");
  EXPECT_EQ(corners_random(sut, 40.0, 5.0, 3).values(), corners_random(sut, 40.0, 5.0, 3).values());
  std::set<std::vector<double>> seen;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Eigen::MatrixXd v = corners_random(sut, 40.0, 5.0, s).values();
    seen.insert(std::vector<double>(v.data(), v.data() + v.size()));
  }
  EXPECT_GT(seen.size(), 10u);
}

TEST(CornersRandom, ShortHorizonIsOneSegment) {
  const sim::SutSpec sut = sim::make_plant("MagLevAnalog");
  const sim::InputSignal u = corners_random(sut, 3.0, 5.0, 1);
  EXPECT_EQ(u.num_segments(), 1u);
  EXPECT_EQ(u.horizon(), 3.0);
  const sim::InputSignal v = corners_random(sut, 12.0, 5.0, 1);
  EXPECT_EQ(v.num_segments(), 3u);  // last one truncated to 2 s
}

TEST(InitializeData, OneInitializerTrace) {
  const sim::SutSpec sut = sim::make_plant("LinearSecondOrder");
  RunConfig c = quick_config("G[0,10](abs(Pos) < 2)", 1, 4);
  const Dataset d = initialize_data(sut, 10.0, c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.provenance()[0], Provenance::kInitializer);
  EXPECT_DOUBLE_EQ(d.traces()[0].horizon(), 10.0);
  EXPECT_EQ(d, initialize_data(sut, 10.0, c));
}

TEST(Dataset, RejectsMismatchedTraces) {
  Dataset d;
  const sim::SutSpec a = sim::make_plant("LinearSecondOrder");
  d.add(sim::run_experiment(a, corners_random(a, 10.0, 5.0, 1)), Provenance::kInitializer);
  EXPECT_THROW(d.add(sim::run_experiment(a, corners_random(a, 5.0, 5.0, 1)), Provenance::kFluke),
               SchemaError);
  const sim::SutSpec b = sim::make_plant("VanDerPolForced");
  EXPECT_THROW(d.add(sim::run_experiment(b, corners_random(b, 10.0, 5.0, 1)), Provenance::kFluke),
               SchemaError);
}

TEST(Provenance, TagsRoundTrip) {
  for (auto p : {Provenance::kInitializer, Provenance::kOcpCandidate, Provenance::kFluke}) {
    EXPECT_EQ(provenance_from_string(to_string(p)), p);
  }
  EXPECT_THROW(provenance_from_string("ocp"), SchemaError);
}

TEST(ValidateCandidate, StrictSign) {
  const sim::SutSpec sut = falconn::testing::first_order_plant();
  const auto zero = sim::InputSignal::constant({"u"}, Eigen::VectorXd::Zero(1), 1.0);
  const Validation at_zero = validate_candidate(sut, zero, stl::parse_formula("G[0,1](y <= 0)"));
  EXPECT_EQ(at_zero.robustness, 0.0);
  EXPECT_FALSE(at_zero.counterexample);
  const Validation pos = validate_candidate(sut, zero, stl::parse_formula("G[0,1](y < 0.5)"));
  EXPECT_NEAR(pos.robustness, 0.5, 1e-15);
  EXPECT_FALSE(pos.counterexample);
  const auto one = sim::InputSignal::constant({"u"}, Eigen::VectorXd::Ones(1), 1.0);
  const Validation neg = validate_candidate(sut, one, stl::parse_formula("G[0,1](y < 0.5)"));
  EXPECT_LT(neg.robustness, 0.0);
  EXPECT_TRUE(neg.counterexample);
}

TEST(Config, ParseAndDefaults) {
  const RunConfig c = parse_config(R"toml(# campaign
plant = "LinearSecondOrder"
spec = "G[0,10](abs(Pos) < 2)"   # reachable
budget = 7
orders = [2]
seed = 12

[train]
hidden = [8, 4]
adam_epochs = 50

[symreg]
iterations = 20

[solver]
method = "augmented-lagrangian"
max_iterations = 500
)toml");
  EXPECT_EQ(c.plant, "LinearSecondOrder");
  EXPECT_EQ(c.spec, "G[0,10](abs(Pos) < 2)");
  EXPECT_EQ(c.budget, 7);
  EXPECT_EQ(c.orders, std::vector<int>{2});
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(c.train.hidden, (std::vector<int>{8, 4}));
  EXPECT_EQ(c.train.adam_epochs, 50);
  EXPECT_EQ(c.train.learning_rate, 5e-2);
  EXPECT_EQ(c.symreg.iterations, 20);
  EXPECT_EQ(c.symreg.population, 50);
  EXPECT_EQ(c.solver_method, "augmented-lagrangian");
  EXPECT_EQ(c.solver.max_iterations, 500);
  EXPECT_EQ(c.k, 2.0);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, FormatRoundTrip) {
  RunConfig c = quick_config("F[0,1](x > \"odd\")", 3, 99);
  c.orders = {2, 1};
  c.train.zero_init = true;
  c.symreg.perturb_scale = 0.1 + 0.2;
  c.output_dir = "runs/a b";
  const RunConfig d = parse_config(format_config(c));
  EXPECT_EQ(format_config(d), format_config(c));
  EXPECT_EQ(d.spec, c.spec);
  EXPECT_EQ(d.symreg.perturb_scale, c.symreg.perturb_scale);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("plantt = \"x\""), ConfigError);
  EXPECT_THROW(parse_config("budget = ten"), ConfigError);
  EXPECT_THROW(parse_config("budget = 2.5"), ConfigError);
  EXPECT_THROW(parse_config("[optim]\nx = 1"), ConfigError);
  EXPECT_THROW(parse_config("plant \"x\""), ConfigError);
  EXPECT_THROW(parse_config("plant = x"), ConfigError);
  try {
    parse_config("plant = \"a\"\n\nbudget = \"3\"");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  RunConfig c = quick_config("G[0,1](Pos < 1)", 0, 1);
  EXPECT_THROW(c.validate(), ConfigError);
  c.budget = 1;
  c.solver_method = "sqp";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(CampaignHorizon, DefaultsToSpec) {
  RunConfig c = quick_config("G[0,10](abs(Pos) < 2)", 1, 1);
  EXPECT_EQ(campaign_horizon(c, stl::parse_formula(c.spec)), 10.0);
  c.horizon = 12.0;
  EXPECT_EQ(campaign_horizon(c, stl::parse_formula(c.spec)), 12.0);
  c.horizon = 5.0;
  EXPECT_THROW(campaign_horizon(c, stl::parse_formula(c.spec)), HorizonError);
}

TEST(Campaign, InitialViolationNeedsNoTraining) {
  const CampaignResult r = run_campaign(quick_config("G[0,10](abs(Pos) < 0.5)", 10, 3));
  EXPECT_EQ(r.outcome, Outcome::kFalsified);
  EXPECT_EQ(r.experiments, 1);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_TRUE(r.records[0].model_file.empty());
  EXPECT_EQ(r.records[0].ocp_status, "none");
  ASSERT_TRUE(r.counterexample.has_value());
  EXPECT_LT(r.counterexample_robustness, 0.0);
  EXPECT_EQ(exit_code(r.outcome), 0);
}

void check_invariants(const CampaignResult& r, const RunConfig& c) {
  EXPECT_EQ(static_cast<std::size_t>(r.experiments), r.records.size());
  EXPECT_EQ(r.dataset.size(), r.records.size());
  EXPECT_LE(r.experiments, c.budget + 1);
  for (const auto& rec : r.records) {
    if (rec.fluke) {
      EXPECT_LE(rec.robustness, 0.0);
      EXPECT_NE(rec.ocp_status, "converged");
    }
    if (rec.counterexample) {
      EXPECT_LT(rec.robustness, 0.0);
    }
    if (rec.warm_start_residual >= 0.0) EXPECT_LT(rec.warm_start_residual, 1e-8);
  }
  if (r.outcome == Outcome::kFalsified && r.records.size() > 1) {
    EXPECT_EQ(r.records.back().ocp_status, "converged");
    EXPECT_TRUE(r.records.back().counterexample);
    // The returned input reproduces the violation on the plant.
    const Validation v = validate_candidate(sim::make_plant(c.plant), *r.counterexample,
                                            stl::parse_formula(c.spec));
    EXPECT_EQ(v.robustness, r.counterexample_robustness);
  }
}

TEST(Campaign, UnfalsifiableExhaustsBudget) {
  RunConfig c = quick_config("G[0,10](abs(Pos) < 100)", 1, 5);
  const CampaignResult r = run_campaign(c);
  EXPECT_EQ(r.outcome, Outcome::kBudgetExhausted);
  EXPECT_EQ(r.experiments, 2);
  EXPECT_FALSE(r.counterexample.has_value());
  EXPECT_EQ(exit_code(r.outcome), 3);
  check_invariants(r, c);
}

TEST(Campaign, FalsifiesReachableSpecAndPersists) {
  RunConfig c = quick_config("G[0,10](abs(Pos) < 2)", 10, 2);
  std::ostringstream log;
  const CampaignResult r = run_campaign(c, &log);
  EXPECT_EQ(r.outcome, Outcome::kFalsified);
  check_invariants(r, c);
  EXPECT_NE(log.str().find("major 1 "), std::string::npos);

  const fs::path dir = scratch_dir("persist");
  persist_run(r, c, dir);
  const Dataset d = load_dataset(dir);
  EXPECT_EQ(d, r.dataset);
  std::size_t trace_files = 0;
  for (const auto& e : fs::directory_iterator(dir / "traces")) {
    trace_files += e.path().extension() == ".csv";
  }
  EXPECT_EQ(trace_files, r.dataset.size());
  EXPECT_LE(trace_files, static_cast<std::size_t>(c.budget + 1));
  std::ifstream in(dir / "iterations.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, r.records.size());
  for (const auto& rec : r.records) {
    EXPECT_TRUE(fs::exists(dir / rec.trace_file)) << rec.trace_file;
    if (!rec.model_file.empty()) EXPECT_TRUE(fs::exists(dir / rec.model_file));
  }
  EXPECT_EQ(load_config(dir / "config.toml").spec, c.spec);

  fs::remove(sim::manifest_path(dir / "traces/trace_000.csv"));
  EXPECT_THROW(load_dataset(dir), SchemaError);
  fs::remove_all(dir);
}

TEST(Campaign, SameSeedSameRecords) {
  RunConfig c = quick_config("G[0,10](abs(Pos) < 100)", 2, 8);
  const CampaignResult a = run_campaign(c);
  const CampaignResult b = run_campaign(c);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(record_json(a.records[i]), record_json(b.records[i]));
  }
  EXPECT_EQ(a.dataset, b.dataset);
}

TEST(LoadDataset, MissingDirectory) {
  EXPECT_THROW(load_dataset(scratch_dir("missing")), SchemaError);
}

}  // namespace
}  // namespace falconn::falsify
