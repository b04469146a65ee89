#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "falconn/error.hpp"
#include "falconn/sim/system.hpp"
#include "falconn/sim/trace_io.hpp"

namespace falconn::sim {
namespace {

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

InputSignal constant_u(double v, double horizon) {
  return InputSignal::constant({"u"}, scalar(v), horizon);
}

double decay_error(double step) {
  const Dynamics f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) {
    return Eigen::VectorXd(-x);
  };
  const auto grid = uniform_grid(1.0, step);
  const Eigen::MatrixXd xs = integrate_rk4(f, scalar(1.0), constant_u(0, 1.0), grid);
  return std::abs(xs(xs.rows() - 1, 0) - std::exp(-1.0));
}

TEST(Rk4, ExponentialDecay) { EXPECT_LT(decay_error(0.01), 1e-8); }

TEST(Rk4, ZeroField) {
  const Dynamics f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(x.size()));
  };
  const auto grid = uniform_grid(2.0, 0.1);
  const Eigen::MatrixXd xs = integrate_rk4(f, scalar(5.0), constant_u(0, 2.0), grid);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) EXPECT_EQ(xs(i, 0), 5.0);
}

TEST(Rk4, UnitInputIntegratesToTime) {
  const Dynamics f = [](const Eigen::VectorXd&, const Eigen::VectorXd& u, double) {
    return Eigen::VectorXd(u);
  };
  const auto grid = uniform_grid(1.0, 0.125);
  const Eigen::MatrixXd xs = integrate_rk4(f, scalar(0.0), constant_u(1, 1.0), grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_DOUBLE_EQ(xs(static_cast<Eigen::Index>(i), 0), grid[i]);
  }
}

TEST(Rk4, FourthOrderRatio) {
  const double ratio = decay_error(0.1) / decay_error(0.05);
  EXPECT_GE(ratio, 14.0);
  EXPECT_LE(ratio, 18.0);
}

TEST(Rk4, DivergenceReportsTime) {
  const Dynamics f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) {
    return Eigen::VectorXd(x.array().square());
  };
  const auto grid = uniform_grid(2.0, 0.01);
  try {
    integrate_rk4(f, scalar(1.0), constant_u(0, 2.0), grid);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    // x = 1/(1-t) blows up at t = 1
    EXPECT_GT(e.time(), 0.9);
    EXPECT_LT(e.time(), 1.1);
  }
}

TEST(Experiment, MagLevSettlesNearReference) {
  const SutSpec sut = make_plant("MagLevAnalog");
  const Trace tr = run_experiment(sut, InputSignal::constant({"Ref"}, scalar(2.0), 12.0));
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.times[i] >= 10.0) {
      EXPECT_LT(std::abs(tr.outputs(static_cast<Eigen::Index>(i), 0) - 2.0), 0.05);
    }
  }
}

TEST(Experiment, Deterministic) {
  for (const std::string& name : plant_names()) {
    const SutSpec sut = make_plant(name);
    Eigen::MatrixXd v(3, 1);
    v << sut.input_min(0), sut.input_max(0), sut.input_min(0);
    const InputSignal u(sut.input_names, {0.0, 1.0, 2.5}, v, 4.0);
    EXPECT_EQ(run_experiment(sut, u), run_experiment(sut, u)) << name;
  }
}

TEST(Experiment, RejectsOutOfBoundsInput) {
  const SutSpec sut = make_plant("MagLevAnalog");
  EXPECT_THROW(run_experiment(sut, InputSignal::constant({"Ref"}, scalar(3.5), 1.0)),
               BoundViolationError);
}

TEST(Experiment, TraceShapeAndBounds) {
  const SutSpec sut = make_plant("LinearSecondOrder");
  const Trace tr = run_experiment(sut, InputSignal::constant({"Ref"}, scalar(1.0), 3.0));
  EXPECT_EQ(tr.size(), 301u);
  EXPECT_EQ(tr.times.front(), 0.0);
  EXPECT_NEAR(tr.times.back(), 3.0, 1e-12);
  EXPECT_EQ(tr.inputs.rows(), 301);
  EXPECT_EQ(tr.outputs.rows(), 301);
  EXPECT_TRUE((tr.inputs.array() <= 1.0).all() && (tr.inputs.array() >= -1.0).all());
}

TEST(Experiment, PlantsBoundedUnderCornerInputs) {
  for (const std::string& name : plant_names()) {
    const SutSpec sut = make_plant(name);
    for (const Eigen::VectorXd& level : {sut.input_min, sut.input_max}) {
      const Trace tr = run_experiment(sut, InputSignal::constant(sut.input_names, level, 40.0));
      EXPECT_TRUE(tr.outputs.allFinite()) << name;
      EXPECT_LT(tr.outputs.cwiseAbs().maxCoeff(), 100.0) << name;
    }
  }
}

TEST(Experiment, UnknownPlant) { EXPECT_THROW(make_plant("Nope"), ConfigError); }

TEST(Resample, RefinementKeepsValues) {
  Eigen::MatrixXd v(8, 1);
  v << 1, 3, 3, 1, 3, 1, 1, 3;
  std::vector<double> bp;
  for (int i = 0; i < 8; ++i) bp.push_back(5.0 * i);
  const InputSignal u({"Ref"}, bp, v, 40.0);
  const InputSignal r = resample_input(u, 0.01);
  EXPECT_EQ(r.num_segments(), 4000u);
  for (int i = 0; i < 4000; i += 7) {
    const double t = 0.01 * i;
    EXPECT_EQ(r.at(t)(0), u.at(t)(0)) << t;
  }
}

TEST(Resample, OwnPeriodIsIdentity) {
  Eigen::MatrixXd v(4, 1);
  v << 0.5, -1, 1, 0;
  const InputSignal u({"u"}, {0.0, 0.2, 0.4, 0.6}, v, 0.8);
  const InputSignal r = resample_input(u, 0.2);
  ASSERT_EQ(r.num_segments(), u.num_segments());
  for (std::size_t i = 0; i < u.num_segments(); ++i) {
    EXPECT_NEAR(r.breakpoints()[i], u.breakpoints()[i], 1e-12);
  }
  EXPECT_EQ(r.values(), u.values());
}

TEST(Resample, CollocationStepToSutPeriod) {
  Eigen::MatrixXd v(5, 1);
  v << 1, -1, 1, -1, 1;
  const InputSignal u({"u"}, {0.0, 0.2, 0.4, 0.6, 0.8}, v, 1.0);
  const InputSignal r = resample_input(u, 0.01);
  ASSERT_EQ(r.num_segments(), 100u);
  for (std::size_t step = 0; step < 5; ++step) {
    for (std::size_t j = 0; j < 20; ++j) {
      EXPECT_EQ(r.values()(static_cast<Eigen::Index>(step * 20 + j), 0), v(static_cast<Eigen::Index>(step), 0));
    }
  }
}

TEST(TraceIo, RoundTripIsBitExact) {
  const SutSpec sut = make_plant("VanDerPolForced");
  Eigen::MatrixXd v(2, 1);
  v << 1.0 / 3.0, -0.7;
  const Trace tr = run_experiment(sut, InputSignal(sut.input_names, {0.0, 1.3}, v, 3.0));
  std::ostringstream csv;
  write_trace_csv(csv, tr);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "time,u_u,y_Pos");
  std::istringstream in(csv.str());
  EXPECT_EQ(parse_trace(in, trace_manifest(tr)), tr);

  const auto dir = std::filesystem::temp_directory_path() / "falconn_trace_io_test";
  std::filesystem::create_directories(dir);
  save_trace(tr, dir / "t.csv");
  EXPECT_EQ(load_trace(dir / "t.csv"), tr);
  std::filesystem::remove(dir / "t.json");
  EXPECT_THROW(load_trace(dir / "t.csv"), SchemaError);
  std::filesystem::remove_all(dir);
}

TEST(TraceIo, InputSignalReconstruction) {
  const SutSpec sut = make_plant("LinearSecondOrder");
  Eigen::MatrixXd v(2, 1);
  v << 0.25, -0.5;
  const InputSignal u(sut.input_names, {0.0, 1.0}, v, 2.0);
  const Trace tr = run_experiment(sut, u);
  EXPECT_EQ(run_experiment(sut, tr.input_signal()), tr);
}

TEST(TraceIo, MalformedRowsAreSchemaErrors) {
  std::istringstream in("time,u_a,y_b\n0,1\n");
  Trace tr;
  tr.input_names = {"a"};
  tr.output_names = {"b"};
  tr.x0 = Eigen::VectorXd::Zero(1);
  EXPECT_THROW(parse_trace(in, trace_manifest(tr)), SchemaError);
}

}  // namespace
}  // namespace falconn::sim
