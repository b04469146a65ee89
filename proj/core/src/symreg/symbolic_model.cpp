#include "falconn/symreg/symbolic_model.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "falconn/error.hpp"

namespace falconn::symreg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool blown_up(const Eigen::VectorXd& z) {
  return !z.allFinite() || z.lpNorm<Eigen::Infinity>() > sim::kDivergenceThreshold;
}

}  // namespace

SymbolicModel::SymbolicModel(surrogate::StateLifting lifting, std::vector<Expr> rows,
                             std::vector<std::string> input_names,
                             std::vector<std::string> output_names)
    : lifting_(std::move(lifting)),
      rows_(std::move(rows)),
      input_names_(std::move(input_names)),
      output_names_(std::move(output_names)) {
  if (static_cast<int>(rows_.size()) != lifting_.num_outputs()) {
    throw Error("symbolic model needs one expression per driven row");
  }
  for (const Expr& e : rows_) {
    if (e.max_z_index() >= dim() || e.max_u_index() >= num_inputs()) {
      throw Error("expression " + e.to_string() + " references an unknown variable");
    }
    const ExprJacobian j = expr_jacobian(e, dim(), num_inputs());
    dz_.push_back(j.dz);
    du_.push_back(j.du);
  }
}

Eigen::VectorXd SymbolicModel::derivative(const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& u) const {
  Eigen::VectorXd dz = lifting_.A * z;
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    dz(lifting_.driven_rows[r]) += rows_[r].eval(z.data(), u.data());
  }
  return dz;
}

void SymbolicModel::jacobians(const Eigen::VectorXd& z, const Eigen::VectorXd& u,
                              Eigen::MatrixXd& jz, Eigen::MatrixXd& ju) const {
  jz = lifting_.A;
  ju = Eigen::MatrixXd::Zero(dim(), num_inputs());
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const int row = lifting_.driven_rows[r];
    for (int i = 0; i < dim(); ++i) jz(row, i) += dz_[r][static_cast<std::size_t>(i)].eval(z.data(), u.data());
    for (int j = 0; j < num_inputs(); ++j) ju(row, j) = du_[r][static_cast<std::size_t>(j)].eval(z.data(), u.data());
  }
}

sim::Dynamics SymbolicModel::dynamics() const {
  auto self = std::make_shared<const SymbolicModel>(*this);
  return [self](const Eigen::VectorXd& z, const Eigen::VectorXd& u, double) {
    return self->derivative(z, u);
  };
}

bool SymbolicModel::input_driven(const Eigen::MatrixXd& z, const Eigen::MatrixXd& u) const {
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    for (const Expr& d : du_[r]) {
      if (d.complexity() == 1 && d.nodes()[0].op == Op::kConst) {
        if (d.nodes()[0].value != 0.0) return true;
        continue;
      }
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const Eigen::VectorXd zi = z.row(i).transpose(), ui = u.row(i).transpose();
        const double v = d.eval(zi, ui);
        if (std::isfinite(v) && std::abs(v) > 1e-12) return true;
      }
    }
  }
  return false;
}

std::string SymbolicModel::to_string() const {
  std::string s;
  for (const Expr& e : rows_) s += e.to_string() + "\n";
  return s;
}

double trajectory_mse(const SymbolicModel& model,
                      std::span<const surrogate::TrainingTrace> data) {
  double total = 0.0;
  for (const surrogate::TrainingTrace& tt : data) {
    Eigen::VectorXd z = tt.z0;
    double sq = 0.0;
    const std::size_t n = tt.times.size();
    for (std::size_t k = 0; k < n; ++k) {
      sq += (model.lifting().C * z - tt.outputs.row(static_cast<Eigen::Index>(k)).transpose())
                .squaredNorm();
      if (k + 1 == n) break;
      const double h = tt.times[k + 1] - tt.times[k];
      const Eigen::VectorXd u = tt.inputs.row(static_cast<Eigen::Index>(k)).transpose();
      const Eigen::VectorXd k1 = model.derivative(z, u);
      const Eigen::VectorXd k2 = model.derivative(z + 0.5 * h * k1, u);
      const Eigen::VectorXd k3 = model.derivative(z + 0.5 * h * k2, u);
      const Eigen::VectorXd k4 = model.derivative(z + h * k3, u);
      z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (blown_up(z)) return kInf;
    }
    total += sq / (static_cast<double>(n) * static_cast<double>(tt.outputs.cols()));
  }
  return std::isfinite(total) ? total : kInf;
}

SelectionReport select_candidate(const std::vector<Front>& fronts,
                                 std::span<const sim::Trace> traces,
                                 const surrogate::StateLifting& lifting,
                                 const std::vector<std::string>& input_names,
                                 const std::vector<std::string>& output_names,
                                 double solve_step, const DerivativeSamples& probe) {
  if (static_cast<int>(fronts.size()) != lifting.num_outputs()) {
    throw DistillationError("need one front per driven row");
  }
  for (const Front& f : fronts) {
    if (f.empty()) throw DistillationError("empty Pareto front");
  }
  const auto data = surrogate::prepare_dataset(lifting, traces, solve_step);
  const Eigen::Index probe_n = std::min<Eigen::Index>(probe.size(), 200);
  const Eigen::MatrixXd pz = probe.z.topRows(probe_n), pu = probe.u.topRows(probe_n);

  auto build = [&](const std::vector<std::size_t>& choice) {
    std::vector<Expr> rows;
    for (std::size_t r = 0; r < fronts.size(); ++r) rows.push_back(fronts[r][choice[r]].expr);
    SymbolicModel m(lifting, std::move(rows), input_names, output_names);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
      m.derivative_mse.push_back(fronts[r][choice[r]].mse);
    }
    return m;
  };
  auto score = [&](const SymbolicModel& m) {
    if (!m.input_driven(pz, pu)) return kInf;
    return trajectory_mse(m, data);
  };

  SelectionReport report;
  report.scores.resize(fronts.size());
  std::vector<std::size_t> choice;
  for (const Front& f : fronts) choice.push_back(f.size() - 1);
  double best = kInf;
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    report.scores[r].assign(fronts[r].size(), kInf);
    std::size_t best_j = choice[r];
    for (std::size_t j = 0; j < fronts[r].size(); ++j) {
      std::vector<std::size_t> trial = choice;
      trial[r] = j;
      const double s = score(build(trial));
      report.scores[r][j] = s;
      if (s < best) {
        best = s;
        best_j = j;
      }
    }
    choice[r] = best_j;
  }
  if (!std::isfinite(best)) {
    throw DistillationError("every symbolic candidate was filtered out (no input dependence or unstable)");
  }
  report.model = build(choice);
  report.model.trajectory_mse = best;
  return report;
}

SelectionReport distill(const surrogate::SurrogateModel& model,
                        std::span<const sim::Trace> traces, const SrConfig& config,
                        double solve_step) {
  config.validate();
  Eigen::Index base = 0;
  for (const sim::Trace& t : traces) {
    base += static_cast<Eigen::Index>(
        surrogate::prepare_trace(model.lifting, t, solve_step).times.size());
  }
  const auto extra = static_cast<Eigen::Index>(std::llround(config.extra_per_point * static_cast<double>(base)));
  const DerivativeSamples samples = sample_derivatives(model, traces, extra, config.perturb_scale,
                                                      solve_step, config.seed + 1);
  std::vector<Front> fronts;
  for (int r = 0; r < model.lifting.num_outputs(); ++r) {
    fronts.push_back(evolve(samples, r, config));
  }
  return select_candidate(fronts, traces, model.lifting, model.input_names, model.output_names,
                          solve_step, samples);
}

}  // namespace falconn::symreg
