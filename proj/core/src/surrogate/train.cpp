#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "falconn/error.hpp"
#include "falconn/optim/lbfgs.hpp"
#include "falconn/surrogate/model.hpp"

namespace falconn::surrogate {
namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;
constexpr double kInf = std::numeric_limits<double>::infinity();

double try_loss(SurrogateModel& m, const Eigen::VectorXd& theta,
                std::span<const TrainingTrace> data, Eigen::VectorXd* grad) {
  m.mlp.set_params(theta);
  try {
    if (grad) return loss_gradient(m, data, *grad);
    return dataset_loss(m, data);
  } catch (const DivergenceError&) {
    return kInf;
  }
}

}  // namespace

TrainResult train(std::span<const sim::Trace> traces, const TrainConfig& cfg,
                  const StateLifting& lifting, const KnownDynamics& known) {
  cfg.validate();
  if (traces.empty()) throw TrainingError("empty dataset");
  const std::vector<TrainingTrace> data = prepare_dataset(lifting, traces, cfg.solve_step);
  SurrogateModel m = make_model(lifting, known, traces.front().input_names,
                                traces.front().output_names, cfg.hidden, cfg.seed,
                                cfg.zero_init);

  TrainResult r;
  Eigen::VectorXd theta = m.mlp.params();
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd best = theta;
  double best_loss = kInf;
  auto record = [&](const Eigen::VectorXd& p, double loss) {
    if (std::isfinite(loss) && loss < best_loss) {
      best_loss = loss;
      best = p;
    }
  };

  // An unlucky draw can blow up the unroll before any step is taken; shrink
  // the initial weights until it does not.
  double loss = try_loss(m, theta, data, &grad);
  for (int attempt = 0; !std::isfinite(loss) && attempt < 5; ++attempt) {
    theta *= 0.1;
    loss = try_loss(m, theta, data, &grad);
  }
  if (!std::isfinite(loss)) {
    throw TrainingError("surrogate diverges on the dataset from its initial parameters");
  }

  Eigen::VectorXd mom = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd vel = Eigen::VectorXd::Zero(theta.size());
  int t = 0;
  for (int epoch = 0; epoch < cfg.adam_epochs; ++epoch) {
    if (epoch > 0) loss = try_loss(m, theta, data, &grad);
    r.loss_history.push_back(loss);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      ++r.diverged_epochs;
      theta = best;
      mom.setZero();
      vel.setZero();
      t = 0;
      continue;
    }
    record(theta, loss);
    ++t;
    mom = cfg.beta1 * mom + (1.0 - cfg.beta1) * grad;
    vel = cfg.beta2 * vel + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    theta -= cfg.learning_rate *
             ((mom / c1).array() / ((vel / c2).array().sqrt() + cfg.epsilon)).matrix();
  }
  record(theta, try_loss(m, theta, data, nullptr));
  if (!std::isfinite(best_loss)) {
    throw TrainingError("every training epoch diverged (" +
                        std::to_string(r.diverged_epochs) + " epochs)");
  }

  if (cfg.lbfgs_iterations > 0) {
    optim::LbfgsOptions o;
    o.memory = cfg.lbfgs_memory;
    o.max_iterations = cfg.lbfgs_iterations;
    o.gradient_tolerance = 0.0;
    o.on_iteration = [&](const optim::IterationInfo& info) {
      r.loss_history.push_back(info.f);
      return true;
    };
    const optim::Objective obj = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
      const double l = try_loss(m, p, data, &g);
      if (!g.allFinite()) return kInf;
      record(p, l);
      return l;
    };
    optim::minimize_lbfgs(obj, best, o);
  }

  m.mlp.set_params(best);
  r.model = std::move(m);
  r.loss = best_loss;
  return r;
}

std::string checkpoint_json(const SurrogateModel& model, const TrainConfig& cfg) {
  json j;
  j["format"] = "falconn-surrogate";
  j["version"] = kCheckpointVersion;
  j["sizes"] = model.mlp.sizes();
  const Eigen::VectorXd& p = model.mlp.params();
  j["params"] = std::vector<double>(p.data(), p.data() + p.size());
  j["orders"] = model.lifting.orders;
  j["known_dynamics"] = model.known.id;
  j["inputs"] = model.input_names;
  j["outputs"] = model.output_names;
  j["seed"] = cfg.seed;
  j["train"] = {{"learning_rate", cfg.learning_rate},
                {"adam_epochs", cfg.adam_epochs},
                {"lbfgs_iterations", cfg.lbfgs_iterations},
                {"lbfgs_memory", cfg.lbfgs_memory},
                {"beta1", cfg.beta1},
                {"beta2", cfg.beta2},
                {"epsilon", cfg.epsilon},
                {"solve_step", cfg.solve_step},
                {"hidden", cfg.hidden},
                {"zero_init", cfg.zero_init}};
  return j.dump(2) + "\n";
}

void save_checkpoint(const SurrogateModel& model, const TrainConfig& cfg,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << checkpoint_json(model, cfg);
}

SurrogateModel parse_checkpoint(const std::string& text, TrainConfig* cfg) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "falconn-surrogate") throw SchemaError("not a surrogate checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw SchemaError("unsupported checkpoint version " + j.at("version").dump());
    }
    SurrogateModel m;
    m.lifting = build_lifting(j.at("orders").get<std::vector<int>>());
    m.known = known_dynamics(j.at("known_dynamics").get<std::string>(), m.lifting);
    m.input_names = j.at("inputs").get<std::vector<std::string>>();
    m.output_names = j.at("outputs").get<std::vector<std::string>>();
    const auto sizes = j.at("sizes").get<std::vector<int>>();
    if (sizes.size() < 2 || sizes.front() != m.dim() + m.num_inputs() ||
        sizes.back() != m.lifting.num_outputs()) {
      throw SchemaError("checkpoint layer sizes do not match its lifting");
    }
    m.mlp = Mlp(sizes);
    const auto params = j.at("params").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(params.size()) != m.mlp.num_params()) {
      throw SchemaError("checkpoint parameter count mismatch");
    }
    m.mlp.set_params(Eigen::Map<const Eigen::VectorXd>(params.data(),
                                                       static_cast<Eigen::Index>(params.size())));
    if (cfg) {
      const json& t = j.at("train");
      cfg->learning_rate = t.at("learning_rate");
      cfg->adam_epochs = t.at("adam_epochs");
      cfg->lbfgs_iterations = t.at("lbfgs_iterations");
      cfg->lbfgs_memory = t.at("lbfgs_memory");
      cfg->beta1 = t.at("beta1");
      cfg->beta2 = t.at("beta2");
      cfg->epsilon = t.at("epsilon");
      cfg->solve_step = t.at("solve_step");
      cfg->hidden = t.at("hidden").get<std::vector<int>>();
      cfg->zero_init = t.at("zero_init");
      cfg->seed = j.at("seed");
    }
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid checkpoint: ") + e.what());
  }
}

SurrogateModel load_checkpoint(const std::string& path, TrainConfig* cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), cfg);
}

}  // namespace falconn::surrogate
