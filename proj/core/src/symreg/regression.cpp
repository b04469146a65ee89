#include "falconn/symreg/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "falconn/error.hpp"
#include "falconn/optim/lbfgs.hpp"

namespace falconn::symreg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

DerivativeSamples subsample(const DerivativeSamples& s, int max_samples) {
  const Eigen::Index n = s.size();
  if (n <= max_samples) return s;
  DerivativeSamples out;
  out.z.resize(max_samples, s.z.cols());
  out.u.resize(max_samples, s.u.cols());
  out.targets.resize(max_samples, s.targets.cols());
  for (Eigen::Index i = 0; i < max_samples; ++i) {
    const Eigen::Index j = i * n / max_samples;
    out.z.row(i) = s.z.row(j);
    out.u.row(i) = s.u.row(j);
    out.targets.row(i) = s.targets.row(j);
  }
  return out;
}

// Reverse-mode gradient of the derivative MSE with respect to every constant.
class ConstantFit {
 public:
  ConstantFit(Expr e, const DerivativeSamples& s, int row)
      : e_(std::move(e)), s_(s), y_(s.targets.col(row).array()) {
    const auto& nodes = e_.nodes();
    ends_.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      ends_[i] = e_.subtree_end(i);
      if (nodes[i].op == Op::kConst) slots_.push_back(i);
    }
  }

  Eigen::VectorXd constants() const {
    Eigen::VectorXd c(static_cast<Eigen::Index>(slots_.size()));
    for (std::size_t k = 0; k < slots_.size(); ++k) {
      c(static_cast<Eigen::Index>(k)) = e_.nodes()[slots_[k]].value;
    }
    return c;
  }

  const Expr& with(const Eigen::VectorXd& c) {
    for (std::size_t k = 0; k < slots_.size(); ++k) {
      e_.nodes()[slots_[k]].value = c(static_cast<Eigen::Index>(k));
    }
    return e_;
  }

  double operator()(const Eigen::VectorXd& c, Eigen::VectorXd& grad) {
    with(c);
    const auto& nodes = e_.nodes();
    const std::size_t m = nodes.size();
    const Eigen::Index n = s_.size();
    std::vector<Eigen::ArrayXd> val(m);
    for (std::size_t k = m; k-- > 0;) {
      const Node& nd = nodes[k];
      switch (nd.op) {
        case Op::kConst: val[k] = Eigen::ArrayXd::Constant(n, nd.value); break;
        case Op::kZ: val[k] = s_.z.col(nd.index).array(); break;
        case Op::kU: val[k] = s_.u.col(nd.index).array(); break;
        case Op::kExp: val[k] = val[k + 1].exp(); break;
        case Op::kSin: val[k] = val[k + 1].sin(); break;
        case Op::kCos: val[k] = val[k + 1].cos(); break;
        default: {
          const Eigen::ArrayXd& a = val[k + 1];
          const Eigen::ArrayXd& b = val[ends_[k + 1]];
          switch (nd.op) {
            case Op::kAdd: val[k] = a + b; break;
            case Op::kSub: val[k] = a - b; break;
            case Op::kMul: val[k] = a * b; break;
            default:
              if ((b.abs() < kDivisionGuard).any()) {
                grad.setZero(c.size());
                return kInf;
              }
              val[k] = a / b;
          }
        }
      }
    }
    const Eigen::ArrayXd r = val[0] - y_;
    const double loss = r.square().mean();
    grad.setZero(c.size());
    if (!std::isfinite(loss)) return kInf;
    std::vector<Eigen::ArrayXd> adj(m);
    adj[0] = 2.0 * r / static_cast<double>(n);
    for (std::size_t k = 0; k < m; ++k) {
      const Node& nd = nodes[k];
      const int ar = arity(nd.op);
      if (ar == 0) continue;
      const std::size_t l = k + 1;
      switch (nd.op) {
        case Op::kExp: adj[l] = adj[k] * val[k]; break;
        case Op::kSin: adj[l] = adj[k] * val[l].cos(); break;
        case Op::kCos: adj[l] = -adj[k] * val[l].sin(); break;
        default: {
          const std::size_t rr = ends_[l];
          switch (nd.op) {
            case Op::kAdd: adj[l] = adj[k]; adj[rr] = adj[k]; break;
            case Op::kSub: adj[l] = adj[k]; adj[rr] = -adj[k]; break;
            case Op::kMul: adj[l] = adj[k] * val[rr]; adj[rr] = adj[k] * val[l]; break;
            default:
              adj[l] = adj[k] / val[rr];
              adj[rr] = -adj[k] * val[l] / val[rr].square();
          }
        }
      }
    }
    for (std::size_t k = 0; k < slots_.size(); ++k) {
      grad(static_cast<Eigen::Index>(k)) = adj[slots_[k]].sum();
    }
    return grad.allFinite() ? loss : kInf;
  }

  bool has_constants() const { return !slots_.empty(); }

 private:
  Expr e_;
  const DerivativeSamples& s_;
  Eigen::ArrayXd y_;
  std::vector<std::size_t> ends_;
  std::vector<std::size_t> slots_;
};

class Evolver {
 public:
  Evolver(const DerivativeSamples& s, int row, const SrConfig& cfg)
      : s_(s), row_(row), cfg_(cfg),
        rng_(cfg.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(row) + 1),
        nz_(static_cast<int>(s.z.cols())), nu_(static_cast<int>(s.u.cols())) {}

  Front run() {
    seed_population();
    std::size_t oldest = 0;
    for (int it = 0; it < cfg_.iterations; ++it) {
      if (!hof_.empty()) {
        auto pick = hof_.begin();
        std::advance(pick, uniform_int(0, static_cast<int>(hof_.size()) - 1));
        pop_[oldest] = pick->second;
        oldest = (oldest + 1) % pop_.size();
      }
      for (int k = 0; k < cfg_.population; ++k) {
        Candidate child = offspring();
        remember(child);
        pop_[oldest] = std::move(child);
        oldest = (oldest + 1) % pop_.size();
      }
    }
    return finish();
  }

 private:
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

  Expr random_leaf() {
    if (uniform() < 0.3) return Expr::constant(std::round(normal() * 100.0) / 100.0);
    const int v = uniform_int(0, nz_ + nu_ - 1);
    return v < nz_ ? Expr::z(v) : Expr::u(v - nz_);
  }

  Expr random_tree(int depth) {
    if (depth <= 0 || uniform() < 0.3) return random_leaf();
    if (uniform() < 0.2) {
      static constexpr Op kUnary[] = {Op::kExp, Op::kSin, Op::kCos};
      return Expr::unary(kUnary[uniform_int(0, 2)], random_tree(depth - 1));
    }
    static constexpr Op kBinary[] = {Op::kAdd, Op::kSub, Op::kMul, Op::kDiv};
    return Expr::binary(kBinary[uniform_int(0, 3)], random_tree(depth - 1),
                        random_tree(depth - 1));
  }

  Candidate score(Expr e) {
    Candidate c;
    c.mse = derivative_mse(e, s_, row_);
    c.expr = std::move(e);
    return c;
  }

  void remember(const Candidate& c) {
    if (!std::isfinite(c.mse) || c.complexity() >= cfg_.complexity_cap) return;
    auto it = hof_.find(c.complexity());
    if (it == hof_.end() || c.mse < it->second.mse) hof_[c.complexity()] = c;
  }

  void seed_population() {
    // A constant and an affine combination of every variable start the search
    // next to the simplest structures; the rest is random.
    std::vector<Expr> seeds;
    seeds.push_back(Expr::constant(s_.targets.col(row_).mean()));
    if (4 * (nz_ + nu_) + 1 < cfg_.complexity_cap) {
      Expr lin = Expr::constant(0.0);
      for (int i = 0; i < nz_ + nu_; ++i) {
        const Expr var = i < nz_ ? Expr::z(i) : Expr::u(i - nz_);
        lin = Expr::binary(Op::kAdd, lin, Expr::binary(Op::kMul, Expr::constant(1.0), var));
      }
      seeds.push_back(lin);
    }
    for (const Expr& e : seeds) {
      Candidate c = optimize_constants(e, s_, row_, 4 * cfg_.constant_steps);
      remember(c);
      pop_.push_back(std::move(c));
    }
    while (static_cast<int>(pop_.size()) < cfg_.population) {
      Expr e = random_tree(uniform_int(1, 4));
      if (e.complexity() >= cfg_.complexity_cap) continue;
      Candidate c = score(std::move(e));
      remember(c);
      pop_.push_back(std::move(c));
    }
  }

  const Candidate& tournament() {
    const Candidate* best = nullptr;
    for (int i = 0; i < cfg_.tournament; ++i) {
      const Candidate& c = pop_[static_cast<std::size_t>(uniform_int(0, static_cast<int>(pop_.size()) - 1))];
      if (!best || c.mse < best->mse ||
          (c.mse == best->mse && c.complexity() < best->complexity())) {
        best = &c;
      }
    }
    return *best;
  }

  std::size_t random_node(const Expr& e) {
    return static_cast<std::size_t>(uniform_int(0, e.complexity() - 1));
  }

  Expr mutate(const Expr& parent) {
    Expr e = parent;
    const int kind = uniform_int(0, 2);
    if (kind == 2) {
      std::vector<std::size_t> consts;
      for (std::size_t i = 0; i < e.nodes().size(); ++i) {
        if (e.nodes()[i].op == Op::kConst) consts.push_back(i);
      }
      if (!consts.empty()) {
        Node& n = e.nodes()[consts[static_cast<std::size_t>(uniform_int(0, static_cast<int>(consts.size()) - 1))]];
        n.value = n.value * (1.0 + 0.2 * normal()) + 0.05 * normal();
        return e;
      }
    }
    const std::size_t at = random_node(e);
    if (kind == 0) {
      Node& n = e.nodes()[at];
      switch (arity(n.op)) {
        case 0: return e.replaced(at, random_leaf());
        case 1: {
          static constexpr Op kUnary[] = {Op::kExp, Op::kSin, Op::kCos};
          n.op = kUnary[uniform_int(0, 2)];
          return e;
        }
        default: {
          static constexpr Op kBinary[] = {Op::kAdd, Op::kSub, Op::kMul, Op::kDiv};
          n.op = kBinary[uniform_int(0, 3)];
          return e;
        }
      }
    }
    return e.replaced(at, random_tree(uniform_int(0, 3)));
  }

  Candidate offspring() {
    const Candidate& parent = tournament();
    for (int attempt = 0; attempt < 8; ++attempt) {
      Expr child;
      if (uniform() < cfg_.crossover_rate) {
        const Candidate& other = tournament();
        child = parent.expr.replaced(random_node(parent.expr),
                                     other.expr.subtree(random_node(other.expr)));
      } else {
        child = mutate(parent.expr);
      }
      if (child.complexity() >= cfg_.complexity_cap) continue;
      if (uniform() < cfg_.optimize_probability) {
        return optimize_constants(child, s_, row_, cfg_.constant_steps);
      }
      return score(std::move(child));
    }
    return parent;
  }

  Front finish() {
    std::vector<Candidate> refined;
    for (const auto& [complexity, c] : hof_) {
      Candidate r = optimize_constants(c.expr, s_, row_, 4 * cfg_.constant_steps);
      Candidate folded = score(fold_constants(r.expr));
      refined.push_back(folded.mse <= r.mse ? folded : r);
    }
    for (const Candidate& c : refined) remember(c);
    Front front;
    double best = kInf;
    for (const auto& [complexity, c] : hof_) {
      if (c.mse < best) {
        front.push_back(c);
        best = c.mse;
      }
    }
    return front;
  }

  const DerivativeSamples& s_;
  int row_;
  const SrConfig& cfg_;
  std::mt19937_64 rng_;
  int nz_, nu_;
  std::vector<Candidate> pop_;
  std::map<int, Candidate> hof_;
};

}  // namespace

void SrConfig::validate() const {
  if (iterations < 1 || population < 2 || tournament < 1 || complexity_cap < 2) {
    throw ConfigError("symbolic regression counts must be positive");
  }
  auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate(crossover_rate) || !rate(mutation_rate) || !rate(optimize_probability)) {
    throw ConfigError("symbolic regression rates must lie in [0, 1]");
  }
  if (constant_steps < 0 || max_samples < 1 || extra_per_point < 0.0 || perturb_scale < 0.0) {
    throw ConfigError("invalid symbolic regression sampling settings");
  }
}

DerivativeSamples sample_derivatives(const surrogate::SurrogateModel& model,
                                     std::span<const sim::Trace> traces, Eigen::Index n_extra,
                                     double perturb_scale, double solve_step,
                                     std::uint64_t seed) {
  std::vector<Eigen::VectorXd> zs, us;
  for (const sim::Trace& trace : traces) {
    const surrogate::TrainingTrace tt = surrogate::prepare_trace(model.lifting, trace, solve_step);
    const std::size_t n = tt.times.size();
    std::vector<double> bp(tt.times.begin(),
                           tt.times.begin() + static_cast<std::ptrdiff_t>(n > 1 ? n - 1 : 1));
    const sim::InputSignal u(model.input_names, bp, tt.inputs.topRows(static_cast<Eigen::Index>(bp.size())),
                             tt.times.back());
    Eigen::MatrixXd states;
    try {
      states = surrogate::simulate_states(model, tt.z0, u, tt.times);
    } catch (const DivergenceError&) {
      continue;
    }
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
      zs.push_back(states.row(i).transpose());
      us.push_back(tt.inputs.row(i).transpose());
    }
  }
  if (zs.empty()) throw DistillationError("surrogate diverges on every trace");
  const auto base = static_cast<Eigen::Index>(zs.size());
  const Eigen::Index total = base + n_extra;
  DerivativeSamples s;
  s.z.resize(total, model.dim());
  s.u.resize(total, model.num_inputs());
  for (Eigen::Index i = 0; i < base; ++i) {
    s.z.row(i) = zs[static_cast<std::size_t>(i)].transpose();
    s.u.row(i) = us[static_cast<std::size_t>(i)].transpose();
  }
  const Eigen::RowVectorXd mean = s.z.topRows(base).colwise().mean();
  const Eigen::RowVectorXd sd =
      ((s.z.topRows(base).rowwise() - mean).array().square().colwise().sum() /
       static_cast<double>(base)).sqrt().matrix();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Eigen::Index j = 0; j < n_extra; ++j) {
    const Eigen::Index src = j % base;
    for (Eigen::Index d = 0; d < model.dim(); ++d) {
      s.z(base + j, d) = s.z(src, d) + perturb_scale * sd(d) * g(rng);
    }
    s.u.row(base + j) = s.u.row(src);
  }
  s.targets.resize(total, model.lifting.num_outputs());
  for (Eigen::Index i = 0; i < total; ++i) {
    s.targets.row(i) = model.driven(s.z.row(i).transpose(), s.u.row(i).transpose(), 0.0).transpose();
  }
  return s;
}

double derivative_mse(const Expr& e, const DerivativeSamples& s, int row) {
  const Eigen::ArrayXd f = e.eval_batch(s.z, s.u);
  const double mse = (f - s.targets.col(row).array()).square().mean();
  return std::isfinite(mse) ? mse : kInf;
}

Candidate optimize_constants(const Expr& e, const DerivativeSamples& s, int row, int steps) {
  ConstantFit fit(e, s, row);
  Candidate c;
  if (!fit.has_constants() || steps <= 0) {
    c.expr = e;
    c.mse = derivative_mse(e, s, row);
    return c;
  }
  optim::LbfgsOptions o;
  o.max_iterations = steps;
  o.gradient_tolerance = 1e-14;
  const optim::LbfgsResult r = optim::minimize_lbfgs(
      [&fit](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return fit(x, g); },
      fit.constants(), o);
  c.expr = fit.with(r.x);
  c.mse = derivative_mse(c.expr, s, row);
  const double before = derivative_mse(e, s, row);
  if (!(c.mse <= before)) {
    c.expr = e;
    c.mse = before;
  }
  return c;
}

Front evolve(const DerivativeSamples& samples, int row, const SrConfig& cfg) {
  cfg.validate();
  if (samples.size() == 0) throw DistillationError("no derivative samples");
  const DerivativeSamples sub = subsample(samples, cfg.max_samples);
  return Evolver(sub, row, cfg).run();
}

}  // namespace falconn::symreg
