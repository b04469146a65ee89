#include "falconn/stl/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "falconn/error.hpp"

namespace falconn::stl {
namespace {

double local_half_step(std::span<const double> times, double t) {
  if (times.size() < 2) return 0.0;
  auto it = std::lower_bound(times.begin(), times.end(), t);
  std::size_t p = static_cast<std::size_t>(it - times.begin());
  if (p >= times.size() - 1) p = times.size() - 2;
  return 0.5 * (times[p + 1] - times[p]);
}

// Postfix tape for a predicate body, bound to channel row indices.
struct Tape {
  struct Entry {
    ArithExpr::Op op;
    double value = 0.0;  // constant
    std::size_t row = 0;  // channel
    std::size_t a = 0, b = 0;  // operand entries
  };
  std::vector<Entry> entries;

  std::size_t compile(const ArithExpr& e,
                      const std::vector<std::string>& channels) {
    Entry entry{e.op};
    switch (e.op) {
      case ArithExpr::Op::kConst: entry.value = e.value; break;
      case ArithExpr::Op::kChannel: {
        auto it = std::find(channels.begin(), channels.end(), e.channel);
        if (it == channels.end()) throw UnknownChannelError(e.channel);
        entry.row = static_cast<std::size_t>(it - channels.begin());
        break;
      }
      case ArithExpr::Op::kNeg:
      case ArithExpr::Op::kAbs: entry.a = compile(e.args[0], channels); break;
      default:
        entry.a = compile(e.args[0], channels);
        entry.b = compile(e.args[1], channels);
    }
    entries.push_back(entry);
    return entries.size() - 1;
  }

  template <typename Values>
  double forward(const Values& col, bool smooth, double* scratch) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const Entry& e = entries[i];
      double v = 0.0;
      switch (e.op) {
        case ArithExpr::Op::kConst: v = e.value; break;
        case ArithExpr::Op::kChannel: v = col(e.row); break;
        case ArithExpr::Op::kAdd: v = scratch[e.a] + scratch[e.b]; break;
        case ArithExpr::Op::kSub: v = scratch[e.a] - scratch[e.b]; break;
        case ArithExpr::Op::kMul: v = scratch[e.a] * scratch[e.b]; break;
        case ArithExpr::Op::kDiv: v = scratch[e.a] / scratch[e.b]; break;
        case ArithExpr::Op::kNeg: v = -scratch[e.a]; break;
        case ArithExpr::Op::kAbs:
          v = smooth ? std::sqrt(scratch[e.a] * scratch[e.a] + kSmoothAbsEpsilon)
                     : std::abs(scratch[e.a]);
          break;
      }
      scratch[i] = v;
    }
    return scratch[entries.size() - 1];
  }

  // Requires `scratch` from a smooth forward pass. Adds seed * d/d(col) into
  // grad_col.
  template <typename Grad>
  void backward(const double* scratch, double seed, double* adj,
                Grad&& grad_col) const {
    std::fill(adj, adj + entries.size(), 0.0);
    adj[entries.size() - 1] = seed;
    for (std::size_t i = entries.size(); i-- > 0;) {
      const Entry& e = entries[i];
      const double g = adj[i];
      if (g == 0.0) continue;
      switch (e.op) {
        case ArithExpr::Op::kConst: break;
        case ArithExpr::Op::kChannel: grad_col(e.row) += g; break;
        case ArithExpr::Op::kAdd: adj[e.a] += g; adj[e.b] += g; break;
        case ArithExpr::Op::kSub: adj[e.a] += g; adj[e.b] -= g; break;
        case ArithExpr::Op::kMul:
          adj[e.a] += g * scratch[e.b];
          adj[e.b] += g * scratch[e.a];
          break;
        case ArithExpr::Op::kDiv:
          adj[e.a] += g / scratch[e.b];
          adj[e.b] -= g * scratch[e.a] / (scratch[e.b] * scratch[e.b]);
          break;
        case ArithExpr::Op::kNeg: adj[e.a] -= g; break;
        case ArithExpr::Op::kAbs:
          adj[e.a] += g * scratch[e.a] / scratch[i];
          break;
      }
    }
  }
};

// Hard or soft extremum over values. `sign` = +1 for max, -1 for min.
double aggregate(const double* v, std::size_t n, std::ptrdiff_t stride,
                 double sign, double k) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, sign * v[i * stride]);
  if (k <= 0.0) return sign * m;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(k * (sign * v[i * stride] - m));
  return sign * (m + std::log(sum) / k);
}

// d(soft extremum)/d v_i = exp(k * sign * (v_i - s)).
inline double soft_weight(double vi, double s, double sign, double k) {
  return std::exp(k * sign * (vi - s));
}

}  // namespace

IndexRange interval_indices(std::span<const double> times, double t_anchor,
                            double a, double b) {
  if (times.empty()) throw HorizonError("empty time grid");
  const double half = local_half_step(times, t_anchor + a);
  const double eps = half * (1.0 + 1e-9) + 1e-12;
  const double lo = t_anchor + a - eps;
  const double hi = t_anchor + b + eps;
  auto first = std::lower_bound(times.begin(), times.end(), lo);
  auto last = std::upper_bound(times.begin(), times.end(), hi);
  if (first >= last) {
    throw HorizonError("no sample in interval [" + std::to_string(t_anchor + a) +
                       ", " + std::to_string(t_anchor + b) + "]");
  }
  return {static_cast<std::size_t>(first - times.begin()),
          static_cast<std::size_t>(last - times.begin()) - 1};
}

struct RobustnessEvaluator::Impl {
  struct Node {
    FormulaKind kind;
    std::vector<std::size_t> children;
    Tape tape;
    std::size_t first = 0, last = 0;  // evaluated index range
    std::vector<IndexRange> windows;  // per anchor in [first, last]
  };

  std::vector<std::string> channels;
  std::vector<double> times;
  std::size_t t_index = 0;
  std::vector<Node> nodes;  // post-order; root last
  std::size_t max_tape = 1;
  std::size_t max_arity = 1;

  std::size_t build(const Formula& f) {
    Node n;
    n.kind = f.kind;
    if (f.kind == FormulaKind::kNot) {
      throw Error("formula must be in negation normal form");
    }
    for (const Formula& c : f.children) n.children.push_back(build(c));
    if (f.kind == FormulaKind::kPredicate ||
        f.kind == FormulaKind::kNegatedPredicate) {
      n.tape.compile(f.predicate.expr, channels);
      max_tape = std::max(max_tape, n.tape.entries.size());
    }
    nodes.push_back(std::move(n));
    intervals.push_back(f.interval);
    return nodes.size() - 1;
  }
  std::vector<Interval> intervals;

  void assign_ranges() {
    Node& root = nodes.back();
    root.first = root.last = t_index;
    for (std::size_t i = nodes.size(); i-- > 0;) {
      Node& n = nodes[i];
      std::size_t lo = n.first, hi = n.last;
      const bool temporal =
          n.kind == FormulaKind::kGlobally || n.kind == FormulaKind::kFinally ||
          n.kind == FormulaKind::kUntil || n.kind == FormulaKind::kRelease;
      if (temporal) {
        const Interval iv = intervals[i];
        n.windows.clear();
        lo = std::numeric_limits<std::size_t>::max();
        hi = 0;
        for (std::size_t t = n.first; t <= n.last; ++t) {
          const IndexRange w = interval_indices(times, times[t], iv.lo, iv.hi);
          n.windows.push_back(w);
          lo = std::min(lo, w.first);
          hi = std::max(hi, w.last);
          max_arity = std::max(max_arity, w.size());
          if (n.kind == FormulaKind::kUntil || n.kind == FormulaKind::kRelease) {
            max_arity = std::max<std::size_t>(max_arity, 2);
          }
        }
      } else if (n.kind == FormulaKind::kAnd || n.kind == FormulaKind::kOr) {
        max_arity = std::max(max_arity, n.children.size());
      }
      for (std::size_t c : n.children) {
        nodes[c].first = lo;
        nodes[c].last = hi;
      }
    }
  }

  // Fills per-node values; k <= 0 selects exact semantics.
  void forward(const Eigen::Ref<const Eigen::MatrixXd>& values, double k,
               std::vector<std::vector<double>>& out) const {
    const bool smooth = k > 0.0;
    std::vector<double> scratch(max_tape);
    std::vector<double> tmp;
    out.resize(nodes.size());
    for (std::size_t id = 0; id < nodes.size(); ++id) {
      const Node& n = nodes[id];
      std::vector<double>& v = out[id];
      v.assign(n.last - n.first + 1, 0.0);
      for (std::size_t t = n.first; t <= n.last; ++t) {
        double r = 0.0;
        switch (n.kind) {
          case FormulaKind::kPredicate:
          case FormulaKind::kNegatedPredicate: {
            auto col = values.col(static_cast<Eigen::Index>(t));
            r = n.tape.forward(col, smooth, scratch.data());
            if (n.kind == FormulaKind::kNegatedPredicate) r = -r;
            break;
          }
          case FormulaKind::kAnd:
          case FormulaKind::kOr: {
            tmp.clear();
            for (std::size_t c : n.children) tmp.push_back(child_at(out, c, t));
            r = aggregate(tmp.data(), tmp.size(), 1,
                          n.kind == FormulaKind::kOr ? 1.0 : -1.0, k);
            break;
          }
          case FormulaKind::kGlobally:
          case FormulaKind::kFinally: {
            const IndexRange w = n.windows[t - n.first];
            const std::size_t c = n.children[0];
            r = aggregate(&out[c][w.first - nodes[c].first], w.size(), 1,
                          n.kind == FormulaKind::kFinally ? 1.0 : -1.0, k);
            break;
          }
          case FormulaKind::kUntil:
          case FormulaKind::kRelease:
            r = until_value(n, out, t, k, nullptr);
            break;
          default: break;
        }
        v[t - n.first] = r;
      }
    }
  }

  double child_at(const std::vector<std::vector<double>>& out, std::size_t c,
                  std::size_t t) const {
    return out[c][t - nodes[c].first];
  }

  // Until: outer max over t' of min(rhs(t'), min over [t+a, t'] of lhs).
  // Release swaps min and max. When `inner` is non-null the per-t' pair
  // values and prefix values are stored there for the backward pass.
  struct UntilTrace {
    std::vector<double> prefix;  // prefix extremum per t'
    std::vector<double> pair;    // pair extremum per t'
  };

  double until_value(const Node& n, const std::vector<std::vector<double>>& out,
                     std::size_t t, double k, UntilTrace* trace) const {
    const double outer = n.kind == FormulaKind::kUntil ? 1.0 : -1.0;
    const double inner = -outer;
    const IndexRange w = n.windows[t - n.first];
    const std::size_t lhs = n.children[0], rhs = n.children[1];
    std::vector<double> pairs(w.size()), prefixes(w.size());
    for (std::size_t j = w.first; j <= w.last; ++j) {
      const double pre = aggregate(&out[lhs][w.first - nodes[lhs].first],
                                   j - w.first + 1, 1, inner, k);
      const double two[2] = {child_at(out, rhs, j), pre};
      prefixes[j - w.first] = pre;
      pairs[j - w.first] = aggregate(two, 2, 1, inner, k);
    }
    if (trace) {
      trace->prefix = prefixes;
      trace->pair = pairs;
    }
    return aggregate(pairs.data(), pairs.size(), 1, outer, k);
  }

  void backward(const Eigen::Ref<const Eigen::MatrixXd>& values, double k,
                const std::vector<std::vector<double>>& out,
                Eigen::MatrixXd& grad) const {
    std::vector<std::vector<double>> adj(nodes.size());
    for (std::size_t id = 0; id < nodes.size(); ++id) {
      adj[id].assign(nodes[id].last - nodes[id].first + 1, 0.0);
    }
    adj.back()[0] = 1.0;
    std::vector<double> scratch(max_tape), tape_adj(max_tape);
    UntilTrace trace;
    for (std::size_t id = nodes.size(); id-- > 0;) {
      const Node& n = nodes[id];
      for (std::size_t t = n.first; t <= n.last; ++t) {
        const double g = adj[id][t - n.first];
        if (g == 0.0) continue;
        const double s = out[id][t - n.first];
        switch (n.kind) {
          case FormulaKind::kPredicate:
          case FormulaKind::kNegatedPredicate: {
            auto col = values.col(static_cast<Eigen::Index>(t));
            n.tape.forward(col, true, scratch.data());
            const double seed = n.kind == FormulaKind::kPredicate ? g : -g;
            auto gcol = grad.col(static_cast<Eigen::Index>(t));
            n.tape.backward(scratch.data(), seed, tape_adj.data(),
                            [&](std::size_t row) -> double& {
                              return gcol(static_cast<Eigen::Index>(row));
                            });
            break;
          }
          case FormulaKind::kAnd:
          case FormulaKind::kOr: {
            const double sign = n.kind == FormulaKind::kOr ? 1.0 : -1.0;
            for (std::size_t c : n.children) {
              const double vi = child_at(out, c, t);
              adj[c][t - nodes[c].first] += g * soft_weight(vi, s, sign, k);
            }
            break;
          }
          case FormulaKind::kGlobally:
          case FormulaKind::kFinally: {
            const double sign = n.kind == FormulaKind::kFinally ? 1.0 : -1.0;
            const IndexRange w = n.windows[t - n.first];
            const std::size_t c = n.children[0];
            for (std::size_t j = w.first; j <= w.last; ++j) {
              const double vi = child_at(out, c, j);
              adj[c][j - nodes[c].first] += g * soft_weight(vi, s, sign, k);
            }
            break;
          }
          case FormulaKind::kUntil:
          case FormulaKind::kRelease: {
            const double outer = n.kind == FormulaKind::kUntil ? 1.0 : -1.0;
            const double inner = -outer;
            until_value(n, out, t, k, &trace);
            const IndexRange w = n.windows[t - n.first];
            const std::size_t lhs = n.children[0], rhs = n.children[1];
            for (std::size_t j = w.first; j <= w.last; ++j) {
              const std::size_t q = j - w.first;
              const double g_pair = g * soft_weight(trace.pair[q], s, outer, k);
              const double r = child_at(out, rhs, j);
              adj[rhs][j - nodes[rhs].first] +=
                  g_pair * soft_weight(r, trace.pair[q], inner, k);
              const double g_pre =
                  g_pair * soft_weight(trace.prefix[q], trace.pair[q], inner, k);
              for (std::size_t l = w.first; l <= j; ++l) {
                const double vl = child_at(out, lhs, l);
                adj[lhs][l - nodes[lhs].first] +=
                    g_pre * soft_weight(vl, trace.prefix[q], inner, k);
              }
            }
            break;
          }
          default: break;
        }
      }
    }
  }
};

RobustnessEvaluator::RobustnessEvaluator(const Formula& formula,
                                         std::vector<std::string> channels,
                                         std::vector<double> times,
                                         std::size_t t_index)
    : impl_(std::make_unique<Impl>()) {
  impl_->channels = std::move(channels);
  impl_->times = std::move(times);
  impl_->t_index = t_index;
  const auto& ts = impl_->times;
  if (ts.empty()) throw HorizonError("empty time grid");
  if (t_index >= ts.size()) throw HorizonError("anchor index out of range");
  const double horizon = formula_horizon(formula);
  const double slack = ts.size() > 1 ? 0.5 * (ts.back() - ts[ts.size() - 2]) : 0.0;
  if (ts[t_index] + horizon > ts.back() + slack * (1.0 + 1e-9) + 1e-12) {
    throw HorizonError("formula horizon " + std::to_string(horizon) +
                       " s from t=" + std::to_string(ts[t_index]) +
                       " exceeds trace end " + std::to_string(ts.back()));
  }
  impl_->build(formula);
  impl_->assign_ranges();
}

RobustnessEvaluator::~RobustnessEvaluator() = default;
RobustnessEvaluator::RobustnessEvaluator(RobustnessEvaluator&&) noexcept = default;
RobustnessEvaluator& RobustnessEvaluator::operator=(RobustnessEvaluator&&) noexcept =
    default;

const std::vector<std::string>& RobustnessEvaluator::channels() const {
  return impl_->channels;
}

std::size_t RobustnessEvaluator::num_samples() const {
  return impl_->times.size();
}

double RobustnessEvaluator::exact(
    const Eigen::Ref<const Eigen::MatrixXd>& values) const {
  std::vector<std::vector<double>> out;
  impl_->forward(values, 0.0, out);
  return out.back()[0];
}

RobustnessResult RobustnessEvaluator::smooth(
    const Eigen::Ref<const Eigen::MatrixXd>& values, double k,
    bool with_gradient) const {
  if (!(k > 0.0)) throw Error("smoothing parameter must be positive");
  std::vector<std::vector<double>> out;
  impl_->forward(values, k, out);
  RobustnessResult r;
  r.value = out.back()[0];
  r.mode = RobustnessMode::kSmooth;
  r.k = k;
  r.max_arity = impl_->max_arity;
  if (with_gradient) {
    r.gradient = Eigen::MatrixXd::Zero(values.rows(), values.cols());
    impl_->backward(values, k, out, r.gradient);
  }
  return r;
}

Eigen::MatrixXd signal_matrix(const SampledSignal& s) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(s.channels().size()),
                    static_cast<Eigen::Index>(s.size()));
  for (std::size_t c = 0; c < s.channels().size(); ++c) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) =
          s.channels()[c].values[j];
    }
  }
  return m;
}

double robustness_exact(const Formula& f, const SampledSignal& s,
                        std::size_t t_index) {
  RobustnessEvaluator ev(f, s.channel_names(), s.times(), t_index);
  return ev.exact(signal_matrix(s));
}

RobustnessResult robustness_smooth(const Formula& f, const SampledSignal& s,
                                   std::size_t t_index, double k) {
  RobustnessEvaluator ev(f, s.channel_names(), s.times(), t_index);
  return ev.smooth(signal_matrix(s), k, true);
}

double robustness_gradient_check(const Formula& f, const SampledSignal& s,
                                 std::size_t t_index, double k) {
  RobustnessEvaluator ev(f, s.channel_names(), s.times(), t_index);
  Eigen::MatrixXd x = signal_matrix(s);
  const Eigen::MatrixXd analytic = ev.smooth(x, k, true).gradient;
  Eigen::MatrixXd fd(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double orig = x(c, j);
      const double h = 1e-6 * std::max(1.0, std::abs(orig));
      x(c, j) = orig + h;
      const double up = ev.smooth(x, k, false).value;
      x(c, j) = orig - h;
      const double down = ev.smooth(x, k, false).value;
      x(c, j) = orig;
      fd(c, j) = (up - down) / (2.0 * h);
    }
  }
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

}  // namespace falconn::stl
