#include "falconn/optim/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace falconn::optim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Memory {
  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };
  std::deque<Pair> pairs;
  std::size_t capacity;

  explicit Memory(int m) : capacity(static_cast<std::size_t>(std::max(1, m))) {}

  bool push(Eigen::VectorXd s, Eigen::VectorXd y) {
    const double sy = s.dot(y);
    if (!(sy > 1e-12 * y.squaredNorm()) || !std::isfinite(sy)) return false;
    if (pairs.size() == capacity) pairs.pop_front();
    pairs.push_back({std::move(s), std::move(y), 1.0 / sy});
    return true;
  }

  // Two-loop recursion: returns H * q.
  Eigen::VectorXd apply(Eigen::VectorXd q) const {
    std::vector<double> alpha(pairs.size());
    for (std::size_t i = pairs.size(); i-- > 0;) {
      alpha[i] = pairs[i].rho * pairs[i].s.dot(q);
      q -= alpha[i] * pairs[i].y;
    }
    if (!pairs.empty()) {
      const Pair& last = pairs.back();
      q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double beta = pairs[i].rho * pairs[i].y.dot(q);
      q += (alpha[i] - beta) * pairs[i].s;
    }
    return q;
  }
};

struct Probe {
  double alpha;
  double f;
  double slope;
  Eigen::VectorXd x, g;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), safeguarded to
// the interior of [a, b].
double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  if (std::isfinite(fb) && std::isfinite(db)) {
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    if (disc >= 0.0) {
      const double d2 = std::copysign(std::sqrt(disc), b - a);
      const double t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
      const double margin = 0.1 * (hi - lo);
      if (std::isfinite(t) && t > lo + margin && t < hi - margin) return t;
    }
  }
  return 0.5 * (a + b);
}

// Strong-Wolfe search along d (Nocedal & Wright, bracketing + zoom).
bool wolfe_search(const Objective& f, const Eigen::VectorXd& x, double f0,
                  const Eigen::VectorXd& g0, const Eigen::VectorXd& d, double alpha0,
                  const LbfgsOptions& o, int& evals, Probe& out) {
  const double slope0 = g0.dot(d);
  auto probe = [&](double alpha) {
    Probe p;
    p.alpha = alpha;
    p.x = x + alpha * d;
    p.g.resize(x.size());
    p.f = f(p.x, p.g);
    ++evals;
    p.slope = std::isfinite(p.f) ? p.g.dot(d) : kInf;
    if (!std::isfinite(p.slope)) p.f = kInf;
    return p;
  };

  Probe prev{0.0, f0, slope0, x, g0};
  double alpha = alpha0;
  int budget = o.max_line_search;
  auto zoom = [&](Probe lo, Probe hi) {
    while (budget-- > 0) {
      const double a = cubic_step(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
      Probe p = probe(a);
      if (p.f > f0 + o.c1 * a * slope0 || p.f >= lo.f) {
        hi = std::move(p);
      } else {
        if (std::abs(p.slope) <= -o.c2 * slope0) {
          out = std::move(p);
          return true;
        }
        if (p.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(p);
      }
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) break;
    }
    // Accept a sufficient-decrease point even without the curvature test.
    if (lo.alpha > 0.0) {
      out = std::move(lo);
      return true;
    }
    return false;
  };

  for (int i = 0; budget-- > 0; ++i) {
    Probe p = probe(alpha);
    if (p.f > f0 + o.c1 * alpha * slope0 || (i > 0 && p.f >= prev.f)) {
      return zoom(std::move(prev), std::move(p));
    }
    if (std::abs(p.slope) <= -o.c2 * slope0) {
      out = std::move(p);
      return true;
    }
    if (p.slope >= 0.0) return zoom(std::move(p), std::move(prev));
    prev = std::move(p);
    alpha *= 2.0;
  }
  if (prev.alpha > 0.0) {
    out = std::move(prev);
    return true;
  }
  return false;
}

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

bool relative_decrease_small(double f_old, double f_new, const LbfgsOptions& o) {
  return o.relative_decrease_tolerance > 0.0 &&
         (f_old - f_new) <= o.relative_decrease_tolerance * std::max(1.0, std::abs(f_old));
}

}  // namespace

std::string to_string(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::kConverged: return "converged";
    case LbfgsStatus::kIterationLimit: return "iteration-limit";
    case LbfgsStatus::kLineSearchFailed: return "line-search-failed";
    case LbfgsStatus::kStopped: return "stopped";
    case LbfgsStatus::kNonFinite: return "non-finite";
  }
  return "unknown";
}

LbfgsResult minimize_lbfgs(const Objective& f, Eigen::VectorXd x0,
                           const LbfgsOptions& o) {
  LbfgsResult r;
  r.x = std::move(x0);
  r.grad.resize(r.x.size());
  r.f = f(r.x, r.grad);
  r.evaluations = 1;
  if (!std::isfinite(r.f) || !r.grad.allFinite()) {
    r.status = LbfgsStatus::kNonFinite;
    return r;
  }
  Memory mem(o.memory);
  while (true) {
    if (r.grad.lpNorm<Eigen::Infinity>() <= o.gradient_tolerance) {
      r.status = LbfgsStatus::kConverged;
      return r;
    }
    if (r.iterations >= o.max_iterations) {
      r.status = LbfgsStatus::kIterationLimit;
      return r;
    }
    Eigen::VectorXd d = -mem.apply(r.grad);
    if (!(d.dot(r.grad) < 0.0)) {
      mem.pairs.clear();
      d = -r.grad;
    }
    const double alpha0 = mem.pairs.empty() ? std::min(1.0, 1.0 / d.norm()) : 1.0;
    Probe p;
    if (!wolfe_search(f, r.x, r.f, r.grad, d, alpha0, o, r.evaluations, p)) {
      if (!mem.pairs.empty()) {
        mem.pairs.clear();
        continue;
      }
      r.status = LbfgsStatus::kLineSearchFailed;
      return r;
    }
    IterationInfo info;
    info.iteration = ++r.iterations;
    info.step_norm = (p.x - r.x).lpNorm<Eigen::Infinity>();
    mem.push(p.x - r.x, p.g - r.grad);
    const double f_old = r.f;
    r.x = std::move(p.x);
    r.grad = std::move(p.g);
    r.f = p.f;
    info.f = r.f;
    info.projected_gradient = r.grad.lpNorm<Eigen::Infinity>();
    if (o.on_iteration && !o.on_iteration(info)) {
      r.status = LbfgsStatus::kStopped;
      return r;
    }
    if (relative_decrease_small(f_old, r.f, o)) {
      r.status = LbfgsStatus::kConverged;
      return r;
    }
  }
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper) {
  return (project(x - g, lower, upper) - x).lpNorm<Eigen::Infinity>();
}

LbfgsResult minimize_lbfgs_bounded(const Objective& f, Eigen::VectorXd x0,
                                   const Eigen::VectorXd& lower,
                                   const Eigen::VectorXd& upper,
                                   const LbfgsOptions& o) {
  LbfgsResult r;
  r.x = project(x0, lower, upper);
  r.grad.resize(r.x.size());
  r.f = f(r.x, r.grad);
  r.evaluations = 1;
  if (!std::isfinite(r.f) || !r.grad.allFinite()) {
    r.status = LbfgsStatus::kNonFinite;
    return r;
  }
  Memory mem(o.memory);
  const Eigen::Index n = r.x.size();
  std::vector<bool> prev_active;
  while (true) {
    if (projected_gradient_norm(r.x, r.grad, lower, upper) <= o.gradient_tolerance) {
      r.status = LbfgsStatus::kConverged;
      return r;
    }
    if (r.iterations >= o.max_iterations) {
      r.status = LbfgsStatus::kIterationLimit;
      return r;
    }
    Eigen::VectorXd free_g = r.grad;
    std::vector<bool> active(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = r.x(i) <= lower(i) && r.grad(i) > 0.0;
      const bool at_hi = r.x(i) >= upper(i) && r.grad(i) < 0.0;
      if (at_lo || at_hi) {
        active[static_cast<std::size_t>(i)] = true;
        free_g(i) = 0.0;
      }
    }
    if (active != prev_active) mem.pairs.clear();
    prev_active = active;
    Eigen::VectorXd d = -mem.apply(free_g);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)]) d(i) = 0.0;
    }
    if (!(d.dot(r.grad) < 0.0) || !d.allFinite()) {
      mem.pairs.clear();
      d = -free_g;
    }
    double alpha = 1.0;
    if (mem.pairs.empty()) {
      const double dn = d.lpNorm<Eigen::Infinity>();
      if (dn > 0.0) alpha = 1.0 / dn;
    }

    Eigen::VectorXd x_new, g_new(n);
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < o.max_line_search; ++ls) {
      x_new = project(r.x + alpha * d, lower, upper);
      f_new = f(x_new, g_new);
      ++r.evaluations;
      const double decrease = r.grad.dot(x_new - r.x);
      if (std::isfinite(f_new) && g_new.allFinite() &&
          f_new <= r.f + o.c1 * decrease) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!mem.pairs.empty()) {
        mem.pairs.clear();
        continue;
      }
      r.status = LbfgsStatus::kLineSearchFailed;
      return r;
    }
    IterationInfo info;
    info.iteration = ++r.iterations;
    info.step_norm = (x_new - r.x).lpNorm<Eigen::Infinity>();
    // Curvature pairs live on the free subspace; gradient changes in
    // coordinates pinned at a bound would corrupt the scaling.
    Eigen::VectorXd sk = x_new - r.x, yk = g_new - r.grad;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)]) sk(i) = yk(i) = 0.0;
    }
    mem.push(std::move(sk), std::move(yk));
    const double f_old = r.f;
    r.x = std::move(x_new);
    r.grad = std::move(g_new);
    r.f = f_new;
    info.f = r.f;
    info.projected_gradient = projected_gradient_norm(r.x, r.grad, lower, upper);
    if (o.on_iteration && !o.on_iteration(info)) {
      r.status = LbfgsStatus::kStopped;
      return r;
    }
    if (info.step_norm == 0.0 || relative_decrease_small(f_old, r.f, o)) {
      r.status = info.step_norm == 0.0 ? LbfgsStatus::kLineSearchFailed
                                       : LbfgsStatus::kConverged;
      return r;
    }
  }
}

}  // namespace falconn::optim
