#include "falconn/falsify/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>

#include "falconn/error.hpp"

namespace falconn::falsify {

namespace {

using Value = std::variant<std::string, double, bool, std::vector<double>>;

struct ValueError {
  std::string message;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& s) {
  if (s.empty()) throw ValueError{"missing value"};
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ValueError{"not a number: '" + s + "'"};
  }
  return v;
}

/// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string && c == '\\') {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

Value parse_value(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) throw ValueError{"missing value"};
  if (s.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < s.size() && s[i] != '"'; ++i) {
      if (s[i] == '\\' && i + 1 < s.size()) ++i;
      out += s[i];
    }
    if (i != s.size() - 1) throw ValueError{"unterminated or trailing text after string"};
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') throw ValueError{"unterminated array"};
    std::vector<double> items;
    const std::string body = trim(s.substr(1, s.size() - 2));
    if (body.empty()) return items;
    std::stringstream parts(body);
    std::string item;
    while (std::getline(parts, item, ',')) items.push_back(parse_number(trim(item)));
    return items;
  }
  return parse_number(s);
}

double as_number(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw ValueError{"expected a number"};
}

int as_int(const Value& v) {
  const double d = as_number(v);
  if (d != std::floor(d) || std::abs(d) > 2e9) throw ValueError{"expected an integer"};
  return static_cast<int>(d);
}

std::uint64_t as_seed(const Value& v) {
  const double d = as_number(v);
  if (d < 0 || d != std::floor(d) || d > 9e15) throw ValueError{"expected a non-negative integer"};
  return static_cast<std::uint64_t>(d);
}

std::string as_string(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ValueError{"expected a quoted string"};
}

bool as_bool(const Value& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw ValueError{"expected true or false"};
}

std::vector<int> as_int_list(const Value& v) {
  const auto* a = std::get_if<std::vector<double>>(&v);
  if (!a) throw ValueError{"expected an array"};
  std::vector<int> out;
  for (double d : *a) out.push_back(as_int(d));
  return out;
}

using Setter = std::function<void(RunConfig&, const Value&)>;

#define NUM(field) [](RunConfig& c, const Value& v) { c.field = as_number(v); }
#define INT(field) [](RunConfig& c, const Value& v) { c.field = as_int(v); }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"plant", [](RunConfig& c, const Value& v) { c.plant = as_string(v); }},
      {"spec", [](RunConfig& c, const Value& v) { c.spec = as_string(v); }},
      {"budget", INT(budget)},
      {"horizon", NUM(horizon)},
      {"dt", NUM(dt)},
      {"k", NUM(k)},
      {"segment", NUM(segment)},
      {"orders", [](RunConfig& c, const Value& v) { c.orders = as_int_list(v); }},
      {"known_dynamics", [](RunConfig& c, const Value& v) { c.known_dynamics = as_string(v); }},
      {"state_bound", NUM(state_bound)},
      {"seed", [](RunConfig& c, const Value& v) { c.seed = as_seed(v); }},
      {"output_dir", [](RunConfig& c, const Value& v) { c.output_dir = as_string(v); }},

      {"train.learning_rate", NUM(train.learning_rate)},
      {"train.adam_epochs", INT(train.adam_epochs)},
      {"train.lbfgs_iterations", INT(train.lbfgs_iterations)},
      {"train.lbfgs_memory", INT(train.lbfgs_memory)},
      {"train.beta1", NUM(train.beta1)},
      {"train.beta2", NUM(train.beta2)},
      {"train.epsilon", NUM(train.epsilon)},
      {"train.solve_step", NUM(train.solve_step)},
      {"train.hidden", [](RunConfig& c, const Value& v) { c.train.hidden = as_int_list(v); }},
      {"train.zero_init", [](RunConfig& c, const Value& v) { c.train.zero_init = as_bool(v); }},

      {"symreg.iterations", INT(symreg.iterations)},
      {"symreg.population", INT(symreg.population)},
      {"symreg.complexity_cap", INT(symreg.complexity_cap)},
      {"symreg.tournament", INT(symreg.tournament)},
      {"symreg.crossover_rate", NUM(symreg.crossover_rate)},
      {"symreg.mutation_rate", NUM(symreg.mutation_rate)},
      {"symreg.optimize_probability", NUM(symreg.optimize_probability)},
      {"symreg.constant_steps", INT(symreg.constant_steps)},
      {"symreg.max_samples", INT(symreg.max_samples)},
      {"symreg.extra_per_point", NUM(symreg.extra_per_point)},
      {"symreg.perturb_scale", NUM(symreg.perturb_scale)},

      {"solver.method", [](RunConfig& c, const Value& v) { c.solver_method = as_string(v); }},
      {"solver.max_iterations", INT(solver.max_iterations)},
      {"solver.constraint_tolerance", NUM(solver.constraint_tolerance)},
      {"solver.gradient_tolerance", NUM(solver.gradient_tolerance)},
      {"solver.initial_penalty", NUM(solver.initial_penalty)},
      {"solver.penalty_growth", NUM(solver.penalty_growth)},
      {"solver.required_violation_drop", NUM(solver.required_violation_drop)},
      {"solver.max_inner_iterations", INT(solver.max_inner_iterations)},
      {"solver.lbfgs_memory", INT(solver.lbfgs_memory)},
  };
  return table;
}

#undef NUM
#undef INT

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string list(const std::vector<int>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out + "]";
}

}  // namespace

void RunConfig::validate() const {
  if (plant.empty()) throw ConfigError("plant is required");
  if (spec.empty()) throw ConfigError("spec is required");
  if (budget < 1) throw ConfigError("budget must be at least 1");
  if (horizon < 0.0) throw ConfigError("horizon must be non-negative");
  if (dt < 0.0) throw ConfigError("dt must be non-negative");
  if (!(k > 0.0)) throw ConfigError("smoothing parameter k must be positive");
  if (!(segment > 0.0)) throw ConfigError("segment must be positive");
  for (int o : orders) {
    if (o < 1) throw ConfigError("lifting orders must be >= 1");
  }
  if (!(state_bound > 0.0)) throw ConfigError("state_bound must be positive");
  if (known_dynamics != "none" && known_dynamics != "decay") {
    throw ConfigError("unknown known_dynamics '" + known_dynamics + "'");
  }
  train.validate();
  symreg.validate();
  if (solver_method != "reduced-space" && solver_method != "augmented-lagrangian") {
    throw ConfigError("unknown solver method '" + solver_method + "'");
  }
  if (solver.max_iterations < 1 || solver.max_inner_iterations < 1 || solver.lbfgs_memory < 1) {
    throw ConfigError("solver iteration counts must be positive");
  }
  if (!(solver.constraint_tolerance > 0.0) || !(solver.gradient_tolerance > 0.0) ||
      !(solver.initial_penalty > 0.0) || !(solver.penalty_growth > 1.0) ||
      !(solver.required_violation_drop > 0.0 && solver.required_violation_drop < 1.0)) {
    throw ConfigError("invalid solver tolerances or penalty schedule");
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section != "train" && section != "symreg" && section != "solver") {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + full + "'");
    try {
      it->second(cfg, parse_value(s.substr(eq + 1)));
    } catch (const ValueError& e) {
      throw ConfigError(where + full + ": " + e.message);
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const RunConfig& c) {
  std::ostringstream o;
  o << "plant = " << quoted(c.plant) << '\n'
    << "spec = " << quoted(c.spec) << '\n'
    << "budget = " << c.budget << '\n'
    << "horizon = " << num(c.horizon) << '\n'
    << "dt = " << num(c.dt) << '\n'
    << "k = " << num(c.k) << '\n'
    << "segment = " << num(c.segment) << '\n'
    << "orders = " << list(c.orders) << '\n'
    << "known_dynamics = " << quoted(c.known_dynamics) << '\n'
    << "state_bound = " << num(c.state_bound) << '\n'
    << "seed = " << c.seed << '\n'
    << "output_dir = " << quoted(c.output_dir.string()) << '\n';
  const auto& t = c.train;
  o << "\n[train]\n"
    << "learning_rate = " << num(t.learning_rate) << '\n'
    << "adam_epochs = " << t.adam_epochs << '\n'
    << "lbfgs_iterations = " << t.lbfgs_iterations << '\n'
    << "lbfgs_memory = " << t.lbfgs_memory << '\n'
    << "beta1 = " << num(t.beta1) << '\n'
    << "beta2 = " << num(t.beta2) << '\n'
    << "epsilon = " << num(t.epsilon) << '\n'
    << "solve_step = " << num(t.solve_step) << '\n'
    << "hidden = " << list(t.hidden) << '\n'
    << "zero_init = " << (t.zero_init ? "true" : "false") << '\n';
  const auto& s = c.symreg;
  o << "\n[symreg]\n"
    << "iterations = " << s.iterations << '\n'
    << "population = " << s.population << '\n'
    << "complexity_cap = " << s.complexity_cap << '\n'
    << "tournament = " << s.tournament << '\n'
    << "crossover_rate = " << num(s.crossover_rate) << '\n'
    << "mutation_rate = " << num(s.mutation_rate) << '\n'
    << "optimize_probability = " << num(s.optimize_probability) << '\n'
    << "constant_steps = " << s.constant_steps << '\n'
    << "max_samples = " << s.max_samples << '\n'
    << "extra_per_point = " << num(s.extra_per_point) << '\n'
    << "perturb_scale = " << num(s.perturb_scale) << '\n';
  const auto& v = c.solver;
  o << "\n[solver]\n"
    << "method = " << quoted(c.solver_method) << '\n'
    << "max_iterations = " << v.max_iterations << '\n'
    << "constraint_tolerance = " << num(v.constraint_tolerance) << '\n'
    << "gradient_tolerance = " << num(v.gradient_tolerance) << '\n'
    << "initial_penalty = " << num(v.initial_penalty) << '\n'
    << "penalty_growth = " << num(v.penalty_growth) << '\n'
    << "required_violation_drop = " << num(v.required_violation_drop) << '\n'
    << "max_inner_iterations = " << v.max_inner_iterations << '\n'
    << "lbfgs_memory = " << v.lbfgs_memory << '\n';
  return o.str();
}

}  // namespace falconn::falsify
