#include "falconn/sim/trace_io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "common/numfmt.hpp"
#include "falconn/error.hpp"

namespace falconn::sim {
namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t row) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw SchemaError("bad number '" + s + "' on data row " + std::to_string(row));
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<double> times;
  std::vector<std::vector<double>> u_rows;
  std::vector<std::vector<double>> y_rows;
};

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line);
  if (header.empty() || header[0] != "time") {
    throw SchemaError("trace header must start with 'time'");
  }
  std::vector<char> kind(header.size(), 't');
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string& h = header[c];
    if (h.rfind("u_", 0) == 0) {
      kind[c] = 'u';
      t.inputs.push_back(h.substr(2));
    } else if (h.rfind("y_", 0) == 0) {
      kind[c] = 'y';
      t.outputs.push_back(h.substr(2));
    } else {
      throw SchemaError("trace column '" + h + "' lacks a u_/y_ prefix");
    }
  }
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      throw SchemaError("data row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " columns, expected " +
                        std::to_string(header.size()));
    }
    std::vector<double> u, y;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = parse_number(cells[c], row);
      if (kind[c] == 't') t.times.push_back(v);
      else if (kind[c] == 'u') u.push_back(v);
      else y.push_back(v);
    }
    t.u_rows.push_back(std::move(u));
    t.y_rows.push_back(std::move(y));
  }
  if (t.times.empty()) throw SchemaError("trace has no samples");
  return t;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows,
                          std::size_t cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
  }
  return m;
}

Trace from_table(CsvTable t) {
  Trace tr;
  tr.times = std::move(t.times);
  tr.inputs = to_matrix(t.u_rows, t.inputs.size());
  tr.outputs = to_matrix(t.y_rows, t.outputs.size());
  tr.input_names = std::move(t.inputs);
  tr.output_names = std::move(t.outputs);
  return tr;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << "time";
  for (const auto& n : trace.input_names) out << ",u_" << n;
  for (const auto& n : trace.output_names) out << ",y_" << n;
  out << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << detail::format_exact(trace.times[i]);
    for (Eigen::Index c = 0; c < trace.inputs.cols(); ++c) {
      out << ',' << detail::format_exact(trace.inputs(r, c));
    }
    for (Eigen::Index c = 0; c < trace.outputs.cols(); ++c) {
      out << ',' << detail::format_exact(trace.outputs(r, c));
    }
    out << '\n';
  }
}

std::string trace_manifest(const Trace& trace) {
  json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["plant"] = trace.plant;
  j["period"] = trace.period;
  j["x0"] = std::vector<double>(trace.x0.data(), trace.x0.data() + trace.x0.size());
  j["inputs"] = trace.input_names;
  j["outputs"] = trace.output_names;
  j["samples"] = trace.size();
  return j.dump(2) + "\n";
}

Trace parse_trace(std::istream& csv, const std::string& manifest) {
  json j;
  try {
    j = json::parse(manifest);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed trace manifest: ") + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kTraceSchemaVersion) {
      throw SchemaError("unsupported trace schema version " +
                        j.at("schema_version").dump());
    }
    Trace tr = from_table(read_csv(csv));
    if (j.at("inputs").get<std::vector<std::string>>() != tr.input_names ||
        j.at("outputs").get<std::vector<std::string>>() != tr.output_names) {
      throw SchemaError("manifest channels do not match the CSV header");
    }
    if (j.at("samples").get<std::size_t>() != tr.size()) {
      throw SchemaError("manifest sample count does not match the CSV");
    }
    tr.plant = j.at("plant").get<std::string>();
    tr.period = j.at("period").get<double>();
    const auto x0 = j.at("x0").get<std::vector<double>>();
    tr.x0 = Eigen::Map<const Eigen::VectorXd>(x0.data(),
                                              static_cast<Eigen::Index>(x0.size()));
    return tr;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("invalid trace manifest: ") + e.what());
  }
}

std::filesystem::path manifest_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension(".json");
  return p;
}

void save_trace(const Trace& trace, const std::filesystem::path& csv) {
  {
    std::ofstream out(csv, std::ios::binary);
    if (!out) throw Error("cannot write " + csv.string());
    write_trace_csv(out, trace);
    if (!out) throw Error("write failed for " + csv.string());
  }
  std::ofstream out(manifest_path(csv), std::ios::binary);
  if (!out) throw Error("cannot write " + manifest_path(csv).string());
  out << trace_manifest(trace);
}

Trace load_trace(const std::filesystem::path& csv) {
  const auto mpath = manifest_path(csv);
  if (!std::filesystem::exists(mpath)) {
    throw SchemaError("missing trace manifest " + mpath.string());
  }
  const std::string manifest = read_file(mpath);
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + csv.string());
  return parse_trace(in, manifest);
}

Trace load_trace_csv_only(const std::filesystem::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + csv.string());
  Trace tr = from_table(read_csv(in));
  if (tr.size() > 1) tr.period = tr.times[1] - tr.times[0];
  return tr;
}

}  // namespace falconn::sim
