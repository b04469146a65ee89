#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "falconn/sim/system.hpp"

namespace falconn::sim {

inline constexpr int kTraceSchemaVersion = 1;

/// CSV body: header `time,u_<name>...,y_<name>...`, one row per sample, every
/// number with 17 significant digits.
void write_trace_csv(std::ostream& out, const Trace& trace);
/// JSON sidecar with schema version, plant, period, x0 and channel names.
std::string trace_manifest(const Trace& trace);

/// Parses a CSV body plus its manifest text. Throws SchemaError on any
/// inconsistency between the two.
Trace parse_trace(std::istream& csv, const std::string& manifest);

/// `<stem>.json` next to the CSV.
std::filesystem::path manifest_path(const std::filesystem::path& csv);

/// Writes the CSV and its sidecar manifest.
void save_trace(const Trace& trace, const std::filesystem::path& csv);
/// Reads a CSV and its sidecar. A missing manifest is a SchemaError.
Trace load_trace(const std::filesystem::path& csv);

/// Reads a CSV that may lack a manifest (e.g. a hand-written input file).
/// Only the time column and the named columns are used.
Trace load_trace_csv_only(const std::filesystem::path& csv);

}  // namespace falconn::sim
