#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "taskarith/harness.hpp"

namespace taskarith {

enum class ReportFormat { csv, json };

ReportFormat report_format_from_string(const std::string& s);

enum class ColumnType { integer, real, boolean, text };

struct Column {
  std::string name;
  ColumnType type;
};

using Cell = std::variant<std::uint64_t, double, bool, std::string>;
using Row = std::vector<Cell>;

/// Fixed column set per experiment kind.
const std::vector<Column>& columns(ExperimentKind kind);

struct Table {
  ExperimentKind kind = ExperimentKind::sweep;
  std::vector<Row> rows;
};

/// Cell-wise equality; NaN compares equal to NaN.
bool operator==(const Table& a, const Table& b);

Table to_table(std::span<const SweepRow> rows);
Table to_table(std::span<const OodRow> rows);
Table to_table(std::span<const ApproxRow> rows);
Table to_table(std::span<const TrainRow> rows);

/// Reals are printed with 17 significant digits so they parse back exactly.
std::string emit_csv(const Table& t);
std::string emit_json(const Table& t);
std::string emit(const Table& t, ReportFormat format);

Table parse_csv(const std::string& text, ExperimentKind kind);
Table parse_json(const std::string& text);
Table parse(const std::string& text, ReportFormat format, ExperimentKind kind);

/// Atomic write of a non-empty report.
void emit_report(const Table& t, const std::filesystem::path& path, ReportFormat format);

}  // namespace taskarith
