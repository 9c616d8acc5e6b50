#include "taskarith/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "taskarith/error.hpp"
#include "taskarith/serialize.hpp"

namespace taskarith {
namespace {

using CT = ColumnType;

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("bad real '" + s + "' in report");
  return v;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string cell_text(const Cell& c) {
  if (const auto* u = std::get_if<std::uint64_t>(&c)) return std::to_string(*u);
  if (const auto* d = std::get_if<double>(&c)) return format_real(*d);
  if (const auto* b = std::get_if<bool>(&c)) return *b ? "true" : "false";
  return quote(std::get<std::string>(c));
}

Cell parse_cell(const std::string& s, ColumnType type) {
  switch (type) {
    case CT::integer: {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
      if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("bad integer '" + s + "' in report");
      return static_cast<std::uint64_t>(v);
    }
    case CT::real: return parse_real(s);
    case CT::boolean:
      if (s == "true") return true;
      if (s == "false") return false;
      throw ConfigError("bad boolean '" + s + "' in report");
    case CT::text: return s;
  }
  return s;
}

Json cell_json(const Cell& c) {
  if (const auto* u = std::get_if<std::uint64_t>(&c)) return *u;
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? Json(*d) : Json(format_real(*d));
  if (const auto* b = std::get_if<bool>(&c)) return *b;
  return std::get<std::string>(c);
}

Cell json_cell(const Json& j, ColumnType type) {
  try {
    switch (type) {
      case CT::integer: return j.get<std::uint64_t>();
      case CT::real: return j.is_string() ? parse_real(j.get<std::string>()) : j.get<double>();
      case CT::boolean: return j.get<bool>();
      case CT::text: return j.get<std::string>();
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad report cell: ") + e.what());
  }
  return std::string{};
}

bool cell_equal(const Cell& a, const Cell& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    return (std::isnan(*x) && std::isnan(y)) || *x == y;
  }
  return a == b;
}

}  // namespace

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw ConfigError("unknown report format '" + s + "' (expected csv or json)");
}

const std::vector<Column>& columns(ExperimentKind kind) {
  static const std::vector<Column> sweep{{"lambda", CT::real},           {"err1_hinge", CT::real},
                                         {"err1_01", CT::real},          {"err2_hinge", CT::real},
                                         {"err2_01", CT::real},          {"in_mtl_region", CT::boolean},
                                         {"in_unlearn_region", CT::boolean}, {"p_bar", CT::real},
                                         {"aligned_fraction", CT::real}, {"seed", CT::integer}};
  static const std::vector<Column> ood{{"lambda1", CT::real},     {"lambda2", CT::real},     {"err_hinge", CT::real},
                                       {"err_01", CT::real},      {"verdict", CT::boolean},  {"cond1_slack", CT::real},
                                       {"cond2_slack", CT::real}, {"cond3_slack", CT::real}, {"existence", CT::boolean},
                                       {"seed", CT::integer}};
  static const std::vector<Column> approx{
      {"variant", CT::text},       {"tau_rel", CT::real},    {"lambda", CT::real},     {"err1_hinge", CT::real},
      {"err1_01", CT::real},       {"err2_hinge", CT::real}, {"err2_01", CT::real},    {"kept_fraction", CT::real},
      {"residual_w", CT::real},    {"residual_v", CT::real}, {"status", CT::text},     {"seed", CT::integer}};
  static const std::vector<Column> train{{"iteration", CT::integer}, {"batch_loss", CT::real}};
  switch (kind) {
    case ExperimentKind::sweep: return sweep;
    case ExperimentKind::ood_grid: return ood;
    case ExperimentKind::approx_compare: return approx;
    case ExperimentKind::train_only: return train;
  }
  return sweep;
}

bool operator==(const Table& a, const Table& b) {
  if (a.kind != b.kind || a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i].size() != b.rows[i].size()) return false;
    for (std::size_t k = 0; k < a.rows[i].size(); ++k)
      if (!cell_equal(a.rows[i][k], b.rows[i][k])) return false;
  }
  return true;
}

Table to_table(std::span<const SweepRow> rows) {
  Table t{ExperimentKind::sweep, {}};
  for (const SweepRow& r : rows)
    t.rows.push_back({r.lambda, r.err1.hinge, r.err1.zero_one, r.err2.hinge, r.err2.zero_one, r.in_mtl_region,
                      r.in_unlearn_region, r.p_bar, r.aligned_fraction, r.seed});
  return t;
}

Table to_table(std::span<const OodRow> rows) {
  Table t{ExperimentKind::ood_grid, {}};
  for (const OodRow& r : rows)
    t.rows.push_back({r.lambda1, r.lambda2, r.err.hinge, r.err.zero_one, r.check.verdict, r.check.cond1_slack,
                      r.check.cond2_slack, r.check.cond3_slack, r.check.existence, r.seed});
  return t;
}

Table to_table(std::span<const ApproxRow> rows) {
  Table t{ExperimentKind::approx_compare, {}};
  for (const ApproxRow& r : rows)
    t.rows.push_back({r.variant, r.tau_rel, r.lambda, r.err1.hinge, r.err1.zero_one, r.err2.hinge, r.err2.zero_one,
                      r.kept_fraction, r.residual_w, r.residual_v, r.status, r.seed});
  return t;
}

Table to_table(std::span<const TrainRow> rows) {
  Table t{ExperimentKind::train_only, {}};
  for (const TrainRow& r : rows)
    t.rows.push_back({static_cast<std::uint64_t>(r.iteration), r.batch_loss});
  return t;
}

std::string emit_csv(const Table& t) {
  const auto& cols = columns(t.kind);
  std::string out;
  for (std::size_t k = 0; k < cols.size(); ++k) out += (k ? "," : "") + cols[k].name;
  out += '\n';
  for (const Row& row : t.rows) {
    if (row.size() != cols.size()) throw ShapeError("report row has the wrong number of cells");
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += cell_text(row[k]);
    }
    out += '\n';
  }
  return out;
}

std::string emit_json(const Table& t) {
  const auto& cols = columns(t.kind);
  Json rows = Json::array();
  for (const Row& row : t.rows) {
    if (row.size() != cols.size()) throw ShapeError("report row has the wrong number of cells");
    Json obj = Json::object();
    for (std::size_t k = 0; k < row.size(); ++k) obj[cols[k].name] = cell_json(row[k]);
    rows.push_back(std::move(obj));
  }
  Json doc = {{"schema_version", kSchemaVersion}, {"kind", to_string(t.kind)}, {"rows", std::move(rows)}};
  return doc.dump(2) + "\n";
}

std::string emit(const Table& t, ReportFormat format) {
  return format == ReportFormat::csv ? emit_csv(t) : emit_json(t);
}

Table parse_csv(const std::string& text, ExperimentKind kind) {
  const auto& cols = columns(kind);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV report");
  const auto header = split_csv_line(line);
  if (header.size() != cols.size()) throw ConfigError("CSV header does not match the experiment kind");
  for (std::size_t k = 0; k < cols.size(); ++k)
    if (header[k] != cols[k].name) throw ConfigError("unexpected CSV column '" + header[k] + "'");
  Table t{kind, {}};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != cols.size()) throw ConfigError("CSV row has the wrong number of fields");
    Row row;
    for (std::size_t k = 0; k < cols.size(); ++k) row.push_back(parse_cell(fields[k], cols[k].type));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table parse_json(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("cannot parse JSON report: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("kind") || !doc.contains("rows")) throw ConfigError("malformed JSON report");
  Table t{experiment_kind_from_string(doc.at("kind").get<std::string>()), {}};
  const auto& cols = columns(t.kind);
  for (const Json& obj : doc.at("rows")) {
    if (obj.size() != cols.size()) throw ConfigError("JSON report row has the wrong number of fields");
    Row row;
    for (const Column& c : cols) {
      if (!obj.contains(c.name)) throw ConfigError("JSON report row is missing '" + c.name + "'");
      row.push_back(json_cell(obj.at(c.name), c.type));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table parse(const std::string& text, ReportFormat format, ExperimentKind kind) {
  return format == ReportFormat::csv ? parse_csv(text, kind) : parse_json(text);
}

void emit_report(const Table& t, const std::filesystem::path& path, ReportFormat format) {
  if (t.rows.empty()) throw ParameterError("refusing to write an empty report");
  write_file_atomic(path, emit(t, format));
}

}  // namespace taskarith
