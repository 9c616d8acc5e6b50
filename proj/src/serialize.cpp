#include "taskarith/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "taskarith/error.hpp"

namespace taskarith {
namespace {

constexpr char kParamsMagic[8] = {'T', 'A', 'P', 'A', 'R', 'A', 'M', 'S'};
constexpr char kTaskVectorMagic[8] = {'T', 'A', 'T', 'V', 'E', 'C', 'T', 'R'};

std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Eigen::MatrixXd from_row_major(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw ShapeError(std::string(name) + " has " + std::to_string(v.size()) + " entries, expected " +
                     std::to_string(rows * cols));
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[k++];
  return m;
}

void check_version(const Json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kFormatVersion) throw ConfigError("unsupported format_version " + std::to_string(version));
}

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void matrix(const Eigen::MatrixXd& m) {
    for (double v : row_major(m)) raw(&v, sizeof v);
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    std::uint32_t v = 0;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) raw(&m(r, c), sizeof(double));
    return m;
  }
  void magic(const char (&expected)[8]) {
    need(8);
    if (std::memcmp(bytes_.data() + pos_, expected, 8) != 0) throw ConfigError("bad magic in binary blob");
    pos_ += 8;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  void finish() const {
    if (pos_ != bytes_.size()) throw ConfigError("trailing bytes in binary blob");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ConfigError("truncated binary blob");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Json dataset_to_json(const Dataset& data, const TaskSpec& spec) {
  Json samples = Json::array();
  for (const Sample& s : data.samples) samples.push_back({{"y", s.y}, {"token_ids", s.token_ids}});
  return {{"d", spec.d}, {"P", spec.P}, {"M", spec.M}, {"samples", std::move(samples)}};
}

Dataset dataset_from_json(const Json& j, const TaskSpec& spec) {
  if (j.at("d").get<int>() != spec.d || j.at("P").get<int>() != spec.P || j.at("M").get<int>() != spec.M)
    throw ShapeError("dataset dimensions do not match the task spec");
  Dataset out;
  for (const Json& s : j.at("samples")) {
    Sample sample = make_sample(spec, s.at("y").get<int>(), s.at("token_ids").get<std::vector<TokenId>>());
    if (sample.counts.relevant <= sample.counts.confusion)
      throw ParameterError("stored sample violates the majority rule");
    out.samples.push_back(std::move(sample));
  }
  return out;
}

Json task_spec_to_json(const TaskSpec& spec) {
  return {{"format_version", kFormatVersion},
          {"d", spec.d},
          {"P", spec.P},
          {"M", spec.M},
          {"mu", std::vector<double>(spec.mu.data(), spec.mu.data() + spec.mu.size())},
          {"basis", row_major(spec.basis)},
          {"delta_star", spec.delta_star},
          {"delta_hash", spec.delta_hash},
          {"seed", spec.seed}};
}

TaskSpec task_spec_from_json(const Json& j) {
  check_version(j);
  TaskSpec s;
  s.d = j.at("d").get<int>();
  s.P = j.at("P").get<int>();
  s.M = j.at("M").get<int>();
  const auto mu = j.at("mu").get<std::vector<double>>();
  if (static_cast<int>(mu.size()) != s.d) throw ShapeError("mu has the wrong length");
  s.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), s.d);
  s.basis = from_row_major(j.at("basis").get<std::vector<double>>(), s.d, s.M, "basis");
  s.delta_star = j.at("delta_star").get<double>();
  s.delta_hash = j.at("delta_hash").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  validate(s);
  return s;
}

Json params_to_json(const ModelParams& p) {
  return {{"format_version", kFormatVersion},
          {"d", p.d()},
          {"m", p.m()},
          {"P", p.P()},
          {"W", row_major(p.W)},
          {"V", row_major(p.V)},
          {"A", row_major(p.A)}};
}

ModelParams params_from_json(const Json& j) {
  check_version(j);
  const int d = j.at("d").get<int>();
  const int m = j.at("m").get<int>();
  const int P = j.at("P").get<int>();
  ModelParams p;
  p.W = from_row_major(j.at("W").get<std::vector<double>>(), d, d, "W");
  p.V = from_row_major(j.at("V").get<std::vector<double>>(), m, d, "V");
  p.A = from_row_major(j.at("A").get<std::vector<double>>(), P, m, "A");
  return p;
}

std::string params_to_binary(const ModelParams& p) {
  Writer w;
  w.raw(kParamsMagic, 8);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(p.d()));
  w.u32(static_cast<std::uint32_t>(p.m()));
  w.u32(static_cast<std::uint32_t>(p.P()));
  w.matrix(p.W);
  w.matrix(p.V);
  w.matrix(p.A);
  return w.take();
}

ModelParams params_from_binary(const std::string& bytes) {
  Reader r(bytes);
  r.magic(kParamsMagic);
  if (r.u32() != kFormatVersion) throw ConfigError("unsupported binary format version");
  const Eigen::Index d = r.u32();
  const Eigen::Index m = r.u32();
  const Eigen::Index P = r.u32();
  ModelParams p;
  p.W = r.matrix(d, d);
  p.V = r.matrix(m, d);
  p.A = r.matrix(P, m);
  r.finish();
  return p;
}

Json task_vector_to_json(const TaskVector& tv) {
  return {{"format_version", kFormatVersion},
          {"d", tv.dW.rows()},
          {"m", tv.dV.rows()},
          {"provenance",
           {{"pretrained_id", tv.provenance.pretrained_id},
            {"finetuned_id", tv.provenance.finetuned_id},
            {"task_id", tv.provenance.task_id}}},
          {"dW", row_major(tv.dW)},
          {"dV", row_major(tv.dV)}};
}

TaskVector task_vector_from_json(const Json& j) {
  check_version(j);
  const auto d = j.at("d").get<Eigen::Index>();
  const auto m = j.at("m").get<Eigen::Index>();
  TaskVector tv;
  tv.dW = from_row_major(j.at("dW").get<std::vector<double>>(), d, d, "dW");
  tv.dV = from_row_major(j.at("dV").get<std::vector<double>>(), m, d, "dV");
  const Json& prov = j.at("provenance");
  tv.provenance = {prov.at("pretrained_id").get<std::string>(), prov.at("finetuned_id").get<std::string>(),
                   prov.at("task_id").get<std::string>()};
  return tv;
}

std::string task_vector_to_binary(const TaskVector& tv) {
  Writer w;
  w.raw(kTaskVectorMagic, 8);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(tv.dW.rows()));
  w.u32(static_cast<std::uint32_t>(tv.dV.rows()));
  w.str(tv.provenance.pretrained_id);
  w.str(tv.provenance.finetuned_id);
  w.str(tv.provenance.task_id);
  w.matrix(tv.dW);
  w.matrix(tv.dV);
  return w.take();
}

TaskVector task_vector_from_binary(const std::string& bytes) {
  Reader r(bytes);
  r.magic(kTaskVectorMagic);
  if (r.u32() != kFormatVersion) throw ConfigError("unsupported binary format version");
  const Eigen::Index d = r.u32();
  const Eigen::Index m = r.u32();
  TaskVector tv;
  tv.provenance.pretrained_id = r.str();
  tv.provenance.finetuned_id = r.str();
  tv.provenance.task_id = r.str();
  tv.dW = r.matrix(d, d);
  tv.dV = r.matrix(m, d);
  r.finish();
  return tv;
}

namespace {

// JSON has no infinities; unbounded ends are written as null.
Json bound(double v) { return std::isinf(v) ? Json(nullptr) : Json(v); }

}  // namespace

Json to_json(const LambdaRegion& r) {
  return {{"kind", to_string(r.kind)}, {"lo", bound(r.lo)}, {"hi", bound(r.hi)}, {"rationale", r.rationale}};
}

Json to_json(const OodCheck& c) {
  return {{"verdict", c.verdict},
          {"cond1_slack", c.cond1_slack},
          {"cond2_slack", c.cond2_slack},
          {"cond3_slack", c.cond3_slack},
          {"existence", c.existence},
          {"lambdas_nonzero", c.lambdas_nonzero}};
}

Json to_json(const DiagnosticReport& r) {
  return {{"p_bar", r.p_bar},
          {"aligned_fraction", r.aligned_fraction},
          {"kept_fraction", r.kept_fraction},
          {"row_norms", r.row_norms}};
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace taskarith
