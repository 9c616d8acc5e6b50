#include <doctest.h>

#include <filesystem>

#include "taskarith/error.hpp"
#include "taskarith/serialize.hpp"

using namespace taskarith;

TEST_CASE("params round-trip bit-exactly through binary and JSON") {
  const ModelParams p = init_params(5, 7, 3, 0.2, 11);
  const ModelParams b = params_from_binary(params_to_binary(p));
  CHECK(b.W == p.W);
  CHECK(b.V == p.V);
  CHECK(b.A == p.A);
  const ModelParams j = params_from_json(Json::parse(params_to_json(p).dump()));
  CHECK(j.W == p.W);
  CHECK(j.V == p.V);
  CHECK(j.A == p.A);
}

TEST_CASE("binary readers reject damaged blobs") {
  const std::string blob = params_to_binary(init_params(3, 4, 2, 0.2, 1));
  CHECK_THROWS_AS(params_from_binary(blob.substr(0, blob.size() - 3)), ConfigError);
  CHECK_THROWS_AS(params_from_binary(blob + "x"), ConfigError);
  std::string bad = blob;
  bad[0] = 'X';
  CHECK_THROWS_AS(params_from_binary(bad), ConfigError);
}

TEST_CASE("task vectors round-trip with provenance") {
  const ModelParams a = init_params(4, 6, 3, 0.2, 1);
  ModelParams b = a;
  b.W(1, 2) += 0.25;
  b.V(3, 0) -= 1e-17;
  const TaskVector tv = extract(b, a, {"psi0", "psi1", "T1"});
  const TaskVector bin = task_vector_from_binary(task_vector_to_binary(tv));
  CHECK(bin.dW == tv.dW);
  CHECK(bin.dV == tv.dV);
  CHECK(bin.provenance.task_id == "T1");
  const TaskVector js = task_vector_from_json(Json::parse(task_vector_to_json(tv).dump()));
  CHECK(js.dV == tv.dV);
  CHECK(js.provenance.finetuned_id == "psi1");
}

TEST_CASE("task spec round-trips and unknown format versions are refused") {
  const TaskSpec s = make_task_spec(8, 4, 10, 0.4, 0.2, 3);
  Json j = task_spec_to_json(s);
  const TaskSpec back = task_spec_from_json(Json::parse(j.dump()));
  CHECK(back.mu == s.mu);
  CHECK(back.basis == s.basis);
  j["format_version"] = 99;
  CHECK_THROWS_AS(task_spec_from_json(j), ConfigError);
}

TEST_CASE("region and check JSON use fixed keys") {
  const LambdaRegion r = unlearn_lambda_region(0.0, AnalysisConfig::theory(0.05, 0.5));
  const Json j = to_json(r);
  CHECK(j.at("kind") == "half-line");
  CHECK(j.at("lo").is_null());
  CHECK(j.at("hi") == 0.0);
  CHECK(j.contains("rationale"));
  const std::vector<double> g{1.0}, l{1.5};
  const Json c = to_json(ood_condition_check(g, l, AnalysisConfig::theory(0.05, 0.5)));
  for (const char* k : {"verdict", "cond1_slack", "cond2_slack", "cond3_slack", "existence"}) CHECK(c.contains(k));
  const Json d = to_json(DiagnosticReport{});
  for (const char* k : {"p_bar", "aligned_fraction", "kept_fraction", "row_norms"}) CHECK(d.contains(k));
}

TEST_CASE("atomic writes leave no temp file and report bad paths") {
  const auto dir = std::filesystem::temp_directory_path() / "taskarith_serialize_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "blob.bin";
  write_file_atomic(path, "hello");
  CHECK(read_file(path) == "hello");
  CHECK_FALSE(std::filesystem::exists(dir / "blob.bin.tmp"));
  CHECK_THROWS_AS(write_file_atomic(dir / "missing" / "x.bin", "x"), IoError);
  CHECK_THROWS_AS(read_file(dir / "nope.bin"), IoError);
  std::filesystem::remove_all(dir);
}
