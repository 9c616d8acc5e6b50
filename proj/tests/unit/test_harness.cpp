#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "taskarith/error.hpp"
#include "taskarith/harness.hpp"
#include "taskarith/random.hpp"
#include "taskarith/report.hpp"

using namespace taskarith;

namespace {

ExperimentConfig small(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.seed = 5;
  c.task = {10, 3, 6, 0.4, 0.2, 0.0, {0.8, -0.6}, 0.0};
  c.train.iterations = 40;
  c.train.m = 32;
  c.train.batch = 16;
  c.train.eta = 2.0;
  c.train.xi = 0.01;
  c.eval_samples = 200;
  c.diagnostics.samples = 20;
  c.lambda = {-1.0, 2.0, 0.5};
  return c;
}

Json minimal(const char* kind) { return {{"schema_version", 1}, {"kind", kind}}; }

}  // namespace

TEST_CASE("config parsing fills defaults and rejects unknown keys") {
  const ExperimentConfig c = parse_config(minimal("sweep"));
  CHECK(c.kind == ExperimentKind::sweep);
  CHECK(c.train.eta == 0.2);

  Json typo = minimal("sweep");
  typo["train"] = {{"etaa", 0.1}};
  CHECK_THROWS_WITH_AS(parse_config(typo), doctest::Contains("train.etaa"), ConfigError);
  Json top = minimal("sweep");
  top["sead"] = 1;
  CHECK_THROWS_AS(parse_config(top), ConfigError);
  Json version = minimal("sweep");
  version["schema_version"] = 2;
  CHECK_THROWS_AS(parse_config(version), ConfigError);
  CHECK_THROWS_AS(parse_config(Json{{"schema_version", 1}}), ConfigError);
  Json kind = minimal("sweeep");
  CHECK_THROWS_AS(parse_config(kind), ConfigError);
  Json step = minimal("sweep");
  step["grid"] = {{"lambda", {{"lo", 0}, {"hi", 1}, {"step", 0}}}};
  CHECK_THROWS_AS(parse_config(step), ConfigError);
  Json type = minimal("sweep");
  type["seed"] = "seven";
  CHECK_THROWS_AS(parse_config(type), ConfigError);
  Json norm = minimal("ood_grid");
  norm["task"] = {{"gammas", {0.5, 0.5}}, {"kappa", 0.2}};
  CHECK_THROWS_AS(parse_config(norm), ConfigError);
}

TEST_CASE("config survives a JSON round-trip") {
  Json j = minimal("ood_grid");
  j["seed"] = 42;
  j["analysis"] = {{"beta", 0.01}, {"c", 0.1}, {"experimental_margin", true}};
  j["grid"] = {{"lambda", {{"lo", -2}, {"hi", 3}, {"step", 0.5}}}};
  const ExperimentConfig a = parse_config(j);
  CHECK(a.analysis.margin == doctest::Approx(0.3));
  const ExperimentConfig b = parse_config(to_json(a));
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(b.lambda.values().size() == 11);
}

TEST_CASE("grid arithmetic") {
  const GridAxis g{-1.0, 2.0, 0.5};
  const auto v = g.values();
  CHECK(v.size() == 7);
  CHECK(v.front() == -1.0);
  CHECK(v.back() == 2.0);
  CHECK(GridAxis{-2.0, 2.0, 0.2}.values()[5] == -1.0);
  CHECK(GridAxis{0.0, 0.0, 1.0}.values().size() == 1);
}

TEST_CASE("seeds of existing rows do not depend on the grid size") {
  const SeedPlan s = SeedPlan::from(9);
  CHECK(s.row(3) == mix_seed(s.diagnostics, 3));
  CHECK(s.train1 != s.train2);
}

TEST_CASE("sweep, approx-compare and reports on a small pair") {
  const ExperimentConfig cfg = small(ExperimentKind::sweep);
  const TaskPair pair = train_task_pair(cfg, 0.0);
  const auto rows = run_sweep(cfg, pair);
  REQUIRE(rows.size() == 7);
  CHECK(std::is_sorted(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.lambda < b.lambda; }));

  const auto zero = std::find_if(rows.begin(), rows.end(), [](auto& r) { return r.lambda == 0.0; });
  REQUIRE(zero != rows.end());
  const ErrorPair alone = eval_error(merge(pair.base, {MergeTerm{pair.tv1, 1.0}}), pair.eval1.samples);
  CHECK(zero->err1.hinge == alone.hinge);
  CHECK(zero->err1.zero_one == alone.zero_one);

  ExperimentConfig ac = small(ExperimentKind::approx_compare);
  ac.approx.tau_rel = {0.0, 0.1};
  const auto approx = run_approx_compare(ac, pair);
  REQUIRE(approx.size() == 4);
  const auto one = std::find_if(rows.begin(), rows.end(), [](auto& r) { return r.lambda == 1.0; });
  CHECK(approx[0].variant == "full");
  CHECK(approx[0].err1.hinge == one->err1.hinge);
  CHECK(approx[0].err2.hinge == one->err2.hinge);
  CHECK(approx[2].variant == "prune");
  CHECK(approx[2].tau_rel == 0.0);
  CHECK(approx[2].err1.hinge == approx[0].err1.hinge);
  CHECK(approx[2].err2.hinge == approx[0].err2.hinge);

  const Table t = to_table(std::span<const SweepRow>(rows));
  const std::string csv = emit_csv(t);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
  CHECK(csv.rfind("lambda,err1_hinge,err1_01,err2_hinge,err2_01,in_mtl_region,in_unlearn_region,p_bar,"
                  "aligned_fraction,seed\n",
                  0) == 0);
  CHECK(parse_csv(csv, ExperimentKind::sweep) == t);
  CHECK(parse_json(emit_json(t)) == t);
  const Table at = to_table(std::span<const ApproxRow>(approx));
  CHECK(parse_csv(emit_csv(at), ExperimentKind::approx_compare) == at);
  CHECK(run_sweep(cfg, pair).size() == 7);
  CHECK(emit_csv(to_table(std::span<const SweepRow>(run_sweep(cfg, pair)))) == csv);
}

TEST_CASE("out-of-domain grid shape and zero merge") {
  ExperimentConfig cfg = small(ExperimentKind::ood_grid);
  cfg.lambda = {-2.0, 3.0, 0.5};
  cfg.lambda2 = {-2.0, 3.0, 0.5};
  cfg.eval_samples = 100;
  const OodGridResult r = run_ood_grid(cfg);
  CHECK(r.rows.size() == 121);
  const auto origin = std::find_if(r.rows.begin(), r.rows.end(),
                                   [](auto& x) { return x.lambda1 == 0.0 && x.lambda2 == 0.0; });
  REQUIRE(origin != r.rows.end());
  CHECK(origin->err.hinge == doctest::Approx(1.0).epsilon(0.02));  // psi0 outputs are ~0
  CHECK_FALSE(origin->check.verdict);
  CHECK(r.closed_form.solution.lambdas.size() == 2);
  const Table t = to_table(std::span<const OodRow>(r.rows));
  CHECK(parse_csv(emit_csv(t), ExperimentKind::ood_grid) == t);
}

TEST_CASE("ood grid requires orthogonal sources") {
  ExperimentConfig cfg = small(ExperimentKind::ood_grid);
  const TaskPair aligned = train_task_pair(cfg, 0.5);
  CHECK_THROWS_AS(run_ood_grid(cfg, aligned), ParameterError);
}

TEST_CASE("train-only logs every iteration") {
  const TrainOnlyResult r = run_train_only(small(ExperimentKind::train_only));
  CHECK(r.rows.size() == 40);
  CHECK(r.rows.back().iteration == 39);
  const Table t = to_table(std::span<const TrainRow>(r.rows));
  CHECK(parse_json(emit_json(t)) == t);
}

TEST_CASE("report emission") {
  std::vector<SweepRow> rows(3);
  rows[1].p_bar = std::numeric_limits<double>::quiet_NaN();
  rows[2].lambda = 0.1;
  const Table t = to_table(std::span<const SweepRow>(rows));
  CHECK(parse_csv(emit_csv(t), ExperimentKind::sweep) == t);
  CHECK(parse_json(emit_json(t)) == t);

  const auto dir = std::filesystem::temp_directory_path() / "taskarith_report_test";
  std::filesystem::create_directories(dir);
  emit_report(t, dir / "a.csv", ReportFormat::csv);
  emit_report(t, dir / "b.csv", ReportFormat::csv);
  CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));
  CHECK_THROWS_AS(emit_report(Table{ExperimentKind::sweep, {}}, dir / "c.csv", ReportFormat::csv), ParameterError);
  CHECK_THROWS_AS(emit_report(t, dir / "no" / "d.csv", ReportFormat::csv), IoError);
  CHECK_THROWS_AS(parse_csv("lambda,oops\n", ExperimentKind::sweep), ConfigError);
  std::filesystem::remove_all(dir);
}
