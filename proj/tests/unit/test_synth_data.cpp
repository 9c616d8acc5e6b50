#include <doctest.h>

#include <cmath>

#include "taskarith/error.hpp"
#include "taskarith/serialize.hpp"
#include "taskarith/synth_data.hpp"

using namespace taskarith;

namespace {

double binom(int n, int k) { return std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0)); }

// E[n_relevant / P | n_relevant > n_confusion] by enumerating count triples.
double conditioned_relevant_mean(int P, double ds, double dh) {
  double num = 0, den = 0;
  for (int r = 0; r <= P; ++r) {
    for (int c = 0; r + c <= P; ++c) {
      if (r <= c) continue;
      const double p = binom(P, r) * binom(P - r, c) * std::pow(ds, r) * std::pow(dh, c) *
                       std::pow(1 - ds - dh, P - r - c);
      num += p * r / P;
      den += p;
    }
  }
  return num / den;
}

}  // namespace

TEST_CASE("task spec has unit pattern and orthonormal irrelevant basis") {
  const TaskSpec s = make_task_spec(8, 4, 10, 0.4, 0.2, 7);
  CHECK(s.mu.norm() == doctest::Approx(1.0).epsilon(1e-14));
  const Eigen::MatrixXd gram = s.basis.transpose() * s.basis;
  CHECK((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.basis.transpose() * s.mu).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("task spec rejects d < M + 2") {
  CHECK_THROWS_WITH_AS(make_task_spec(4, 4, 10, 0.4, 0.2, 1), doctest::Contains("d >= M + 2 violated"),
                       ParameterError);
}

TEST_CASE("task spec is deterministic") {
  const TaskSpec a = make_task_spec(8, 4, 10, 0.4, 0.2, 7);
  const TaskSpec b = make_task_spec(8, 4, 10, 0.4, 0.2, 7);
  CHECK(a.mu == b.mu);
  CHECK(a.basis == b.basis);
}

TEST_CASE("correlated spec hits the requested overlap") {
  const TaskSpec base = make_task_spec(12, 4, 10, 0.4, 0.2, 3);
  for (double alpha : {-1.0, -0.9, 0.0, 0.5, 0.9, 1.0}) {
    const TaskSpec t = make_correlated_spec(base, alpha, 11);
    CHECK(std::abs(t.mu.dot(base.mu) - alpha) < 1e-12);
    CHECK(std::abs(t.mu.norm() - 1.0) < 1e-12);
  }
  CHECK(make_correlated_spec(base, 1.0, 11).mu == base.mu);
}

TEST_CASE("out-of-domain spec mixes the source patterns") {
  const TaskSpec t1 = make_task_spec(12, 4, 10, 0.4, 0.2, 3);
  const TaskSpec t2 = make_correlated_spec(t1, 0.0, 4);
  const std::vector<TaskSpec> src{t1, t2};
  {
    const std::vector<double> g{1.0, 0.0};
    CHECK(make_ood_spec(src, g, 0.0, 5).mu == t1.mu);
  }
  {
    const std::vector<double> g{0.6, 0.8};
    const TaskSpec o = make_ood_spec(src, g, 0.0, 5);
    CHECK(o.mu.dot(t1.mu) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(o.mu.dot(t2.mu) == doctest::Approx(0.8).epsilon(1e-12));
  }
  {
    const std::vector<double> g{0.6, 0.0};
    const TaskSpec o = make_ood_spec(src, g, 0.8, 5);
    CHECK(std::abs(o.mu.dot(t1.mu) - 0.6) < 1e-12);
    CHECK(std::abs(o.mu.dot(t2.mu)) < 1e-12);
  }
  const std::vector<double> bad{0.5, 0.5};
  CHECK_THROWS_WITH_AS(make_ood_spec(src, bad, 0.2, 5), doctest::Contains("0.54"), ParameterError);
}

TEST_CASE("degenerate fractions give all-relevant samples") {
  const TaskSpec s = make_task_spec(8, 4, 10, 1.0, 0.0, 2);
  const Dataset d = sample_dataset(s, 50, 3);
  for (const Sample& x : d.samples) {
    CHECK(x.counts.relevant == 10);
    for (int k = 0; k < 10; ++k) CHECK(x.X.col(k) == x.y * s.mu);
  }
}

TEST_CASE("samples obey the strict majority and use exact token columns") {
  const TaskSpec s = make_task_spec(10, 6, 12, 0.3, 0.25, 9);
  const Dataset d = sample_dataset(s, 500, 10);
  CHECK(d.acceptance_rate > 0.0);
  CHECK(d.acceptance_rate <= 1.0);
  for (const Sample& x : d.samples) {
    CHECK(x.counts.relevant > x.counts.confusion);
    for (int k = 0; k < s.P; ++k) CHECK(x.X.col(k) == token_vector(s, x.token_ids[static_cast<std::size_t>(k)]));
  }
}

TEST_CASE("relevant-token mean matches the enumerated conditioned mean") {
  const double exact = conditioned_relevant_mean(10, 0.4, 0.2);
  CHECK(exact == doctest::Approx(0.457926).epsilon(1e-5));
  const TaskSpec s = make_task_spec(8, 4, 10, 0.4, 0.2, 21);
  const Dataset d = sample_dataset(s, 10000, 22);
  double mean = 0, sq = 0;
  for (const Sample& x : d.samples) {
    const double f = x.counts.relevant / 10.0;
    mean += f;
    sq += f * f;
  }
  mean /= 1e4;
  const double se = std::sqrt((sq / 1e4 - mean * mean) / 1e4);
  CHECK(std::abs(mean - exact) < 5 * se);
  CHECK(d.acceptance_rate == doctest::Approx(0.7391).epsilon(0.03));
}

TEST_CASE("pathological fractions raise a sampling error") {
  // One token per sample, relevant with probability 5e-4.
  TaskSpec s = make_task_spec(4, 2, 1, 0.0005, 0.0, 1);
  CHECK_THROWS_AS(sample_dataset(s, 1000, 2), SamplingError);
}

TEST_CASE("dataset generation is deterministic and round-trips through JSON") {
  const TaskSpec s = make_task_spec(8, 4, 10, 0.4, 0.2, 7);
  const Dataset a = sample_dataset(s, 40, 5);
  const Dataset b = sample_dataset(s, 40, 5);
  CHECK(dataset_to_json(a, s).dump() == dataset_to_json(b, s).dump());
  const Dataset c = dataset_from_json(dataset_to_json(a, s), s);
  REQUIRE(c.samples.size() == a.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(c.samples[i].X == a.samples[i].X);
    CHECK(c.samples[i].y == a.samples[i].y);
  }
}
