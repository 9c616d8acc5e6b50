#include "taskarith/synth_data.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "taskarith/error.hpp"
#include "taskarith/random.hpp"

namespace taskarith {
namespace {

constexpr double kPivotFloor = 1e-6;
constexpr double kUnitTol = 1e-12;
constexpr long kMinAttemptsBeforeGivingUp = 100000;
constexpr double kMinAcceptanceRate = 1e-3;

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Eigen::VectorXd gaussian_vector(int d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd g(d);
  for (int i = 0; i < d; ++i) g[i] = normal(rng);
  return g;
}

// Projects g off every column of `used` (two passes of modified
// Gram-Schmidt) and normalizes. Returns false when the pivot is too small.
bool orthonormalize_against(const Eigen::MatrixXd& used, Eigen::VectorXd& g) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index j = 0; j < used.cols(); ++j) g -= used.col(j).dot(g) * used.col(j);
  }
  const double norm = g.norm();
  if (norm < kPivotFloor) return false;
  g /= norm;
  return true;
}

Eigen::VectorXd draw_orthogonal_unit(const Eigen::MatrixXd& used, int d, Rng& rng) {
  if (used.cols() >= d) throw CapacityError("no free orthogonal direction left in R^" + std::to_string(d));
  for (;;) {
    Eigen::VectorXd g = gaussian_vector(d, rng);
    if (orthonormalize_against(used, g)) return g;
  }
}

Eigen::MatrixXd hcat(const Eigen::VectorXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.size(), b.cols() + 1);
  out.col(0) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

void check_fractions(double delta_star, double delta_hash) {
  if (!(delta_hash >= 0.0)) throw ParameterError("0 <= delta_hash violated: delta_hash = " + fmt_double(delta_hash));
  if (!(delta_hash < delta_star))
    throw ParameterError("delta_hash < delta_star violated: " + fmt_double(delta_hash) + " >= " + fmt_double(delta_star));
  if (!(delta_star + delta_hash <= 1.0))
    throw ParameterError("delta_star + delta_hash <= 1 violated: sum = " + fmt_double(delta_star + delta_hash));
}

}  // namespace

void validate(const TaskSpec& spec) {
  if (spec.M < 1) throw ParameterError("M >= 1 violated");
  if (spec.P < 1) throw ParameterError("P >= 1 violated");
  if (spec.d < spec.M + 2) throw ParameterError("d >= M + 2 violated");
  check_fractions(spec.delta_star, spec.delta_hash);
  if (spec.mu.size() != spec.d || spec.basis.rows() != spec.d || spec.basis.cols() != spec.M)
    throw ParameterError("task spec vectors do not match d / M");
  if (std::abs(spec.mu.norm() - 1.0) > kUnitTol) throw ParameterError("||mu|| = 1 violated");
  const Eigen::MatrixXd all = hcat(spec.mu, spec.basis);
  const Eigen::MatrixXd gram = all.transpose() * all;
  const double off = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  if (off > kUnitTol) throw ParameterError("mu and basis are not orthonormal (max deviation " + fmt_double(off) + ")");
}

TaskSpec make_task_spec(int d, int M, int P, double delta_star, double delta_hash, std::uint64_t seed) {
  if (M < 1) throw ParameterError("M >= 1 violated");
  if (P < 1) throw ParameterError("P >= 1 violated");
  if (d < M + 2) throw ParameterError("d >= M + 2 violated (d = " + std::to_string(d) + ", M = " + std::to_string(M) + ")");
  check_fractions(delta_star, delta_hash);

  Rng rng(seed);
  Eigen::MatrixXd used(d, 0);
  for (int k = 0; k < M + 1; ++k) {
    Eigen::VectorXd next = draw_orthogonal_unit(used, d, rng);
    used.conservativeResize(Eigen::NoChange, used.cols() + 1);
    used.col(used.cols() - 1) = next;
  }

  TaskSpec spec;
  spec.d = d;
  spec.P = P;
  spec.M = M;
  spec.mu = used.col(0);
  spec.basis = used.rightCols(M);
  spec.delta_star = delta_star;
  spec.delta_hash = delta_hash;
  spec.seed = seed;
  return spec;
}

TaskSpec make_correlated_spec(const TaskSpec& base, double alpha, std::uint64_t seed) {
  if (!(alpha >= -1.0 && alpha <= 1.0)) throw ParameterError("|alpha| <= 1 violated: alpha = " + fmt_double(alpha));
  if (base.d < base.M + 2)
    throw CapacityError("no free direction orthogonal to mu and the basis (d = M + 1)");

  Rng rng(seed);
  const Eigen::VectorXd perp = draw_orthogonal_unit(hcat(base.mu, base.basis), base.d, rng);

  TaskSpec out = base;
  out.mu = alpha * base.mu + std::sqrt(1.0 - alpha * alpha) * perp;
  out.seed = seed;
  return out;
}

TaskSpec make_ood_spec(std::span<const TaskSpec> sources, std::span<const double> gammas, double kappa,
                       std::uint64_t seed) {
  if (sources.empty()) throw ParameterError("at least one source task is required");
  if (sources.size() != gammas.size())
    throw ParameterError("sources and gammas differ in length: " + std::to_string(sources.size()) + " vs " +
                         std::to_string(gammas.size()));
  const TaskSpec& first = sources.front();
  for (const TaskSpec& s : sources) {
    if (s.d != first.d || s.M != first.M || s.P != first.P) throw ParameterError("source tasks differ in d, M or P");
    if (s.basis.rows() != first.basis.rows() || (s.basis - first.basis).cwiseAbs().maxCoeff() > kUnitTol)
      throw ParameterError("source tasks do not share the irrelevant basis");
  }
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (std::size_t j = 0; j < sources.size(); ++j) {
      const double expected = i == j ? 1.0 : 0.0;
      if (std::abs(sources[i].mu.dot(sources[j].mu) - expected) > 1e-10)
        throw ParameterError("source patterns are not mutually orthonormal");
    }
  }
  double norm_sq = kappa * kappa;
  for (double g : gammas) norm_sq += g * g;
  if (std::abs(norm_sq - 1.0) > 1e-8)
    throw ParameterError("sum(gamma^2) + kappa^2 = 1 violated: got " + fmt_double(norm_sq));

  Eigen::MatrixXd used(first.d, static_cast<Eigen::Index>(sources.size()));
  for (std::size_t i = 0; i < sources.size(); ++i) used.col(static_cast<Eigen::Index>(i)) = sources[i].mu;
  Eigen::MatrixXd all(first.d, used.cols() + first.M);
  all << used, first.basis;

  Rng rng(seed);
  const Eigen::VectorXd perp = draw_orthogonal_unit(all, first.d, rng);

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(first.d);
  for (std::size_t i = 0; i < sources.size(); ++i) mu += gammas[i] * sources[i].mu;
  mu += kappa * perp;
  const double n = mu.norm();
  if (std::abs(n - 1.0) > kUnitTol) mu /= n;

  TaskSpec out = first;
  out.mu = std::move(mu);
  out.seed = seed;
  return out;
}

Eigen::VectorXd token_vector(const TaskSpec& spec, TokenId id) {
  if (id == 0) return spec.mu;
  if (id == 1) return -spec.mu;
  if (id >= 2 && id <= spec.M + 1) return spec.basis.col(id - 2);
  throw ParameterError("token id out of range: " + std::to_string(id));
}

Sample make_sample(const TaskSpec& spec, int y, std::vector<TokenId> token_ids) {
  if (y != 1 && y != -1) throw ParameterError("label must be +1 or -1");
  if (static_cast<int>(token_ids.size()) != spec.P) throw ShapeError("sample must have exactly P tokens");
  Sample s;
  s.y = y;
  s.X.resize(spec.d, spec.P);
  s.counts.irrelevant.assign(static_cast<std::size_t>(spec.M), 0);
  const TokenId relevant_id = y == 1 ? 0 : 1;
  for (int p = 0; p < spec.P; ++p) {
    const TokenId id = token_ids[static_cast<std::size_t>(p)];
    s.X.col(p) = token_vector(spec, id);
    if (id == relevant_id) {
      ++s.counts.relevant;
    } else if (id < 2) {
      ++s.counts.confusion;
    } else {
      ++s.counts.irrelevant[static_cast<std::size_t>(id - 2)];
    }
  }
  s.token_ids = std::move(token_ids);
  return s;
}

Dataset sample_dataset(const TaskSpec& spec, int n, std::uint64_t seed) {
  if (n < 1) throw ParameterError("n >= 1 violated");
  check_fractions(spec.delta_star, spec.delta_hash);

  // Category 0: label-relevant, 1: confusion, k + 1: v_k.
  std::vector<double> weights;
  weights.reserve(static_cast<std::size_t>(spec.M) + 2);
  weights.push_back(spec.delta_star);
  weights.push_back(spec.delta_hash);
  const double rest = (1.0 - spec.delta_star - spec.delta_hash) / spec.M;
  for (int k = 0; k < spec.M; ++k) weights.push_back(rest);

  Rng rng(seed);
  std::discrete_distribution<int> category(weights.begin(), weights.end());
  std::bernoulli_distribution coin(0.5);

  Dataset out;
  out.samples.reserve(static_cast<std::size_t>(n));
  long attempts = 0;
  std::vector<TokenId> ids(static_cast<std::size_t>(spec.P));
  while (static_cast<int>(out.samples.size()) < n) {
    ++attempts;
    const int y = coin(rng) ? 1 : -1;
    int relevant = 0;
    int confusion = 0;
    for (auto& id : ids) {
      const int c = category(rng);
      if (c == 0) {
        ++relevant;
        id = y == 1 ? 0 : 1;
      } else if (c == 1) {
        ++confusion;
        id = y == 1 ? 1 : 0;
      } else {
        id = c;
      }
    }
    if (relevant > confusion) {
      out.samples.push_back(make_sample(spec, y, ids));
    } else if (attempts >= kMinAttemptsBeforeGivingUp &&
               static_cast<double>(out.samples.size()) / static_cast<double>(attempts) < kMinAcceptanceRate) {
      throw SamplingError("majority-rule acceptance rate below 1e-3 after " + std::to_string(attempts) +
                          " attempts");
    }
  }
  out.acceptance_rate = static_cast<double>(n) / static_cast<double>(attempts);
  return out;
}

}  // namespace taskarith
