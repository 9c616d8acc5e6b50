#include "taskarith/task_vector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "taskarith/error.hpp"
#include "taskarith/parallel.hpp"
#include "taskarith/random.hpp"

namespace taskarith {
namespace {

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(what) + " shape mismatch: " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

Eigen::MatrixXd rank1_of(const Eigen::MatrixXd& m, const TopSingular& top) {
  return (m * top.right) * top.right.transpose();
}

}  // namespace

TaskVector extract(const ModelParams& finetuned, const ModelParams& pretrained, Provenance provenance) {
  check_same_shape(finetuned.W, pretrained.W, "W");
  check_same_shape(finetuned.V, pretrained.V, "V");
  if (finetuned.A.rows() != pretrained.A.rows() || finetuned.A.cols() != pretrained.A.cols() ||
      finetuned.A != pretrained.A)
    throw ProvenanceError("frozen head weights differ: the models are not fine-tuning relatives");
  return TaskVector{finetuned.W - pretrained.W, finetuned.V - pretrained.V, std::move(provenance)};
}

ModelParams merge(const ModelParams& base, std::span<const MergeTerm> terms) {
  ModelParams out = base;
  for (const MergeTerm& t : terms) {
    const TaskVector& tv = t.vector.get();
    check_same_shape(tv.dW, base.W, "dW");
    check_same_shape(tv.dV, base.V, "dV");
    out.W += t.lambda * tv.dW;
    out.V += t.lambda * tv.dV;
  }
  return out;
}

ModelParams merge(const ModelParams& base, std::initializer_list<MergeTerm> terms) {
  return merge(base, std::span<const MergeTerm>(terms.begin(), terms.size()));
}

TopSingular top_singular(const Eigen::MatrixXd& m, double tol, int max_iter, std::uint64_t start_seed) {
  if (!(tol > 0.0)) throw ParameterError("tol > 0 violated");
  if (max_iter < 1) throw ParameterError("max_iter >= 1 violated");

  const Eigen::MatrixXd gram = m.transpose() * m;
  const Eigen::Index n = gram.rows();
  TopSingular out;
  out.left = Eigen::VectorXd::Zero(m.rows());
  out.right = Eigen::VectorXd::Zero(n);
  if (n == 0) return out;

  Rng rng(start_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  v.normalize();
  double rho = v.dot(gram * v);

  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) {
      // Zero matrix, or a start vector in the null space of a zero Gram.
      out.right = v;
      out.iterations = it;
      return out;
    }
    v = w / norm;
    const double next = v.dot(gram * v);
    const bool converged = std::abs(next - rho) < tol;
    rho = next;
    if (converged) {
      out.sigma = std::sqrt(std::max(rho, 0.0));
      out.right = v;
      if (out.sigma > 0.0) out.left = m * v / out.sigma;
      out.iterations = it;
      return out;
    }
  }
  const double residual = (m - (m * v) * v.transpose()).norm();
  throw ConvergenceError("power iteration did not converge in " + std::to_string(max_iter) + " iterations",
                         residual);
}

Rank1Result rank1_approx(const TaskVector& tv, double tol, int max_iter, std::uint64_t start_seed) {
  const TopSingular w = top_singular(tv.dW, tol, max_iter, start_seed);
  const TopSingular v = top_singular(tv.dV, tol, max_iter, mix_seed(start_seed, 1));

  Rank1Result r;
  r.approx.dW = rank1_of(tv.dW, w);
  r.approx.dV = rank1_of(tv.dV, v);
  r.approx.provenance = tv.provenance;
  r.residual_w = (tv.dW - r.approx.dW).norm();
  r.residual_v = (tv.dV - r.approx.dV).norm();
  r.sigma_w = w.sigma;
  r.sigma_v = v.sigma;
  r.iterations_w = w.iterations;
  r.iterations_v = v.iterations;
  return r;
}

PruneResult prune_rows(const TaskVector& tv, double tau_rel) {
  if (!(tau_rel >= 0.0 && tau_rel < 1.0)) throw ParameterError("0 <= tau_rel < 1 violated");
  PruneResult r;
  r.pruned = tv;
  const Eigen::Index rows = tv.dV.rows();
  r.row_norms.resize(static_cast<std::size_t>(rows));
  double max_norm = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    r.row_norms[static_cast<std::size_t>(i)] = tv.dV.row(i).norm();
    max_norm = std::max(max_norm, r.row_norms[static_cast<std::size_t>(i)]);
  }
  const double threshold = tau_rel * max_norm;
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (r.row_norms[static_cast<std::size_t>(i)] < threshold) {
      r.pruned.dV.row(i).setZero();
    } else {
      ++kept;
    }
  }
  r.kept_fraction = rows == 0 ? 1.0 : static_cast<double>(kept) / static_cast<double>(rows);
  return r;
}

double attention_concentration(const Eigen::MatrixXd& S, const Sample& sample) {
  const TokenId relevant = sample.y == 1 ? 0 : 1;
  const TokenId confusion = 1 - relevant;
  double p = 0;
  int count = 0;
  const auto n = static_cast<Eigen::Index>(sample.token_ids.size());
  for (Eigen::Index l = 0; l < n; ++l) {
    const TokenId ql = sample.token_ids[static_cast<std::size_t>(l)];
    if (ql != relevant && ql != confusion) continue;
    ++count;
    for (Eigen::Index s = 0; s < n; ++s) {
      if (sample.token_ids[static_cast<std::size_t>(s)] == ql) p += S(s, l);
    }
  }
  if (count == 0) throw ParameterError("sample has no label-relevant or confusion tokens");
  return p / count;
}

DiagnosticReport diagnostics(const TaskVector& tv, const ModelParams& base, const TaskSpec& spec, int n_samples,
                             double cos_threshold, std::uint64_t seed) {
  if (n_samples < 1) throw ParameterError("n_samples >= 1 violated");
  if (!(cos_threshold > 0.0 && cos_threshold < 1.0)) throw ParameterError("0 < cos_threshold < 1 violated");
  if (tv.dV.cols() != spec.d) throw ShapeError("task vector and task spec differ in d");

  const ModelParams merged = merge(base, {MergeTerm{tv, 1.0}});
  const Dataset data = sample_dataset(spec, n_samples, seed);

  std::vector<double> normalized(data.samples.size());
  std::vector<double> raw(data.samples.size());
  parallel_for(data.samples.size(), [&](std::size_t i) {
    const Sample& s = data.samples[i];
    const Eigen::MatrixXd S = attention_map(merged, s.X);
    normalized[i] = attention_concentration(S, s);
    raw[i] = normalized[i] * (s.counts.relevant + s.counts.confusion);
  });

  DiagnosticReport r;
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    r.p_bar += normalized[i];
    r.p_raw += raw[i];
  }
  r.p_bar /= static_cast<double>(normalized.size());
  r.p_raw /= static_cast<double>(raw.size());

  const Eigen::Index rows = tv.dV.rows();
  r.row_norms.resize(static_cast<std::size_t>(rows));
  Eigen::Index aligned = 0;
  Eigen::Index nonzero = 0;
  double zeta = std::numeric_limits<double>::infinity();
  double residual = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::VectorXd row = tv.dV.row(i).transpose();
    const double norm = row.norm();
    r.row_norms[static_cast<std::size_t>(i)] = norm;
    residual += (spec.basis.transpose() * row).squaredNorm();
    if (norm == 0.0) continue;
    ++nonzero;
    const double proj = row.dot(spec.mu);
    if (std::abs(proj) / norm >= cos_threshold) {
      ++aligned;
      zeta = std::min(zeta, std::abs(proj));
    }
  }
  const double denom = rows == 0 ? 1.0 : static_cast<double>(rows);
  r.aligned_fraction = static_cast<double>(aligned) / denom;
  r.kept_fraction = static_cast<double>(nonzero) / denom;
  r.residual = residual / denom;
  r.zeta_min = aligned == 0 ? 0.0 : zeta;
  return r;
}

}  // namespace taskarith
