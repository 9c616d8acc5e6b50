// Independent reference computations used only by tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "taskarith/transformer.hpp"

namespace oracle {

/// Mean hinge loss of a batch, straight from the forward pass.
inline double batch_loss(const taskarith::ModelParams& p, std::span<const taskarith::Sample> batch) {
  double s = 0;
  for (const auto& x : batch) s += std::max(0.0, 1.0 - x.y * taskarith::forward(p, x.X));
  return s / static_cast<double>(batch.size());
}

/// Central differences of batch_loss with respect to every entry of W and V.
inline taskarith::Gradient fd_grad(const taskarith::ModelParams& p, std::span<const taskarith::Sample> batch,
                                   double h) {
  taskarith::Gradient g{Eigen::MatrixXd::Zero(p.W.rows(), p.W.cols()), Eigen::MatrixXd::Zero(p.V.rows(), p.V.cols())};
  taskarith::ModelParams q = p;
  for (Eigen::Index i = 0; i < p.W.size(); ++i) {
    const double w0 = p.W.data()[i];
    q.W.data()[i] = w0 + h;
    const double up = batch_loss(q, batch);
    q.W.data()[i] = w0 - h;
    const double dn = batch_loss(q, batch);
    q.W.data()[i] = w0;
    g.dW.data()[i] = (up - dn) / (2 * h);
  }
  for (Eigen::Index i = 0; i < p.V.size(); ++i) {
    const double v0 = p.V.data()[i];
    q.V.data()[i] = v0 + h;
    const double up = batch_loss(q, batch);
    q.V.data()[i] = v0 - h;
    const double dn = batch_loss(q, batch);
    q.V.data()[i] = v0;
    g.dV.data()[i] = (up - dn) / (2 * h);
  }
  return g;
}

/// Singular values (descending) by one-sided Jacobi rotations on the columns.
inline std::vector<double> jacobi_singular_values(Eigen::MatrixXd a) {
  if (a.rows() < a.cols()) a.transposeInPlace();
  const Eigen::Index n = a.cols();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double alpha = a.col(i).squaredNorm();
        const double beta = a.col(j).squaredNorm();
        const double gamma = a.col(i).dot(a.col(j));
        if (gamma == 0.0) continue;
        off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
        const double zeta = (beta - alpha) / (2 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1 + zeta * zeta));
        const double c = 1 / std::sqrt(1 + t * t);
        const double s = c * t;
        const Eigen::VectorXd ci = a.col(i);
        a.col(i) = c * ci - s * a.col(j);
        a.col(j) = s * ci + c * a.col(j);
      }
    }
    if (off < 1e-15) break;
  }
  std::vector<double> sv;
  for (Eigen::Index i = 0; i < n; ++i) sv.push_back(a.col(i).norm());
  std::sort(sv.rbegin(), sv.rend());
  return sv;
}

/// ||M - best rank-1 approximation||_F from the full spectrum.
inline double rank1_residual(const Eigen::MatrixXd& m) {
  const auto sv = jacobi_singular_values(m);
  double s = 0;
  for (std::size_t i = 1; i < sv.size(); ++i) s += sv[i] * sv[i];
  return std::sqrt(s);
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(b.norm(), 1e-12);
  return (a - b).norm() / scale;
}

}  // namespace oracle
