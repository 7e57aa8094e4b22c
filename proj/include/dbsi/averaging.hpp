#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dbsi/topology.hpp"

namespace dbsi {

// Doubly stochastic averaging matrix with the graph's sparsity pattern.
// convergence_factor is the spectral norm of W - (1/M)*ones; < 1 on a
// connected topology, which is what the averaging recursion needs.
struct WeightMatrix {
  Eigen::MatrixXd W;
  Topology topology;
  double convergence_factor = 0.0;
  std::string kind;
};

// ||W - (1/M) 11^T||_2 via symmetric eigen-decomposition.
inline double convergence_factor(const Eigen::MatrixXd& W) {
  const auto m = W.rows();
  Eigen::MatrixXd D = W - Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double convergence_factor(const WeightMatrix& wm) { return convergence_factor(wm.W); }

namespace detail {

// Graph Laplacian, self-loops excluded.
inline Eigen::MatrixXd laplacian(const Topology& t) {
  const int m = t.node_count();
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(m, m);
  for (auto [a, b] : t.edges()) {
    if (a == b) continue;
    lap(a, b) -= 1.0;
    lap(b, a) -= 1.0;
    lap(a, a) += 1.0;
    lap(b, b) += 1.0;
  }
  return lap;
}

inline void require_connected(const Topology& t, const char* who) {
  if (!is_connected(t))
    throw std::invalid_argument(std::string(who) + ": topology is disconnected");
}

}  // namespace detail

// W = I - alpha * Laplacian with alpha = 2 / (lambda_min+ + lambda_max),
// the best constant edge weight. Complete graphs get the exact closed form
// alpha = 1/M, so W = (1/M)*ones and the average is reached in one step.
inline WeightMatrix best_constant_weights(const Topology& t) {
  detail::require_connected(t, "best_constant_weights");
  const int m = t.node_count();
  WeightMatrix out;
  out.topology = t;
  out.kind = "best_constant";
  if (m == 1) {
    out.W = Eigen::MatrixXd::Ones(1, 1);
    out.convergence_factor = 0.0;
    return out;
  }
  double alpha;
  if (t.is_complete()) {
    alpha = 1.0 / static_cast<double>(m);
  } else {
    Eigen::MatrixXd lap = detail::laplacian(t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();  // ascending
    double lambda_min_pos = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
      if (ev[k] > 1e-9) {
        lambda_min_pos = ev[k];
        break;
      }
    }
    if (lambda_min_pos <= 0.0)
      throw std::invalid_argument("best_constant_weights: no positive Laplacian eigenvalue");
    alpha = 2.0 / (lambda_min_pos + ev[ev.size() - 1]);
  }
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, m);
  for (auto [a, b] : t.edges()) {
    if (a == b) continue;
    W(a, b) = alpha;
    W(b, a) = alpha;
  }
  for (int i = 0; i < m; ++i) W(i, i) = 1.0 - alpha * t.degree(i);
  out.W = std::move(W);
  out.convergence_factor = convergence_factor(out.W);
  return out;
}

// Metropolis-Hastings weights: W_ij = 1/(1 + max(deg_i, deg_j)) on edges,
// diagonal fills the row to 1. Nonnegative on any graph.
inline WeightMatrix metropolis_weights(const Topology& t) {
  detail::require_connected(t, "metropolis_weights");
  const int m = t.node_count();
  WeightMatrix out;
  out.topology = t;
  out.kind = "metropolis";
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, m);
  for (auto [a, b] : t.edges()) {
    if (a == b) continue;
    const double w = 1.0 / (1.0 + std::max(t.degree(a), t.degree(b)));
    W(a, b) = w;
    W(b, a) = w;
  }
  for (int i = 0; i < m; ++i) W(i, i) = 1.0 - W.row(i).sum();
  out.W = std::move(W);
  out.convergence_factor = convergence_factor(out.W);
  return out;
}

// Weight construction for scenarios. The norm-averaging recursion needs
// nonnegative entries to keep its state nonnegative; best-constant weights
// can go negative on the diagonal for some graphs, in which case the
// selection falls back to Metropolis and reports it.
struct WeightSelection {
  WeightMatrix weights;
  bool fell_back = false;
};

inline WeightSelection select_nonnegative_weights(const Topology& t, const std::string& kind) {
  if (kind == "metropolis") return {metropolis_weights(t), false};
  if (kind != "best_constant")
    throw std::invalid_argument("unknown weights kind: " + kind);
  WeightMatrix bc = best_constant_weights(t);
  if (bc.W.minCoeff() < 0.0) return {metropolis_weights(t), true};
  return {std::move(bc), false};
}

}  // namespace dbsi
