#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dbsi/averaging.hpp"
#include "dbsi/errors.hpp"
#include "dbsi/message_bus.hpp"

namespace dbsi {

enum class EtaMode {
  Neighborhood,  // eta_i = sum_{j in N_i} W_ij ||hbar_j||^2
  Local,         // eta_i = ||hbar_i||^2 (rows sum to 1, so the weighted sum collapses)
};

enum class GammaMode { Fixed, Adaptive };

struct EstimatorConfig {
  int iterations_per_frame = 1;  // K
  GammaMode gamma_mode = GammaMode::Adaptive;
  double fixed_gamma = 0.1;
  EtaMode eta_mode = EtaMode::Neighborhood;
};

// Weighted in-neighborhood sum of squared norms. `hood_norm_sq[p]` holds the
// value for neighborhood position p (sorted order, own value included).
inline double instantaneous_eta(const Eigen::MatrixXd& W, int node, const std::vector<int>& hood,
                                const std::vector<double>& hood_norm_sq, EtaMode mode) {
  if (hood.size() != hood_norm_sq.size())
    throw std::invalid_argument("instantaneous_eta: missing neighbor value");
  if (mode == EtaMode::Local) {
    for (std::size_t p = 0; p < hood.size(); ++p)
      if (hood[p] == node) return hood_norm_sq[p];
    throw std::invalid_argument("instantaneous_eta: node not in its own neighborhood");
  }
  double eta = 0.0;
  for (std::size_t p = 0; p < hood.size(); ++p) eta += W(node, hood[p]) * hood_norm_sq[p];
  return eta;
}

// gamma = min(|eta - eta_prev| / eta_prev, 1). eta_prev is floored to keep
// the ratio defined when estimates collapse.
inline double adaptive_gamma(double eta, double eta_prev) {
  const double denom = std::max(eta_prev, 1e-12);
  return std::min(std::abs(eta - eta_prev) / denom, 1.0);
}

// Initial averaging value for frame n: the convex mix of the instantaneous
// estimate and the previous frame's K-th iterate; at n = 0 the own squared
// norm seeds the recursion.
inline double mix_initial(long frame, double phi_prev_k, double eta, double gamma,
                          double own_norm_sq) {
  if (frame == 0) return own_norm_sq;
  return gamma * eta + (1.0 - gamma) * phi_prev_k;
}

// K synchronous averaging iterations phi(k+1) = W phi(k), every iterate
// exchanged with the neighborhood through the bus. phi holds phi(0) on entry
// and phi(K) on exit.
inline void averaging_sweep(std::vector<double>& phi, const WeightMatrix& weights,
                            int iterations, MessageBus& bus, long frame) {
  if (iterations < 1) throw std::invalid_argument("averaging_sweep: K must be >= 1");
  const Topology& topo = weights.topology;
  const int m = topo.node_count();
  if (static_cast<int>(phi.size()) != m)
    throw std::invalid_argument("averaging_sweep: phi size mismatch");
  std::vector<double> next(m, 0.0);
  for (int k = 0; k < iterations; ++k) {
    for (int i = 0; i < m; ++i) {
      for (int j : topo.neighborhood(i)) {
        if (j == i) continue;
        Message msg;
        msg.from = i;
        msg.to = j;
        msg.frame = frame;
        msg.phase = Phase::PhiIterate;
        msg.sweep_k = k;
        msg.payload = Eigen::VectorXd::Constant(1, phi[i]);
        bus.send(std::move(msg));
      }
    }
    bus.deliver();
    for (int i = 0; i < m; ++i) {
      // Sum in sorted neighborhood order so the result is order-independent.
      std::vector<double> hood_val(topo.neighborhood(i).size(), 0.0);
      const auto& hood = topo.neighborhood(i);
      for (std::size_t p = 0; p < hood.size(); ++p)
        if (hood[p] == i) hood_val[p] = phi[i];
      for (const Message& msg : bus.inbox(i)) {
        if (msg.phase != Phase::PhiIterate || msg.sweep_k != k) continue;
        const auto it = std::lower_bound(hood.begin(), hood.end(), msg.from);
        hood_val[static_cast<std::size_t>(it - hood.begin())] = msg.payload[0];
      }
      double acc = 0.0;
      for (std::size_t p = 0; p < hood.size(); ++p) acc += weights.W(i, hood[p]) * hood_val[p];
      next[i] = acc;
      bus.clear_inbox(i);
    }
    phi.swap(next);
  }
}

// Network-wide squared-norm estimate handed to the normalization step.
inline double global_norm_sq(int node_count, double phi, long frame, int node) {
  const double est = static_cast<double>(node_count) * phi;
  if (!(est > 0.0))
    throw divergence_error("norm estimator produced a nonpositive global estimate", frame, node);
  return est;
}

}  // namespace dbsi
