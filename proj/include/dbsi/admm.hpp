#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dbsi/averaging.hpp"
#include "dbsi/cross_relation.hpp"
#include "dbsi/errors.hpp"
#include "dbsi/message_bus.hpp"
#include "dbsi/norm_estimator.hpp"
#include "dbsi/topology.hpp"

namespace dbsi {

enum class Mode { Ideal, Distributed };

struct AlgorithmParams {
  double rho = 1.0;
  double forgetting_lambda = 0.98;
  double cr_epsilon = 1e-6;
  Mode mode = Mode::Distributed;
  EstimatorConfig estimator;
};

// One node of the online-ADMM state machine. The local estimate w and the
// duals u are stacked over the sorted neighborhood, one length-L block per
// neighbor; hhat_hood caches the neighbors' normalized consensus blocks from
// the previous exchange.
struct NodeState {
  int id = -1;
  std::vector<int> hood;
  int self_pos = -1;
  int block_length = 0;
  double rho = 1.0;

  Eigen::VectorXd w;
  Eigen::VectorXd u;
  LocalCrMatrix cr;
  Eigen::VectorXd hbar;
  Eigen::VectorXd hhat;
  std::vector<Eigen::VectorXd> hhat_hood;

  // Norm-estimator scalars.
  double phi = 0.0;
  double eta = 0.0;
  double eta_prev = 1.0;
  double gamma = 0.0;

  // Solver workspace, reused across frames.
  Eigen::MatrixXd system_work;
  Eigen::VectorXd rhs_work;
  Eigen::LLT<Eigen::MatrixXd> llt_work;

  NodeState(int node_id, const Topology& topo, int L, const AlgorithmParams& params,
            const Eigen::VectorXd& init_stacked)
      : id(node_id),
        hood(topo.neighborhood(node_id)),
        block_length(L),
        rho(params.rho),
        cr(node_id, static_cast<int>(topo.neighborhood(node_id).size()), L,
           params.forgetting_lambda, params.cr_epsilon) {
    if (!(rho > 0.0)) throw std::invalid_argument("NodeState: rho must be positive");
    const Eigen::Index dim = static_cast<Eigen::Index>(hood.size()) * L;
    if (init_stacked.size() != static_cast<Eigen::Index>(topo.node_count()) * L)
      throw std::invalid_argument("NodeState: init vector has wrong dimension");
    w.resize(dim);
    u = Eigen::VectorXd::Zero(dim);
    hhat_hood.resize(hood.size());
    for (std::size_t p = 0; p < hood.size(); ++p) {
      const int g = hood[p];
      if (g == id) self_pos = static_cast<int>(p);
      w.segment(p * L, L) = init_stacked.segment(g * L, L);
      hhat_hood[p] = init_stacked.segment(g * L, L);
    }
    hbar = Eigen::VectorXd::Zero(L);
    hhat = init_stacked.segment(id * L, L);
    system_work.resize(dim, dim);
    rhs_work.resize(dim);
  }

  Eigen::VectorXd::ConstSegmentReturnType block(const Eigen::VectorXd& v, int pos) const {
    return v.segment(static_cast<Eigen::Index>(pos) * block_length, block_length);
  }
};

// Primal step: w minimizes w^T P w + u^T (w - hhat_stack) + (rho/2)||w - hhat_stack||^2,
// i.e. solves (2P + rho I) w = rho hhat_stack - u with the previous frame's
// consensus blocks. Returns the linear-system residual norm.
inline double admm_primal_update(NodeState& node, long frame) {
  const int L = node.block_length;
  for (std::size_t p = 0; p < node.hood.size(); ++p)
    node.rhs_work.segment(p * L, L) = node.rho * node.hhat_hood[p];
  node.rhs_work -= node.u;
  node.system_work = 2.0 * node.cr.matrix();
  node.system_work.diagonal().array() += node.rho;
  node.llt_work.compute(node.system_work);
  node.w = node.llt_work.solve(node.rhs_work);
  const double residual = (node.system_work * node.w - node.rhs_work).norm();
  if (residual > 1e-9 * (1.0 + node.rhs_work.norm()))
    throw divergence_error("primal solve residual out of tolerance", frame, node.id);
  return residual;
}

// Block node i contributes to the consensus average of channel g (at
// neighborhood position pos): (w_i)_g + (1/rho) (u_i)_g.
inline Eigen::VectorXd admm_consensus_contribution(const NodeState& node, int pos) {
  return node.block(node.w, pos) + node.block(node.u, pos) / node.rho;
}

// In-neighborhood average forming the local unnormalized consensus. The
// contributions must be ordered by neighborhood position (own block
// included); all of them come from j in N_i by construction.
inline void admm_aggregate_own(NodeState& node,
                               const std::vector<Eigen::VectorXd>& hood_contributions) {
  if (hood_contributions.size() != node.hood.size())
    throw std::invalid_argument("consensus aggregate: wrong contribution count");
  node.hbar.setZero();
  for (const auto& c : hood_contributions) node.hbar += c;
  node.hbar /= static_cast<double>(node.hood.size());
}

// hhat_i = hbar_i / sqrt(global_norm_sq_estimate).
inline void admm_normalize(NodeState& node, double global_norm_sq_estimate, long frame) {
  if (!(global_norm_sq_estimate > 0.0))
    throw divergence_error("normalization received a nonpositive norm estimate", frame, node.id);
  node.hhat = node.hbar / std::sqrt(global_norm_sq_estimate);
}

// Dual ascent per neighborhood block against the current consensus blocks.
inline void admm_dual_update(NodeState& node) {
  const int L = node.block_length;
  for (std::size_t p = 0; p < node.hood.size(); ++p)
    node.u.segment(p * L, L) += node.rho * (node.block(node.w, p) - node.hhat_hood[p]);
}

// The whole network for one run: per-frame phase schedule with barriers, so
// node evaluation order never affects results. All cross-node values move
// through the message bus.
class Network {
 public:
  Network(const Topology& topo, const WeightMatrix& weights, const AlgorithmParams& params,
          int channel_length, const Eigen::VectorXd& init_stacked, MessageBus& bus)
      : topo_(&topo), weights_(&weights), params_(params), L_(channel_length), bus_(&bus) {
    nodes_.reserve(topo.node_count());
    for (int i = 0; i < topo.node_count(); ++i)
      nodes_.emplace_back(i, topo, channel_length, params, init_stacked);
    phi_work_.resize(topo.node_count());
    norm_sq_work_.resize(topo.node_count());
  }

  void step_frame(long n, const std::vector<Eigen::VectorXd>& node_frames) {
    const int m = topo_->node_count();
    if (static_cast<int>(node_frames.size()) != m)
      throw std::invalid_argument("step_frame: one frame per node required");

    // Local CR update and primal solve (consensus blocks from frame n-1).
    for (auto& node : nodes_) {
      node.cr.update(node_frames, node.hood);
      double residual = admm_primal_update(node, n);
      max_primal_residual_ = std::max(max_primal_residual_, residual);
    }

    // Exchange estimate/dual blocks with the channel owners.
    for (auto& node : nodes_) {
      for (std::size_t p = 0; p < node.hood.size(); ++p) {
        const int g = node.hood[p];
        if (g == node.id) continue;
        Message msg;
        msg.from = node.id;
        msg.to = g;
        msg.frame = n;
        msg.phase = Phase::ConsensusBlock;
        msg.payload = admm_consensus_contribution(node, static_cast<int>(p));
        bus_->send(std::move(msg));
      }
    }
    bus_->deliver();
    for (auto& node : nodes_) {
      std::vector<Eigen::VectorXd> contributions(node.hood.size());
      contributions[node.self_pos] = admm_consensus_contribution(node, node.self_pos);
      for (const Message& msg : bus_->inbox(node.id))
        contributions[hood_position(node, msg.from)] = msg.payload;
      bus_->clear_inbox(node.id);
      admm_aggregate_own(node, contributions);
      norm_sq_work_[node.id] = node.hbar.squaredNorm();
    }

    // Norm estimation, then normalization.
    if (params_.mode == Mode::Ideal) {
      for (auto& node : nodes_) bus_->broadcast(node.id, n, Phase::NormScalar, norm_sq_work_[node.id]);
      bus_->deliver();
      for (auto& node : nodes_) {
        // Every node ends up with all M values; summing in node-id order
        // makes the estimate identical at every node.
        std::vector<double> by_id(m, 0.0);
        by_id[node.id] = norm_sq_work_[node.id];
        for (const Message& msg : bus_->inbox(node.id)) by_id[msg.from] = msg.payload[0];
        bus_->clear_inbox(node.id);
        double total = 0.0;
        for (double v : by_id) total += v;
        node.eta = norm_sq_work_[node.id];
        node.gamma = 0.0;
        node.phi = total / static_cast<double>(m);
        admm_normalize(node, total, n);
      }
    } else {
      if (params_.estimator.eta_mode == EtaMode::Neighborhood) {
        for (auto& node : nodes_) {
          for (int j : node.hood) {
            if (j == node.id) continue;
            Message msg;
            msg.from = node.id;
            msg.to = j;
            msg.frame = n;
            msg.phase = Phase::NormScalar;
            msg.payload = Eigen::VectorXd::Constant(1, norm_sq_work_[node.id]);
            bus_->send(std::move(msg));
          }
        }
        bus_->deliver();
        for (auto& node : nodes_) {
          std::vector<double> hood_val(node.hood.size(), 0.0);
          hood_val[node.self_pos] = norm_sq_work_[node.id];
          for (const Message& msg : bus_->inbox(node.id))
            hood_val[hood_position(node, msg.from)] = msg.payload[0];
          bus_->clear_inbox(node.id);
          node.eta = instantaneous_eta(weights_->W, node.id, node.hood, hood_val,
                                       EtaMode::Neighborhood);
        }
      } else {
        for (auto& node : nodes_) node.eta = norm_sq_work_[node.id];
      }
      for (auto& node : nodes_) {
        node.gamma = params_.estimator.gamma_mode == GammaMode::Adaptive
                         ? adaptive_gamma(node.eta, node.eta_prev)
                         : params_.estimator.fixed_gamma;
        node.eta_prev = node.eta;
        phi_work_[node.id] =
            mix_initial(n, node.phi, node.eta, node.gamma, norm_sq_work_[node.id]);
      }
      averaging_sweep(phi_work_, *weights_, params_.estimator.iterations_per_frame, *bus_, n);
      for (auto& node : nodes_) {
        node.phi = phi_work_[node.id];
        admm_normalize(node, global_norm_sq(m, node.phi, n, node.id), n);
      }
    }

    // Publish normalized blocks, then dual ascent against them.
    for (auto& node : nodes_) {
      for (int j : node.hood) {
        if (j == node.id) continue;
        Message msg;
        msg.from = node.id;
        msg.to = j;
        msg.frame = n;
        msg.phase = Phase::ConsensusBlock;
        msg.payload = node.hhat;
        bus_->send(std::move(msg));
      }
    }
    bus_->deliver();
    for (auto& node : nodes_) {
      node.hhat_hood[node.self_pos] = node.hhat;
      for (const Message& msg : bus_->inbox(node.id))
        node.hhat_hood[hood_position(node, msg.from)] = msg.payload;
      bus_->clear_inbox(node.id);
      admm_dual_update(node);
    }
  }

  // Stacked consensus estimate: channel g's block as computed by node g.
  Eigen::VectorXd stacked_estimate() const {
    Eigen::VectorXd h(static_cast<Eigen::Index>(nodes_.size()) * L_);
    for (const auto& node : nodes_) h.segment(node.id * L_, L_) = node.hhat;
    return h;
  }

  const NodeState& node(int i) const { return nodes_.at(i); }
  const std::vector<NodeState>& nodes() const { return nodes_; }
  double max_primal_residual() const { return max_primal_residual_; }

 private:
  static int hood_position(const NodeState& node, int j) {
    const auto it = std::lower_bound(node.hood.begin(), node.hood.end(), j);
    if (it == node.hood.end() || *it != j)
      throw std::invalid_argument("received a message from outside the neighborhood");
    return static_cast<int>(it - node.hood.begin());
  }

  const Topology* topo_;
  const WeightMatrix* weights_;
  AlgorithmParams params_;
  int L_;
  MessageBus* bus_;
  std::vector<NodeState> nodes_;
  std::vector<double> phi_work_;
  std::vector<double> norm_sq_work_;
  double max_primal_residual_ = 0.0;
};

}  // namespace dbsi
