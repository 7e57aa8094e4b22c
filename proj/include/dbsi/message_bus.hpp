#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dbsi/topology.hpp"

namespace dbsi {

// Exchange phases that are individually accounted, so the per-scheme
// communication cost can be compared cleanly.
enum class Phase : int {
  ConsensusBlock = 0,  // estimate/dual block exchange and normalized-block publish
  NormScalar = 1,      // squared-norm scalars
  PhiIterate = 2,      // averaging iterates
};

constexpr int kPhaseCount = 3;

struct Message {
  int from = -1;
  int to = -1;
  long frame = -1;
  Phase phase = Phase::ConsensusBlock;
  int sweep_k = -1;      // averaging iteration index for PhiIterate
  bool relayed = false;  // true for idealized broadcast delivery
  Eigen::VectorXd payload;
};

// Per-node, per-frame, per-phase transmit/receive counts for one run.
class CostReport {
 public:
  CostReport() = default;
  CostReport(int node_count, long frames)
      : node_count_(node_count),
        frames_(frames),
        tx_(static_cast<std::size_t>(node_count) * frames * kPhaseCount, 0),
        rx_(tx_.size(), 0) {}

  int node_count() const { return node_count_; }
  long frames() const { return frames_; }

  std::uint32_t tx(long frame, int node, Phase p) const { return tx_[idx(frame, node, p)]; }
  std::uint32_t rx(long frame, int node, Phase p) const { return rx_[idx(frame, node, p)]; }

  std::uint64_t total_tx(int node, Phase p) const {
    std::uint64_t s = 0;
    for (long n = 0; n < frames_; ++n) s += tx(n, node, p);
    return s;
  }
  std::uint64_t total_rx(int node, Phase p) const {
    std::uint64_t s = 0;
    for (long n = 0; n < frames_; ++n) s += rx(n, node, p);
    return s;
  }
  std::uint64_t frame_total_tx(long frame, Phase p) const {
    std::uint64_t s = 0;
    for (int i = 0; i < node_count_; ++i) s += tx(frame, i, p);
    return s;
  }
  std::uint64_t grand_total_tx() const {
    std::uint64_t s = 0;
    for (auto v : tx_) s += v;
    return s;
  }
  std::uint64_t grand_total_rx() const {
    std::uint64_t s = 0;
    for (auto v : rx_) s += v;
    return s;
  }

 private:
  friend class MessageBus;
  std::size_t idx(long frame, int node, Phase p) const {
    return (static_cast<std::size_t>(frame) * node_count_ + node) * kPhaseCount +
           static_cast<int>(p);
  }
  int node_count_ = 0;
  long frames_ = 0;
  std::vector<std::uint32_t> tx_;
  std::vector<std::uint32_t> rx_;
};

// The only channel between node states. Messages are queued by send() and
// become visible in the receivers' inboxes at the next barrier; links are
// lossless and instantaneous. Sending to a non-neighbor (or to oneself) is
// an isolation violation and throws.
class MessageBus {
 public:
  MessageBus(const Topology& topo, long expected_frames)
      : topo_(&topo),
        report_(topo.node_count(), expected_frames),
        inboxes_(topo.node_count()) {}

  void send(Message msg) {
    if (msg.from == msg.to)
      throw std::invalid_argument("msg-bus: self-send rejected; use a local read");
    if (msg.from < 0 || msg.to < 0 || msg.from >= topo_->node_count() ||
        msg.to >= topo_->node_count())
      throw std::invalid_argument("msg-bus: node index out of range");
    if (!msg.relayed && !topo_->has_edge(msg.from, msg.to))
      throw std::invalid_argument("msg-bus: send to non-neighbor (isolation violation)");
    bump(report_.tx_, msg.frame, msg.from, msg.phase);
    pending_.push_back(std::move(msg));
  }

  // Idealized broadcast: one scalar relayed to every other node. Models the
  // fully-connected / relaying baseline; counted as M-1 transmissions.
  void broadcast(int from, long frame, Phase phase, double value) {
    for (int to = 0; to < topo_->node_count(); ++to) {
      if (to == from) continue;
      Message m;
      m.from = from;
      m.to = to;
      m.frame = frame;
      m.phase = phase;
      m.relayed = true;
      m.payload = Eigen::VectorXd::Constant(1, value);
      send(std::move(m));
    }
  }

  // Barrier: deliver all queued messages to the receiver inboxes.
  void deliver() {
    for (auto& m : pending_) {
      bump(report_.rx_, m.frame, m.to, m.phase);
      inboxes_[m.to].push_back(std::move(m));
    }
    pending_.clear();
  }

  const std::vector<Message>& inbox(int node) const { return inboxes_.at(node); }
  void clear_inbox(int node) { inboxes_.at(node).clear(); }
  void clear_all_inboxes() {
    for (auto& b : inboxes_) b.clear();
  }

  const CostReport& report() const { return report_; }

 private:
  void bump(std::vector<std::uint32_t>& counts, long frame, int node, Phase p) {
    if (frame < 0 || frame >= report_.frames_)
      throw std::invalid_argument("msg-bus: frame index outside accounting range");
    ++counts[report_.idx(frame, node, p)];
  }

  const Topology* topo_;
  CostReport report_;
  std::vector<Message> pending_;
  std::vector<std::vector<Message>> inboxes_;
};

}  // namespace dbsi
