#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dbsi/rng.hpp"

namespace dbsi {

struct RescaleEvent {
  long frame = 0;
  std::vector<double> norms;  // one target norm per channel
};

// Ground-truth SIMO impulse responses plus the schedule of norm-rescaling
// events. All channels share the same length.
struct ChannelSet {
  std::vector<Eigen::VectorXd> channels;
  std::vector<double> target_norms;
  std::vector<RescaleEvent> schedule;  // sorted by frame

  int count() const { return static_cast<int>(channels.size()); }
  int length() const { return channels.empty() ? 0 : static_cast<int>(channels[0].size()); }

  Eigen::VectorXd stacked() const {
    Eigen::VectorXd h(static_cast<Eigen::Index>(count()) * length());
    for (int i = 0; i < count(); ++i) h.segment(i * length(), length()) = channels[i];
    return h;
  }

  double stacked_norm() const { return stacked().norm(); }
};

// i.i.d. standard-normal taps, then each channel scaled to a norm drawn from
// Uniform[norm_low, norm_high]. Deterministic given the seed.
inline ChannelSet generate_channels(int node_count, int length, double norm_low,
                                    double norm_high, std::uint64_t seed) {
  if (node_count < 1) throw std::invalid_argument("generate_channels: node_count must be >= 1");
  if (length < 1) throw std::invalid_argument("generate_channels: length must be >= 1");
  if (!(norm_low > 0.0) || !(norm_low <= norm_high))
    throw std::invalid_argument("generate_channels: need 0 < norm_low <= norm_high");
  Rng taps(rng::derive(seed, rng::Stream::Channels));
  Rng norms(rng::derive(seed, rng::Stream::ChannelNorms));
  ChannelSet cs;
  cs.channels.resize(node_count);
  cs.target_norms.resize(node_count);
  for (int i = 0; i < node_count; ++i) {
    Eigen::VectorXd h(length);
    for (int t = 0; t < length; ++t) h[t] = taps.normal();
    const double target = norms.uniform(norm_low, norm_high);
    const double n = h.norm();
    if (n == 0.0) throw std::invalid_argument("generate_channels: degenerate zero draw");
    cs.channels[i] = h * (target / n);
    cs.target_norms[i] = target;
  }
  return cs;
}

namespace detail {

inline void apply_norms(ChannelSet& cs, const std::vector<double>& norms) {
  if (static_cast<int>(norms.size()) != cs.count())
    throw std::invalid_argument("rescale: norm list size does not match channel count");
  for (int i = 0; i < cs.count(); ++i) {
    const double cur = cs.channels[i].norm();
    if (cur == 0.0 && norms[i] != 0.0)
      throw std::invalid_argument("rescale: zero-norm channel cannot be rescaled to nonzero norm");
    if (cur > 0.0) cs.channels[i] *= norms[i] / cur;
    cs.target_norms[i] = norms[i];
  }
}

}  // namespace detail

// Applies the schedule entry at `frame`, if any; direction is preserved.
inline ChannelSet rescale_channels(ChannelSet cs, long frame) {
  for (const auto& ev : cs.schedule)
    if (ev.frame == frame) {
      detail::apply_norms(cs, ev.norms);
      break;
    }
  return cs;
}

// Channels with every scheduled event at or before `frame` applied.
inline ChannelSet channels_at_frame(ChannelSet cs, long frame) {
  for (const auto& ev : cs.schedule) {
    if (ev.frame > frame) break;
    detail::apply_norms(cs, ev.norms);
  }
  return cs;
}

// One Monte-Carlo realization of the common source, the per-node sensor
// outputs and the noise sequences. Outputs follow x_i(n) = (h_i * s)(n) +
// v_i(n) with the channel that is active at frame n; samples before index 0
// are zero.
struct SignalStream {
  Eigen::VectorXd source;
  std::vector<Eigen::VectorXd> outputs;
  std::vector<Eigen::VectorXd> noise;
  double snr_db = std::numeric_limits<double>::infinity();

  long length() const { return source.size(); }
  int node_count() const { return static_cast<int>(outputs.size()); }

  // Length-L window of node i ending at sample n, newest first:
  // [x_i(n), x_i(n-1), ..., x_i(n-L+1)].
  Eigen::VectorXd frame(int node, long n, int window) const {
    Eigen::VectorXd w(window);
    frame_into(node, n, window, w);
    return w;
  }

  void frame_into(int node, long n, int window, Eigen::VectorXd& out) const {
    if (node < 0 || node >= node_count())
      throw std::invalid_argument("frame: node index out of range");
    if (n < 0 || n >= length()) throw std::invalid_argument("frame: sample index out of range");
    const Eigen::VectorXd& x = outputs[node];
    out.setZero(window);
    for (int t = 0; t < window; ++t) {
      const long idx = n - t;
      if (idx >= 0) out[t] = x[idx];
    }
  }
};

// Noise is calibrated per channel so the realized SNR over the whole stream
// equals snr_db exactly (snr_db = inf disables noise). With a rescale
// schedule the convolution uses the channel active at each frame.
inline SignalStream generate_stream(const ChannelSet& cs, long frame_count, double snr_db,
                                    std::uint64_t seed) {
  if (frame_count < 1) throw std::invalid_argument("generate_stream: frame_count must be >= 1");
  const int node_count = cs.count();
  const int L = cs.length();
  SignalStream out;
  out.snr_db = snr_db;
  out.source.resize(frame_count);
  Rng src(rng::derive(seed, rng::Stream::Source));
  for (long n = 0; n < frame_count; ++n) out.source[n] = src.normal();

  // Event boundaries within [0, frame_count).
  ChannelSet cur = cs;
  std::size_t next_ev = 0;
  out.outputs.assign(node_count, Eigen::VectorXd::Zero(frame_count));
  out.noise.assign(node_count, Eigen::VectorXd::Zero(frame_count));
  for (long n = 0; n < frame_count; ++n) {
    while (next_ev < cur.schedule.size() && cur.schedule[next_ev].frame == n) {
      detail::apply_norms(cur, cur.schedule[next_ev].norms);
      ++next_ev;
    }
    const long tmax = std::min<long>(L - 1, n);
    for (int i = 0; i < node_count; ++i) {
      double acc = 0.0;
      const Eigen::VectorXd& h = cur.channels[i];
      for (long t = 0; t <= tmax; ++t) acc += h[t] * out.source[n - t];
      out.outputs[i][n] = acc;
    }
  }

  if (std::isinf(snr_db)) return out;

  const double snr_lin = std::pow(10.0, snr_db / 10.0);
  for (int i = 0; i < node_count; ++i) {
    Rng noise(rng::derive(seed, rng::Stream::Noise, static_cast<std::uint64_t>(i)));
    Eigen::VectorXd v(frame_count);
    for (long n = 0; n < frame_count; ++n) v[n] = noise.normal();
    const double sig_power = out.outputs[i].squaredNorm() / static_cast<double>(frame_count);
    const double raw_power = v.squaredNorm() / static_cast<double>(frame_count);
    double scale = 0.0;
    if (sig_power > 0.0 && raw_power > 0.0) scale = std::sqrt(sig_power / (snr_lin * raw_power));
    v *= scale;
    out.noise[i] = v;
    out.outputs[i] += v;
  }
  return out;
}

}  // namespace dbsi
