#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dbsi {

enum class NpmVariant {
  Literal,       // 20 log10( ||h - (h^T hhat / h^T h) hhat|| / ||hhat|| )
  Conventional,  // 20 log10( ||h - (h^T hhat / hhat^T hhat) hhat|| / ||h|| ), scale-invariant
};

enum class Statistic { Median, Mean };

constexpr double kNpmFloorDb = -300.0;

// Normalized projection misalignment in dB, floored at -300 dB so perfect
// alignment stays finite in output files.
inline double npm_db(const Eigen::VectorXd& h_true, const Eigen::VectorXd& h_est,
                     NpmVariant variant) {
  if (h_true.size() != h_est.size()) throw std::invalid_argument("npm: dimension mismatch");
  const double est_norm = h_est.norm();
  if (est_norm == 0.0) throw std::invalid_argument("npm: zero estimate");
  const double dot = h_true.dot(h_est);
  double ratio;
  if (variant == NpmVariant::Literal) {
    const double denom = h_true.squaredNorm();
    if (denom == 0.0) throw std::invalid_argument("npm: zero reference");
    ratio = (h_true - (dot / denom) * h_est).norm() / est_norm;
  } else {
    const double true_norm = h_true.norm();
    if (true_norm == 0.0) throw std::invalid_argument("npm: zero reference");
    ratio = (h_true - (dot / (est_norm * est_norm)) * h_est).norm() / true_norm;
  }
  if (ratio <= 0.0) return kNpmFloorDb;
  return std::max(20.0 * std::log10(ratio), kNpmFloorDb);
}

// Everything recorded about one run, one record per frame from frame 0.
struct RunTrace {
  int node_count = 0;
  std::vector<double> npm_literal_db;
  std::vector<double> npm_conventional_db;
  std::vector<double> norm_hhat;               // stacked estimate norm
  std::vector<std::vector<double>> node_norm;  // [node][frame] ||hhat_i||
  std::vector<std::vector<double>> node_gamma;
  std::vector<std::vector<double>> node_eta;
  std::vector<std::vector<double>> node_phi;
  std::vector<double> tx_consensus;  // per-frame transmit totals by phase
  std::vector<double> tx_norm;
  std::vector<double> tx_phi;

  long frames() const { return static_cast<long>(npm_literal_db.size()); }

  void reserve(long n) {
    npm_literal_db.reserve(n);
    npm_conventional_db.reserve(n);
    norm_hhat.reserve(n);
    for (auto& v : node_norm) v.reserve(n);
    for (auto& v : node_gamma) v.reserve(n);
    for (auto& v : node_eta) v.reserve(n);
    for (auto& v : node_phi) v.reserve(n);
    tx_consensus.reserve(n);
    tx_norm.reserve(n);
    tx_phi.reserve(n);
  }

  void resize_nodes(int m) {
    node_count = m;
    node_norm.resize(m);
    node_gamma.resize(m);
    node_eta.resize(m);
    node_phi.resize(m);
  }
};

namespace detail {

inline double statistic_of(std::vector<double>& scratch, Statistic s) {
  if (scratch.empty()) throw std::invalid_argument("statistic over empty set");
  if (s == Statistic::Mean) {
    double acc = 0.0;
    for (double v : scratch) acc += v;
    return acc / static_cast<double>(scratch.size());
  }
  std::sort(scratch.begin(), scratch.end());
  const std::size_t n = scratch.size();
  return (scratch[(n - 1) / 2] + scratch[n / 2]) / 2.0;
}

template <typename Get>
inline std::vector<double> aggregate_series(const std::vector<RunTrace>& runs, long frames,
                                            Statistic s, Get&& get) {
  std::vector<double> out(frames);
  std::vector<double> scratch(runs.size());
  for (long n = 0; n < frames; ++n) {
    for (std::size_t r = 0; r < runs.size(); ++r) scratch[r] = get(runs[r], n);
    std::vector<double> copy = scratch;
    out[n] = statistic_of(copy, s);
  }
  return out;
}

}  // namespace detail

// Per-frame statistic across Monte-Carlo runs, every recorded series.
inline RunTrace aggregate_monte_carlo(const std::vector<RunTrace>& runs, Statistic s) {
  if (runs.empty()) throw std::invalid_argument("aggregate_monte_carlo: no runs");
  const long frames = runs[0].frames();
  const int m = runs[0].node_count;
  for (const auto& r : runs)
    if (r.frames() != frames || r.node_count != m)
      throw std::invalid_argument("aggregate_monte_carlo: runs have mismatched shapes");
  RunTrace out;
  out.resize_nodes(m);
  out.npm_literal_db = detail::aggregate_series(
      runs, frames, s, [](const RunTrace& t, long n) { return t.npm_literal_db[n]; });
  out.npm_conventional_db = detail::aggregate_series(
      runs, frames, s, [](const RunTrace& t, long n) { return t.npm_conventional_db[n]; });
  out.norm_hhat = detail::aggregate_series(
      runs, frames, s, [](const RunTrace& t, long n) { return t.norm_hhat[n]; });
  for (int i = 0; i < m; ++i) {
    out.node_norm[i] = detail::aggregate_series(
        runs, frames, s, [i](const RunTrace& t, long n) { return t.node_norm[i][n]; });
    out.node_gamma[i] = detail::aggregate_series(
        runs, frames, s, [i](const RunTrace& t, long n) { return t.node_gamma[i][n]; });
    out.node_eta[i] = detail::aggregate_series(
        runs, frames, s, [i](const RunTrace& t, long n) { return t.node_eta[i][n]; });
    out.node_phi[i] = detail::aggregate_series(
        runs, frames, s, [i](const RunTrace& t, long n) { return t.node_phi[i][n]; });
  }
  out.tx_consensus = detail::aggregate_series(
      runs, frames, s, [](const RunTrace& t, long n) { return t.tx_consensus[n]; });
  out.tx_norm = detail::aggregate_series(
      runs, frames, s, [](const RunTrace& t, long n) { return t.tx_norm[n]; });
  out.tx_phi = detail::aggregate_series(
      runs, frames, s, [](const RunTrace& t, long n) { return t.tx_phi[n]; });
  return out;
}

// Centered moving average with edge truncation (shorter windows at the
// boundaries). Window 1 is the identity.
inline std::vector<double> moving_average(const std::vector<double>& x, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  const long n = static_cast<long>(x.size());
  std::vector<double> out(n);
  const long lo_half = (window - 1) / 2;
  const long hi_half = window / 2;
  for (long t = 0; t < n; ++t) {
    const long a = std::max<long>(0, t - lo_half);
    const long b = std::min<long>(n - 1, t + hi_half);
    double acc = 0.0;
    for (long k = a; k <= b; ++k) acc += x[k];
    out[t] = acc / static_cast<double>(b - a + 1);
  }
  return out;
}

// Mean of the final `last_k` samples.
inline double post_convergence_mean(const std::vector<double>& x, long last_k) {
  if (last_k < 1 || last_k > static_cast<long>(x.size()))
    throw std::invalid_argument("post_convergence_mean: bad window");
  double acc = 0.0;
  for (std::size_t k = x.size() - last_k; k < x.size(); ++k) acc += x[k];
  return acc / static_cast<double>(last_k);
}

}  // namespace dbsi
