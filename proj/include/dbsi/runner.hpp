#pragma once

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbsi/admm.hpp"
#include "dbsi/charts.hpp"
#include "dbsi/config.hpp"
#include "dbsi/cross_relation.hpp"
#include "dbsi/errors.hpp"
#include "dbsi/metrics.hpp"
#include "dbsi/rng.hpp"
#include "dbsi/signal.hpp"

namespace dbsi {

// Steady-state communication accounting for one variant, per node and frame,
// plus the nominal neighborhood-size-times-K figure for direct comparison
// with the N_i K bookkeeping convention (N_i includes the self-loop, an
// actual transmission does not).
struct CostSummary {
  bool uniform_across_frames = false;
  std::vector<std::uint32_t> per_frame_consensus_tx;  // per node, actual
  std::vector<std::uint32_t> per_frame_norm_tx;
  std::vector<std::uint32_t> per_frame_phi_tx;
  std::vector<std::uint32_t> nominal_phi_tx;  // |N_i| * K
  std::uint64_t total_tx = 0;
  std::uint64_t total_rx = 0;
};

struct VariantResult {
  VariantSpec spec;
  RunTrace aggregate;
  std::vector<RunTrace> per_run;  // filled when RunOptions::keep_run_traces
  CostSummary cost;
  CostReport cost_report;  // full per-frame counts of run 0
};

struct OracleSummary {
  bool computed = false;
  double npm_literal_median_db = 0.0;
  double npm_conventional_median_db = 0.0;
  bool any_degenerate = false;
};

struct RunOutput {
  ScenarioConfig config;
  Topology topology;
  WeightMatrix weights;
  bool weights_fell_back = false;
  std::vector<VariantResult> variants;
  OracleSummary oracle;
  std::vector<std::string> notes;
  std::vector<std::string> files_written;
};

struct RunOptions {
  bool keep_run_traces = false;
  bool write_outputs = true;
  int worker_count = 0;  // 0: DBSI_WORKERS env var, else hardware concurrency
  std::ostream* log = nullptr;
};

namespace detail {

inline int effective_workers(const RunOptions& opts, int runs) {
  int w = opts.worker_count;
  if (w <= 0) {
    if (const char* env = std::getenv("DBSI_WORKERS")) w = std::atoi(env);
  }
  if (w <= 0) w = static_cast<int>(std::thread::hardware_concurrency());
  if (w <= 0) w = 1;
  return std::min(w, runs);
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline AlgorithmParams params_for(const ScenarioConfig& cfg, const VariantSpec& variant) {
  AlgorithmParams p;
  p.rho = cfg.rho;
  p.forgetting_lambda = cfg.forgetting_lambda;
  p.mode = variant.mode;
  p.estimator.iterations_per_frame = variant.iterations_per_frame;
  p.estimator.gamma_mode = variant.gamma_mode;
  p.estimator.fixed_gamma = variant.fixed_gamma;
  p.estimator.eta_mode = variant.eta_mode;
  return p;
}

inline Eigen::VectorXd initial_estimate(int dim, std::uint64_t run_seed) {
  Rng rng(rng::derive(run_seed, rng::Stream::InitEstimate));
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) v[k] = rng.normal();
  const double n = v.norm();
  if (n == 0.0) throw std::runtime_error("degenerate zero initialization draw");
  return v / n;
}

// One Monte-Carlo run of one variant. The signal realization depends only on
// the run seed, so every variant sees identical data (paired comparison).
inline RunTrace simulate_run(const ScenarioConfig& cfg, const Topology& topo,
                             const WeightMatrix& weights, const VariantSpec& variant,
                             std::uint64_t run_seed, CostReport* cost_out) {
  const int m = topo.node_count();
  const int L = cfg.channel_length;
  ChannelSet channels = generate_channels(m, L, cfg.norm_low, cfg.norm_high, run_seed);
  channels.schedule = cfg.rescale;
  SignalStream stream = generate_stream(channels, cfg.frame_count, cfg.snr_db, run_seed);

  // A nonzero init_seed decouples the shared initialization stream from the
  // signal realization; by default it follows the run seed.
  const std::uint64_t init_base =
      cfg.init_seed != 0 ? cfg.init_seed + (run_seed - cfg.base_seed) : run_seed;
  MessageBus bus(topo, cfg.frame_count);
  Network net(topo, weights, params_for(cfg, variant), L, initial_estimate(m * L, init_base),
              bus);

  RunTrace trace;
  trace.resize_nodes(m);
  trace.reserve(cfg.frame_count);

  ChannelSet current = channels;
  std::size_t next_event = 0;
  Eigen::VectorXd truth_unit;
  bool truth_dirty = true;
  std::vector<Eigen::VectorXd> frames(m);
  for (long n = 0; n < cfg.frame_count; ++n) {
    while (next_event < current.schedule.size() && current.schedule[next_event].frame == n) {
      apply_norms(current, current.schedule[next_event].norms);
      ++next_event;
      truth_dirty = true;
    }
    if (truth_dirty) {
      // NPM is measured against the unit-norm representative of the true
      // channels: the identification target under the unit-norm constraint.
      truth_unit = current.stacked();
      truth_unit.normalize();
      truth_dirty = false;
    }
    for (int i = 0; i < m; ++i) stream.frame_into(i, n, L, frames[i]);
    net.step_frame(n, frames);

    const Eigen::VectorXd est = net.stacked_estimate();
    trace.npm_literal_db.push_back(npm_db(truth_unit, est, NpmVariant::Literal));
    trace.npm_conventional_db.push_back(npm_db(truth_unit, est, NpmVariant::Conventional));
    trace.norm_hhat.push_back(est.norm());
    for (int i = 0; i < m; ++i) {
      const NodeState& node = net.node(i);
      trace.node_norm[i].push_back(node.hhat.norm());
      trace.node_gamma[i].push_back(node.gamma);
      trace.node_eta[i].push_back(node.eta);
      trace.node_phi[i].push_back(node.phi);
    }
    trace.tx_consensus.push_back(
        static_cast<double>(bus.report().frame_total_tx(n, Phase::ConsensusBlock)));
    trace.tx_norm.push_back(
        static_cast<double>(bus.report().frame_total_tx(n, Phase::NormScalar)));
    trace.tx_phi.push_back(
        static_cast<double>(bus.report().frame_total_tx(n, Phase::PhiIterate)));
  }
  if (cost_out) *cost_out = bus.report();
  return trace;
}

// The signal data of one run, fed to the batch estimator.
inline BatchEstimate batch_oracle_for_run(const ScenarioConfig& cfg, int m,
                                          std::uint64_t run_seed, Eigen::VectorXd* truth_unit) {
  const int L = cfg.channel_length;
  ChannelSet channels = generate_channels(m, L, cfg.norm_low, cfg.norm_high, run_seed);
  channels.schedule = cfg.rescale;
  SignalStream stream = generate_stream(channels, cfg.frame_count, cfg.snr_db, run_seed);
  GlobalCrMatrix R(m, L);
  std::vector<Eigen::VectorXd> frames(m);
  for (long n = 0; n < cfg.frame_count; ++n) {
    for (int i = 0; i < m; ++i) stream.frame_into(i, n, L, frames[i]);
    R.accumulate(frames);
  }
  *truth_unit = channels.stacked().normalized();
  return batch_oracle_estimate(R);
}

template <typename Fn>
inline void parallel_runs(int runs, int workers, Fn&& body) {
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(runs);
  auto worker = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= runs) return;
      try {
        body(r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline CostSummary summarize_cost(const CostReport& report, const Topology& topo, int K) {
  CostSummary s;
  const int m = report.node_count();
  s.per_frame_consensus_tx.resize(m);
  s.per_frame_norm_tx.resize(m);
  s.per_frame_phi_tx.resize(m);
  s.nominal_phi_tx.resize(m);
  s.uniform_across_frames = true;
  for (int i = 0; i < m; ++i) {
    s.per_frame_consensus_tx[i] = report.tx(0, i, Phase::ConsensusBlock);
    s.per_frame_norm_tx[i] = report.tx(0, i, Phase::NormScalar);
    s.per_frame_phi_tx[i] = report.tx(0, i, Phase::PhiIterate);
    s.nominal_phi_tx[i] = static_cast<std::uint32_t>(topo.neighborhood(i).size()) * K;
    for (long n = 1; n < report.frames(); ++n) {
      if (report.tx(n, i, Phase::ConsensusBlock) != s.per_frame_consensus_tx[i] ||
          report.tx(n, i, Phase::NormScalar) != s.per_frame_norm_tx[i] ||
          report.tx(n, i, Phase::PhiIterate) != s.per_frame_phi_tx[i])
        s.uniform_across_frames = false;
    }
  }
  s.total_tx = report.grand_total_tx();
  s.total_rx = report.grand_total_rx();
  return s;
}

inline std::string csv_for_trace(const RunTrace& trace) {
  std::ostringstream os;
  const int m = trace.node_count;
  os << "frame,npm_literal_db,npm_conventional_db,norm_hhat";
  for (int i = 0; i < m; ++i) os << ",norm_hhat_" << i;
  for (int i = 0; i < m; ++i) os << ",gamma_" << i;
  for (int i = 0; i < m; ++i) os << ",eta_" << i;
  for (int i = 0; i < m; ++i) os << ",phi_" << i;
  os << ",tx_consensus,tx_norm,tx_phi\n";
  for (long n = 0; n < trace.frames(); ++n) {
    os << n << "," << fmt17(trace.npm_literal_db[n]) << ","
       << fmt17(trace.npm_conventional_db[n]) << "," << fmt17(trace.norm_hhat[n]);
    for (int i = 0; i < m; ++i) os << "," << fmt17(trace.node_norm[i][n]);
    for (int i = 0; i < m; ++i) os << "," << fmt17(trace.node_gamma[i][n]);
    for (int i = 0; i < m; ++i) os << "," << fmt17(trace.node_eta[i][n]);
    for (int i = 0; i < m; ++i) os << "," << fmt17(trace.node_phi[i][n]);
    os << "," << fmt17(trace.tx_consensus[n]) << "," << fmt17(trace.tx_norm[n]) << ","
       << fmt17(trace.tx_phi[n]) << "\n";
  }
  return os.str();
}

inline void write_file(const std::string& path, const std::string& content,
                       std::vector<std::string>& files) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing output file: " + path);
  files.push_back(path);
}

inline nlohmann::json cost_to_json(const CostSummary& s) {
  nlohmann::json j;
  j["uniform_across_frames"] = s.uniform_across_frames;
  j["per_frame_tx"] = {{"consensus", s.per_frame_consensus_tx},
                       {"norm", s.per_frame_norm_tx},
                       {"phi", s.per_frame_phi_tx}};
  j["nominal_phi_tx_per_frame"] = s.nominal_phi_tx;  // N_i * K bookkeeping
  j["total_tx"] = s.total_tx;
  j["total_rx"] = s.total_rx;
  return j;
}

}  // namespace detail

// Executes every variant of the scenario over monte_carlo_runs seeded runs,
// aggregates traces with the configured statistic, and (optionally) writes
// the per-variant CSVs, metadata and charts. Deterministic: outputs depend
// only on the configuration, never on the worker count.
inline RunOutput run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {}) {
  validate(cfg);
  RunOutput out;
  out.config = cfg;
  out.topology = build_topology(cfg);
  WeightSelection sel = select_nonnegative_weights(out.topology, cfg.weights_kind);
  out.weights = std::move(sel.weights);
  out.weights_fell_back = sel.fell_back;

  const int runs = cfg.monte_carlo_runs;
  const int workers = detail::effective_workers(opts, runs);
  const auto variants = resolved_variants(cfg);

  out.notes.push_back(
      "snr_db is calibrated per channel against the convolved-signal power over the whole "
      "stream");
  out.notes.push_back(
      "npm traces compare against the unit-norm representative of the true channels");
  if (cfg.topo_kind == ScenarioConfig::TopoKind::Ring && cfg.nodes == 3)
    out.notes.push_back(
        "3-node ring realized as the undirected 3-cycle: every neighborhood has size 3 "
        "including the node itself");
  if (out.weights_fell_back)
    out.notes.push_back(
        "best_constant weights had a negative entry on this topology; fell back to metropolis");

  if (opts.log)
    *opts.log << "running " << variants.size() << " variant(s) x " << runs << " run(s), "
              << workers << " worker(s)\n";

  for (const auto& variant : variants) {
    VariantResult vr;
    vr.spec = variant;
    std::vector<RunTrace> traces(runs);
    std::vector<CostReport> reports(runs);
    detail::parallel_runs(runs, workers, [&](int r) {
      traces[r] = detail::simulate_run(cfg, out.topology, out.weights, variant,
                                       cfg.base_seed + static_cast<std::uint64_t>(r),
                                       r == 0 ? &reports[0] : nullptr);
    });
    vr.cost_report = std::move(reports[0]);
    vr.cost = detail::summarize_cost(vr.cost_report, out.topology, variant.iterations_per_frame);
    vr.aggregate = aggregate_monte_carlo(traces, cfg.statistic);
    if (opts.keep_run_traces) vr.per_run = std::move(traces);
    if (opts.log) *opts.log << "variant " << variant.label << " done\n";
    out.variants.push_back(std::move(vr));
  }

  if (cfg.batch_oracle && cfg.rescale.empty()) {
    std::vector<double> lit(runs), conv(runs);
    std::vector<char> degenerate(runs, 0);
    detail::parallel_runs(runs, workers, [&](int r) {
      Eigen::VectorXd truth;
      BatchEstimate est = detail::batch_oracle_for_run(
          cfg, out.topology.node_count(), cfg.base_seed + static_cast<std::uint64_t>(r), &truth);
      lit[r] = npm_db(truth, est.h, NpmVariant::Literal);
      conv[r] = npm_db(truth, est.h, NpmVariant::Conventional);
      degenerate[r] = est.degenerate ? 1 : 0;
    });
    out.oracle.computed = true;
    std::vector<double> scratch = lit;
    out.oracle.npm_literal_median_db = detail::statistic_of(scratch, Statistic::Median);
    scratch = conv;
    out.oracle.npm_conventional_median_db = detail::statistic_of(scratch, Statistic::Median);
    for (char d : degenerate) out.oracle.any_degenerate |= (d != 0);
    if (out.oracle.any_degenerate)
      out.notes.push_back("batch oracle found a (near-)degenerate CR spectrum on some run");
  }

  if (opts.write_outputs) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    fs::create_directories(cfg.output_dir + "/charts");
    for (const auto& vr : out.variants)
      detail::write_file(cfg.output_dir + "/" + vr.spec.label + ".csv",
                         detail::csv_for_trace(vr.aggregate), out.files_written);

    nlohmann::json meta;
    meta["preset"] = cfg.preset_name;
    meta["config"] = render_config(cfg);
    meta["topology"]["nodes"] = out.topology.node_count();
    {
      std::vector<std::string> edge_strs;
      for (auto [a, b] : out.topology.edges())
        edge_strs.push_back(std::to_string(a) + "-" + std::to_string(b));
      meta["topology"]["edges"] = edge_strs;
    }
    meta["weights"]["kind"] = out.weights.kind;
    meta["weights"]["requested_kind"] = cfg.weights_kind;
    meta["weights"]["fell_back"] = out.weights_fell_back;
    meta["weights"]["convergence_factor"] = out.weights.convergence_factor;
    {
      std::vector<std::vector<double>> w_rows;
      for (Eigen::Index i = 0; i < out.weights.W.rows(); ++i) {
        std::vector<double> row(out.weights.W.cols());
        for (Eigen::Index j = 0; j < out.weights.W.cols(); ++j) row[j] = out.weights.W(i, j);
        w_rows.push_back(std::move(row));
      }
      meta["weights"]["W"] = w_rows;
    }
    meta["seeds"]["base"] = cfg.base_seed;
    meta["seeds"]["runs"] = runs;
    for (const auto& vr : out.variants) {
      nlohmann::json v;
      v["label"] = vr.spec.label;
      v["settings"] = render_variant_value(vr.spec);
      v["cost"] = detail::cost_to_json(vr.cost);
      const long tail = std::min<long>(500, vr.aggregate.frames());
      v["post_convergence_mean"] = {
          {"frames", tail},
          {"npm_literal_db", post_convergence_mean(vr.aggregate.npm_literal_db, tail)},
          {"npm_conventional_db",
           post_convergence_mean(vr.aggregate.npm_conventional_db, tail)}};
      meta["variants"].push_back(v);
    }
    if (out.oracle.computed) {
      meta["oracle"]["npm_literal_median_db"] = out.oracle.npm_literal_median_db;
      meta["oracle"]["npm_conventional_median_db"] = out.oracle.npm_conventional_median_db;
      meta["oracle"]["any_degenerate"] = out.oracle.any_degenerate;
    }
    meta["notes"] = out.notes;
    detail::write_file(cfg.output_dir + "/metadata.json", meta.dump(2) + "\n",
                       out.files_written);

    // NPM overlay across variants, smoothed with the configured window.
    {
      ChartSpec spec;
      spec.title = "NPM (" + std::string(cfg.statistic == Statistic::Median ? "median" : "mean") +
                   " of " + std::to_string(runs) + " runs, smoothed)";
      spec.y_label = "NPM [dB]";
      for (const auto& vr : out.variants) {
        const auto& src = cfg.npm_variant == NpmVariant::Literal
                              ? vr.aggregate.npm_literal_db
                              : vr.aggregate.npm_conventional_db;
        spec.series.push_back({vr.spec.label, moving_average(src, cfg.moving_average_window)});
      }
      for (const auto& ev : cfg.rescale) spec.vertical_markers.push_back(ev.frame);
      const std::string path = cfg.output_dir + "/charts/npm.svg";
      write_chart_svg(spec, path);
      out.files_written.push_back(path);
    }
    // Norm trajectories per variant with the true targets as references.
    for (const auto& vr : out.variants) {
      ChartSpec spec;
      spec.title = "Estimate norms, variant " + vr.spec.label;
      spec.y_label = "norm";
      spec.series.push_back({"stacked", vr.aggregate.norm_hhat});
      for (int i = 0; i < out.topology.node_count(); ++i)
        spec.series.push_back({"node " + std::to_string(i), vr.aggregate.node_norm[i]});
      for (const auto& ev : cfg.rescale) spec.vertical_markers.push_back(ev.frame);
      {
        // Reference lines: per-node true norm over the stacked norm, one
        // value per rescale segment (constant channels give one segment).
        ChannelSet base = generate_channels(out.topology.node_count(), cfg.channel_length,
                                            cfg.norm_low, cfg.norm_high, cfg.base_seed);
        base.schedule = cfg.rescale;
        std::vector<long> segment_starts{0};
        for (const auto& ev : cfg.rescale)
          if (ev.frame != 0) segment_starts.push_back(ev.frame);
        for (long start : segment_starts) {
          ChannelSet seg = channels_at_frame(base, start);
          const double stacked = seg.stacked_norm();
          for (const auto& ch : seg.channels)
            spec.horizontal_references.push_back(ch.norm() / stacked);
        }
      }
      const std::string path = cfg.output_dir + "/charts/norms_" + vr.spec.label + ".svg";
      write_chart_svg(spec, path);
      out.files_written.push_back(path);
    }
  }
  return out;
}

// Human-readable summary of a finished run directory.
inline std::string report_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string meta_path = dir + "/metadata.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw std::runtime_error("no metadata.json in " + dir);
  nlohmann::json meta = nlohmann::json::parse(meta_in);
  std::ostringstream os;
  os << "run directory: " << dir << "\n";
  if (meta.contains("preset") && !meta["preset"].get<std::string>().empty())
    os << "preset: " << meta["preset"].get<std::string>() << "\n";
  os << "topology nodes: " << meta["topology"]["nodes"] << ", weights "
     << meta["weights"]["kind"].get<std::string>()
     << " (convergence factor " << meta["weights"]["convergence_factor"].get<double>() << ")\n";
  if (meta.contains("oracle"))
    os << "batch oracle median NPM: literal "
       << meta["oracle"]["npm_literal_median_db"].get<double>() << " dB, conventional "
       << meta["oracle"]["npm_conventional_median_db"].get<double>() << " dB\n";
  os << "variants:\n";
  for (const auto& v : meta["variants"]) {
    os << "  " << v["label"].get<std::string>() << ": post-convergence mean NPM literal "
       << v["post_convergence_mean"]["npm_literal_db"].get<double>() << " dB, conventional "
       << v["post_convergence_mean"]["npm_conventional_db"].get<double>() << " dB; tx/frame";
    const auto& tx = v["cost"]["per_frame_tx"];
    os << " consensus " << tx["consensus"].dump() << " norm " << tx["norm"].dump() << " phi "
       << tx["phi"].dump() << "\n";
  }
  for (const auto& note : meta["notes"]) os << "note: " << note.get<std::string>() << "\n";
  return os.str();
}

}  // namespace dbsi
