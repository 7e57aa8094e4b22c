#pragma once

#include "dbsi/config.hpp"

namespace dbsi {

// Static 5-node ring benchmark: L = 16, SNR 10 dB, channel norms drawn from
// U[0.5, 2.0], 30 Monte-Carlo runs. Compares the idealized norm computation
// against fixed-gamma grids at K in {1, 2, 10} and the adaptive mixing rule
// at K = 1.
inline ScenarioConfig preset_static5() {
  ScenarioConfig cfg;
  cfg.preset_name = "static5";
  cfg.topo_kind = ScenarioConfig::TopoKind::Ring;
  cfg.nodes = 5;
  cfg.neighbors_per_side = 1;
  cfg.channel_length = 16;
  cfg.frame_count = 20000;
  cfg.snr_db = 10.0;
  cfg.norm_low = 0.5;
  cfg.norm_high = 2.0;
  cfg.rho = 8.0;
  cfg.forgetting_lambda = 0.9995;
  cfg.weights_kind = "best_constant";
  // Fixed-gamma variants feed the own squared norm into the mixing recursion
  // (eta_mode local), which keeps the per-frame exchange at the N_i K
  // bookkeeping exactly. The adaptive rule weights nodes by relative eta
  // changes, so it needs the neighborhood-smoothed eta to stay unbiased
  // across unequal channel norms; its variant sets that explicitly.
  cfg.eta_mode = EtaMode::Local;
  cfg.monte_carlo_runs = 30;
  cfg.base_seed = 42;
  cfg.statistic = Statistic::Median;
  cfg.npm_variant = NpmVariant::Literal;
  cfg.moving_average_window = 51;
  cfg.output_dir = "out/static5";

  auto add = [&cfg](const std::string& label, const std::string& value) {
    detail::set_config_value(cfg, "variants", label, value);
  };
  add("ideal", "mode=ideal");
  for (const std::string g : {"0.01", "0.10", "0.40"})
    for (const std::string k : {"1", "2", "10"})
      add("fixed-g" + g + "-K" + k, "mode=distributed gamma=" + g + " K=" + k);
  add("adaptive-K1", "mode=distributed gamma=adaptive K=1 eta_mode=neighborhood");
  return cfg;
}

// Dynamic 3-node benchmark: same signal parameters as static5, channel norms
// rescaled to {2.2, 0.5, 1.2} / {2.2, 1.0, 1.2} / {2.2, 0.5, 2.0} at frames
// 0 / 5000 / 10000. The 3-node ring is realized as the undirected 3-cycle
// (neighborhood size 3 including the node itself); run metadata carries a
// note about this reading.
inline ScenarioConfig preset_dynamic3() {
  ScenarioConfig cfg;
  cfg.preset_name = "dynamic3";
  cfg.topo_kind = ScenarioConfig::TopoKind::Ring;
  cfg.nodes = 3;
  cfg.neighbors_per_side = 1;
  cfg.channel_length = 16;
  cfg.frame_count = 15000;
  cfg.snr_db = 10.0;
  cfg.norm_low = 0.5;
  cfg.norm_high = 2.0;
  cfg.rescale = {{0, {2.2, 0.5, 1.2}}, {5000, {2.2, 1.0, 1.2}}, {10000, {2.2, 0.5, 2.0}}};
  // Heavier consensus coupling and averaging than static5: damps the
  // post-rescale oscillation of the stacked norm fast enough to settle
  // within the tracking windows.
  cfg.rho = 32.0;
  cfg.forgetting_lambda = 0.9985;
  cfg.weights_kind = "best_constant";
  cfg.eta_mode = EtaMode::Neighborhood;
  cfg.monte_carlo_runs = 30;
  cfg.base_seed = 42;
  cfg.statistic = Statistic::Median;
  cfg.npm_variant = NpmVariant::Literal;
  cfg.moving_average_window = 51;
  cfg.output_dir = "out/dynamic3";

  detail::set_config_value(cfg, "variants", "ideal", "mode=ideal");
  detail::set_config_value(cfg, "variants", "adaptive-K1",
                           "mode=distributed gamma=adaptive K=1");
  return cfg;
}

inline ScenarioConfig preset_by_name(const std::string& name) {
  if (name == "static5") return preset_static5();
  if (name == "dynamic3") return preset_dynamic3();
  throw config_error("unknown preset '" + name + "' (available: static5, dynamic3)");
}

}  // namespace dbsi
