#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dbsi/admm.hpp"
#include "dbsi/errors.hpp"
#include "dbsi/metrics.hpp"
#include "dbsi/signal.hpp"
#include "dbsi/topology.hpp"

namespace dbsi {

// One labeled algorithm variant inside a scenario. Variants share the
// topology, weights, and per-seed signal realizations, so comparisons are
// paired across Monte-Carlo runs.
struct VariantSpec {
  std::string label;
  Mode mode = Mode::Distributed;
  GammaMode gamma_mode = GammaMode::Adaptive;
  double fixed_gamma = 0.1;
  int iterations_per_frame = 1;
  EtaMode eta_mode = EtaMode::Neighborhood;
};

struct ScenarioConfig {
  enum class TopoKind { Ring, Complete, Custom };

  // [topology]
  TopoKind topo_kind = TopoKind::Ring;
  int nodes = 5;
  int neighbors_per_side = 1;
  std::vector<std::pair<int, int>> edges;

  // [signal]
  int channel_length = 16;
  long frame_count = 20000;
  double snr_db = 10.0;  // +inf for noise-free
  double norm_low = 0.5;
  double norm_high = 2.0;

  // [rescale]
  std::vector<RescaleEvent> rescale;

  // [algorithm] defaults, overridable per variant
  double rho = 1.0;
  double forgetting_lambda = 0.98;
  int iterations_per_frame = 1;
  GammaMode gamma_mode = GammaMode::Adaptive;
  double fixed_gamma = 0.1;
  EtaMode eta_mode = EtaMode::Neighborhood;
  std::string weights_kind = "best_constant";
  Mode mode = Mode::Distributed;
  std::uint64_t init_seed = 0;  // 0: initialization stream follows the run seed

  // [run]
  int monte_carlo_runs = 1;
  std::uint64_t base_seed = 42;
  Statistic statistic = Statistic::Median;
  NpmVariant npm_variant = NpmVariant::Literal;
  int moving_average_window = 51;
  bool batch_oracle = true;
  std::string output_dir = "out";
  std::vector<std::string> variant_filter;

  // [variants]
  std::vector<VariantSpec> variants;

  std::string preset_name;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw config_error("invalid number for " + key + ": '" + v + "'");
  }
}

inline long parse_long(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw config_error("invalid integer for " + key + ": '" + v + "'");
  }
}

inline double parse_snr(const std::string& v) {
  if (v == "inf" || v == "+inf" || v == "infinity")
    return std::numeric_limits<double>::infinity();
  return parse_double(v, "signal.snr_db");
}

inline Mode parse_mode(const std::string& v) {
  if (v == "ideal") return Mode::Ideal;
  if (v == "distributed") return Mode::Distributed;
  throw config_error("mode must be 'ideal' or 'distributed', got '" + v + "'");
}

inline EtaMode parse_eta(const std::string& v) {
  if (v == "neighborhood") return EtaMode::Neighborhood;
  if (v == "local") return EtaMode::Local;
  throw config_error("eta_mode must be 'neighborhood' or 'local', got '" + v + "'");
}

inline void parse_gamma(const std::string& v, GammaMode& mode, double& fixed) {
  if (v == "adaptive") {
    mode = GammaMode::Adaptive;
    return;
  }
  mode = GammaMode::Fixed;
  fixed = parse_double(v, "gamma");
}

inline std::string mode_name(Mode m) { return m == Mode::Ideal ? "ideal" : "distributed"; }
inline std::string eta_name(EtaMode m) {
  return m == EtaMode::Neighborhood ? "neighborhood" : "local";
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Variant value: whitespace-separated key=value pairs over
// {mode, gamma, K, eta_mode}; unspecified keys inherit [algorithm].
inline VariantSpec parse_variant(const std::string& label, const std::string& value,
                                 const ScenarioConfig& base) {
  VariantSpec v;
  v.label = label;
  v.mode = base.mode;
  v.gamma_mode = base.gamma_mode;
  v.fixed_gamma = base.fixed_gamma;
  v.iterations_per_frame = base.iterations_per_frame;
  v.eta_mode = base.eta_mode;
  for (const std::string& tok : split_ws(value)) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw config_error("variant '" + label + "': expected key=value, got '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "mode")
      v.mode = parse_mode(val);
    else if (key == "gamma")
      parse_gamma(val, v.gamma_mode, v.fixed_gamma);
    else if (key == "K")
      v.iterations_per_frame = static_cast<int>(parse_long(val, "variant K"));
    else if (key == "eta_mode")
      v.eta_mode = parse_eta(val);
    else
      throw config_error("variant '" + label + "': unknown key '" + key + "'");
  }
  return v;
}

inline void set_config_value(ScenarioConfig& cfg, const std::string& section,
                             const std::string& key, const std::string& value) {
  if (section == "topology") {
    if (key == "kind") {
      if (value == "ring")
        cfg.topo_kind = ScenarioConfig::TopoKind::Ring;
      else if (value == "complete")
        cfg.topo_kind = ScenarioConfig::TopoKind::Complete;
      else if (value == "custom")
        cfg.topo_kind = ScenarioConfig::TopoKind::Custom;
      else
        throw config_error("topology.kind must be ring|complete|custom, got '" + value + "'");
    } else if (key == "nodes") {
      cfg.nodes = static_cast<int>(parse_long(value, "topology.nodes"));
    } else if (key == "neighbors_per_side") {
      cfg.neighbors_per_side = static_cast<int>(parse_long(value, "topology.neighbors_per_side"));
    } else if (key == "edges") {
      cfg.edges.clear();
      for (const std::string& tok : split_ws(value)) {
        const auto dash = tok.find('-');
        if (dash == std::string::npos)
          throw config_error("topology.edges: expected i-j pairs, got '" + tok + "'");
        cfg.edges.push_back({static_cast<int>(parse_long(tok.substr(0, dash), "edge endpoint")),
                             static_cast<int>(parse_long(tok.substr(dash + 1), "edge endpoint"))});
      }
    } else {
      throw config_error("unknown key topology." + key);
    }
  } else if (section == "signal") {
    if (key == "channel_length")
      cfg.channel_length = static_cast<int>(parse_long(value, "signal.channel_length"));
    else if (key == "frame_count")
      cfg.frame_count = parse_long(value, "signal.frame_count");
    else if (key == "snr_db")
      cfg.snr_db = parse_snr(value);
    else if (key == "norm_low")
      cfg.norm_low = parse_double(value, "signal.norm_low");
    else if (key == "norm_high")
      cfg.norm_high = parse_double(value, "signal.norm_high");
    else
      throw config_error("unknown key signal." + key);
  } else if (section == "rescale") {
    RescaleEvent ev;
    ev.frame = parse_long(key, "rescale frame");
    for (const std::string& tok : split_ws(value))
      ev.norms.push_back(parse_double(tok, "rescale norm"));
    cfg.rescale.push_back(ev);
  } else if (section == "algorithm") {
    if (key == "rho")
      cfg.rho = parse_double(value, "algorithm.rho");
    else if (key == "forgetting_lambda")
      cfg.forgetting_lambda = parse_double(value, "algorithm.forgetting_lambda");
    else if (key == "iterations_per_frame" || key == "K")
      cfg.iterations_per_frame = static_cast<int>(parse_long(value, "algorithm.K"));
    else if (key == "gamma")
      parse_gamma(value, cfg.gamma_mode, cfg.fixed_gamma);
    else if (key == "eta_mode")
      cfg.eta_mode = parse_eta(value);
    else if (key == "weights")
      cfg.weights_kind = value;
    else if (key == "mode")
      cfg.mode = parse_mode(value);
    else if (key == "init_seed")
      cfg.init_seed = static_cast<std::uint64_t>(parse_long(value, "algorithm.init_seed"));
    else
      throw config_error("unknown key algorithm." + key);
  } else if (section == "run") {
    if (key == "monte_carlo_runs")
      cfg.monte_carlo_runs = static_cast<int>(parse_long(value, "run.monte_carlo_runs"));
    else if (key == "base_seed")
      cfg.base_seed = static_cast<std::uint64_t>(parse_long(value, "run.base_seed"));
    else if (key == "statistic") {
      if (value == "median")
        cfg.statistic = Statistic::Median;
      else if (value == "mean")
        cfg.statistic = Statistic::Mean;
      else
        throw config_error("run.statistic must be median|mean, got '" + value + "'");
    } else if (key == "npm_variant") {
      if (value == "literal")
        cfg.npm_variant = NpmVariant::Literal;
      else if (value == "conventional")
        cfg.npm_variant = NpmVariant::Conventional;
      else
        throw config_error("run.npm_variant must be literal|conventional, got '" + value + "'");
    } else if (key == "moving_average_window") {
      cfg.moving_average_window =
          static_cast<int>(parse_long(value, "run.moving_average_window"));
    } else if (key == "batch_oracle") {
      if (value == "true" || value == "1")
        cfg.batch_oracle = true;
      else if (value == "false" || value == "0")
        cfg.batch_oracle = false;
      else
        throw config_error("run.batch_oracle must be true|false, got '" + value + "'");
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "variant_filter") {
      cfg.variant_filter = split_ws(value);
    } else {
      throw config_error("unknown key run." + key);
    }
  } else if (section == "variants") {
    VariantSpec v = parse_variant(key, value, cfg);
    for (auto& existing : cfg.variants)
      if (existing.label == key) {
        existing = v;
        return;
      }
    cfg.variants.push_back(v);
  } else {
    throw config_error("unknown section [" + section + "]");
  }
}

}  // namespace detail

// Flat key/value format with [section] headers and '#' comments. Unknown
// keys are errors so typos never silently change a run.
inline ScenarioConfig parse_config_text(const std::string& text) {
  ScenarioConfig cfg;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  long line_no = 0;
  // Variant lines are parsed after [algorithm] so inheritance sees final
  // defaults regardless of section order.
  std::vector<std::pair<std::string, std::string>> deferred_variants;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw config_error("malformed section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw config_error("expected key = value");
      if (section.empty()) throw config_error("key outside of any [section]");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (section == "variants")
        deferred_variants.push_back({key, value});
      else
        detail::set_config_value(cfg, section, key, value);
    } catch (const config_error& e) {
      throw config_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (const auto& [key, value] : deferred_variants)
    detail::set_config_value(cfg, "variants", key, value);
  return cfg;
}

inline ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ScenarioConfig cfg = parse_config_text(buf.str());
  return cfg;
}

// Override one value, "section.key=value" (e.g. signal.frame_count=2000,
// variants.ideal=mode=ideal).
inline void apply_override(ScenarioConfig& cfg, const std::string& expr) {
  const auto eq = expr.find('=');
  if (eq == std::string::npos) throw config_error("override must be section.key=value: " + expr);
  const std::string path = detail::trim(expr.substr(0, eq));
  const std::string value = detail::trim(expr.substr(eq + 1));
  const auto dot = path.find('.');
  if (dot == std::string::npos)
    throw config_error("override key must be section.key, got '" + path + "'");
  detail::set_config_value(cfg, path.substr(0, dot), path.substr(dot + 1), value);
}

inline void validate(const ScenarioConfig& cfg) {
  if (cfg.nodes < 1) throw config_error("topology.nodes must be >= 1");
  if (cfg.topo_kind == ScenarioConfig::TopoKind::Ring) {
    if (cfg.nodes < 2) throw config_error("ring topology needs at least 2 nodes");
    const bool degenerate_pair = cfg.nodes == 2 && cfg.neighbors_per_side == 1;
    if (cfg.neighbors_per_side < 1 ||
        (2 * cfg.neighbors_per_side + 1 > cfg.nodes && !degenerate_pair))
      throw config_error("ring neighborhood exceeds network size");
  }
  if (cfg.topo_kind == ScenarioConfig::TopoKind::Custom && cfg.edges.empty() && cfg.nodes > 1)
    throw config_error("custom topology needs topology.edges");
  if (cfg.channel_length < 1) throw config_error("signal.channel_length must be >= 1");
  if (cfg.frame_count < 1) throw config_error("signal.frame_count must be >= 1");
  if (!(cfg.norm_low > 0.0) || !(cfg.norm_low <= cfg.norm_high))
    throw config_error("need 0 < signal.norm_low <= signal.norm_high");
  if (!std::isinf(cfg.snr_db) && !(cfg.snr_db > -100.0 && cfg.snr_db < 300.0))
    throw config_error("signal.snr_db out of range");
  for (const auto& ev : cfg.rescale) {
    if (ev.frame < 0) throw config_error("rescale frames must be >= 0");
    if (static_cast<int>(ev.norms.size()) != cfg.nodes)
      throw config_error("rescale norms must list one value per node");
    for (double v : ev.norms)
      if (!(v > 0.0)) throw config_error("rescale norms must be positive");
  }
  for (std::size_t k = 1; k < cfg.rescale.size(); ++k)
    if (cfg.rescale[k].frame <= cfg.rescale[k - 1].frame)
      throw config_error("rescale frames must be strictly increasing");
  if (!(cfg.rho > 0.0)) throw config_error("algorithm.rho must be positive");
  if (!(cfg.forgetting_lambda > 0.0) || cfg.forgetting_lambda > 1.0)
    throw config_error("algorithm.forgetting_lambda must be in (0, 1]");
  if (cfg.weights_kind != "best_constant" && cfg.weights_kind != "metropolis")
    throw config_error("algorithm.weights must be best_constant|metropolis");
  if (cfg.monte_carlo_runs < 1) throw config_error("run.monte_carlo_runs must be >= 1");
  if (cfg.moving_average_window < 1) throw config_error("run.moving_average_window must be >= 1");

  auto check_variant = [](const VariantSpec& v) {
    if (v.iterations_per_frame < 1)
      throw config_error("variant '" + v.label + "': K must be >= 1");
    if (v.gamma_mode == GammaMode::Fixed && !(v.fixed_gamma >= 0.0 && v.fixed_gamma <= 1.0))
      throw config_error("variant '" + v.label + "': fixed gamma must be in [0, 1]");
  };
  VariantSpec base;
  base.label = "algorithm";
  base.mode = cfg.mode;
  base.gamma_mode = cfg.gamma_mode;
  base.fixed_gamma = cfg.fixed_gamma;
  base.iterations_per_frame = cfg.iterations_per_frame;
  base.eta_mode = cfg.eta_mode;
  check_variant(base);
  for (const auto& v : cfg.variants) check_variant(v);
  for (const auto& f : cfg.variant_filter) {
    bool found = false;
    for (const auto& v : cfg.variants) found = found || v.label == f;
    if (!found) throw config_error("run.variant_filter names unknown variant '" + f + "'");
  }
}

inline Topology build_topology(const ScenarioConfig& cfg) {
  switch (cfg.topo_kind) {
    case ScenarioConfig::TopoKind::Ring:
      return build_ring(cfg.nodes, cfg.neighbors_per_side);
    case ScenarioConfig::TopoKind::Complete:
      return build_complete(cfg.nodes);
    case ScenarioConfig::TopoKind::Custom:
      return build_custom(cfg.nodes, cfg.edges);
  }
  throw config_error("unreachable topology kind");
}

// The variants a run executes: the [variants] section filtered by
// run.variant_filter, or a single variant from [algorithm] when none are
// declared.
inline std::vector<VariantSpec> resolved_variants(const ScenarioConfig& cfg) {
  std::vector<VariantSpec> out;
  if (cfg.variants.empty()) {
    VariantSpec v;
    v.label = "default";
    v.mode = cfg.mode;
    v.gamma_mode = cfg.gamma_mode;
    v.fixed_gamma = cfg.fixed_gamma;
    v.iterations_per_frame = cfg.iterations_per_frame;
    v.eta_mode = cfg.eta_mode;
    out.push_back(v);
    return out;
  }
  for (const auto& v : cfg.variants) {
    if (!cfg.variant_filter.empty() &&
        std::find(cfg.variant_filter.begin(), cfg.variant_filter.end(), v.label) ==
            cfg.variant_filter.end())
      continue;
    out.push_back(v);
  }
  if (out.empty()) throw config_error("variant filter removed every variant");
  return out;
}

inline std::string render_variant_value(const VariantSpec& v) {
  std::ostringstream os;
  os << "mode=" << detail::mode_name(v.mode) << " gamma="
     << (v.gamma_mode == GammaMode::Adaptive ? std::string("adaptive")
                                             : detail::format_double(v.fixed_gamma))
     << " K=" << v.iterations_per_frame << " eta_mode=" << detail::eta_name(v.eta_mode);
  return os.str();
}

// Canonical config text; parsing it back reproduces the configuration.
inline std::string render_config(const ScenarioConfig& cfg) {
  std::ostringstream os;
  os << "[topology]\n";
  os << "kind = "
     << (cfg.topo_kind == ScenarioConfig::TopoKind::Ring
             ? "ring"
             : cfg.topo_kind == ScenarioConfig::TopoKind::Complete ? "complete" : "custom")
     << "\n";
  os << "nodes = " << cfg.nodes << "\n";
  if (cfg.topo_kind == ScenarioConfig::TopoKind::Ring)
    os << "neighbors_per_side = " << cfg.neighbors_per_side << "\n";
  if (cfg.topo_kind == ScenarioConfig::TopoKind::Custom) {
    os << "edges =";
    for (auto [a, b] : cfg.edges) os << " " << a << "-" << b;
    os << "\n";
  }
  os << "\n[signal]\n";
  os << "channel_length = " << cfg.channel_length << "\n";
  os << "frame_count = " << cfg.frame_count << "\n";
  os << "snr_db = " << detail::format_double(cfg.snr_db) << "\n";
  os << "norm_low = " << detail::format_double(cfg.norm_low) << "\n";
  os << "norm_high = " << detail::format_double(cfg.norm_high) << "\n";
  if (!cfg.rescale.empty()) {
    os << "\n[rescale]\n";
    for (const auto& ev : cfg.rescale) {
      os << ev.frame << " =";
      for (double v : ev.norms) os << " " << detail::format_double(v);
      os << "\n";
    }
  }
  os << "\n[algorithm]\n";
  os << "rho = " << detail::format_double(cfg.rho) << "\n";
  os << "forgetting_lambda = " << detail::format_double(cfg.forgetting_lambda) << "\n";
  os << "iterations_per_frame = " << cfg.iterations_per_frame << "\n";
  os << "gamma = "
     << (cfg.gamma_mode == GammaMode::Adaptive ? std::string("adaptive")
                                               : detail::format_double(cfg.fixed_gamma))
     << "\n";
  os << "eta_mode = " << detail::eta_name(cfg.eta_mode) << "\n";
  os << "weights = " << cfg.weights_kind << "\n";
  os << "mode = " << detail::mode_name(cfg.mode) << "\n";
  if (cfg.init_seed != 0) os << "init_seed = " << cfg.init_seed << "\n";
  os << "\n[run]\n";
  os << "monte_carlo_runs = " << cfg.monte_carlo_runs << "\n";
  os << "base_seed = " << cfg.base_seed << "\n";
  os << "statistic = " << (cfg.statistic == Statistic::Median ? "median" : "mean") << "\n";
  os << "npm_variant = "
     << (cfg.npm_variant == NpmVariant::Literal ? "literal" : "conventional") << "\n";
  os << "moving_average_window = " << cfg.moving_average_window << "\n";
  os << "batch_oracle = " << (cfg.batch_oracle ? "true" : "false") << "\n";
  os << "output_dir = " << cfg.output_dir << "\n";
  if (!cfg.variant_filter.empty()) {
    os << "variant_filter =";
    for (const auto& f : cfg.variant_filter) os << " " << f;
    os << "\n";
  }
  if (!cfg.variants.empty()) {
    os << "\n[variants]\n";
    for (const auto& v : cfg.variants) os << v.label << " = " << render_variant_value(v) << "\n";
  }
  return os.str();
}

}  // namespace dbsi
