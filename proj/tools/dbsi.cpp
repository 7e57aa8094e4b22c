// Command-line front end: run scenario configs, run presets with overrides,
// and summarize finished run directories.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime divergence.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "dbsi/config.hpp"
#include "dbsi/errors.hpp"
#include "dbsi/presets.hpp"
#include "dbsi/runner.hpp"

namespace {

int execute(dbsi::ScenarioConfig cfg, const std::vector<std::string>& overrides,
            const std::string& output_dir, bool print_config) {
  for (const auto& o : overrides) dbsi::apply_override(cfg, o);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  dbsi::validate(cfg);
  if (print_config) {
    std::cout << dbsi::render_config(cfg);
    return 0;
  }
  dbsi::RunOptions opts;
  opts.log = &std::cerr;
  dbsi::RunOutput out = dbsi::run_scenario(cfg, opts);
  for (const auto& f : out.files_written) std::cout << f << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dbsi: distributed blind SIMO identification simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset_name;
  std::string report_dir;
  std::string output_dir;
  std::vector<std::string> overrides;
  bool print_config = false;

  CLI::App* run = app.add_subcommand("run", "run a scenario config file");
  run->add_option("config", config_path, "scenario config file")->required();
  run->add_option("--override", overrides, "override section.key=value (repeatable)");
  run->add_option("--output", output_dir, "output directory (overrides run.output_dir)");
  run->add_flag("--print-config", print_config, "print the effective config and exit");

  CLI::App* preset = app.add_subcommand("preset", "run a built-in scenario preset");
  preset->add_option("name", preset_name, "preset name: static5 | dynamic3")->required();
  preset->add_option("--override", overrides, "override section.key=value (repeatable)");
  preset->add_option("--output", output_dir, "output directory (overrides run.output_dir)");
  preset->add_flag("--print-config", print_config, "print the effective config and exit");

  CLI::App* report = app.add_subcommand("report", "summarize a finished run directory");
  report->add_option("dir", report_dir, "run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return execute(dbsi::load_config_file(config_path), overrides, output_dir, print_config);
    if (preset->parsed())
      return execute(dbsi::preset_by_name(preset_name), overrides, output_dir, print_config);
    if (report->parsed()) {
      std::cout << dbsi::report_directory(report_dir);
      return 0;
    }
  } catch (const dbsi::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const dbsi::divergence_error& e) {
    std::cerr << "runtime divergence: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
