// radscan: build tables, calibrate, score, simulate and evaluate mobile-sensor runs.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "radscan/errors.hpp"
#include "radscan/pipeline.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<double> phi;
  std::optional<std::string> time_format;
};

radscan::PipelineConfig resolve(const Overrides& o) {
  auto config = radscan::load_pipeline_config(o.config_path);
  if (o.seed) config.seed = *o.seed;
  if (o.workers) config.workers = *o.workers;
  if (o.phi) config.phi = *o.phi;
  if (o.time_format) config.time_format = radscan::parse_time_format(*o.time_format);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scan-statistic detection, identification and localization of radiological sources"};
  app.require_subcommand(1);

  Overrides o;
  app.add_option("--config", o.config_path, "Pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Random seed (simulation and run-set selection)");
  app.add_option("--workers", o.workers, "Concurrent runs")->check(CLI::PositiveNumber);
  app.add_option("--phi", o.phi, "Decision threshold for the confusion matrix and localization output");
  app.add_option("--time-format", o.time_format, "Run file time column")
      ->check(CLI::IsMember({"seconds", "delta-us"}));

  struct Command {
    const char* name;
    const char* help;
    void (*fn)(const radscan::PipelineConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"build-tables", "Build source/null pmfs and the log density-ratio table", radscan::cmd_build_tables},
      {"calibrate", "Estimate null means and standard deviations of the maximized scores", radscan::cmd_calibrate},
      {"score", "Score every run and write scores.csv", radscan::cmd_score},
      {"simulate", "Generate a labelled synthetic run set", radscan::cmd_simulate},
      {"evaluate", "Detection, identification and localization metrics", radscan::cmd_evaluate},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = resolve(o);
    for (const auto& c : commands) {
      if (app.got_subcommand(c.name)) c.fn(config, std::cout);
    }
  } catch (const radscan::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
