#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "radscan/run.hpp"
#include "radscan/simulator.hpp"
#include "radscan/spectra.hpp"

namespace radscan {

// Everything one pipeline invocation needs. Loaded from a JSON file; relative paths
// are resolved against the file's directory.
struct PipelineConfig {
  struct Paths {
    std::string spectra_dir = "spectra";
    std::string runs_dir = "runs";
    std::string labels_file = "labels.csv";
    std::string calibration_file = "out/calibration.csv";
    std::string output_dir = "out";
  } paths;

  double grid_start_kev = 11.0;
  double grid_end_kev = 4001.0;
  double grid_step_kev = 0.5;

  ScanConfig scan;

  double kde_bandwidth_kev = kDefaultNullKdeBandwidthKev;
  std::size_t null_training_runs = 100;
  std::size_t min_null_readings = kDefaultMinNullReadings;
  double density_floor = kDefaultDensityFloor;

  std::size_t calibration_runs = 900;

  std::size_t sim_n_null = 100;
  std::size_t sim_per_source = 10;
  BatchConfig sim_batch;
  bool sim_write_spectra = true;

  double phi = 2.5;
  std::vector<double> phis;  // empty: 0, 0.25, ..., 60

  std::uint64_t seed = 1;
  unsigned workers = 1;
  TimeFormat time_format = TimeFormat::Seconds;
  bool dump_z_grid = false;

  EnergyGrid grid() const { return EnergyGrid(grid_start_kev, grid_end_kev, grid_step_kev); }
  std::vector<double> thresholds() const;

  // InvalidInput when a numeric parameter breaks its module's invariants.
  void validate() const;

  // Path helpers inside output_dir.
  std::string tables_dir() const;
  std::string table_path() const;
  std::string training_manifest_path() const;
  std::string calibration_manifest_path() const;
  std::string scores_path() const;
};

PipelineConfig load_pipeline_config(const std::string& path);

// Spectrum file for a measured variant: source<k>_unshielded.csv / source<k>_shielded.csv.
std::string spectrum_file_name(const SourceVariantId& k);

// Each command writes its outputs and a short summary to `log`. Failures are thrown
// as radscan::Error.
void cmd_build_tables(const PipelineConfig& config, std::ostream& log);
void cmd_calibrate(const PipelineConfig& config, std::ostream& log);
void cmd_score(const PipelineConfig& config, std::ostream& log);
void cmd_simulate(const PipelineConfig& config, std::ostream& log);
void cmd_evaluate(const PipelineConfig& config, std::ostream& log);

}  // namespace radscan
