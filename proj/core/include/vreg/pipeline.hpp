#pragma once

#include "vreg/baseline.hpp"
#include "vreg/distributed.hpp"
#include "vreg/train.hpp"

#include <string>

namespace vreg {

/// End-to-end desk-scale pipeline configuration (the `repro` subcommand).
struct ReproConfig {
  std::uint64_t seed = 7;
  int n_samples = 10000;   // generated instances
  int n_train = 8000;      // rows handed to the fitters
  int n_test = 500;        // regulation test instances
  int train_iters = 20000;
  double learning_rate = 0.5;
  int batch_size = 64;
  int n_hidden = 2;
  int width_factor = 6;    // hidden width = width_factor * n_buses
  double qmax = 0.1;       // control half-width around nominal q, p.u.
  int distributed_instances = 3;
  std::string out_dir = "out";
};

struct ReproRow {
  std::string model;
  double fit_mae_pct = 0.0;       // percent of nominal voltage
  double viol_3pct = 0.0;         // mean fraction of buses out of 3%
  double viol_5pct = 0.0;
  double time_per_instance = 0.0; // seconds
};

struct ReproSummary {
  std::vector<ReproRow> rows;
};

/// Runs gen-network -> gen-data -> train (ICNN + linear) -> regulate the test
/// set -> distributed demo -> eval, writing summary.csv, loss curves, the
/// regulation table, and a run manifest under cfg.out_dir. The summary CSV is
/// bit-identical across runs with the same seed.
ReproSummary run_repro(const ReproConfig& cfg);

/// Summary CSV text (columns model,fit_MAE,viol_3pct,viol_5pct,
/// time_per_instance; timings zeroed out so the file is reproducible).
std::string summary_to_csv(const ReproSummary& summary,
                           bool include_timings = false);

/// Writes a JSON manifest (command, config snapshot, seed, paths, version,
/// wall-clock timings) alongside the outputs.
void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_json, std::uint64_t seed,
                    const std::vector<std::string>& outputs,
                    double elapsed_seconds);

std::string repro_config_to_json(const ReproConfig& cfg);

constexpr const char* kVersion = "0.1.0";

}  // namespace vreg
