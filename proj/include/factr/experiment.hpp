#pragma once

#include <string>

#include "factr/config.hpp"

namespace factr::harness {

struct CellOutcome {
  std::string variant;
  long seed = 0;
  bool failed = false;
  std::string error;
  double train_success = 0.0;
  double test_success = 0.0;
  int train_faults = 0;
  int test_faults = 0;
  double test_recovery = 0.0;
  double test_contact_force_mass = 0.0;
  double test_precontact_force_mass = 0.0;
};

struct ExperimentReport {
  std::vector<CellOutcome> cells;
};

// Trains and evaluates every (variant, seed) cell, writing per-cell
// checkpoints, train logs and attention traces plus the aggregate
// summary.csv; cells run on a small worker pool and each cell is
// deterministic in isolation.
ExperimentReport run_experiment(const Config& cfg, const std::string& dataset_dir,
                                const std::string& out_dir);

// Scheduler/operator/space grid at reduced steps; writes ablation.csv.
void run_ablation(const Config& cfg, const std::string& dataset_dir, const std::string& out_dir);

// Single training run: checkpoint + train log under out_dir.
void run_train(const Config& cfg, const std::string& dataset_dir, const std::string& out_dir,
               const std::string& variant);

// Single evaluation of a checkpoint: metrics.csv and traces under out_dir.
void run_eval(const Config& cfg, const std::string& checkpoint, const std::string& split,
              const std::string& out_dir);

// Runs the committed teleop scenario set in both feedback modes and writes
// teleop.csv; returns the (faults_on, faults_off, retention_on, retention_off)
// aggregate through the report file.
void run_teleop_suite(const Config& cfg, const std::string& out_dir);

// Kernel-analysis verification CSVs: deviation sweep and residual curves.
void run_ntk_verify(const Config& cfg, const std::string& out_dir);

// (n, sigma_n) rows for the configured scheduler.
void run_dump_schedule(const Config& cfg, const std::string& out_path);

// Pretty-prints any artifact this project writes, dispatching on content.
std::string inspect_path(const std::string& path);

}  // namespace factr::harness
