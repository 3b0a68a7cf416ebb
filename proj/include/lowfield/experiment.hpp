#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lowfield/config.hpp"
#include "lowfield/metrics.hpp"
#include "lowfield/report.hpp"
#include "lowfield/train.hpp"

namespace lowfield {

/// Phantom cohorts of the desk experiment (subject indices relative to the
/// phantom seed):
///   [0, n)        low-field training scans, also the DAE pairs
///   [n, 2n)       clean high-domain volumes for the Cycle-GAN
///   [2n, 2n + t)  held-out evaluation subjects
/// Low-field scans of subject i use noise seed subject_seed(sim, i).
struct PhantomCohorts {
  std::vector<Volume> train_low;
  std::vector<Volume> train_reference;
  std::vector<Volume> high_domain;
  std::vector<Volume> test_low;
  std::vector<Volume> test_reference;
  double mean_measured_snr = 0.0;
};

PhantomCohorts build_phantom_cohorts(const ExperimentConfig& cfg);

struct DeskExperimentOptions {
  bool verify_freeze = true;
  std::function<void(const std::string&)> log;
};

struct DeskExperimentResult {
  TrainHistory cyclegan_history;
  TrainHistory dae_history;
  std::vector<MetricsRecord> records;
  ComparisonSummary summary;
  double mean_measured_snr = 0.0;
};

/// Phantom-based end-to-end run: simulate, train the Cycle-GAN on disjoint
/// unpaired cohorts and the DAE on aligned pairs, evaluate both on held-out
/// phantoms and compare. Writes config.json, {cyclegan,dae}/history.csv and final.pt, metrics.csv,
/// summary.json, histogram.png and panel.png (with sidecars) into out_dir.
DeskExperimentResult run_desk_experiment(const ExperimentConfig& cfg,
                                         const std::filesystem::path& out_dir,
                                         const DeskExperimentOptions& options = {});

}  // namespace lowfield
