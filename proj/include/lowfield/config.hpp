#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "lowfield/degrade.hpp"
#include "lowfield/metrics.hpp"
#include "lowfield/nets.hpp"
#include "lowfield/phantom.hpp"
#include "lowfield/train.hpp"

namespace lowfield {

/// Where each command finds its volumes. Directories hold .nii / .nii.gz
/// files; paired sets are matched by file stem.
struct DataConfig {
  std::string low_dir;             ///< simulated low-field training volumes
  std::string high_dir;            ///< clean volumes for the unpaired high domain
  std::string paired_high_dir;     ///< clean counterparts of low_dir (DAE); defaults to high_dir
  std::string eval_low_dir;        ///< held-out low-field volumes
  std::string eval_reference_dir;  ///< clean counterparts of eval_low_dir
  /// Procedural cohort used when directories are not given.
  PhantomSpec phantom{};
  int train_subjects = 20;
  int test_subjects = 10;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  DataConfig data;
  SimulationParams simulation;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  DAEConfig dae;
  TrainConfig training;
  SSIMParams ssim;

  void validate() const;
};

using nlohmann::json;

void to_json(json& j, const PhantomSpec& v);
void from_json(const json& j, PhantomSpec& v);
void to_json(json& j, const SimulationParams& v);
void from_json(const json& j, SimulationParams& v);
void to_json(json& j, const GeneratorConfig& v);
void from_json(const json& j, GeneratorConfig& v);
void to_json(json& j, const DiscriminatorConfig& v);
void from_json(const json& j, DiscriminatorConfig& v);
void to_json(json& j, const DAEConfig& v);
void from_json(const json& j, DAEConfig& v);
void to_json(json& j, const TrainConfig& v);
void from_json(const json& j, TrainConfig& v);
void to_json(json& j, const SSIMParams& v);
void from_json(const json& j, SSIMParams& v);
void to_json(json& j, const DataConfig& v);
void from_json(const json& j, DataConfig& v);
void to_json(json& j, const ExperimentConfig& v);
void from_json(const json& j, ExperimentConfig& v);

/// Parses and validates. Unknown keys are rejected so typos surface early.
/// Throws std::invalid_argument with the offending key or value.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// Resolves a relative output path against $LOWFIELD_OUTPUT_ROOT when set.
std::filesystem::path resolve_output_path(const std::filesystem::path& path);

}  // namespace lowfield
