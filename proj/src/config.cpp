#include "lowfield/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#include "lowfield/errors.hpp"

namespace lowfield {

namespace {

// Rejects keys outside `allowed`, naming the section.
void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(std::string(section) + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!ok.count(item.key()))
      throw std::invalid_argument(std::string(section) + ": unknown key '" + item.key() + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const PhantomSpec& v) {
  j = {{"grid_size", v.grid_size},         {"num_shapes", v.num_shapes},
       {"intensity_range", v.intensity_range}, {"seed", v.seed},
       {"spacing", v.spacing}};
}
void from_json(const json& j, PhantomSpec& v) {
  check_keys(j, "phantom", {"grid_size", "num_shapes", "intensity_range", "seed", "spacing"});
  read(j, "grid_size", v.grid_size);
  read(j, "num_shapes", v.num_shapes);
  read(j, "intensity_range", v.intensity_range);
  read(j, "seed", v.seed);
  read(j, "spacing", v.spacing);
}

void to_json(json& j, const SimulationParams& v) {
  j = {{"target_spacing", v.target_spacing},
       {"target_snr", v.target_snr},
       {"interpolation", to_string(v.interpolation)},
       {"seed", v.seed},
       {"foreground_threshold", v.foreground_threshold}};
}
void from_json(const json& j, SimulationParams& v) {
  check_keys(j, "simulation",
             {"target_spacing", "target_snr", "interpolation", "seed", "foreground_threshold"});
  read(j, "target_spacing", v.target_spacing);
  read(j, "target_snr", v.target_snr);
  if (j.contains("interpolation")) v.interpolation = interpolation_from_string(j["interpolation"]);
  read(j, "seed", v.seed);
  read(j, "foreground_threshold", v.foreground_threshold);
}

void to_json(json& j, const GeneratorConfig& v) {
  j = {{"in_channels", v.in_channels},
       {"base_channels", v.base_channels},
       {"num_downsamples", v.num_downsamples},
       {"num_residual_blocks", v.num_residual_blocks},
       {"spatial_rank", to_string(v.spatial_rank)}};
}
void from_json(const json& j, GeneratorConfig& v) {
  check_keys(j, "generator",
             {"in_channels", "base_channels", "num_downsamples", "num_residual_blocks", "spatial_rank"});
  read(j, "in_channels", v.in_channels);
  read(j, "base_channels", v.base_channels);
  read(j, "num_downsamples", v.num_downsamples);
  read(j, "num_residual_blocks", v.num_residual_blocks);
  if (j.contains("spatial_rank")) v.spatial_rank = spatial_rank_from_string(j["spatial_rank"]);
}

void to_json(json& j, const DiscriminatorConfig& v) {
  j = {{"in_channels", v.in_channels},
       {"base_channels", v.base_channels},
       {"num_layers", v.num_layers},
       {"spatial_rank", to_string(v.spatial_rank)}};
}
void from_json(const json& j, DiscriminatorConfig& v) {
  check_keys(j, "discriminator", {"in_channels", "base_channels", "num_layers", "spatial_rank"});
  read(j, "in_channels", v.in_channels);
  read(j, "base_channels", v.base_channels);
  read(j, "num_layers", v.num_layers);
  if (j.contains("spatial_rank")) v.spatial_rank = spatial_rank_from_string(j["spatial_rank"]);
}

void to_json(json& j, const DAEConfig& v) {
  j = {{"in_channels", v.in_channels},
       {"base_channels", v.base_channels},
       {"depth", v.depth},
       {"skip_connections", v.skip_connections},
       {"spatial_rank", to_string(v.spatial_rank)}};
}
void from_json(const json& j, DAEConfig& v) {
  check_keys(j, "dae", {"in_channels", "base_channels", "depth", "skip_connections", "spatial_rank"});
  read(j, "in_channels", v.in_channels);
  read(j, "base_channels", v.base_channels);
  read(j, "depth", v.depth);
  read(j, "skip_connections", v.skip_connections);
  if (j.contains("spatial_rank")) v.spatial_rank = spatial_rank_from_string(j["spatial_rank"]);
}

void to_json(json& j, const TrainConfig& v) {
  j = {{"epochs", v.epochs},
       {"batch_size", v.batch_size},
       {"learning_rate", v.learning_rate},
       {"beta1", v.beta1},
       {"beta2", v.beta2},
       {"cycle_weight", v.cycle_weight},
       {"identity_weight", v.identity_weight},
       {"gan_loss", to_string(v.gan_loss)},
       {"seed", v.seed},
       {"patch_size", v.patch_size},
       {"checkpoint_every", v.checkpoint_every}};
}
void from_json(const json& j, TrainConfig& v) {
  check_keys(j, "training",
             {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "cycle_weight",
              "identity_weight", "gan_loss", "seed", "patch_size", "checkpoint_every"});
  read(j, "epochs", v.epochs);
  read(j, "batch_size", v.batch_size);
  read(j, "learning_rate", v.learning_rate);
  read(j, "beta1", v.beta1);
  read(j, "beta2", v.beta2);
  read(j, "cycle_weight", v.cycle_weight);
  read(j, "identity_weight", v.identity_weight);
  if (j.contains("gan_loss")) v.gan_loss = gan_loss_from_string(j["gan_loss"]);
  read(j, "seed", v.seed);
  read(j, "patch_size", v.patch_size);
  read(j, "checkpoint_every", v.checkpoint_every);
}

void to_json(json& j, const SSIMParams& v) {
  j = {{"window", v.window},
       {"gaussian_sigma", v.gaussian_sigma},
       {"k1", v.k1},
       {"k2", v.k2},
       {"dynamic_range", v.dynamic_range}};
}
void from_json(const json& j, SSIMParams& v) {
  check_keys(j, "ssim", {"window", "gaussian_sigma", "k1", "k2", "dynamic_range"});
  read(j, "window", v.window);
  read(j, "gaussian_sigma", v.gaussian_sigma);
  read(j, "k1", v.k1);
  read(j, "k2", v.k2);
  read(j, "dynamic_range", v.dynamic_range);
}

void to_json(json& j, const DataConfig& v) {
  j = {{"low_dir", v.low_dir},
       {"high_dir", v.high_dir},
       {"paired_high_dir", v.paired_high_dir},
       {"eval_low_dir", v.eval_low_dir},
       {"eval_reference_dir", v.eval_reference_dir},
       {"phantom", v.phantom},
       {"train_subjects", v.train_subjects},
       {"test_subjects", v.test_subjects}};
}
void from_json(const json& j, DataConfig& v) {
  check_keys(j, "data",
             {"low_dir", "high_dir", "paired_high_dir", "eval_low_dir", "eval_reference_dir",
              "phantom", "train_subjects", "test_subjects"});
  read(j, "low_dir", v.low_dir);
  read(j, "high_dir", v.high_dir);
  read(j, "paired_high_dir", v.paired_high_dir);
  read(j, "eval_low_dir", v.eval_low_dir);
  read(j, "eval_reference_dir", v.eval_reference_dir);
  read(j, "phantom", v.phantom);
  read(j, "train_subjects", v.train_subjects);
  read(j, "test_subjects", v.test_subjects);
}

void to_json(json& j, const ExperimentConfig& v) {
  j = {{"seed", v.seed},
       {"output_dir", v.output_dir},
       {"data", v.data},
       {"simulation", v.simulation},
       {"generator", v.generator},
       {"discriminator", v.discriminator},
       {"dae", v.dae},
       {"training", v.training},
       {"ssim", v.ssim}};
}
void from_json(const json& j, ExperimentConfig& v) {
  check_keys(j, "config",
             {"seed", "output_dir", "data", "simulation", "generator", "discriminator", "dae",
              "training", "ssim"});
  read(j, "seed", v.seed);
  read(j, "output_dir", v.output_dir);
  read(j, "data", v.data);
  read(j, "simulation", v.simulation);
  read(j, "generator", v.generator);
  read(j, "discriminator", v.discriminator);
  read(j, "dae", v.dae);
  read(j, "training", v.training);
  read(j, "ssim", v.ssim);
}

void ExperimentConfig::validate() const {
  if (output_dir.empty()) throw std::invalid_argument("output_dir must be nonempty");
  data.phantom.validate();
  if (data.train_subjects < 1 || data.test_subjects < 1)
    throw std::invalid_argument("train_subjects and test_subjects must be >= 1");
  simulation.validate();
  generator.validate();
  discriminator.validate();
  dae.validate();
  training.validate();
  ssim.validate();
  if (generator.spatial_rank != discriminator.spatial_rank)
    throw std::invalid_argument("generator and discriminator spatial_rank differ");
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open config");
  ExperimentConfig cfg;
  try {
    cfg = json::parse(in).get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

void save_experiment_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << json(cfg).dump(2) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

std::filesystem::path resolve_output_path(const std::filesystem::path& path) {
  if (path.is_absolute()) return path;
  if (const char* root = std::getenv("LOWFIELD_OUTPUT_ROOT"); root && *root)
    return std::filesystem::path(root) / path;
  return path;
}

}  // namespace lowfield
