#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>

#include "lowfield/metrics.hpp"
#include "lowfield/train.hpp"

namespace lowfield {

/// Everything besides network weights needed to continue a run.
struct TrainingState {
  int epoch = 0;              ///< last completed epoch
  std::string sampler_state;  ///< serialized std::mt19937_64
  TrainHistory history;
  TrainConfig train;
};

// Checkpoints are libtorch archives holding a JSON "meta" entry (kind, network
// configs, training state) plus one sub-archive per network and optimizer.

void save_cyclegan_checkpoint(const std::filesystem::path& path, CycleGan& models,
                              const TrainingState& state);

struct LoadedCycleGan {
  std::unique_ptr<CycleGan> models;
  TrainingState state;
};
LoadedCycleGan load_cyclegan_checkpoint(const std::filesystem::path& path);

void save_dae_checkpoint(const std::filesystem::path& path, DaeModel& model,
                         const TrainingState& state);

struct LoadedDae {
  std::unique_ptr<DaeModel> model;
  TrainingState state;
};
LoadedDae load_dae_checkpoint(const std::filesystem::path& path);

/// "cyclegan" or "dae". Throws FormatError for anything else.
std::string checkpoint_kind(const std::filesystem::path& path);

/// Low-to-high restorer from a checkpoint of either kind: the low->high
/// generator of a Cycle-GAN, or the DAE.
std::pair<ModelKind, Restorer> restorer_from_checkpoint(const std::filesystem::path& path);

Restorer make_restorer(Generator generator);
Restorer make_restorer(DAE dae);

}  // namespace lowfield
