#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lowfield/nets.hpp"
#include "lowfield/volume.hpp"

namespace lowfield {

enum class GanLoss { least_squares, cross_entropy };

std::string to_string(GanLoss loss);
GanLoss gan_loss_from_string(const std::string& name);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double cycle_weight = 10.0;
  /// Identity-mapping loss weight; 0 disables it.
  double identity_weight = 0.0;
  GanLoss gan_loss = GanLoss::least_squares;
  std::uint64_t seed = 0;
  /// Crop extent (x, y, z). In 2D mode only x and y are used. Items smaller
  /// than the patch are edge-padded.
  std::array<int, 3> patch_size{32, 32, 32};
  /// Write checkpoint_epoch_NNNN.pt every N epochs; 0 disables periodic checkpoints.
  int checkpoint_every = 0;

  void validate() const;
};

/// Mean absolute difference. Throws ShapeError on mismatched shapes.
torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& reconstructed);

/// Least squares: mean((scores - t)^2); cross entropy: BCE on logits. t = 1
/// for real, 0 for synthetic.
torch::Tensor adversarial_loss(const torch::Tensor& scores, bool target_is_real, GanLoss variant);

/// Two generators (low->high, high->low), their discriminators and optimizers.
struct CycleGan {
  Generator to_high{nullptr};
  Generator to_low{nullptr};
  Discriminator judge_high{nullptr};
  Discriminator judge_low{nullptr};
  std::unique_ptr<torch::optim::Adam> generator_optimizer;
  std::unique_ptr<torch::optim::Adam> discriminator_optimizer;

  CycleGan(const GeneratorConfig& gen, const DiscriminatorConfig& disc, const TrainConfig& train);

  const GeneratorConfig& generator_config() const { return to_high->config(); }
  const DiscriminatorConfig& discriminator_config() const { return judge_high->config(); }
};

struct StepLosses {
  double adversarial_high = 0.0;  ///< generator adversarial term for low->high
  double adversarial_low = 0.0;   ///< generator adversarial term for high->low
  double cycle_low = 0.0;         ///< |F(G(low)) - low|
  double cycle_high = 0.0;        ///< |G(F(high)) - high|
  double identity = 0.0;
  double generator_total = 0.0;
  double discriminator_high = 0.0;
  double discriminator_low = 0.0;
  /// Set only when freeze checking is on.
  bool discriminators_frozen = true;
  bool generators_frozen = true;
};

struct StepOptions {
  /// Snapshot parameters around each phase and verify the inactive networks
  /// stayed bit-identical.
  bool verify_freeze = false;
};

/// One alternating update. Generators minimise
/// adv(G) + adv(F) + cycle_weight (cycle_low + cycle_high) [+ identity] with
/// discriminators frozen; then each discriminator is fit on real vs detached
/// synthetic batches with generators frozen. Throws NonFiniteLossError naming
/// the component when any loss is NaN or infinite.
StepLosses cyclegan_step(CycleGan& models, const torch::Tensor& batch_low,
                         const torch::Tensor& batch_high, const TrainConfig& cfg,
                         const StepOptions& options = {});

/// Per-epoch mean losses, in insertion order.
struct EpochRecord {
  int epoch = 0;
  std::vector<std::pair<std::string, double>> losses;

  double loss(const std::string& name) const;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  /// Steps where a frozen network changed (only counted with verify_freeze).
  int freeze_violations = 0;
};

/// Long-format CSV: epoch,loss_name,value.
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);
TrainHistory read_history_csv(const std::filesystem::path& path);

/// Draws training items from a set of volumes: z-slices in 2D mode, whole
/// volumes in 3D mode, each cropped (or edge-padded) to the patch size.
class PatchSampler {
 public:
  PatchSampler(const std::vector<Volume>& volumes, SpatialRank rank, std::array<int, 3> patch);

  std::size_t size() const { return items_.size(); }
  torch::Tensor batch(const std::vector<std::size_t>& items, std::mt19937_64& rng) const;
  /// Same crop window applied to both sets; `partner` must share every grid.
  std::pair<torch::Tensor, torch::Tensor> paired_batch(const PatchSampler& partner,
                                                       const std::vector<std::size_t>& items,
                                                       std::mt19937_64& rng) const;

 private:
  struct Item {
    std::size_t volume;
    std::size_t slice;  ///< z index in 2D mode
  };
  std::array<std::size_t, 3> crop_origin(const Item& item, std::mt19937_64& rng) const;
  void copy_patch(const Item& item, const std::array<std::size_t, 3>& origin, float* out) const;
  std::vector<std::int64_t> item_shape() const;

  const std::vector<Volume>* volumes_;
  SpatialRank rank_;
  std::array<std::size_t, 3> patch_;
  std::vector<Item> items_;
};

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_dir;
  std::optional<std::filesystem::path> resume_from;
  bool verify_freeze = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct CycleGanResult {
  std::unique_ptr<CycleGan> models;
  TrainHistory history;
};

/// Unpaired training: each epoch shuffles both domains independently and runs
/// ceil(max(|low|, |high|) / batch_size) steps, cycling the smaller domain.
CycleGanResult train_cyclegan(const std::vector<Volume>& low_set,
                              const std::vector<Volume>& high_set, const TrainConfig& cfg,
                              const GeneratorConfig& gen_cfg, const DiscriminatorConfig& disc_cfg,
                              const TrainOptions& options = {});

struct DaeModel {
  DAE net{nullptr};
  std::unique_ptr<torch::optim::Adam> optimizer;

  DaeModel(const DAEConfig& cfg, const TrainConfig& train);
};

struct DaeResult {
  std::unique_ptr<DaeModel> model;
  TrainHistory history;
};

/// Supervised training on aligned (low, high) pairs with an L1 objective.
/// Throws ShapeError naming the pair when grids differ.
DaeResult train_dae(const std::vector<Volume>& low_set, const std::vector<Volume>& high_set,
                    const TrainConfig& cfg, const DAEConfig& dae_cfg,
                    const TrainOptions& options = {});

}  // namespace lowfield
