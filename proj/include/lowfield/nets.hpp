#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <string>

#include "lowfield/volume.hpp"

namespace lowfield {

/// 2D networks run slice-by-slice over a volume; 3D networks see whole grids.
enum class SpatialRank { two_d = 2, three_d = 3 };

std::string to_string(SpatialRank rank);
SpatialRank spatial_rank_from_string(const std::string& name);

struct GeneratorConfig {
  int in_channels = 1;
  int base_channels = 32;
  int num_downsamples = 2;
  int num_residual_blocks = 9;
  SpatialRank spatial_rank = SpatialRank::three_d;

  void validate() const;
  /// Downsampling convolutions + residual blocks + upsampling layers.
  int layer_count() const { return 2 * num_downsamples + num_residual_blocks; }
  /// Spatial extents fed to forward() must be multiples of this.
  std::int64_t divisor() const { return std::int64_t{1} << num_downsamples; }
};

struct DiscriminatorConfig {
  int in_channels = 1;
  int base_channels = 32;
  int num_layers = 4;
  SpatialRank spatial_rank = SpatialRank::three_d;

  void validate() const;
};

struct DAEConfig {
  int in_channels = 1;
  int base_channels = 32;
  int depth = 3;
  bool skip_connections = true;
  SpatialRank spatial_rank = SpatialRank::three_d;

  void validate() const;
  std::int64_t divisor() const { return std::int64_t{1} << depth; }
};

/// Conv -> instance norm -> ReLU -> conv -> instance norm, plus the identity.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(SpatialRank rank, int channels);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Encoder / residual bottleneck / decoder generator with no skip paths from
/// encoder to decoder. Output is (tanh + 1) / 2, i.e. in [0, 1].
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorConfig& cfg);

  /// x: [N, C, (D,) H, W]. Throws ShapeError when a spatial extent is not a
  /// multiple of cfg.divisor().
  torch::Tensor forward(torch::Tensor x);
  /// Same, but the residual trunk output is replaced by zeros before decoding.
  torch::Tensor forward_ablated(torch::Tensor x);

  const GeneratorConfig& config() const { return cfg_; }
  int downsampling_layers() const { return static_cast<int>(encoder_->size()); }
  int residual_blocks() const { return static_cast<int>(trunk_->size()); }
  int upsampling_layers() const { return static_cast<int>(decoder_->size()); }
  int layer_count() const;
  /// Encoder-to-decoder concatenations performed by forward(); always 0.
  int skip_connection_count() const { return 0; }

 private:
  torch::Tensor run(torch::Tensor x, bool ablate);

  GeneratorConfig cfg_;
  torch::nn::ModuleList encoder_{nullptr};
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::ModuleList decoder_{nullptr};
};
TORCH_MODULE(Generator);

/// Patch classifier: num_layers stride-2 4-kernel convolutions (instance norm
/// after all but the first, LeakyReLU 0.2) and a 3-kernel 1-channel score head.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const DiscriminatorConfig& cfg);
  torch::Tensor forward(torch::Tensor x);

  const DiscriminatorConfig& config() const { return cfg_; }

  /// Spatial extent after each strided layer for a given input extent. Throws
  /// ShapeError when the input is too small for num_layers halvings.
  static std::vector<std::int64_t> shape_trace(std::int64_t extent, int num_layers);

 private:
  DiscriminatorConfig cfg_;
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(Discriminator);

/// U-net style denoising autoencoder. With skip connections each decoder
/// level also receives the matching encoder output, and the head sees the
/// input itself.
class DAEImpl : public torch::nn::Module {
 public:
  explicit DAEImpl(const DAEConfig& cfg);
  torch::Tensor forward(torch::Tensor x);
  torch::Tensor forward_ablated(torch::Tensor x);

  const DAEConfig& config() const { return cfg_; }
  int skip_connection_count() const { return cfg_.skip_connections ? cfg_.depth + 1 : 0; }

 private:
  torch::Tensor run(torch::Tensor x, bool ablate);

  DAEConfig cfg_;
  torch::nn::ModuleList encoder_{nullptr};
  torch::nn::Sequential bottleneck_{nullptr};
  torch::nn::ModuleList decoder_{nullptr};
  torch::nn::AnyModule head_;
};
TORCH_MODULE(DAE);

Generator build_generator(const GeneratorConfig& cfg);
Discriminator build_discriminator(const DiscriminatorConfig& cfg);
DAE build_dae(const DAEConfig& cfg);

/// Total number of scalar parameters.
std::int64_t count_parameters(const torch::nn::Module& m);

/// Zero-mean Gaussian (std 0.02) convolution weights, zero biases. Draws from
/// the global torch generator.
void initialize_weights(torch::nn::Module& m);

using TensorMap = std::function<torch::Tensor(torch::Tensor)>;

/// Runs a shape-preserving network over a volume. In 2D mode each z-slice is
/// one batch item. Extents are edge-padded up to a multiple of `divisor` and
/// cropped back afterwards.
Volume apply_network(const TensorMap& net, const Volume& v, SpatialRank rank, std::int64_t divisor);

/// Volume <-> [1, 1, D, H, W] float tensor.
torch::Tensor to_tensor(const Volume& v);
Volume from_tensor(const torch::Tensor& t, const Volume& like);

}  // namespace lowfield
