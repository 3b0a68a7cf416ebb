#include "lowfield/nets.hpp"

#include <sstream>
#include <stdexcept>

#include "lowfield/errors.hpp"

namespace lowfield {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

std::string to_string(SpatialRank rank) { return rank == SpatialRank::two_d ? "2d" : "3d"; }

SpatialRank spatial_rank_from_string(const std::string& name) {
  if (name == "2d" || name == "2D") return SpatialRank::two_d;
  if (name == "3d" || name == "3D") return SpatialRank::three_d;
  throw std::invalid_argument("unknown spatial rank '" + name + "' (expected 2d or 3d)");
}

void GeneratorConfig::validate() const {
  if (in_channels < 1) throw std::invalid_argument("generator in_channels must be >= 1");
  if (base_channels < 1) throw std::invalid_argument("generator base_channels must be >= 1");
  if (num_downsamples < 1) throw std::invalid_argument("generator num_downsamples must be >= 1");
  if (num_residual_blocks < 0)
    throw std::invalid_argument("generator num_residual_blocks must be >= 0");
}

void DiscriminatorConfig::validate() const {
  if (in_channels < 1 || base_channels < 1)
    throw std::invalid_argument("discriminator channels must be >= 1");
  if (num_layers < 1) throw std::invalid_argument("discriminator num_layers must be >= 1");
}

void DAEConfig::validate() const {
  if (in_channels < 1 || base_channels < 1) throw std::invalid_argument("DAE channels must be >= 1");
  if (depth < 1) throw std::invalid_argument("DAE depth must be >= 1");
}

namespace {

nn::AnyModule conv(SpatialRank rank, int in, int out, int kernel, int stride, int padding) {
  if (rank == SpatialRank::two_d)
    return nn::AnyModule(nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding)));
  return nn::AnyModule(nn::Conv3d(nn::Conv3dOptions(in, out, kernel).stride(stride).padding(padding)));
}

// Kernel 4, stride 2, padding 1: exactly doubles each extent.
nn::AnyModule upconv(SpatialRank rank, int in, int out) {
  if (rank == SpatialRank::two_d)
    return nn::AnyModule(
        nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1)));
  return nn::AnyModule(
      nn::ConvTranspose3d(nn::ConvTranspose3dOptions(in, out, 4).stride(2).padding(1)));
}

nn::AnyModule instance_norm(SpatialRank rank, int channels) {
  if (rank == SpatialRank::two_d) return nn::AnyModule(nn::InstanceNorm2d(channels));
  return nn::AnyModule(nn::InstanceNorm3d(channels));
}

nn::AnyModule leaky_relu() {
  return nn::AnyModule(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
}

torch::Tensor unit_tanh(const torch::Tensor& x) { return (torch::tanh(x) + 1.0) * 0.5; }

void check_input(const torch::Tensor& x, SpatialRank rank, int channels, std::int64_t divisor,
                 const char* who) {
  const int rank_n = static_cast<int>(rank);
  if (x.dim() != rank_n + 2) {
    std::ostringstream msg;
    msg << who << ": expected a " << rank_n + 2 << "-d tensor [N, C, spatial...], got "
        << x.dim() << "-d";
    throw ShapeError(msg.str());
  }
  if (x.size(1) != channels) {
    std::ostringstream msg;
    msg << who << ": expected " << channels << " input channels, got " << x.size(1);
    throw ShapeError(msg.str());
  }
  for (int a = 2; a < x.dim(); ++a)
    if (x.size(a) % divisor != 0 || x.size(a) == 0) {
      std::ostringstream msg;
      msg << who << ": spatial extent " << x.size(a) << " (dim " << a
          << ") must be a positive multiple of " << divisor << " for the "
          << "downsampling path";
      throw ShapeError(msg.str());
    }
}

}  // namespace

ResidualBlockImpl::ResidualBlockImpl(SpatialRank rank, int channels) {
  body_ = register_module("body", nn::Sequential());
  body_->push_back(conv(rank, channels, channels, 3, 1, 1));
  body_->push_back(instance_norm(rank, channels));
  body_->push_back(nn::ReLU());
  body_->push_back(conv(rank, channels, channels, 3, 1, 1));
  body_->push_back(instance_norm(rank, channels));
}

torch::Tensor ResidualBlockImpl::forward(torch::Tensor x) { return x + body_->forward(x); }

GeneratorImpl::GeneratorImpl(const GeneratorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto rank = cfg_.spatial_rank;
  encoder_ = register_module("encoder", nn::ModuleList());
  trunk_ = register_module("trunk", nn::Sequential());
  decoder_ = register_module("decoder", nn::ModuleList());

  int channels = cfg_.in_channels;
  for (int i = 0; i < cfg_.num_downsamples; ++i) {
    const int out = cfg_.base_channels << i;
    nn::Sequential down;
    down->push_back(conv(rank, channels, out, 3, 2, 1));
    down->push_back(instance_norm(rank, out));
    down->push_back(nn::ReLU());
    encoder_->push_back(down);
    channels = out;
  }
  for (int i = 0; i < cfg_.num_residual_blocks; ++i)
    trunk_->push_back(ResidualBlock(rank, channels));
  for (int i = 0; i < cfg_.num_downsamples; ++i) {
    const bool last = i == cfg_.num_downsamples - 1;
    const int out = last ? cfg_.in_channels : cfg_.base_channels << (cfg_.num_downsamples - 2 - i);
    nn::Sequential up;
    up->push_back(upconv(rank, channels, out));
    if (last) {
      up->push_back(nn::Functional(unit_tanh));
    } else {
      up->push_back(instance_norm(rank, out));
      up->push_back(nn::ReLU());
    }
    decoder_->push_back(up);
    channels = out;
  }
  initialize_weights(*this);
}

int GeneratorImpl::layer_count() const {
  return downsampling_layers() + residual_blocks() + upsampling_layers();
}

torch::Tensor GeneratorImpl::run(torch::Tensor x, bool ablate) {
  check_input(x, cfg_.spatial_rank, cfg_.in_channels, cfg_.divisor(), "generator");
  auto h = x;
  for (std::size_t i = 0; i < encoder_->size(); ++i)
    h = encoder_->ptr<nn::SequentialImpl>(i)->forward(h);
  if (trunk_->size() > 0) h = trunk_->forward(h);
  if (ablate) h = torch::zeros_like(h);
  for (std::size_t i = 0; i < decoder_->size(); ++i)
    h = decoder_->ptr<nn::SequentialImpl>(i)->forward(h);
  return h;
}

torch::Tensor GeneratorImpl::forward(torch::Tensor x) { return run(std::move(x), false); }
torch::Tensor GeneratorImpl::forward_ablated(torch::Tensor x) { return run(std::move(x), true); }

std::vector<std::int64_t> DiscriminatorImpl::shape_trace(std::int64_t extent, int num_layers) {
  std::vector<std::int64_t> trace{extent};
  for (int i = 0; i < num_layers; ++i) {
    const std::int64_t n = trace.back();
    if (n < 2) {
      std::ostringstream msg;
      msg << "discriminator: input extent " << extent << " is too small for " << num_layers
          << " stride-2 layers (reaches " << n << " before layer " << i + 1 << ")";
      throw ShapeError(msg.str());
    }
    trace.push_back((n + 2 - 4) / 2 + 1);
  }
  return trace;
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto rank = cfg_.spatial_rank;
  body_ = register_module("body", nn::Sequential());
  int channels = cfg_.in_channels;
  for (int i = 0; i < cfg_.num_layers; ++i) {
    const int out = cfg_.base_channels << std::min(i, 3);
    body_->push_back(conv(rank, channels, out, 4, 2, 1));
    if (i > 0) body_->push_back(instance_norm(rank, out));
    body_->push_back(leaky_relu());
    channels = out;
  }
  body_->push_back(conv(rank, channels, 1, 3, 1, 1));
  initialize_weights(*this);
}

torch::Tensor DiscriminatorImpl::forward(torch::Tensor x) {
  check_input(x, cfg_.spatial_rank, cfg_.in_channels, 1, "discriminator");
  std::int64_t final_voxels = 1;
  for (int a = 2; a < x.dim(); ++a) final_voxels *= shape_trace(x.size(a), cfg_.num_layers).back();
  if (cfg_.num_layers > 1 && final_voxels < 2)
    throw ShapeError("discriminator: input too small, last normalized feature map has a single voxel");
  return body_->forward(x);
}

DAEImpl::DAEImpl(const DAEConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto rank = cfg_.spatial_rank;
  encoder_ = register_module("encoder", nn::ModuleList());
  decoder_ = register_module("decoder", nn::ModuleList());

  std::vector<int> widths;
  int channels = cfg_.in_channels;
  for (int i = 0; i < cfg_.depth; ++i) {
    const int out = cfg_.base_channels << i;
    nn::Sequential level;
    level->push_back(conv(rank, channels, out, 3, 2, 1));
    level->push_back(instance_norm(rank, out));
    level->push_back(leaky_relu());
    encoder_->push_back(level);
    widths.push_back(out);
    channels = out;
  }
  bottleneck_ = register_module("bottleneck", nn::Sequential());
  bottleneck_->push_back(conv(rank, channels, channels, 3, 1, 1));
  bottleneck_->push_back(instance_norm(rank, channels));
  bottleneck_->push_back(nn::ReLU());

  // decoder_[k] handles level depth-1-k.
  for (int i = cfg_.depth - 1; i >= 0; --i) {
    const int in = widths[i] * (cfg_.skip_connections ? 2 : 1);
    const int out = i > 0 ? widths[i - 1] : cfg_.base_channels;
    nn::Sequential level;
    level->push_back(upconv(rank, in, out));
    level->push_back(instance_norm(rank, out));
    level->push_back(nn::ReLU());
    decoder_->push_back(level);
  }
  const int head_in = cfg_.base_channels + (cfg_.skip_connections ? cfg_.in_channels : 0);
  head_ = conv(rank, head_in, cfg_.in_channels, 3, 1, 1);
  register_module("head", head_.ptr());
  initialize_weights(*this);
}

torch::Tensor DAEImpl::run(torch::Tensor x, bool ablate) {
  check_input(x, cfg_.spatial_rank, cfg_.in_channels, cfg_.divisor(), "dae");
  std::vector<torch::Tensor> skips;
  auto h = x;
  for (std::size_t i = 0; i < encoder_->size(); ++i) {
    h = encoder_->ptr<nn::SequentialImpl>(i)->forward(h);
    skips.push_back(h);
  }
  h = bottleneck_->forward(h);
  if (ablate) h = torch::zeros_like(h);
  for (std::size_t k = 0; k < decoder_->size(); ++k) {
    const std::size_t level = skips.size() - 1 - k;
    if (cfg_.skip_connections) h = torch::cat({h, skips[level]}, 1);
    h = decoder_->ptr<nn::SequentialImpl>(k)->forward(h);
  }
  if (cfg_.skip_connections) h = torch::cat({h, x}, 1);
  return unit_tanh(head_.forward(h));
}

torch::Tensor DAEImpl::forward(torch::Tensor x) { return run(std::move(x), false); }
torch::Tensor DAEImpl::forward_ablated(torch::Tensor x) { return run(std::move(x), true); }

Generator build_generator(const GeneratorConfig& cfg) { return Generator(cfg); }
Discriminator build_discriminator(const DiscriminatorConfig& cfg) { return Discriminator(cfg); }
DAE build_dae(const DAEConfig& cfg) { return DAE(cfg); }

std::int64_t count_parameters(const torch::nn::Module& m) {
  std::int64_t total = 0;
  for (const auto& p : m.parameters()) total += p.numel();
  return total;
}

void initialize_weights(torch::nn::Module& m) {
  torch::NoGradGuard no_grad;
  for (auto& item : m.named_parameters()) {
    const auto& name = item.key();
    auto& p = item.value();
    if (name.ends_with("weight")) {
      p.normal_(0.0, 0.02);
    } else if (name.ends_with("bias")) {
      p.zero_();
    }
  }
}

torch::Tensor to_tensor(const Volume& v) {
  const auto& d = v.dims();
  auto data = v.data();
  return torch::from_blob(const_cast<float*>(data.data()),
                          {1, 1, static_cast<std::int64_t>(d[2]), static_cast<std::int64_t>(d[1]),
                           static_cast<std::int64_t>(d[0])},
                          torch::kFloat32)
      .clone();
}

Volume from_tensor(const torch::Tensor& t, const Volume& like) {
  auto flat = t.detach().to(torch::kFloat32).contiguous().reshape({-1});
  if (static_cast<std::size_t>(flat.numel()) != like.size())
    throw ShapeError("from_tensor: element count does not match the target grid");
  const float* p = flat.data_ptr<float>();
  return like.with_data(std::vector<float>(p, p + flat.numel()));
}

Volume apply_network(const TensorMap& net, const Volume& v, SpatialRank rank, std::int64_t divisor) {
  torch::NoGradGuard no_grad;
  const auto& d = v.dims();
  auto pad_to = [divisor](std::int64_t n) { return (n + divisor - 1) / divisor * divisor - n; };
  const auto nx = static_cast<std::int64_t>(d[0]);
  const auto ny = static_cast<std::int64_t>(d[1]);
  const auto nz = static_cast<std::int64_t>(d[2]);
  auto grid = to_tensor(v);  // [1, 1, z, y, x]

  torch::Tensor out;
  if (rank == SpatialRank::two_d) {
    auto slices = grid.reshape({nz, 1, ny, nx});
    slices = F::pad(slices, F::PadFuncOptions({0, pad_to(nx), 0, pad_to(ny)}).mode(torch::kReplicate));
    std::vector<torch::Tensor> parts;
    constexpr std::int64_t kChunk = 16;
    for (std::int64_t s = 0; s < nz; s += kChunk)
      parts.push_back(net(slices.slice(0, s, std::min(nz, s + kChunk))));
    out = torch::cat(parts, 0).slice(2, 0, ny).slice(3, 0, nx);
  } else {
    grid = F::pad(grid, F::PadFuncOptions({0, pad_to(nx), 0, pad_to(ny), 0, pad_to(nz)})
                            .mode(torch::kReplicate));
    out = net(grid).slice(2, 0, nz).slice(3, 0, ny).slice(4, 0, nx);
  }
  return from_tensor(out, v);
}

}  // namespace lowfield
