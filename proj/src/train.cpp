#include "lowfield/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lowfield/checkpoint.hpp"
#include "lowfield/errors.hpp"
#include "lowfield/metrics.hpp"

namespace lowfield {

std::string to_string(GanLoss loss) {
  return loss == GanLoss::least_squares ? "least_squares" : "cross_entropy";
}

GanLoss gan_loss_from_string(const std::string& name) {
  if (name == "least_squares") return GanLoss::least_squares;
  if (name == "cross_entropy") return GanLoss::cross_entropy;
  throw std::invalid_argument("unknown gan_loss '" + name + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(cycle_weight >= 0.0)) throw std::invalid_argument("cycle_weight must be >= 0");
  if (!(identity_weight >= 0.0)) throw std::invalid_argument("identity_weight must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  for (int p : patch_size)
    if (p < 1) throw std::invalid_argument("patch_size components must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
}

torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& reconstructed) {
  if (!x.sizes().equals(reconstructed.sizes())) {
    std::ostringstream msg;
    msg << "cycle_loss: shape " << x.sizes() << " vs " << reconstructed.sizes();
    throw ShapeError(msg.str());
  }
  return (x - reconstructed).abs().mean();
}

torch::Tensor adversarial_loss(const torch::Tensor& scores, bool target_is_real, GanLoss variant) {
  const double target = target_is_real ? 1.0 : 0.0;
  if (variant == GanLoss::least_squares) return (scores - target).pow(2).mean();
  return torch::binary_cross_entropy_with_logits(scores, torch::full_like(scores, target));
}

namespace {

std::vector<torch::Tensor> concat_parameters(torch::nn::Module& a, torch::nn::Module& b) {
  auto params = a.parameters();
  auto more = b.parameters();
  params.insert(params.end(), more.begin(), more.end());
  return params;
}

torch::optim::AdamOptions adam_options(const TrainConfig& cfg) {
  return torch::optim::AdamOptions(cfg.learning_rate).betas({cfg.beta1, cfg.beta2});
}

void set_requires_grad(torch::nn::Module& m, bool flag) {
  for (auto& p : m.parameters()) p.set_requires_grad(flag);
}

std::vector<torch::Tensor> snapshot(torch::nn::Module& a, torch::nn::Module& b) {
  std::vector<torch::Tensor> out;
  for (auto& p : concat_parameters(a, b)) out.push_back(p.detach().clone());
  return out;
}

bool unchanged(torch::nn::Module& a, torch::nn::Module& b, const std::vector<torch::Tensor>& snap) {
  const auto now = concat_parameters(a, b);
  for (std::size_t i = 0; i < now.size(); ++i)
    if (!torch::equal(now[i].detach(), snap[i])) return false;
  return true;
}

double checked(const torch::Tensor& loss, const char* name) {
  const double v = loss.item<double>();
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-finite " << name << " loss (" << v << ")";
    throw NonFiniteLossError(msg.str());
  }
  return v;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void restore_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (!in) throw FormatError("checkpoint sampler state is corrupt");
}

// Running means of named losses within one epoch.
class EpochAccumulator {
 public:
  void add(const std::string& name, double v) {
    auto it = std::find_if(sums_.begin(), sums_.end(), [&](auto& p) { return p.first == name; });
    if (it == sums_.end()) {
      sums_.emplace_back(name, v);
    } else {
      it->second += v;
    }
  }
  void next_step() { ++steps_; }
  EpochRecord finish(int epoch) const {
    EpochRecord r{epoch, {}};
    for (const auto& [name, sum] : sums_) r.losses.emplace_back(name, sum / steps_);
    return r;
  }

 private:
  std::vector<std::pair<std::string, double>> sums_;
  int steps_ = 0;
};

std::filesystem::path periodic_checkpoint(const std::filesystem::path& dir, int epoch) {
  char name[64];
  std::snprintf(name, sizeof name, "checkpoint_epoch_%04d.pt", epoch);
  return dir / name;
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<std::size_t> take(const std::vector<std::size_t>& order, std::size_t step,
                              std::size_t batch) {
  std::vector<std::size_t> out(batch);
  for (std::size_t k = 0; k < batch; ++k) out[k] = order[(step * batch + k) % order.size()];
  return out;
}

}  // namespace

CycleGan::CycleGan(const GeneratorConfig& gen, const DiscriminatorConfig& disc,
                   const TrainConfig& train) {
  if (gen.spatial_rank != disc.spatial_rank)
    throw std::invalid_argument("generator and discriminator spatial ranks differ");
  torch::manual_seed(train.seed);
  to_high = build_generator(gen);
  to_low = build_generator(gen);
  judge_high = build_discriminator(disc);
  judge_low = build_discriminator(disc);
  generator_optimizer = std::make_unique<torch::optim::Adam>(
      concat_parameters(*to_high, *to_low), adam_options(train));
  discriminator_optimizer = std::make_unique<torch::optim::Adam>(
      concat_parameters(*judge_high, *judge_low), adam_options(train));
}

StepLosses cyclegan_step(CycleGan& m, const torch::Tensor& batch_low,
                         const torch::Tensor& batch_high, const TrainConfig& cfg,
                         const StepOptions& options) {
  StepLosses out;

  // Generator phase: discriminators frozen.
  std::vector<torch::Tensor> judges_before;
  if (options.verify_freeze) judges_before = snapshot(*m.judge_high, *m.judge_low);
  set_requires_grad(*m.judge_high, false);
  set_requires_grad(*m.judge_low, false);

  m.generator_optimizer->zero_grad();
  auto fake_high = m.to_high->forward(batch_low);
  auto fake_low = m.to_low->forward(batch_high);
  auto rec_low = m.to_low->forward(fake_high);
  auto rec_high = m.to_high->forward(fake_low);

  auto adv_high = adversarial_loss(m.judge_high->forward(fake_high), true, cfg.gan_loss);
  auto adv_low = adversarial_loss(m.judge_low->forward(fake_low), true, cfg.gan_loss);
  auto cyc_low = cycle_loss(batch_low, rec_low);
  auto cyc_high = cycle_loss(batch_high, rec_high);
  auto total = adv_high + adv_low + cfg.cycle_weight * (cyc_low + cyc_high);
  if (cfg.identity_weight > 0.0) {
    auto identity = cycle_loss(batch_high, m.to_high->forward(batch_high)) +
                    cycle_loss(batch_low, m.to_low->forward(batch_low));
    out.identity = checked(identity, "identity");
    total = total + cfg.identity_weight * identity;
  }
  out.adversarial_high = checked(adv_high, "adversarial_high");
  out.adversarial_low = checked(adv_low, "adversarial_low");
  out.cycle_low = checked(cyc_low, "cycle_low");
  out.cycle_high = checked(cyc_high, "cycle_high");
  out.generator_total = checked(total, "generator_total");
  total.backward();
  m.generator_optimizer->step();

  set_requires_grad(*m.judge_high, true);
  set_requires_grad(*m.judge_low, true);
  if (options.verify_freeze)
    out.discriminators_frozen = unchanged(*m.judge_high, *m.judge_low, judges_before);

  // Discriminator phase: generators frozen (fakes are detached).
  std::vector<torch::Tensor> generators_before;
  if (options.verify_freeze) generators_before = snapshot(*m.to_high, *m.to_low);
  m.discriminator_optimizer->zero_grad();
  auto d_high = 0.5 * (adversarial_loss(m.judge_high->forward(batch_high), true, cfg.gan_loss) +
                       adversarial_loss(m.judge_high->forward(fake_high.detach()), false, cfg.gan_loss));
  auto d_low = 0.5 * (adversarial_loss(m.judge_low->forward(batch_low), true, cfg.gan_loss) +
                      adversarial_loss(m.judge_low->forward(fake_low.detach()), false, cfg.gan_loss));
  out.discriminator_high = checked(d_high, "discriminator_high");
  out.discriminator_low = checked(d_low, "discriminator_low");
  (d_high + d_low).backward();
  m.discriminator_optimizer->step();
  if (options.verify_freeze)
    out.generators_frozen = unchanged(*m.to_high, *m.to_low, generators_before);
  return out;
}

double EpochRecord::loss(const std::string& name) const {
  for (const auto& [n, v] : losses)
    if (n == name) return v;
  throw std::out_of_range("no loss named '" + name + "' in epoch " + std::to_string(epoch));
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "epoch,loss_name,value\n";
  for (const auto& e : history.epochs)
    for (const auto& [name, value] : e.losses)
      out << e.epoch << ',' << name << ',' << format_double(value) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

TrainHistory read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line != "epoch,loss_name,value")
    throw FormatError(path.string() + ": expected header 'epoch,loss_name,value'");
  TrainHistory h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw FormatError(path.string() + ": malformed row '" + line + "'");
    const int epoch = std::stoi(line.substr(0, c1));
    if (h.epochs.empty() || h.epochs.back().epoch != epoch) h.epochs.push_back({epoch, {}});
    h.epochs.back().losses.emplace_back(line.substr(c1 + 1, c2 - c1 - 1),
                                        parse_double(line.substr(c2 + 1)));
  }
  return h;
}

PatchSampler::PatchSampler(const std::vector<Volume>& volumes, SpatialRank rank,
                           std::array<int, 3> patch)
    : volumes_(&volumes), rank_(rank) {
  for (int a = 0; a < 3; ++a) patch_[a] = static_cast<std::size_t>(patch[a]);
  if (rank_ == SpatialRank::two_d) patch_[2] = 1;
  for (std::size_t v = 0; v < volumes.size(); ++v) {
    if (rank_ == SpatialRank::two_d) {
      for (std::size_t z = 0; z < volumes[v].dims()[2]; ++z) items_.push_back({v, z});
    } else {
      items_.push_back({v, 0});
    }
  }
}

std::vector<std::int64_t> PatchSampler::item_shape() const {
  if (rank_ == SpatialRank::two_d)
    return {1, static_cast<std::int64_t>(patch_[1]), static_cast<std::int64_t>(patch_[0])};
  return {1, static_cast<std::int64_t>(patch_[2]), static_cast<std::int64_t>(patch_[1]),
          static_cast<std::int64_t>(patch_[0])};
}

std::array<std::size_t, 3> PatchSampler::crop_origin(const Item& item, std::mt19937_64& rng) const {
  const auto& d = (*volumes_)[item.volume].dims();
  std::array<std::size_t, 3> origin{0, 0, item.slice};
  const int axes = rank_ == SpatialRank::two_d ? 2 : 3;
  for (int a = 0; a < axes; ++a)
    if (d[a] > patch_[a])
      origin[a] = std::uniform_int_distribution<std::size_t>(0, d[a] - patch_[a])(rng);
  return origin;
}

void PatchSampler::copy_patch(const Item& item, const std::array<std::size_t, 3>& origin,
                              float* out) const {
  const Volume& v = (*volumes_)[item.volume];
  const auto& d = v.dims();
  for (std::size_t z = 0; z < patch_[2]; ++z) {
    const std::size_t sz = std::min(origin[2] + z, d[2] - 1);
    for (std::size_t y = 0; y < patch_[1]; ++y) {
      const std::size_t sy = std::min(origin[1] + y, d[1] - 1);
      for (std::size_t x = 0; x < patch_[0]; ++x)
        *out++ = v.at(std::min(origin[0] + x, d[0] - 1), sy, sz);
    }
  }
}

torch::Tensor PatchSampler::batch(const std::vector<std::size_t>& items, std::mt19937_64& rng) const {
  auto shape = item_shape();
  shape.insert(shape.begin(), static_cast<std::int64_t>(items.size()));
  auto t = torch::empty(shape, torch::kFloat32);
  const std::size_t stride = patch_[0] * patch_[1] * patch_[2];
  float* p = t.data_ptr<float>();
  for (std::size_t b = 0; b < items.size(); ++b) {
    const Item& item = items_.at(items[b]);
    copy_patch(item, crop_origin(item, rng), p + b * stride);
  }
  return t;
}

std::pair<torch::Tensor, torch::Tensor> PatchSampler::paired_batch(
    const PatchSampler& partner, const std::vector<std::size_t>& items, std::mt19937_64& rng) const {
  auto shape = item_shape();
  shape.insert(shape.begin(), static_cast<std::int64_t>(items.size()));
  auto a = torch::empty(shape, torch::kFloat32);
  auto b = torch::empty(shape, torch::kFloat32);
  const std::size_t stride = patch_[0] * patch_[1] * patch_[2];
  for (std::size_t k = 0; k < items.size(); ++k) {
    const Item& item = items_.at(items[k]);
    const auto origin = crop_origin(item, rng);
    copy_patch(item, origin, a.data_ptr<float>() + k * stride);
    partner.copy_patch(partner.items_.at(items[k]), origin, b.data_ptr<float>() + k * stride);
  }
  return {a, b};
}

CycleGanResult train_cyclegan(const std::vector<Volume>& low_set,
                              const std::vector<Volume>& high_set, const TrainConfig& cfg,
                              const GeneratorConfig& gen_cfg, const DiscriminatorConfig& disc_cfg,
                              const TrainOptions& options) {
  cfg.validate();
  if (low_set.empty() || high_set.empty())
    throw std::invalid_argument("train_cyclegan: both domains need at least one volume");

  CycleGanResult result;
  std::mt19937_64 rng(cfg.seed);
  int first_epoch = 1;
  if (options.resume_from) {
    auto loaded = load_cyclegan_checkpoint(*options.resume_from);
    result.models = std::move(loaded.models);
    result.history = std::move(loaded.state.history);
    restore_rng(rng, loaded.state.sampler_state);
    first_epoch = loaded.state.epoch + 1;
  } else {
    result.models = std::make_unique<CycleGan>(gen_cfg, disc_cfg, cfg);
  }
  CycleGan& m = *result.models;
  const auto rank = m.generator_config().spatial_rank;
  PatchSampler low(low_set, rank, cfg.patch_size);
  PatchSampler high(high_set, rank, cfg.patch_size);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps = (std::max(low.size(), high.size()) + batch - 1) / batch;
  const StepOptions step_options{options.verify_freeze};

  auto save = [&](const std::filesystem::path& path, int epoch) {
    save_cyclegan_checkpoint(path, m, {epoch, rng_state(rng), result.history, cfg});
  };

  for (int epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    const auto order_low = shuffled(low.size(), rng);
    const auto order_high = shuffled(high.size(), rng);
    EpochAccumulator acc;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto x_low = low.batch(take(order_low, s, batch), rng);
      const auto x_high = high.batch(take(order_high, s, batch), rng);
      StepLosses l;
      try {
        l = cyclegan_step(m, x_low, x_high, cfg, step_options);
      } catch (const NonFiniteLossError& e) {
        throw NonFiniteLossError("cyclegan epoch " + std::to_string(epoch) + " step " +
                                 std::to_string(s + 1) + ": " + e.what());
      }
      if (!l.discriminators_frozen || !l.generators_frozen) ++result.history.freeze_violations;
      acc.add("generator_total", l.generator_total);
      acc.add("adversarial_high", l.adversarial_high);
      acc.add("adversarial_low", l.adversarial_low);
      acc.add("cycle_low", l.cycle_low);
      acc.add("cycle_high", l.cycle_high);
      if (cfg.identity_weight > 0.0) acc.add("identity", l.identity);
      acc.add("discriminator_high", l.discriminator_high);
      acc.add("discriminator_low", l.discriminator_low);
      acc.next_step();
    }
    result.history.epochs.push_back(acc.finish(epoch));
    if (options.on_epoch) options.on_epoch(result.history.epochs.back());
    if (options.checkpoint_dir && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
      save(periodic_checkpoint(*options.checkpoint_dir, epoch), epoch);
  }
  if (options.checkpoint_dir)
    save(*options.checkpoint_dir / "final.pt",
         result.history.epochs.empty() ? first_epoch - 1 : result.history.epochs.back().epoch);
  return result;
}

DaeModel::DaeModel(const DAEConfig& cfg, const TrainConfig& train) {
  torch::manual_seed(train.seed);
  net = build_dae(cfg);
  optimizer = std::make_unique<torch::optim::Adam>(net->parameters(), adam_options(train));
}

DaeResult train_dae(const std::vector<Volume>& low_set, const std::vector<Volume>& high_set,
                    const TrainConfig& cfg, const DAEConfig& dae_cfg, const TrainOptions& options) {
  cfg.validate();
  if (low_set.empty()) throw std::invalid_argument("train_dae: no training pairs");
  if (low_set.size() != high_set.size())
    throw std::invalid_argument("train_dae: low and high sets differ in size");
  for (std::size_t i = 0; i < low_set.size(); ++i) {
    const std::string name = low_set[i].subject_id().empty() ? std::to_string(i)
                                                             : "'" + low_set[i].subject_id() + "'";
    require_same_grid(low_set[i], high_set[i], "train_dae pair " + name);
  }

  DaeResult result;
  std::mt19937_64 rng(cfg.seed);
  int first_epoch = 1;
  if (options.resume_from) {
    auto loaded = load_dae_checkpoint(*options.resume_from);
    result.model = std::move(loaded.model);
    result.history = std::move(loaded.state.history);
    restore_rng(rng, loaded.state.sampler_state);
    first_epoch = loaded.state.epoch + 1;
  } else {
    result.model = std::make_unique<DaeModel>(dae_cfg, cfg);
  }
  DaeModel& m = *result.model;
  const auto rank = m.net->config().spatial_rank;
  PatchSampler low(low_set, rank, cfg.patch_size);
  PatchSampler high(high_set, rank, cfg.patch_size);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps = (low.size() + batch - 1) / batch;

  auto save = [&](const std::filesystem::path& path, int epoch) {
    save_dae_checkpoint(path, m, {epoch, rng_state(rng), result.history, cfg});
  };

  for (int epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled(low.size(), rng);
    EpochAccumulator acc;
    for (std::size_t s = 0; s < steps; ++s) {
      auto [x, target] = low.paired_batch(high, take(order, s, batch), rng);
      m.optimizer->zero_grad();
      auto loss = cycle_loss(target, m.net->forward(x));
      double value = 0.0;
      try {
        value = checked(loss, "reconstruction");
      } catch (const NonFiniteLossError& e) {
        throw NonFiniteLossError("dae epoch " + std::to_string(epoch) + " step " +
                                 std::to_string(s + 1) + ": " + e.what());
      }
      loss.backward();
      m.optimizer->step();
      acc.add("reconstruction", value);
      acc.next_step();
    }
    result.history.epochs.push_back(acc.finish(epoch));
    if (options.on_epoch) options.on_epoch(result.history.epochs.back());
    if (options.checkpoint_dir && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
      save(periodic_checkpoint(*options.checkpoint_dir, epoch), epoch);
  }
  if (options.checkpoint_dir)
    save(*options.checkpoint_dir / "final.pt",
         result.history.epochs.empty() ? first_epoch - 1 : result.history.epochs.back().epoch);
  return result;
}

}  // namespace lowfield
