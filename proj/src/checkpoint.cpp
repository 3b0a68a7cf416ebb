#include "lowfield/checkpoint.hpp"

#include <stdexcept>

#include "lowfield/config.hpp"
#include "lowfield/errors.hpp"

namespace lowfield {

namespace {

using torch::serialize::InputArchive;
using torch::serialize::OutputArchive;

json history_to_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const auto& e : h.epochs) epochs.push_back({{"epoch", e.epoch}, {"losses", e.losses}});
  return {{"epochs", epochs}, {"freeze_violations", h.freeze_violations}};
}

TrainHistory history_from_json(const json& j) {
  TrainHistory h;
  for (const auto& e : j.at("epochs"))
    h.epochs.push_back({e.at("epoch").get<int>(),
                        e.at("losses").get<std::vector<std::pair<std::string, double>>>()});
  h.freeze_violations = j.at("freeze_violations").get<int>();
  return h;
}

json state_to_json(const TrainingState& s) {
  return {{"epoch", s.epoch},
          {"sampler_state", s.sampler_state},
          {"history", history_to_json(s.history)},
          {"training", s.train}};
}

TrainingState state_from_json(const json& j) {
  TrainingState s;
  s.epoch = j.at("epoch").get<int>();
  s.sampler_state = j.at("sampler_state").get<std::string>();
  s.history = history_from_json(j.at("history"));
  s.train = j.at("training").get<TrainConfig>();
  return s;
}

void put(OutputArchive& root, const std::string& key, const torch::nn::Module& m) {
  OutputArchive sub;
  m.save(sub);
  root.write(key, sub);
}

void put(OutputArchive& root, const std::string& key, torch::optim::Optimizer& opt) {
  OutputArchive sub;
  opt.save(sub);
  root.write(key, sub);
}

void get(InputArchive& root, const std::string& key, torch::nn::Module& m) {
  InputArchive sub;
  root.read(key, sub);
  m.load(sub);
}

void get(InputArchive& root, const std::string& key, torch::optim::Optimizer& opt) {
  InputArchive sub;
  root.read(key, sub);
  opt.load(sub);
}

void write_archive(OutputArchive& archive, const json& meta, const std::filesystem::path& path) {
  archive.write("meta", c10::IValue(meta.dump()));
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    throw IoError(path.string() + ": cannot write checkpoint");
  }
}

json read_meta(InputArchive& archive, const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError(path.string() + ": no such checkpoint");
  try {
    archive.load_from(path.string());
    c10::IValue meta;
    archive.read("meta", meta);
    return json::parse(meta.toStringRef());
  } catch (const c10::Error& e) {
    throw FormatError(path.string() + ": not a checkpoint archive");
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": corrupt checkpoint metadata");
  }
}

void expect_kind(const json& meta, const std::string& kind, const std::filesystem::path& path) {
  const auto found = meta.value("kind", std::string{});
  if (found != kind)
    throw FormatError(path.string() + ": expected a " + kind + " checkpoint, found '" + found + "'");
}

}  // namespace

void save_cyclegan_checkpoint(const std::filesystem::path& path, CycleGan& m,
                              const TrainingState& state) {
  json meta = {{"kind", "cyclegan"},
               {"generator", m.generator_config()},
               {"discriminator", m.discriminator_config()},
               {"state", state_to_json(state)}};
  OutputArchive archive;
  put(archive, "to_high", *m.to_high);
  put(archive, "to_low", *m.to_low);
  put(archive, "judge_high", *m.judge_high);
  put(archive, "judge_low", *m.judge_low);
  put(archive, "generator_optimizer", *m.generator_optimizer);
  put(archive, "discriminator_optimizer", *m.discriminator_optimizer);
  write_archive(archive, meta, path);
}

LoadedCycleGan load_cyclegan_checkpoint(const std::filesystem::path& path) {
  InputArchive archive;
  const json meta = read_meta(archive, path);
  expect_kind(meta, "cyclegan", path);
  try {
    LoadedCycleGan out;
    out.state = state_from_json(meta.at("state"));
    out.models = std::make_unique<CycleGan>(meta.at("generator").get<GeneratorConfig>(),
                                            meta.at("discriminator").get<DiscriminatorConfig>(),
                                            out.state.train);
    CycleGan& m = *out.models;
    get(archive, "to_high", *m.to_high);
    get(archive, "to_low", *m.to_low);
    get(archive, "judge_high", *m.judge_high);
    get(archive, "judge_low", *m.judge_low);
    get(archive, "generator_optimizer", *m.generator_optimizer);
    get(archive, "discriminator_optimizer", *m.discriminator_optimizer);
    return out;
  } catch (const c10::Error& e) {
    throw FormatError(path.string() + ": checkpoint does not match its embedded config");
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": corrupt checkpoint metadata (" + e.what() + ")");
  }
}

void save_dae_checkpoint(const std::filesystem::path& path, DaeModel& model,
                         const TrainingState& state) {
  json meta = {{"kind", "dae"}, {"dae", model.net->config()}, {"state", state_to_json(state)}};
  OutputArchive archive;
  put(archive, "dae", *model.net);
  put(archive, "optimizer", *model.optimizer);
  write_archive(archive, meta, path);
}

LoadedDae load_dae_checkpoint(const std::filesystem::path& path) {
  InputArchive archive;
  const json meta = read_meta(archive, path);
  expect_kind(meta, "dae", path);
  try {
    LoadedDae out;
    out.state = state_from_json(meta.at("state"));
    out.model = std::make_unique<DaeModel>(meta.at("dae").get<DAEConfig>(), out.state.train);
    get(archive, "dae", *out.model->net);
    get(archive, "optimizer", *out.model->optimizer);
    return out;
  } catch (const c10::Error& e) {
    throw FormatError(path.string() + ": checkpoint does not match its embedded config");
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": corrupt checkpoint metadata (" + e.what() + ")");
  }
}

std::string checkpoint_kind(const std::filesystem::path& path) {
  InputArchive archive;
  const json meta = read_meta(archive, path);
  const auto kind = meta.value("kind", std::string{});
  if (kind != "cyclegan" && kind != "dae")
    throw FormatError(path.string() + ": unknown checkpoint kind '" + kind + "'");
  return kind;
}

Restorer make_restorer(Generator generator) {
  return [generator](const Volume& v) mutable {
    const auto& cfg = generator->config();
    return apply_network([&](torch::Tensor x) { return generator->forward(x); }, v,
                         cfg.spatial_rank, cfg.divisor());
  };
}

Restorer make_restorer(DAE dae) {
  return [dae](const Volume& v) mutable {
    const auto& cfg = dae->config();
    return apply_network([&](torch::Tensor x) { return dae->forward(x); }, v, cfg.spatial_rank,
                         cfg.divisor());
  };
}

std::pair<ModelKind, Restorer> restorer_from_checkpoint(const std::filesystem::path& path) {
  if (checkpoint_kind(path) == "cyclegan") {
    auto loaded = load_cyclegan_checkpoint(path);
    return {ModelKind::cyclegan, make_restorer(loaded.models->to_high)};
  }
  auto loaded = load_dae_checkpoint(path);
  return {ModelKind::dae, make_restorer(loaded.model->net)};
}

}  // namespace lowfield
