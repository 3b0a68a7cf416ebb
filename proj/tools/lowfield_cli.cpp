#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lowfield/checkpoint.hpp"
#include "lowfield/config.hpp"
#include "lowfield/dataset.hpp"
#include "lowfield/errors.hpp"
#include "lowfield/experiment.hpp"
#include "lowfield/nifti.hpp"
#include "lowfield/report.hpp"

namespace fs = std::filesystem;
using namespace lowfield;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << msg << '\n'; }

// Values given on the command line; anything set here wins over the config file.
struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;

  std::optional<double> snr;
  std::vector<double> spacing;
  std::optional<std::string> interpolation;
  std::optional<std::uint64_t> sim_seed;

  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> cycle_weight;
  std::optional<double> identity_weight;
  std::optional<int> checkpoint_every;
  std::optional<std::uint64_t> train_seed;
  std::vector<int> patch;

  std::optional<std::string> low_dir, high_dir, paired_high_dir, eval_low_dir, eval_reference_dir;
  std::optional<int> train_subjects, test_subjects;
  std::vector<std::size_t> grid;
  std::optional<int> shapes;
  std::optional<std::uint64_t> phantom_seed;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("-o,--out", o.out, "Output directory (default: output_dir from the config)");
  app->add_option("--seed", o.seed, "Global seed");
}

void add_simulation(CLI::App* app, Overrides& o) {
  app->add_option("--snr", o.snr, "Target foreground SNR");
  app->add_option("--spacing", o.spacing, "Target spacing in mm (x y z)")->expected(3);
  app->add_option("--interpolation", o.interpolation, "trilinear or nearest");
  app->add_option("--sim-seed", o.sim_seed, "Noise seed");
}

void add_training(CLI::App* app, Overrides& o) {
  app->add_option("--epochs", o.epochs);
  app->add_option("--batch-size", o.batch_size);
  app->add_option("--lr", o.learning_rate, "Learning rate");
  app->add_option("--cycle-weight", o.cycle_weight);
  app->add_option("--identity-weight", o.identity_weight);
  app->add_option("--checkpoint-every", o.checkpoint_every, "Periodic checkpoint interval (epochs)");
  app->add_option("--train-seed", o.train_seed);
  app->add_option("--patch", o.patch, "Patch size (x y z)")->expected(3);
}

void add_data(CLI::App* app, Overrides& o) {
  app->add_option("--low-dir", o.low_dir);
  app->add_option("--high-dir", o.high_dir);
  app->add_option("--paired-high-dir", o.paired_high_dir);
  app->add_option("--eval-low-dir", o.eval_low_dir);
  app->add_option("--eval-reference-dir", o.eval_reference_dir);
  app->add_option("--train-subjects", o.train_subjects);
  app->add_option("--test-subjects", o.test_subjects);
}

void add_phantom(CLI::App* app, Overrides& o) {
  app->add_option("--grid", o.grid, "Phantom grid (x y z)")->expected(3);
  app->add_option("--shapes", o.shapes, "Ellipsoids per phantom");
  app->add_option("--phantom-seed", o.phantom_seed);
}

template <typename T, typename U>
void apply(const std::optional<T>& from, U& to) {
  if (from) to = *from;
}

ExperimentConfig resolve_config(const Overrides& o) {
  try {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
    apply(o.seed, cfg.seed);
    if (!o.out.empty()) cfg.output_dir = o.out;

    auto& sim = cfg.simulation;
    apply(o.snr, sim.target_snr);
    if (!o.spacing.empty()) sim.target_spacing = {o.spacing[0], o.spacing[1], o.spacing[2]};
    if (o.interpolation) sim.interpolation = interpolation_from_string(*o.interpolation);
    apply(o.sim_seed, sim.seed);

    auto& t = cfg.training;
    apply(o.epochs, t.epochs);
    apply(o.batch_size, t.batch_size);
    apply(o.learning_rate, t.learning_rate);
    apply(o.cycle_weight, t.cycle_weight);
    apply(o.identity_weight, t.identity_weight);
    apply(o.checkpoint_every, t.checkpoint_every);
    apply(o.train_seed, t.seed);
    if (!o.patch.empty()) t.patch_size = {o.patch[0], o.patch[1], o.patch[2]};

    auto& d = cfg.data;
    apply(o.low_dir, d.low_dir);
    apply(o.high_dir, d.high_dir);
    apply(o.paired_high_dir, d.paired_high_dir);
    apply(o.eval_low_dir, d.eval_low_dir);
    apply(o.eval_reference_dir, d.eval_reference_dir);
    apply(o.train_subjects, d.train_subjects);
    apply(o.test_subjects, d.test_subjects);
    if (!o.grid.empty()) d.phantom.grid_size = {o.grid[0], o.grid[1], o.grid[2]};
    apply(o.shapes, d.phantom.num_shapes);
    apply(o.phantom_seed, d.phantom.seed);

    cfg.validate();
    return cfg;
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
}

fs::path prepare_output(const ExperimentConfig& cfg) {
  const fs::path out = resolve_output_path(cfg.output_dir);
  fs::create_directories(out);
  ExperimentConfig archived = cfg;
  archived.output_dir = out.string();
  save_experiment_config(archived, out / "config.json");
  return out;
}

std::vector<Volume> aligned(const std::vector<Volume>& clean, const SimulationParams& sim) {
  std::vector<Volume> out;
  for (const auto& v : clean) out.push_back(align_reference(v, sim));
  return out;
}

// Low-field volumes from `low_dir` with clean counterparts (same file stem)
// from `reference_dir`, aligned onto the low-field grid.
std::pair<std::vector<Volume>, std::vector<Volume>> load_pairs(const std::string& low_dir,
                                                               const std::string& reference_dir,
                                                               const SimulationParams& sim) {
  std::map<std::string, fs::path> refs;
  for (const auto& f : list_volume_files(reference_dir)) refs[volume_stem(f)] = f;
  std::vector<Volume> low, ref;
  for (const auto& f : list_volume_files(low_dir)) {
    const auto it = refs.find(volume_stem(f));
    if (it == refs.end())
      throw IoError(f.string() + ": no counterpart named '" + volume_stem(f) + "' in " + reference_dir);
    low.push_back(load_volume(f));
    ref.push_back(align_reference(load_volume(it->second), sim).with_subject_id(low.back().subject_id()));
  }
  if (low.empty()) throw IoError(low_dir + ": no volumes found");
  return {std::move(low), std::move(ref)};
}

std::vector<Volume> load_nonempty(const std::string& dir) {
  auto v = load_volume_dir(dir);
  if (v.empty()) throw IoError(dir + ": no volumes found");
  return v;
}

TrainOptions train_options(const fs::path& out, const std::string& resume, bool verify_freeze,
                           const char* tag) {
  TrainOptions opts;
  opts.checkpoint_dir = out;
  if (!resume.empty()) {
    if (!fs::is_regular_file(resume)) throw IoError(resume + ": no such checkpoint");
    opts.resume_from = resume;
  }
  opts.verify_freeze = verify_freeze;
  opts.on_epoch = [tag](const EpochRecord& e) {
    std::string msg = std::string(tag) + " epoch " + std::to_string(e.epoch);
    for (const auto& [name, v] : e.losses) msg += " " + name + "=" + format_double(v);
    log(msg);
  };
  return opts;
}

// ---- commands ---------------------------------------------------------------

struct PhantomArgs {
  int count = 0;
  std::uint64_t first_index = 0;
};

int cmd_phantom(const Overrides& o, const PhantomArgs& a) {
  const auto cfg = resolve_config(o);
  const auto out = prepare_output(cfg);
  const int count = a.count > 0 ? a.count : cfg.data.train_subjects;
  for (const auto& v : phantom_cohort(cfg.data.phantom, count, a.first_index))
    save_volume(v, out / (v.subject_id() + ".nii.gz"));
  log("wrote " + std::to_string(count) + " phantoms to " + out.string());
  return 0;
}

struct SimulateArgs {
  std::string in;
  int count = 0;
  std::uint64_t first_index = 0;
  std::uint64_t seed_offset = 0;
};

int cmd_simulate(const Overrides& o, const SimulateArgs& a) {
  const auto cfg = resolve_config(o);
  std::vector<std::pair<std::string, Volume>> inputs;
  if (!a.in.empty()) {
    for (const auto& f : list_volume_files(a.in)) inputs.emplace_back(f.string(), load_volume(f));
    if (inputs.empty()) throw IoError(a.in + ": no volumes found");
  } else {
    const int count = a.count > 0 ? a.count : cfg.data.train_subjects;
    for (auto& v : phantom_cohort(cfg.data.phantom, count, a.first_index))
      inputs.emplace_back("phantom:" + v.subject_id(), std::move(v));
  }

  const auto out = prepare_output(cfg);
  std::vector<fs::path> written;
  try {
    std::ofstream manifest(out / "manifest.csv");
    if (!manifest) throw IoError((out / "manifest.csv").string() + ": cannot open for writing");
    written.push_back(out / "manifest.csv");
    manifest << "input,output,sigma,spacing_x,spacing_y,spacing_z,seed\n";
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto& [name, clean] = inputs[i];
      const std::uint64_t index = a.seed_offset + i;
      const auto s = simulate_subject(clean, cfg.simulation, index);
      const std::string stem =
          name.rfind("phantom:", 0) == 0 ? clean.subject_id() : volume_stem(name);
      const fs::path target = out / (stem + ".nii.gz");
      save_volume(s.low.with_subject_id(stem), target);
      written.push_back(target);
      const auto& sp = s.low.spacing();
      manifest << name << ',' << target.filename().string() << ',' << format_double(s.sigma) << ','
               << format_double(sp[0]) << ',' << format_double(sp[1]) << ','
               << format_double(sp[2]) << ',' << subject_seed(cfg.simulation, index) << '\n';
    }
    if (!manifest) throw IoError((out / "manifest.csv").string() + ": write failed");
  } catch (...) {
    for (const auto& p : written) fs::remove(p);
    throw;
  }
  log("simulated " + std::to_string(inputs.size()) + " volumes into " + out.string());
  return 0;
}

struct TrainArgs {
  std::string resume;
  bool verify_freeze = false;
};

int cmd_train_cyclegan(const Overrides& o, const TrainArgs& a) {
  const auto cfg = resolve_config(o);
  std::vector<Volume> low, high;
  if (!cfg.data.low_dir.empty() || !cfg.data.high_dir.empty()) {
    if (cfg.data.low_dir.empty() || cfg.data.high_dir.empty())
      throw UsageError("train-cyclegan needs both data.low_dir and data.high_dir (or neither)");
    low = load_nonempty(cfg.data.low_dir);
    high = aligned(load_nonempty(cfg.data.high_dir), cfg.simulation);
  } else {
    auto c = build_phantom_cohorts(cfg);
    low = std::move(c.train_low);
    high = std::move(c.high_domain);
  }
  const auto out = prepare_output(cfg);
  auto result = train_cyclegan(low, high, cfg.training, cfg.generator, cfg.discriminator,
                               train_options(out, a.resume, a.verify_freeze, "cyclegan"));
  write_history_csv(result.history, out / "history.csv");
  if (result.history.freeze_violations > 0) {
    log("freeze violations: " + std::to_string(result.history.freeze_violations));
    return kExitRuntime;
  }
  return 0;
}

int cmd_train_dae(const Overrides& o, const TrainArgs& a) {
  const auto cfg = resolve_config(o);
  std::vector<Volume> low, high;
  if (!cfg.data.low_dir.empty()) {
    const auto& refs = cfg.data.paired_high_dir.empty() ? cfg.data.high_dir : cfg.data.paired_high_dir;
    if (refs.empty())
      throw UsageError("train-dae needs data.paired_high_dir or data.high_dir with data.low_dir");
    std::tie(low, high) = load_pairs(cfg.data.low_dir, refs, cfg.simulation);
  } else {
    auto c = build_phantom_cohorts(cfg);
    low = std::move(c.train_low);
    high = std::move(c.train_reference);
  }
  const auto out = prepare_output(cfg);
  auto result = train_dae(low, high, cfg.training, cfg.dae,
                          train_options(out, a.resume, false, "dae"));
  write_history_csv(result.history, out / "history.csv");
  return 0;
}

struct EvaluateArgs {
  std::vector<std::string> checkpoints;
  bool identity = false;
};

int cmd_evaluate(const Overrides& o, const EvaluateArgs& a) {
  if (a.checkpoints.empty() && !a.identity)
    throw UsageError("evaluate needs at least one --checkpoint or --identity");
  const auto cfg = resolve_config(o);
  std::vector<Volume> low, ref;
  if (!cfg.data.eval_low_dir.empty() || !cfg.data.eval_reference_dir.empty()) {
    if (cfg.data.eval_low_dir.empty() || cfg.data.eval_reference_dir.empty())
      throw UsageError("evaluate needs both data.eval_low_dir and data.eval_reference_dir");
    std::tie(low, ref) = load_pairs(cfg.data.eval_low_dir, cfg.data.eval_reference_dir, cfg.simulation);
  } else {
    auto c = build_phantom_cohorts(cfg);
    low = std::move(c.test_low);
    ref = std::move(c.test_reference);
  }

  std::vector<std::pair<ModelKind, Restorer>> models;
  if (a.identity) models.emplace_back(ModelKind::identity, [](const Volume& v) { return v; });
  for (const auto& path : a.checkpoints) models.push_back(restorer_from_checkpoint(path));

  const auto out = prepare_output(cfg);
  EvaluationOptions eval;
  eval.ssim = cfg.ssim;
  const auto records = evaluate_cohort(models, low, ref, eval);
  write_metrics_csv(records, out / "metrics.csv");
  for (const auto& s : histogram_report(records, out / "histogram.png"))
    log(to_string(s.model) + ": mean ssim " + format_double(s.mean_ssim) + ", mean psnr " +
        format_double(s.mean_psnr_db) + " dB over " + std::to_string(s.n_records) + " subjects");
  return 0;
}

struct CompareArgs {
  std::string csv_a, csv_b;
  std::string model_a, model_b;
  std::string out;
};

// The single non-baseline model in a record list, if there is exactly one.
std::optional<ModelKind> sole_model(const std::vector<MetricsRecord>& records) {
  std::set<ModelKind> kinds;
  for (const auto& r : records)
    if (r.model != ModelKind::noisy_baseline) kinds.insert(r.model);
  if (kinds.size() == 1) return *kinds.begin();
  return std::nullopt;
}

std::vector<MetricsRecord> of_model(const std::vector<MetricsRecord>& records, ModelKind kind) {
  std::vector<MetricsRecord> out;
  for (const auto& r : records)
    if (r.model == kind) out.push_back(r);
  return out;
}

int cmd_compare(const CompareArgs& a) {
  const auto recs_a = read_metrics_csv(a.csv_a);
  const auto recs_b = read_metrics_csv(a.csv_b.empty() ? a.csv_a : a.csv_b);
  auto pick = [](const std::string& name, const std::vector<MetricsRecord>& recs, ModelKind fallback) {
    if (!name.empty()) {
      try {
        return model_kind_from_string(name);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }
    return sole_model(recs).value_or(fallback);
  };
  const ModelKind kind_a = pick(a.model_a, recs_a, ModelKind::cyclegan);
  const ModelKind kind_b = pick(a.model_b, recs_b, ModelKind::dae);
  const auto sel_a = of_model(recs_a, kind_a);
  const auto sel_b = of_model(recs_b, kind_b);
  if (sel_a.empty()) throw UsageError(a.csv_a + ": no records for model " + to_string(kind_a));
  if (sel_b.empty()) throw UsageError("no records for model " + to_string(kind_b));

  const auto summary = compare_models(sel_a, sel_b, of_model(recs_a, ModelKind::noisy_baseline));
  const fs::path out = resolve_output_path(a.out.empty() ? fs::path("summary.json") : fs::path(a.out));
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_comparison_summary(summary, out);
  std::ifstream in(out);
  std::cout << in.rdbuf();
  return 0;
}

struct ReportArgs {
  std::vector<std::string> metrics;
  std::string low, reference, cyclegan, dae;
};

int cmd_report(const Overrides& o, const ReportArgs& a) {
  if (a.metrics.empty() && a.low.empty())
    throw UsageError("report needs --metrics and/or --low with --reference");
  if (a.low.empty() != a.reference.empty())
    throw UsageError("--low and --reference go together");
  const auto cfg = resolve_config(o);
  const auto out = prepare_output(cfg);

  if (!a.metrics.empty()) {
    std::vector<MetricsRecord> records;
    for (const auto& path : a.metrics) {
      const auto part = read_metrics_csv(path);
      records.insert(records.end(), part.begin(), part.end());
    }
    for (const auto& s : histogram_report(records, out / "histogram.png"))
      log(to_string(s.model) + ": mean ssim " + format_double(s.mean_ssim) + ", mean psnr " +
          format_double(s.mean_psnr_db) + " dB, " + std::to_string(s.n_sentinels) +
          " infinite PSNR values excluded");
  }

  if (!a.low.empty()) {
    const Volume low = load_volume(a.low);
    const Volume ref = align_reference(load_volume(a.reference), cfg.simulation);
    std::vector<std::pair<std::string, Volume>> columns{{"low_field", low}, {"high_field", ref}};
    std::vector<std::pair<std::string, Volume>> restored;
    for (const auto& [tag, path] : {std::pair{"cyclegan", a.cyclegan}, std::pair{"dae", a.dae}})
      if (!path.empty()) restored.emplace_back(tag, restorer_from_checkpoint(path).second(low));
    for (const auto& c : restored) columns.push_back(c);
    if (restored.size() == 2)
      columns.emplace_back("diff_cyclegan_dae", difference_map(restored[0].second, restored[1].second));
    for (const auto& [tag, vol] : restored)
      columns.emplace_back("diff_" + tag + "_truth", difference_map(ref, vol));
    panel_figure(columns, out / "panel.png");
  }
  return 0;
}

int cmd_desk(const Overrides& o) {
  const auto cfg = resolve_config(o);
  const fs::path out = resolve_output_path(cfg.output_dir);
  DeskExperimentOptions opts;
  opts.log = log;
  const auto r = run_desk_experiment(cfg, out, opts);
  std::ifstream in(out / "summary.json");
  std::cout << in.rdbuf();
  return r.cyclegan_history.freeze_violations > 0 ? kExitRuntime : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-field MRI simulation with Cycle-GAN and DAE restoration"};
  app.require_subcommand(1);
  Overrides o;

  PhantomArgs phantom_args;
  auto* phantom = app.add_subcommand("phantom", "Generate procedural phantom volumes");
  add_common(phantom, o);
  add_phantom(phantom, o);
  phantom->add_option("--count", phantom_args.count, "Number of phantoms (default: data.train_subjects)");
  phantom->add_option("--first-index", phantom_args.first_index, "Index of the first subject");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Degrade volumes to simulated low-field scans");
  add_common(simulate, o);
  add_simulation(simulate, o);
  add_phantom(simulate, o);
  simulate->add_option("-i,--in", sim_args.in, "Directory of clean volumes (default: phantoms)");
  simulate->add_option("--count", sim_args.count, "Phantoms to generate when --in is not given");
  simulate->add_option("--first-index", sim_args.first_index, "Index of the first generated phantom");
  simulate->add_option("--seed-offset", sim_args.seed_offset,
                       "Subject index of the first input; subject i uses noise seed sim-seed + i");

  TrainArgs gan_args;
  auto* train_gan = app.add_subcommand("train-cyclegan", "Train the unpaired Cycle-GAN");
  add_common(train_gan, o);
  add_simulation(train_gan, o);
  add_training(train_gan, o);
  add_data(train_gan, o);
  add_phantom(train_gan, o);
  train_gan->add_option("--resume", gan_args.resume, "Continue from a checkpoint");
  train_gan->add_flag("--verify-freeze", gan_args.verify_freeze,
                      "Check that frozen networks stay bit-identical in every step");

  TrainArgs dae_args;
  auto* train_d = app.add_subcommand("train-dae", "Train the paired DAE baseline");
  add_common(train_d, o);
  add_simulation(train_d, o);
  add_training(train_d, o);
  add_data(train_d, o);
  add_phantom(train_d, o);
  train_d->add_option("--resume", dae_args.resume, "Continue from a checkpoint");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Score restorers against clean references");
  add_common(evaluate, o);
  add_simulation(evaluate, o);
  add_data(evaluate, o);
  add_phantom(evaluate, o);
  evaluate->add_option("--checkpoint", eval_args.checkpoints, "Model checkpoint (repeatable)");
  evaluate->add_flag("--identity", eval_args.identity, "Also score the identity stub model");

  CompareArgs cmp_args;
  auto* compare = app.add_subcommand("compare", "Cycle-GAN vs DAE summary from metrics CSVs");
  compare->add_option("csv_a", cmp_args.csv_a, "Metrics CSV for model A")->required()->check(CLI::ExistingFile);
  compare->add_option("csv_b", cmp_args.csv_b, "Metrics CSV for model B (default: csv_a)")
      ->check(CLI::ExistingFile);
  compare->add_option("--model-a", cmp_args.model_a, "Model A (default: cyclegan)");
  compare->add_option("--model-b", cmp_args.model_b, "Model B (default: dae)");
  compare->add_option("-o,--out", cmp_args.out, "Summary file (default: summary.json)");

  ReportArgs rep_args;
  auto* report = app.add_subcommand("report", "Histograms and comparison panels");
  add_common(report, o);
  add_simulation(report, o);
  report->add_option("--metrics", rep_args.metrics, "Metrics CSV (repeatable)")->check(CLI::ExistingFile);
  report->add_option("--low", rep_args.low, "Low-field volume for the panel")->check(CLI::ExistingFile);
  report->add_option("--reference", rep_args.reference, "Clean volume for the panel")
      ->check(CLI::ExistingFile);
  report->add_option("--cyclegan", rep_args.cyclegan, "Cycle-GAN checkpoint")->check(CLI::ExistingFile);
  report->add_option("--dae", rep_args.dae, "DAE checkpoint")->check(CLI::ExistingFile);

  auto* desk = app.add_subcommand("desk", "Phantom experiment end to end (train both, evaluate, report)");
  add_common(desk, o);
  add_simulation(desk, o);
  add_training(desk, o);
  add_phantom(desk, o);
  desk->add_option("--train-subjects", o.train_subjects);
  desk->add_option("--test-subjects", o.test_subjects);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (phantom->parsed()) return cmd_phantom(o, phantom_args);
    if (simulate->parsed()) return cmd_simulate(o, sim_args);
    if (train_gan->parsed()) return cmd_train_cyclegan(o, gan_args);
    if (train_d->parsed()) return cmd_train_dae(o, dae_args);
    if (evaluate->parsed()) return cmd_evaluate(o, eval_args);
    if (compare->parsed()) return cmd_compare(cmp_args);
    if (report->parsed()) return cmd_report(o, rep_args);
    if (desk->parsed()) return cmd_desk(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
