#include "lowfield/experiment.hpp"

#include <chrono>
#include <sstream>

#include "lowfield/checkpoint.hpp"
#include "lowfield/dataset.hpp"

namespace lowfield {

namespace {

std::vector<MetricsRecord> select(const std::vector<MetricsRecord>& records, ModelKind kind) {
  std::vector<MetricsRecord> out;
  for (const auto& r : records)
    if (r.model == kind) out.push_back(r);
  return out;
}

}  // namespace

PhantomCohorts build_phantom_cohorts(const ExperimentConfig& cfg) {
  const int n = cfg.data.train_subjects;
  const int t = cfg.data.test_subjects;
  const auto& sim = cfg.simulation;

  PhantomCohorts c;
  double snr_sum = 0.0;
  auto simulate_into = [&](const std::vector<Volume>& clean, std::uint64_t first,
                           std::vector<Volume>& low, std::vector<Volume>& ref) {
    for (std::size_t i = 0; i < clean.size(); ++i) {
      auto s = simulate_subject(clean[i], sim, first + i);
      snr_sum += measure_snr(s.low, s.reference, sim.foreground_threshold);
      low.push_back(std::move(s.low));
      ref.push_back(std::move(s.reference));
    }
  };
  simulate_into(phantom_cohort(cfg.data.phantom, n, 0), 0, c.train_low, c.train_reference);
  for (const auto& v : phantom_cohort(cfg.data.phantom, n, n))
    c.high_domain.push_back(align_reference(v, sim));
  simulate_into(phantom_cohort(cfg.data.phantom, t, 2 * n), 2 * n, c.test_low, c.test_reference);
  c.mean_measured_snr = snr_sum / (n + t);
  return c;
}

DeskExperimentResult run_desk_experiment(const ExperimentConfig& cfg,
                                         const std::filesystem::path& out_dir,
                                         const DeskExperimentOptions& options) {
  cfg.validate();
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  std::filesystem::create_directories(out_dir / "cyclegan");
  std::filesystem::create_directories(out_dir / "dae");
  save_experiment_config(cfg, out_dir / "config.json");

  auto data = build_phantom_cohorts(cfg);
  const auto& train_low = data.train_low;
  const auto& test_low = data.test_low;
  const auto& test_ref = data.test_reference;

  DeskExperimentResult result;
  result.mean_measured_snr = data.mean_measured_snr;
  {
    std::ostringstream msg;
    msg << "simulated " << train_low.size() << " training and " << test_low.size()
        << " test subjects, mean foreground SNR " << result.mean_measured_snr;
    log(msg.str());
  }

  auto epoch_logger = [&](const char* tag) {
    return [&, tag](const EpochRecord& e) {
      std::ostringstream msg;
      msg << tag << " epoch " << e.epoch;
      for (const auto& [name, v] : e.losses) msg << ' ' << name << '=' << v;
      log(msg.str());
    };
  };

  const auto t0 = std::chrono::steady_clock::now();
  TrainOptions gan_opts;
  gan_opts.checkpoint_dir = out_dir / "cyclegan";
  gan_opts.verify_freeze = options.verify_freeze;
  gan_opts.on_epoch = epoch_logger("cyclegan");
  auto gan = train_cyclegan(train_low, data.high_domain, cfg.training, cfg.generator,
                            cfg.discriminator, gan_opts);
  write_history_csv(gan.history, out_dir / "cyclegan" / "history.csv");

  TrainOptions dae_opts;
  dae_opts.checkpoint_dir = out_dir / "dae";
  dae_opts.on_epoch = epoch_logger("dae");
  auto dae = train_dae(train_low, data.train_reference, cfg.training, cfg.dae, dae_opts);
  write_history_csv(dae.history, out_dir / "dae" / "history.csv");
  {
    std::ostringstream msg;
    msg << "training finished in "
        << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s";
    log(msg.str());
  }

  const Restorer gan_restore = make_restorer(gan.models->to_high);
  const Restorer dae_restore = make_restorer(dae.model->net);
  EvaluationOptions eval;
  eval.ssim = cfg.ssim;
  result.records = evaluate_cohort({{ModelKind::cyclegan, gan_restore}, {ModelKind::dae, dae_restore}},
                                   test_low, test_ref, eval);
  write_metrics_csv(result.records, out_dir / "metrics.csv");

  result.summary = compare_models(select(result.records, ModelKind::cyclegan),
                                  select(result.records, ModelKind::dae),
                                  select(result.records, ModelKind::noisy_baseline));
  write_comparison_summary(result.summary, out_dir / "summary.json");
  histogram_report(result.records, out_dir / "histogram.png");

  const Volume& low = test_low.front();
  const Volume& ref = test_ref.front();
  const Volume gan_out = gan_restore(low);
  const Volume dae_out = dae_restore(low);
  panel_figure({{"low_field", low},
                {"high_field", ref},
                {"cyclegan", gan_out},
                {"dae", dae_out},
                {"diff_cyclegan_dae", difference_map(gan_out, dae_out)},
                {"diff_cyclegan_truth", difference_map(ref, gan_out)},
                {"diff_dae_truth", difference_map(ref, dae_out)}},
               out_dir / "panel.png");

  result.cyclegan_history = std::move(gan.history);
  result.dae_history = std::move(dae.history);
  return result;
}

}  // namespace lowfield
