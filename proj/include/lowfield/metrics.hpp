#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lowfield/volume.hpp"

namespace lowfield {

/// Local-window SSIM constants. L = 1 follows from the [0, 1] intensity
/// normalization applied to every volume before simulation.
struct SSIMParams {
  /// Gaussian window edge length; 0 picks 7 for 3D volumes and 11 when a
  /// volume has a singleton axis (slice data).
  int window = 0;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  void validate() const;
  int window_for(const Dims& dims) const;
};

inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();

double mse(const Volume& a, const Volume& b);

/// 10 log10(max_value^2 / mse). Identical inputs give kPsnrInfinite.
double psnr(const Volume& a, const Volume& b, double max_value = 1.0);

/// Mean SSIM over every window position fully inside the grid. Axes of extent
/// 1 are not windowed. Throws ShapeError when a windowed axis is shorter than
/// the window.
double ssim(const Volume& a, const Volume& b, const SSIMParams& params = {});

/// Optional foreground restriction: only voxels (or window centres) where the
/// reference exceeds `threshold` contribute.
struct ForegroundMask {
  double threshold = 0.1;
};

double mse(const Volume& a, const Volume& reference, const ForegroundMask& mask);
double psnr(const Volume& a, const Volume& reference, double max_value, const ForegroundMask& mask);
double ssim(const Volume& a, const Volume& reference, const SSIMParams& params,
            const ForegroundMask& mask);

enum class ModelKind { cyclegan, dae, noisy_baseline, identity };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct MetricsRecord {
  std::string subject_id;
  ModelKind model;
  double ssim;
  double psnr_db;  ///< kPsnrInfinite when the restored volume is exact.
};

/// Maps a low-field volume to its restored estimate on the same grid.
using Restorer = std::function<Volume(const Volume&)>;

struct EvaluationOptions {
  SSIMParams ssim;
  double max_value = 1.0;
  std::optional<ForegroundMask> mask;
};

/// Scores every model on every (low, reference) pair. For each subject the
/// noisy_baseline record (low vs reference) comes first, followed by one
/// record per model in the given order.
std::vector<MetricsRecord> evaluate_cohort(
    const std::vector<std::pair<ModelKind, Restorer>>& models,
    const std::vector<Volume>& low_set, const std::vector<Volume>& reference_set,
    const EvaluationOptions& options = {});

/// CSV with header `subject_id,model,ssim,psnr_db`; the sentinel is written as `inf`.
void write_metrics_csv(const std::vector<MetricsRecord>& records,
                       const std::filesystem::path& path);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace lowfield
