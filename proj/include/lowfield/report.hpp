#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lowfield/metrics.hpp"
#include "lowfield/volume.hpp"

namespace lowfield {

/// Voxelwise |truth - synthetic| (or truth - synthetic when `signed_difference`).
Volume difference_map(const Volume& truth, const Volume& synthetic, bool signed_difference = false);

enum class SlicePlane { axial, coronal, sagittal };

std::string to_string(SlicePlane plane);
SlicePlane slice_plane_from_string(const std::string& name);

struct PanelOptions {
  std::vector<SlicePlane> planes{SlicePlane::axial, SlicePlane::coronal, SlicePlane::sagittal};
  int scale = 4;  ///< integer upscaling of every voxel
  int gap = 2;    ///< pixels between tiles
};

struct PanelLayout {
  std::vector<std::string> labels;
  std::vector<std::pair<SlicePlane, std::size_t>> rows;  ///< plane and slice index
  double window_low = 0.0;
  double window_high = 1.0;
};

/// Writes a PNG grid: one row per plane through the volume centre, one column
/// per labelled volume, all columns sharing one intensity window. A JSON
/// sidecar with the same basename records labels, slice indices and window.
PanelLayout panel_figure(const std::vector<std::pair<std::string, Volume>>& columns,
                         const std::filesystem::path& out_path, const PanelOptions& options = {});

std::filesystem::path sidecar_path(const std::filesystem::path& figure_path);

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 ascending edges
  std::vector<std::size_t> counts;
};

/// Freedman-Diaconis bin width with a floor of 5 bins (capped at 100). A
/// sample with zero range collapses to a single bin.
Histogram make_histogram(const std::vector<double>& values);

struct ModelStats {
  ModelKind model;
  std::size_t n_records = 0;
  double mean_ssim = 0.0;
  double median_ssim = 0.0;
  double mean_psnr_db = 0.0;    ///< over finite values; NaN if there are none
  double median_psnr_db = 0.0;
  std::size_t n_sentinels = 0;  ///< infinite PSNR values left out of the histogram
  Histogram ssim_hist;
  Histogram psnr_hist;
};

/// Histogram grid (one row per model, SSIM and PSNR columns) written as PNG
/// plus JSON sidecar. Models appear in order of first occurrence.
std::vector<ModelStats> histogram_report(const std::vector<MetricsRecord>& records,
                                         const std::filesystem::path& out_path);

/// Cycle-GAN (A) versus DAE (B). Percent differences are 100 (A - B) / B.
struct ComparisonSummary {
  double mean_ssim_cyclegan = 0.0;
  double mean_ssim_dae = 0.0;
  double mean_psnr_db_cyclegan = 0.0;
  double mean_psnr_db_dae = 0.0;
  double psnr_pct_diff = 0.0;
  double ssim_pct_diff = 0.0;
  int n_subjects = 0;
  int n_excluded_sentinels = 0;
  std::optional<double> mean_ssim_noisy_baseline;
  std::optional<double> mean_psnr_db_noisy_baseline;
};

double percent_difference(double a, double b);

/// Infinite PSNR values are excluded from the PSNR means and counted.
/// Throws std::invalid_argument on empty input or when every PSNR in a list is infinite.
ComparisonSummary compare_models(const std::vector<MetricsRecord>& records_a,
                                 const std::vector<MetricsRecord>& records_b,
                                 const std::vector<MetricsRecord>& baseline = {});

void write_comparison_summary(const ComparisonSummary& summary, const std::filesystem::path& path);
ComparisonSummary read_comparison_summary(const std::filesystem::path& path);

}  // namespace lowfield
