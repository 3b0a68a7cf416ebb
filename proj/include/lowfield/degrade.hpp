#pragma once

#include <cstdint>
#include <string>

#include "lowfield/volume.hpp"

namespace lowfield {

enum class Interpolation { trilinear, nearest };

std::string to_string(Interpolation method);
Interpolation interpolation_from_string(const std::string& name);

/// Knobs of the low-field acquisition model.
///
/// target_snr is mean foreground intensity over the Gaussian noise sigma. It
/// is a free parameter; the default of 5 makes the degradation obvious on
/// desk-scale phantoms.
struct SimulationParams {
  Spacing target_spacing{1.5, 1.5, 1.5};
  double target_snr = 5.0;
  Interpolation interpolation = Interpolation::trilinear;
  std::uint64_t seed = 0;
  /// Voxels strictly above this (normalized) intensity count as foreground.
  double foreground_threshold = 0.1;

  void validate() const;
};

/// Output grid for resampling `input` to `target_spacing`:
/// floor(dims * spacing / target_spacing) per axis.
Dims resampled_dims(const Volume& input, const Spacing& target_spacing);

/// Resamples onto a grid with the given spacing. Voxel 0 of both grids sits at
/// the same physical position; samples past the last input voxel clamp to the
/// edge. Throws std::invalid_argument when an output dimension would be 0.
Volume resample(const Volume& v, const Spacing& target_spacing,
                Interpolation method = Interpolation::trilinear);

/// sigma = mean(intensities > foreground_threshold) / target_snr.
/// Throws CalibrationError when no voxel exceeds the threshold.
double calibrate_sigma(const Volume& v, double target_snr, double foreground_threshold = 0.1);

/// Voxelwise magnitude noise M = sqrt((A + n1)^2 + n2^2), n1, n2 ~ N(0, sigma^2).
///
/// Normals are drawn from independent blocks of kNoiseBlock voxels, each with
/// its own engine seeded from (seed, block index), so blocks can be filled in
/// any order or in parallel and still reproduce the same volume.
Volume rician_noise(const Volume& v, double sigma, std::uint64_t seed);

inline constexpr std::size_t kNoiseBlock = 4096;

struct LowFieldScan {
  Volume volume;
  double sigma;
};

/// Resample, calibrate sigma on the resampled grid, then add Rician noise.
LowFieldScan acquire_lowfield(const Volume& v, const SimulationParams& params);

Volume simulate_lowfield(const Volume& v, const SimulationParams& params);

/// Foreground SNR of a noisy volume measured against its clean counterpart:
/// mean(noisy over fg) / rms(noisy - clean over fg), fg = clean > threshold.
double measure_snr(const Volume& noisy, const Volume& clean, double foreground_threshold = 0.1);

}  // namespace lowfield
