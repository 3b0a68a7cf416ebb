#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lowfield/degrade.hpp"
#include "lowfield/phantom.hpp"
#include "lowfield/volume.hpp"

namespace lowfield {

/// Every .nii / .nii.gz file in `dir`, sorted by file name.
std::vector<std::filesystem::path> list_volume_files(const std::filesystem::path& dir);
std::vector<Volume> load_volume_dir(const std::filesystem::path& dir);

/// Phantoms with seeds base.seed + first_index + i and subject ids
/// "phantom_NNNN" (NNNN = first_index + i).
std::vector<Volume> phantom_cohort(const PhantomSpec& base, int count, std::uint64_t first_index = 0);

/// Clean volume on the low-field grid: normalized, then resampled to the
/// simulation's target spacing. This is the voxelwise target for the DAE and
/// for evaluation.
Volume align_reference(const Volume& clean, const SimulationParams& sim);

/// Noise seed of the i-th subject in a cohort.
inline std::uint64_t subject_seed(const SimulationParams& sim, std::uint64_t index) {
  return sim.seed + index;
}

struct SimulatedSubject {
  Volume reference;  ///< align_reference(clean)
  Volume low;        ///< simulated low-field scan
  double sigma;
};

/// Normalizes `clean` and runs the low-field simulation with subject_seed(sim, index).
SimulatedSubject simulate_subject(const Volume& clean, const SimulationParams& sim, std::uint64_t index);

}  // namespace lowfield
