#include "lowfield/dataset.hpp"

#include <algorithm>
#include <cstdio>

#include "lowfield/errors.hpp"
#include "lowfield/nifti.hpp"

namespace lowfield {

std::vector<std::filesystem::path> list_volume_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && is_volume_file(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Volume> load_volume_dir(const std::filesystem::path& dir) {
  std::vector<Volume> out;
  for (const auto& f : list_volume_files(dir)) out.push_back(load_volume(f));
  return out;
}

std::vector<Volume> phantom_cohort(const PhantomSpec& base, int count, std::uint64_t first_index) {
  std::vector<Volume> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    PhantomSpec spec = base;
    const std::uint64_t index = first_index + static_cast<std::uint64_t>(i);
    spec.seed = base.seed + index;
    char id[32];
    std::snprintf(id, sizeof id, "phantom_%04llu", static_cast<unsigned long long>(index));
    out.push_back(make_phantom(spec).with_subject_id(id));
  }
  return out;
}

Volume align_reference(const Volume& clean, const SimulationParams& sim) {
  return resample(normalize_intensity(clean), sim.target_spacing, sim.interpolation);
}

SimulatedSubject simulate_subject(const Volume& clean, const SimulationParams& sim,
                                  std::uint64_t index) {
  SimulationParams params = sim;
  params.seed = subject_seed(sim, index);
  const Volume normalized = normalize_intensity(clean);
  auto scan = acquire_lowfield(normalized, params);
  return {resample(normalized, sim.target_spacing, sim.interpolation), std::move(scan.volume),
          scan.sigma};
}

}  // namespace lowfield
