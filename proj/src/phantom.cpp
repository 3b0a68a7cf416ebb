#include "lowfield/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lowfield {

void PhantomSpec::validate() const {
  for (auto n : grid_size)
    if (n < 8) throw std::invalid_argument("phantom grid_size components must be >= 8");
  if (num_shapes < 1) throw std::invalid_argument("phantom num_shapes must be >= 1");
  if (!(intensity_range[0] < intensity_range[1]))
    throw std::invalid_argument("phantom intensity_range must satisfy background < max");
  for (double s : spacing)
    if (!(s > 0.0)) throw std::invalid_argument("phantom spacing must be positive");
}

std::vector<Ellipsoid> phantom_shapes(const PhantomSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double background = spec.intensity_range[0];
  const double peak = spec.intensity_range[1];
  const int n = spec.num_shapes;

  // Evenly spaced distinct levels in (background, peak]; the top level is the
  // maximum foreground.
  std::vector<int> levels(n);
  std::iota(levels.begin(), levels.end(), 1);
  std::shuffle(levels.begin(), levels.end(), rng);
  auto level_intensity = [&](int level) {
    const double lowest = 0.3;
    const double frac = n == 1 ? 1.0 : lowest + (1.0 - lowest) * (level - 1) / (n - 1);
    return static_cast<float>(background + frac * (peak - background));
  };

  std::vector<Ellipsoid> shapes;
  shapes.reserve(n);

  Ellipsoid outer{};
  for (int a = 0; a < 3; ++a) {
    const double extent = static_cast<double>(spec.grid_size[a]);
    outer.center[a] = (extent - 1.0) / 2.0;
    outer.radii[a] = extent * (0.3 + 0.1 * unit(rng));
  }
  outer.intensity = level_intensity(levels[0]);
  shapes.push_back(outer);

  for (int s = 1; s < n; ++s) {
    Ellipsoid e{};
    for (int a = 0; a < 3; ++a) {
      e.radii[a] = outer.radii[a] * (0.15 + 0.3 * unit(rng));
      const double room = std::max(0.0, outer.radii[a] - e.radii[a] - 1.0);
      e.center[a] = outer.center[a] + (2.0 * unit(rng) - 1.0) * room;
    }
    e.intensity = level_intensity(levels[s]);
    shapes.push_back(e);
  }
  return shapes;
}

namespace {

// Approximate signed distance (voxels) from p to the ellipsoid surface.
double signed_distance(const Ellipsoid& e, double x, double y, double z) {
  const double dx = (x - e.center[0]) / e.radii[0];
  const double dy = (y - e.center[1]) / e.radii[1];
  const double dz = (z - e.center[2]) / e.radii[2];
  const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
  const double min_radius = std::min({e.radii[0], e.radii[1], e.radii[2]});
  return (r - 1.0) * min_radius;
}

}  // namespace

Volume make_phantom(const PhantomSpec& spec) {
  const auto shapes = phantom_shapes(spec);
  const Dims d = spec.grid_size;
  std::vector<float> data(voxel_count(d), static_cast<float>(spec.intensity_range[0]));

  for (const auto& e : shapes) {
    for (std::size_t z = 0; z < d[2]; ++z)
      for (std::size_t y = 0; y < d[1]; ++y)
        for (std::size_t x = 0; x < d[0]; ++x) {
          const double dist = signed_distance(e, x, y, z);
          const double w = std::clamp(0.5 - dist, 0.0, 1.0);
          if (w <= 0.0) continue;
          float& v = data[x + d[0] * (y + d[1] * z)];
          v = w >= 1.0 ? e.intensity
                       : static_cast<float>(v + w * (static_cast<double>(e.intensity) - v));
        }
  }
  return Volume(d, spec.spacing, std::move(data));
}

}  // namespace lowfield
