#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lowfield/volume.hpp"

namespace lowfield {

struct PhantomSpec {
  Dims grid_size{32, 32, 32};
  int num_shapes = 5;
  /// (background, maximum foreground) intensity.
  std::array<double, 2> intensity_range{0.0, 1.0};
  std::uint64_t seed = 0;
  Spacing spacing{1.0, 1.0, 1.0};

  void validate() const;
};

/// One axis-aligned ellipsoid, in voxel coordinates.
struct Ellipsoid {
  std::array<double, 3> center;
  std::array<double, 3> radii;
  float intensity;
};

/// The shapes make_phantom paints, in painting order. The first shape is
/// centred on the grid and contains all the others.
std::vector<Ellipsoid> phantom_shapes(const PhantomSpec& spec);

/// Smooth-edged ellipsoids on a uniform background. Edges fall off linearly
/// over one voxel; later shapes are blended over earlier ones.
Volume make_phantom(const PhantomSpec& spec);

}  // namespace lowfield
