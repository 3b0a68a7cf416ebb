#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lowfield {

/// Grid extent along x, y, z. x is the fastest-varying axis in memory.
using Dims = std::array<std::size_t, 3>;

/// Physical voxel size in millimetres along x, y, z.
using Spacing = std::array<double, 3>;

/// Immutable 3D scalar grid with physical spacing.
///
/// Invariants (checked on construction): every dimension >= 1, every spacing
/// component > 0 and every intensity finite. Storage order is x-fastest, which
/// matches the NIfTI on-disk layout.
class Volume {
 public:
  Volume(Dims dims, Spacing spacing, std::vector<float> data,
         std::string subject_id = {});

  /// Constant-filled volume.
  Volume(Dims dims, Spacing spacing, float fill, std::string subject_id = {});

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  const std::string& subject_id() const { return subject_id_; }
  std::span<const float> data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims_[0] * (y + dims_[1] * z);
  }
  float at(std::size_t x, std::size_t y, std::size_t z) const {
    return data_[index(x, y, z)];
  }
  float operator[](std::size_t i) const { return data_[i]; }

  bool same_grid(const Volume& other) const { return dims_ == other.dims_; }

  Volume with_subject_id(std::string id) const;
  Volume with_data(std::vector<float> data) const;

  float min() const;
  float max() const;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<float> data_;
  std::string subject_id_;
};

std::size_t voxel_count(const Dims& dims);

/// Throws ShapeError naming `context` when the two grids differ.
void require_same_grid(const Volume& a, const Volume& b, const std::string& context);

/// Min-max rescale to [0, 1]. A constant volume maps to all zeros.
Volume normalize_intensity(const Volume& v);

}  // namespace lowfield
