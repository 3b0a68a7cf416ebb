#include "lowfield/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lowfield/errors.hpp"

namespace lowfield {

std::size_t voxel_count(const Dims& dims) { return dims[0] * dims[1] * dims[2]; }

Volume::Volume(Dims dims, Spacing spacing, std::vector<float> data,
               std::string subject_id)
    : dims_(dims),
      spacing_(spacing),
      data_(std::move(data)),
      subject_id_(std::move(subject_id)) {
  for (int a = 0; a < 3; ++a) {
    if (dims_[a] < 1) throw std::invalid_argument("volume dimension must be >= 1");
    if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a]))
      throw std::invalid_argument("volume spacing must be positive and finite");
  }
  if (data_.size() != voxel_count(dims_)) {
    std::ostringstream msg;
    msg << "volume data has " << data_.size() << " values, grid needs "
        << voxel_count(dims_);
    throw std::invalid_argument(msg.str());
  }
  if (!std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); }))
    throw std::invalid_argument("volume intensities must be finite");
}

Volume::Volume(Dims dims, Spacing spacing, float fill, std::string subject_id)
    : Volume(dims, spacing, std::vector<float>(voxel_count(dims), fill),
             std::move(subject_id)) {}

Volume Volume::with_subject_id(std::string id) const {
  Volume out = *this;
  out.subject_id_ = std::move(id);
  return out;
}

Volume Volume::with_data(std::vector<float> data) const {
  return Volume(dims_, spacing_, std::move(data), subject_id_);
}

float Volume::min() const { return *std::min_element(data_.begin(), data_.end()); }
float Volume::max() const { return *std::max_element(data_.begin(), data_.end()); }

void require_same_grid(const Volume& a, const Volume& b, const std::string& context) {
  if (a.same_grid(b)) return;
  std::ostringstream msg;
  msg << context << ": grid mismatch (" << a.dims()[0] << "x" << a.dims()[1] << "x"
      << a.dims()[2] << " vs " << b.dims()[0] << "x" << b.dims()[1] << "x"
      << b.dims()[2] << ")";
  throw ShapeError(msg.str());
}

Volume normalize_intensity(const Volume& v) {
  const double lo = v.min();
  const double hi = v.max();
  std::vector<float> out(v.size(), 0.0f);
  if (hi > lo) {
    const double range = hi - lo;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double t = (static_cast<double>(v[i]) - lo) / range;
      out[i] = static_cast<float>(std::clamp(t, 0.0, 1.0));
    }
  }
  return v.with_data(std::move(out));
}

}  // namespace lowfield
