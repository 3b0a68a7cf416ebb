#include "lowfield/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lowfield/errors.hpp"

namespace lowfield {

std::string to_string(Interpolation method) {
  return method == Interpolation::trilinear ? "trilinear" : "nearest";
}

Interpolation interpolation_from_string(const std::string& name) {
  if (name == "trilinear") return Interpolation::trilinear;
  if (name == "nearest") return Interpolation::nearest;
  throw std::invalid_argument("unknown interpolation '" + name + "'");
}

void SimulationParams::validate() const {
  for (double s : target_spacing)
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("target_spacing components must be > 0");
  if (!(target_snr > 0.0)) throw std::invalid_argument("target_snr must be > 0");
}

Dims resampled_dims(const Volume& input, const Spacing& target_spacing) {
  Dims out{};
  for (int a = 0; a < 3; ++a) {
    if (!(target_spacing[a] > 0.0))
      throw std::invalid_argument("target spacing must be > 0");
    const double extent = static_cast<double>(input.dims()[a]) * input.spacing()[a];
    // The small slack keeps exact ratios such as 60 * 1 / 1.5 from flooring down.
    const double n = std::floor(extent / target_spacing[a] + 1e-9);
    if (n < 1.0) {
      std::ostringstream msg;
      msg << "target spacing " << target_spacing[a] << " mm on axis " << a
          << " exceeds the volume extent of " << extent << " mm";
      throw std::invalid_argument(msg.str());
    }
    out[a] = static_cast<std::size_t>(n);
  }
  return out;
}

Volume resample(const Volume& v, const Spacing& target_spacing, Interpolation method) {
  const Dims out_dims = resampled_dims(v, target_spacing);
  const Dims& in = v.dims();

  // Per-axis source coordinate in input voxel units, clamped to the grid.
  std::array<std::vector<double>, 3> coord;
  for (int a = 0; a < 3; ++a) {
    coord[a].resize(out_dims[a]);
    const double ratio = target_spacing[a] / v.spacing()[a];
    const double last = static_cast<double>(in[a] - 1);
    for (std::size_t i = 0; i < out_dims[a]; ++i)
      coord[a][i] = std::clamp(static_cast<double>(i) * ratio, 0.0, last);
  }

  std::vector<float> out(voxel_count(out_dims));
  std::size_t o = 0;
  for (std::size_t z = 0; z < out_dims[2]; ++z)
    for (std::size_t y = 0; y < out_dims[1]; ++y)
      for (std::size_t x = 0; x < out_dims[0]; ++x, ++o) {
        const double cx = coord[0][x], cy = coord[1][y], cz = coord[2][z];
        if (method == Interpolation::nearest) {
          out[o] = v.at(static_cast<std::size_t>(std::lround(cx)),
                        static_cast<std::size_t>(std::lround(cy)),
                        static_cast<std::size_t>(std::lround(cz)));
          continue;
        }
        const auto x0 = static_cast<std::size_t>(cx);
        const auto y0 = static_cast<std::size_t>(cy);
        const auto z0 = static_cast<std::size_t>(cz);
        const std::size_t x1 = std::min(x0 + 1, in[0] - 1);
        const std::size_t y1 = std::min(y0 + 1, in[1] - 1);
        const std::size_t z1 = std::min(z0 + 1, in[2] - 1);
        const double fx = cx - x0, fy = cy - y0, fz = cz - z0;
        auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
        const double c00 = lerp(v.at(x0, y0, z0), v.at(x1, y0, z0), fx);
        const double c10 = lerp(v.at(x0, y1, z0), v.at(x1, y1, z0), fx);
        const double c01 = lerp(v.at(x0, y0, z1), v.at(x1, y0, z1), fx);
        const double c11 = lerp(v.at(x0, y1, z1), v.at(x1, y1, z1), fx);
        out[o] = static_cast<float>(lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz));
      }
  return Volume(out_dims, target_spacing, std::move(out), v.subject_id());
}

double calibrate_sigma(const Volume& v, double target_snr, double foreground_threshold) {
  if (!(target_snr > 0.0)) throw std::invalid_argument("target_snr must be > 0");
  double sum = 0.0;
  std::size_t count = 0;
  for (float x : v.data())
    if (x > foreground_threshold) {
      sum += x;
      ++count;
    }
  if (count == 0) {
    std::ostringstream msg;
    msg << "no foreground voxels above threshold " << foreground_threshold;
    if (!v.subject_id().empty()) msg << " in '" << v.subject_id() << "'";
    throw CalibrationError(msg.str());
  }
  return (sum / static_cast<double>(count)) / target_snr;
}

Volume rician_noise(const Volume& v, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("rician noise sigma must be >= 0");
  const auto src = v.data();
  std::vector<float> out(src.size());
  if (sigma == 0.0) {
    std::transform(src.begin(), src.end(), out.begin(), [](float a) { return std::abs(a); });
    return v.with_data(std::move(out));
  }

  const std::size_t blocks = (src.size() + kNoiseBlock - 1) / kNoiseBlock;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::mt19937_64 engine(seq);
    std::normal_distribution<double> normal(0.0, sigma);
    const std::size_t end = std::min(src.size(), (b + 1) * kNoiseBlock);
    for (std::size_t i = b * kNoiseBlock; i < end; ++i) {
      const double real = src[i] + normal(engine);
      const double imag = normal(engine);
      out[i] = static_cast<float>(std::hypot(real, imag));
    }
  }
  return v.with_data(std::move(out));
}

LowFieldScan acquire_lowfield(const Volume& v, const SimulationParams& params) {
  params.validate();
  Volume coarse = resample(v, params.target_spacing, params.interpolation);
  const double sigma = calibrate_sigma(coarse, params.target_snr, params.foreground_threshold);
  return {rician_noise(coarse, sigma, params.seed), sigma};
}

Volume simulate_lowfield(const Volume& v, const SimulationParams& params) {
  return acquire_lowfield(v, params).volume;
}

double measure_snr(const Volume& noisy, const Volume& clean, double foreground_threshold) {
  require_same_grid(noisy, clean, "measure_snr");
  double signal = 0.0, err2 = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (!(clean[i] > foreground_threshold)) continue;
    signal += noisy[i];
    const double e = static_cast<double>(noisy[i]) - clean[i];
    err2 += e * e;
    ++count;
  }
  if (count == 0) throw CalibrationError("measure_snr: no foreground voxels");
  if (err2 == 0.0) return std::numeric_limits<double>::infinity();
  return (signal / count) / std::sqrt(err2 / count);
}

}  // namespace lowfield
