#pragma once

// Independent reference implementations used only by tests. They follow the
// textbook formulas directly (explicit loops, no separable filtering) so they
// share no code path with the library.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lowfield/volume.hpp"

namespace oracle {

inline double mse(const lowfield::Volume& a, const lowfield::Volume& b) {
  long double sum = 0.0L;
  const auto& d = a.dims();
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        const long double diff = static_cast<long double>(a.at(x, y, z)) - b.at(x, y, z);
        sum += diff * diff;
      }
  return static_cast<double>(sum / (d[0] * d[1] * d[2]));
}

inline double psnr(const lowfield::Volume& a, const lowfield::Volume& b, double max_value) {
  return 10.0 * std::log10(max_value * max_value / oracle::mse(a, b));
}

/// Direct SSIM: for every window position, weights exp(-r^2 / 2 sigma^2)
/// normalized over the full window, then the product-form SSIM.
inline double ssim(const lowfield::Volume& a, const lowfield::Volume& b, int window, double sigma,
                   double k1 = 0.01, double k2 = 0.03, double L = 1.0) {
  const auto& d = a.dims();
  const int r = window / 2;
  const int rx = d[0] > 1 ? r : 0, ry = d[1] > 1 ? r : 0, rz = d[2] > 1 ? r : 0;
  const double c1 = (k1 * L) * (k1 * L), c2 = (k2 * L) * (k2 * L);
  double total = 0.0;
  long count = 0;
  for (long cz = rz; cz < static_cast<long>(d[2]) - rz; ++cz)
    for (long cy = ry; cy < static_cast<long>(d[1]) - ry; ++cy)
      for (long cx = rx; cx < static_cast<long>(d[0]) - rx; ++cx) {
        double wsum = 0, ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (long dz = -rz; dz <= rz; ++dz)
          for (long dy = -ry; dy <= ry; ++dy)
            for (long dx = -rx; dx <= rx; ++dx) {
              const double w = std::exp(-(dx * dx + dy * dy + dz * dz) / (2 * sigma * sigma));
              const double va = a.at(cx + dx, cy + dy, cz + dz);
              const double vb = b.at(cx + dx, cy + dy, cz + dz);
              wsum += w;
              ma += w * va;
              mb += w * vb;
              saa += w * va * va;
              sbb += w * vb * vb;
              sab += w * va * vb;
            }
        ma /= wsum;
        mb /= wsum;
        const double va = saa / wsum - ma * ma;
        const double vb = sbb / wsum - mb * mb;
        const double cov = sab / wsum - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / count;
}

inline lowfield::Volume random_volume(lowfield::Dims dims, std::uint64_t seed, float lo = 0.0f,
                                      float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> data(dims[0] * dims[1] * dims[2]);
  for (auto& v : data) v = u(rng);
  return lowfield::Volume(dims, {1.0, 1.0, 1.0}, std::move(data));
}

// Parameter counts from layer shapes: weights in*out*k^rank plus out biases.
inline std::int64_t conv_params(std::int64_t in, std::int64_t out, std::int64_t k, int rank) {
  std::int64_t kk = 1;
  for (int i = 0; i < rank; ++i) kk *= k;
  return in * out * kk + out;
}

inline std::int64_t generator_params(int in, int base, int downs, int blocks, int rank) {
  std::int64_t total = 0;
  int c = in;
  for (int i = 0; i < downs; ++i) {
    total += conv_params(c, base << i, 3, rank);
    c = base << i;
  }
  total += blocks * 2 * conv_params(c, c, 3, rank);
  for (int i = 0; i < downs; ++i) {
    const int out = i == downs - 1 ? in : base << (downs - 2 - i);
    total += conv_params(c, out, 4, rank);
    c = out;
  }
  return total;
}

inline std::int64_t dae_params(int in, int base, int depth, bool skips, int rank) {
  std::int64_t total = 0;
  int c = in;
  for (int i = 0; i < depth; ++i) {
    total += conv_params(c, base << i, 3, rank);
    c = base << i;
  }
  total += conv_params(c, c, 3, rank);
  for (int i = depth - 1; i >= 0; --i) {
    const int w = base << i;
    const int out = i > 0 ? base << (i - 1) : base;
    total += conv_params(skips ? 2 * w : w, out, 4, rank);
  }
  total += conv_params(base + (skips ? in : 0), in, 3, rank);
  return total;
}

}  // namespace oracle

namespace oracle {

inline std::int64_t discriminator_params(int in, int base, int layers, int rank) {
  std::int64_t total = 0;
  int c = in;
  for (int i = 0; i < layers; ++i) {
    const int out = base << (i < 3 ? i : 3);
    total += conv_params(c, out, 4, rank);
    c = out;
  }
  return total + conv_params(c, 1, 3, rank);
}

// Output extent of a k4 s2 p1 convolution.
inline std::int64_t strided_extent(std::int64_t n) { return (n + 2 * 1 - 4) / 2 + 1; }

}  // namespace oracle
