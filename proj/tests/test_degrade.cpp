#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lowfield/degrade.hpp"
#include "lowfield/errors.hpp"
#include "lowfield/phantom.hpp"
#include "oracles.hpp"

using namespace lowfield;

namespace {

Volume ramp(Dims dims, Spacing spacing, std::array<double, 3> coeff) {
  std::vector<float> data(dims[0] * dims[1] * dims[2]);
  std::size_t i = 0;
  for (std::size_t z = 0; z < dims[2]; ++z)
    for (std::size_t y = 0; y < dims[1]; ++y)
      for (std::size_t x = 0; x < dims[0]; ++x)
        data[i++] = static_cast<float>(coeff[0] * x * spacing[0] + coeff[1] * y * spacing[1] +
                                       coeff[2] * z * spacing[2]);
  return Volume(dims, spacing, std::move(data));
}

double mean_of(const Volume& v) {
  long double s = 0;
  for (float x : v.data()) s += x;
  return static_cast<double>(s / v.size());
}

double second_moment(const Volume& v) {
  long double s = 0;
  for (float x : v.data()) s += static_cast<long double>(x) * x;
  return static_cast<double>(s / v.size());
}

}  // namespace

TEST_CASE("simulation params validation") {
  SimulationParams p;
  CHECK_NOTHROW(p.validate());
  p.target_snr = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.target_snr = 5;
  p.target_spacing = {1.5, -1, 1.5};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK(interpolation_from_string(to_string(Interpolation::nearest)) == Interpolation::nearest);
  CHECK_THROWS(interpolation_from_string("cubic"));
}

TEST_CASE("resample output grid") {
  const Volume v({60, 60, 60}, {1, 1, 1}, 0.0f);
  const auto r = resample(v, {1.5, 1.5, 1.5});
  CHECK(r.dims() == Dims{40, 40, 40});
  CHECK(r.spacing() == Spacing{1.5, 1.5, 1.5});
  CHECK(resampled_dims(Volume({32, 32, 32}, {1, 1, 1}, 0.0f), {1.5, 1.5, 1.5}) == Dims{21, 21, 21});
  CHECK(resampled_dims(Volume({10, 9, 8}, {1, 2, 3}, 0.0f), {2, 2, 2}) == Dims{5, 9, 12});
}

TEST_CASE("resample rejects spacing coarser than the extent") {
  const Volume v({8, 8, 8}, {1, 1, 1}, 1.0f);
  CHECK_THROWS_AS(resample(v, {9, 1, 1}), std::invalid_argument);
}

TEST_CASE("resample of a constant is constant") {
  for (auto method : {Interpolation::trilinear, Interpolation::nearest}) {
    const Volume v({17, 13, 11}, {1, 0.8, 1.3}, 0.37f);
    const auto r = resample(v, {1.5, 1.1, 0.7}, method);
    for (float x : r.data()) REQUIRE(std::abs(x - 0.37f) < 1e-6);
  }
}

TEST_CASE("trilinear resample reproduces a physical-coordinate ramp") {
  const Spacing in{1.0, 2.0, 0.5};
  const Spacing out{1.5, 1.5, 1.5};
  const std::array<double, 3> coeff{0.01, 0.003, 0.02};
  const auto v = ramp({30, 20, 40}, in, coeff);
  const auto r = resample(v, out);
  const auto& d = r.dims();
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        const double expected = coeff[0] * x * out[0] + coeff[1] * y * out[1] + coeff[2] * z * out[2];
        REQUIRE(std::abs(r.at(x, y, z) - expected) < 1e-6);
      }
}

TEST_CASE("nearest resample picks input voxels") {
  const auto v = ramp({12, 1, 1}, {1, 1, 1}, {1, 0, 0});
  const auto r = resample(v, {1.5, 1, 1}, Interpolation::nearest);
  REQUIRE(r.dims() == Dims{8, 1, 1});
  for (std::size_t x = 0; x < 8; ++x) CHECK(r.at(x, 0, 0) == std::round(1.5 * x));
}

TEST_CASE("calibrate_sigma") {
  const Volume ones({4, 4, 4}, {1, 1, 1}, 1.0f);
  CHECK(calibrate_sigma(ones, 10) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(calibrate_sigma(ones, 1e9) == doctest::Approx(1e-9).epsilon(1e-12));
  CHECK_THROWS_AS(calibrate_sigma(Volume({4, 4, 4}, {1, 1, 1}, 0.05f), 5), CalibrationError);

  std::vector<float> data{0.0f, 0.05f, 0.2f, 0.6f};
  CHECK(calibrate_sigma(Volume({4, 1, 1}, {1, 1, 1}, data), 2) == doctest::Approx(0.2));
}

TEST_CASE("calibrated phantom noise hits the target SNR") {
  PhantomSpec spec;
  spec.grid_size = {48, 48, 48};
  spec.num_shapes = 6;
  spec.seed = 3;
  const auto clean = normalize_intensity(make_phantom(spec));

  long double fg_sum = 0;
  std::size_t fg_n = 0;
  for (float x : clean.data())
    if (x > 0.1) {
      fg_sum += x;
      ++fg_n;
    }
  const double m = static_cast<double>(fg_sum / fg_n);
  const double sigma = calibrate_sigma(clean, 5.0);
  CHECK(sigma == doctest::Approx(m / 5.0).epsilon(1e-9));

  const auto noisy = rician_noise(clean, sigma, 99);
  long double noisy_sum = 0, err2 = 0;
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (clean[i] > 0.1) {
      noisy_sum += noisy[i];
      err2 += (static_cast<long double>(noisy[i]) - clean[i]) * (noisy[i] - clean[i]);
    }
  const double measured = static_cast<double>((noisy_sum / fg_n) / std::sqrt(err2 / fg_n));
  CHECK(measured == doctest::Approx(5.0).epsilon(0.05));
  CHECK(measure_snr(noisy, clean) == doctest::Approx(measured).epsilon(1e-6));
}

TEST_CASE("rician noise contracts") {
  const auto v = oracle::random_volume({9, 8, 7}, 1);
  SUBCASE("sigma 0 is the identity on non-negative input") {
    const auto r = rician_noise(v, 0.0, 5);
    CHECK(std::equal(r.data().begin(), r.data().end(), v.data().begin()));
  }
  SUBCASE("sigma 0 returns magnitude") {
    const auto neg = oracle::random_volume({5, 5, 5}, 2, -1.0f, 1.0f);
    const auto r = rician_noise(neg, 0.0, 5);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == std::abs(neg[i]));
  }
  SUBCASE("negative sigma") { CHECK_THROWS_AS(rician_noise(v, -0.1, 5), std::invalid_argument); }
  SUBCASE("deterministic in seed") {
    const auto a = rician_noise(v, 0.2, 5);
    const auto b = rician_noise(v, 0.2, 5);
    const auto c = rician_noise(v, 0.2, 6);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
    CHECK_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
  }
  SUBCASE("non-negative for signed input and any sigma") {
    const auto neg = oracle::random_volume({20, 20, 20}, 3, -2.0f, 2.0f);
    for (double sigma : {0.0, 0.01, 0.5, 3.0}) {
      const auto r = rician_noise(neg, sigma, 11);
      CHECK(r.min() >= 0.0f);
    }
  }
}

TEST_CASE("rician moments match closed forms") {
  const Dims big{100, 100, 100};
  SUBCASE("Rayleigh mean at A = 0") {
    const auto r = rician_noise(Volume(big, {1, 1, 1}, 0.0f), 1.0, 2024);
    CHECK(mean_of(r) == doctest::Approx(std::sqrt(std::numbers::pi / 2)).epsilon(0.01));
  }
  SUBCASE("second moment A^2 + 2 sigma^2") {
    for (auto [a, sigma] : {std::pair{0.7, 0.3}, std::pair{0.0, 0.5}, std::pair{2.0, 0.1}}) {
      const auto r = rician_noise(Volume(big, {1, 1, 1}, static_cast<float>(a)), sigma, 7);
      CHECK(second_moment(r) == doctest::Approx(a * a + 2 * sigma * sigma).epsilon(0.01));
    }
  }
}

TEST_CASE("noise is stable across block boundaries") {
  // Volumes differing only past the first block share the first block's noise.
  const Dims dims{64, 64, 2};
  std::vector<float> a(dims[0] * dims[1] * dims[2], 0.5f);
  auto b = a;
  b.back() = 0.9f;
  const auto ra = rician_noise(Volume(dims, {1, 1, 1}, a), 0.1, 4);
  const auto rb = rician_noise(Volume(dims, {1, 1, 1}, b), 0.1, 4);
  CHECK(std::equal(ra.data().begin(), ra.data().begin() + kNoiseBlock, rb.data().begin()));
}

TEST_CASE("error against clean is monotone in sigma") {
  PhantomSpec spec;
  spec.grid_size = {24, 24, 24};
  const auto clean = normalize_intensity(make_phantom(spec));
  double last = -1;
  for (double sigma : {0.01, 0.05, 0.1, 0.2}) {
    const double e = oracle::mse(rician_noise(clean, sigma, 77), clean);
    CHECK(e >= last);
    last = e;
  }
}

TEST_CASE("simulate_lowfield") {
  PhantomSpec spec;
  spec.grid_size = {30, 30, 30};
  const auto clean = normalize_intensity(make_phantom(spec));
  SimulationParams params;
  params.seed = 12;

  const auto low = simulate_lowfield(clean, params);
  CHECK(low.spacing() == Spacing{1.5, 1.5, 1.5});
  CHECK(low.dims() == Dims{20, 20, 20});

  const auto again = simulate_lowfield(clean, params);
  CHECK(std::equal(low.data().begin(), low.data().end(), again.data().begin()));

  const auto resampled = resample(clean, params.target_spacing, params.interpolation);
  const auto composed =
      rician_noise(resampled, calibrate_sigma(resampled, params.target_snr), params.seed);
  CHECK(std::equal(low.data().begin(), low.data().end(), composed.data().begin()));

  SimulationParams noop;
  noop.target_snr = 1e9;
  noop.target_spacing = clean.spacing();
  const auto same = simulate_lowfield(clean, noop);
  for (std::size_t i = 0; i < clean.size(); ++i) REQUIRE(std::abs(same[i] - clean[i]) < 1e-6);
}

TEST_CASE("acquire_lowfield reports the calibrated sigma") {
  PhantomSpec spec;
  spec.grid_size = {16, 16, 16};
  const auto clean = normalize_intensity(make_phantom(spec));
  SimulationParams params;
  const auto scan = acquire_lowfield(clean, params);
  CHECK(scan.sigma == calibrate_sigma(resample(clean, params.target_spacing), params.target_snr));
}
