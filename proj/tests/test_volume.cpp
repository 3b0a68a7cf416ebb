#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "lowfield/phantom.hpp"
#include "lowfield/volume.hpp"
#include "oracles.hpp"

using namespace lowfield;

TEST_CASE("volume rejects invalid grids") {
  CHECK_THROWS_AS(Volume({0, 2, 2}, {1, 1, 1}, 0.0f), std::invalid_argument);
  CHECK_THROWS_AS(Volume({2, 2, 2}, {1, 0, 1}, 0.0f), std::invalid_argument);
  CHECK_THROWS_AS(Volume({2, 2, 2}, {1, 1, 1}, std::vector<float>(7)), std::invalid_argument);
  std::vector<float> data(8, 0.0f);
  data[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(Volume({2, 2, 2}, {1, 1, 1}, data), std::invalid_argument);
}

TEST_CASE("volume indexing is x-fastest") {
  std::vector<float> data(24);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(i);
  const Volume v({2, 3, 4}, {1, 1, 1}, data);
  CHECK(v.at(1, 0, 0) == 1.0f);
  CHECK(v.at(0, 1, 0) == 2.0f);
  CHECK(v.at(0, 0, 1) == 6.0f);
}

TEST_CASE("normalize_intensity") {
  SUBCASE("affine map of three values") {
    const Volume v({3, 1, 1}, {1, 1, 1}, std::vector<float>{10, 15, 20});
    const auto n = normalize_intensity(v);
    CHECK(n[0] == 0.0f);
    CHECK(n[1] == 0.5f);
    CHECK(n[2] == 1.0f);
  }
  SUBCASE("constant volume maps to zeros") {
    const auto n = normalize_intensity(Volume({4, 4, 4}, {1, 1, 1}, 7.0f));
    CHECK(std::all_of(n.data().begin(), n.data().end(), [](float x) { return x == 0.0f; }));
  }
  SUBCASE("already normalized is unchanged") {
    auto data = oracle::random_volume({5, 5, 5}, 3).data();
    std::vector<float> d(data.begin(), data.end());
    d[0] = 0.0f;
    d[1] = 1.0f;
    const Volume v({5, 5, 5}, {1, 1, 1}, d);
    const auto n = normalize_intensity(v);
    CHECK(std::equal(n.data().begin(), n.data().end(), v.data().begin()));
  }
  SUBCASE("spacing is preserved") {
    const Volume v({2, 2, 2}, {1.5, 2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8});
    CHECK(normalize_intensity(v).spacing() == Spacing{1.5, 2, 3});
  }
}

TEST_CASE("normalize_intensity property: range [0,1] and order preserved") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto v = oracle::random_volume({6, 5, 4}, seed, -300.0f, 4000.0f);
    const auto n = normalize_intensity(v);
    for (std::size_t i = 0; i < v.size(); ++i) {
      REQUIRE(n[i] >= 0.0f);
      REQUIRE(n[i] <= 1.0f);
    }
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i - 1] < v[i]) REQUIRE(n[i - 1] <= n[i]);
      if (v[i - 1] > v[i]) REQUIRE(n[i - 1] >= n[i]);
    }
    CHECK(n.min() == 0.0f);
    CHECK(n.max() == 1.0f);
  }
}

TEST_CASE("phantom parameter validation") {
  PhantomSpec spec;
  spec.grid_size = {7, 16, 16};
  CHECK_THROWS_AS(make_phantom(spec), std::invalid_argument);
  spec.grid_size = {16, 16, 16};
  spec.intensity_range = {1.0, 1.0};
  CHECK_THROWS_AS(make_phantom(spec), std::invalid_argument);
  spec.intensity_range = {0.0, 1.0};
  spec.num_shapes = 0;
  CHECK_THROWS_AS(make_phantom(spec), std::invalid_argument);
}

TEST_CASE("make_phantom is deterministic in its seed") {
  PhantomSpec spec;
  spec.grid_size = {24, 20, 16};
  spec.num_shapes = 6;
  spec.seed = 42;
  const auto a = make_phantom(spec);
  const auto b = make_phantom(spec);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  spec.seed = 43;
  const auto c = make_phantom(spec);
  CHECK_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

TEST_CASE("single centred shape: centre is foreground, corner is background") {
  PhantomSpec spec;
  spec.grid_size = {33, 33, 33};
  spec.num_shapes = 1;
  spec.intensity_range = {0.1, 0.9};
  spec.seed = 5;
  const auto shapes = phantom_shapes(spec);
  REQUIRE(shapes.size() == 1);
  CHECK(shapes[0].center == std::array<double, 3>{16, 16, 16});
  const auto v = make_phantom(spec);
  CHECK(v.at(16, 16, 16) == shapes[0].intensity);
  CHECK(shapes[0].intensity == doctest::Approx(0.9));
  CHECK(v.at(0, 0, 0) == 0.1f);
  CHECK(v.at(32, 32, 32) == 0.1f);
}

TEST_CASE("phantom values stay inside the intensity range and shapes are distinct") {
  PhantomSpec spec;
  spec.grid_size = {32, 32, 32};
  spec.num_shapes = 7;
  spec.intensity_range = {-2.0, 5.0};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = seed;
    const auto v = make_phantom(spec);
    CHECK(v.min() >= -2.0f);
    CHECK(v.max() <= 5.0f);
    const auto shapes = phantom_shapes(spec);
    std::vector<float> levels;
    for (const auto& s : shapes) levels.push_back(s.intensity);
    std::sort(levels.begin(), levels.end());
    CHECK(std::adjacent_find(levels.begin(), levels.end()) == levels.end());
    CHECK(levels.back() == doctest::Approx(5.0));
  }
}
