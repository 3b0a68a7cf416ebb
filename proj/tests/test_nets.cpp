#include "torch_doctest.hpp"

#include <random>

#include "lowfield/errors.hpp"
#include "lowfield/nets.hpp"
#include "oracles.hpp"

using namespace lowfield;

namespace {

GeneratorConfig tiny_generator(SpatialRank rank) {
  GeneratorConfig g;
  g.base_channels = 4;
  g.num_downsamples = 1;
  g.num_residual_blocks = 1;
  g.spatial_rank = rank;
  return g;
}

bool all_finite(const torch::Tensor& t) { return torch::isfinite(t).all().item<bool>(); }

}  // namespace

TEST_CASE("generator layer accounting") {
  GeneratorConfig cfg;
  CHECK(cfg.layer_count() == 13);
  torch::manual_seed(0);
  const auto g = build_generator(cfg);
  CHECK(g->downsampling_layers() == 2);
  CHECK(g->residual_blocks() == 9);
  CHECK(g->upsampling_layers() == 2);
  CHECK(g->layer_count() == 13);
  CHECK(g->skip_connection_count() == 0);

  GeneratorConfig minimal;
  minimal.num_downsamples = 1;
  minimal.num_residual_blocks = 0;
  minimal.base_channels = 4;
  CHECK(minimal.layer_count() == 2);
  CHECK(build_generator(minimal)->layer_count() == 2);
}

TEST_CASE("config validation") {
  GeneratorConfig g;
  g.num_downsamples = 0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g.num_downsamples = 2;
  g.num_residual_blocks = -1;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  DiscriminatorConfig d;
  d.num_layers = 0;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  DAEConfig a;
  a.depth = 0;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  CHECK(spatial_rank_from_string("2d") == SpatialRank::two_d);
  CHECK(to_string(SpatialRank::three_d) == "3d");
  CHECK_THROWS(spatial_rank_from_string("4d"));
}

TEST_CASE("parameter counts match the layer-shape formulas") {
  torch::manual_seed(1);
  SUBCASE("tiny 2D generator") {
    const auto g = build_generator(tiny_generator(SpatialRank::two_d));
    // 1->4 k3 conv (40) + residual block 2 x (4->4 k3, 148) + 4->1 k4 transpose (65)
    CHECK(count_parameters(*g) == 401);
    CHECK(oracle::generator_params(1, 4, 1, 1, 2) == 401);
  }
  SUBCASE("generators in both ranks") {
    for (auto rank : {SpatialRank::two_d, SpatialRank::three_d})
      for (int base : {4, 8})
        for (int downs : {1, 2, 3}) {
          GeneratorConfig cfg;
          cfg.base_channels = base;
          cfg.num_downsamples = downs;
          cfg.num_residual_blocks = 2;
          cfg.spatial_rank = rank;
          CHECK(count_parameters(*build_generator(cfg)) ==
                oracle::generator_params(1, base, downs, 2, static_cast<int>(rank)));
        }
  }
  SUBCASE("discriminators") {
    for (auto rank : {SpatialRank::two_d, SpatialRank::three_d})
      for (int layers : {1, 3, 5}) {
        DiscriminatorConfig cfg;
        cfg.base_channels = 4;
        cfg.num_layers = layers;
        cfg.spatial_rank = rank;
        CHECK(count_parameters(*build_discriminator(cfg)) ==
              oracle::discriminator_params(1, 4, layers, static_cast<int>(rank)));
      }
  }
  SUBCASE("DAE with and without skips") {
    for (auto rank : {SpatialRank::two_d, SpatialRank::three_d})
      for (int depth : {1, 2, 3}) {
        DAEConfig cfg;
        cfg.base_channels = 4;
        cfg.depth = depth;
        cfg.spatial_rank = rank;
        const auto with = count_parameters(*build_dae(cfg));
        cfg.skip_connections = false;
        const auto without = count_parameters(*build_dae(cfg));
        CHECK(with == oracle::dae_params(1, 4, depth, true, static_cast<int>(rank)));
        CHECK(without == oracle::dae_params(1, 4, depth, false, static_cast<int>(rank)));
        CHECK(with > without);
      }
  }
  SUBCASE("determinism and monotonicity") {
    GeneratorConfig cfg;
    cfg.base_channels = 8;
    const auto a = count_parameters(*build_generator(cfg));
    CHECK(a == count_parameters(*build_generator(cfg)));
    cfg.base_channels = 16;
    CHECK(count_parameters(*build_generator(cfg)) > a);
  }
}

TEST_CASE("generator and DAE preserve shape") {
  torch::manual_seed(2);
  GeneratorConfig g;
  g.base_channels = 4;
  g.num_residual_blocks = 2;
  auto gen = build_generator(g);
  DAEConfig d;
  d.base_channels = 4;
  auto dae = build_dae(d);
  torch::NoGradGuard no_grad;
  const auto x = torch::rand({1, 1, 32, 32, 32});
  const auto gy = gen->forward(x);
  const auto dy = dae->forward(x);
  CHECK(gy.sizes() == x.sizes());
  CHECK(dy.sizes() == x.sizes());
  CHECK(all_finite(gy));
  CHECK(all_finite(dy));
  CHECK(gy.min().item<float>() >= 0.0f);
  CHECK(gy.max().item<float>() <= 1.0f);

  DAEConfig minimal;
  minimal.base_channels = 2;
  minimal.depth = 1;
  CHECK((build_dae(minimal)->forward(torch::rand({1, 1, 6, 4, 2})).sizes() ==
        std::vector<std::int64_t>{1, 1, 6, 4, 2}));
}

TEST_CASE("shape preservation property over random valid shapes") {
  torch::manual_seed(3);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> mult(1, 5), batch(1, 3);
  torch::NoGradGuard no_grad;
  for (auto rank : {SpatialRank::two_d, SpatialRank::three_d}) {
    GeneratorConfig g = tiny_generator(rank);
    g.num_downsamples = 2;
    DAEConfig d;
    d.base_channels = 2;
    d.depth = 2;
    d.spatial_rank = rank;
    auto gen = build_generator(g);
    auto dae = build_dae(d);
    for (int trial = 0; trial < 6; ++trial) {
      std::vector<std::int64_t> shape{batch(rng), 1};
      for (int a = 0; a < static_cast<int>(rank); ++a) shape.push_back(4 * mult(rng));
      const auto x = torch::rand(shape);
      REQUIRE(gen->forward(x).sizes() == x.sizes());
      REQUIRE(dae->forward(x).sizes() == x.sizes());
    }
  }
}

TEST_CASE("divisibility and rank errors") {
  torch::manual_seed(4);
  GeneratorConfig g;
  g.base_channels = 4;
  g.num_residual_blocks = 1;
  auto gen = build_generator(g);
  CHECK_THROWS_WITH_AS(gen->forward(torch::rand({1, 1, 32, 30, 32})), doctest::Contains("4"),
                       ShapeError);
  CHECK_THROWS_AS(gen->forward(torch::rand({1, 1, 32, 32})), ShapeError);
  CHECK_THROWS_AS(gen->forward(torch::rand({1, 2, 32, 32, 32})), ShapeError);
  DAEConfig d;
  d.base_channels = 4;
  CHECK_THROWS_AS(build_dae(d)->forward(torch::rand({1, 1, 12, 16, 16})), ShapeError);
}

TEST_CASE("discriminator patch map follows the shape trace") {
  torch::manual_seed(5);
  const auto trace = DiscriminatorImpl::shape_trace(32, 4);
  std::vector<std::int64_t> expected{32};
  for (int i = 0; i < 4; ++i) expected.push_back(oracle::strided_extent(expected.back()));
  CHECK(trace == expected);
  CHECK(trace.back() == 2);

  DiscriminatorConfig cfg;
  cfg.base_channels = 4;
  auto disc = build_discriminator(cfg);
  torch::NoGradGuard no_grad;
  const auto a = disc->forward(torch::rand({1, 1, 32, 32, 32}));
  CHECK((a.sizes() == std::vector<std::int64_t>{1, 1, 2, 2, 2}));
  const auto b = disc->forward(torch::rand({1, 1, 32, 32, 32}));
  CHECK_FALSE(torch::equal(a, b));
  CHECK(all_finite(disc->forward(torch::zeros({1, 1, 32, 32, 32}))));
  CHECK(all_finite(disc->forward(torch::ones({1, 1, 32, 32, 32}))));

  CHECK_THROWS_AS(DiscriminatorImpl::shape_trace(8, 4), ShapeError);
  CHECK_THROWS_AS(disc->forward(torch::rand({1, 1, 8, 8, 8})), ShapeError);
  CHECK_THROWS_AS(disc->forward(torch::rand({1, 1, 16, 16, 16})), ShapeError);
}

TEST_CASE("ablation: the generator has no path around its bottleneck") {
  torch::manual_seed(6);
  torch::NoGradGuard no_grad;
  for (auto rank : {SpatialRank::two_d, SpatialRank::three_d}) {
    GeneratorConfig g = tiny_generator(rank);
    g.num_downsamples = 2;
    g.num_residual_blocks = 2;
    auto gen = build_generator(g);
    std::vector<std::int64_t> shape{1, 1};
    for (int a = 0; a < static_cast<int>(rank); ++a) shape.push_back(8);
    const auto x1 = torch::rand(shape), x2 = torch::rand(shape);
    // With the trunk zeroed the output no longer depends on the input at all.
    CHECK(torch::equal(gen->forward_ablated(x1), gen->forward_ablated(x2)));
    CHECK_FALSE(torch::allclose(gen->forward(x1), gen->forward_ablated(x1)));

    DAEConfig d;
    d.base_channels = 4;
    d.depth = 2;
    d.spatial_rank = rank;
    auto dae = build_dae(d);
    CHECK(dae->skip_connection_count() == 3);
    CHECK_FALSE(torch::allclose(dae->forward_ablated(x1), dae->forward_ablated(x2)));
    d.skip_connections = false;
    auto plain = build_dae(d);
    CHECK(plain->skip_connection_count() == 0);
    CHECK(torch::equal(plain->forward_ablated(x1), plain->forward_ablated(x2)));
  }
}

TEST_CASE("initialization statistics") {
  torch::manual_seed(7);
  GeneratorConfig g;
  g.base_channels = 16;
  auto gen = build_generator(g);
  for (const auto& item : gen->named_parameters()) {
    const auto& p = item.value();
    CHECK(all_finite(p));
    if (item.key().ends_with("bias")) CHECK(p.abs().max().item<float>() == 0.0f);
  }
  const auto w = gen->named_parameters()["trunk.0.body.0.weight"];
  CHECK(w.mean().item<double>() == doctest::Approx(0.0).epsilon(0.002));
  CHECK(w.std().item<double>() == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("apply_network pads, runs and crops") {
  const auto v = oracle::random_volume({7, 5, 3}, 1);
  for (auto rank : {SpatialRank::two_d, SpatialRank::three_d}) {
    std::vector<std::vector<std::int64_t>> seen;
    const TensorMap identity = [&](torch::Tensor t) {
      seen.push_back(t.sizes().vec());
      return t;
    };
    const auto out = apply_network(identity, v, rank, 4);
    CHECK(std::equal(out.data().begin(), out.data().end(), v.data().begin()));
    CHECK(out.spacing() == v.spacing());
    REQUIRE(seen.size() == 1);
    if (rank == SpatialRank::two_d)
      CHECK((seen[0] == std::vector<std::int64_t>{3, 1, 8, 8}));
    else
      CHECK((seen[0] == std::vector<std::int64_t>{1, 1, 4, 8, 8}));
  }
  const auto slices = oracle::random_volume({4, 4, 40}, 2);
  int calls = 0;
  const TensorMap count = [&](torch::Tensor t) {
    ++calls;
    return t * 2;
  };
  const auto doubled = apply_network(count, slices, SpatialRank::two_d, 2);
  CHECK(calls == 3);
  CHECK(doubled[100] == 2 * slices[100]);
}

TEST_CASE("tensor conversion round trip") {
  const auto v = oracle::random_volume({5, 4, 3}, 3);
  const auto t = to_tensor(v);
  CHECK((t.sizes() == std::vector<std::int64_t>{1, 1, 3, 4, 5}));
  CHECK(t[0][0][2][1][4].item<float>() == v.at(4, 1, 2));
  const auto back = from_tensor(t, v);
  CHECK(std::equal(back.data().begin(), back.data().end(), v.data().begin()));
  CHECK_THROWS_AS(from_tensor(torch::zeros({3}), v), ShapeError);
}
