#include <doctest.h>

#include "fixtures.hpp"
#include "morseuq/structgraph.hpp"
#include "morseuq/synth.hpp"

using namespace morseuq;

TEST_CASE("interior crop is a plain copy") {
  const ScalarGrid g = fixture::random_grid(Shape{40, 50}, 3);
  const ScalarGrid c = crop(g, {20, 25}, 8);
  REQUIRE(c.shape() == Shape{8, 8});
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(c.at({y, x}) == g.at({16 + y, 21 + x}));

  const ScalarGrid v = fixture::random_grid(Shape{10, 12, 14}, 4);
  const ScalarGrid cv = crop(v, {5, 6, 7}, 4);
  CHECK(cv.at({0, 0, 0}) == v.at({3, 4, 5}));
  CHECK(cv.at({3, 2, 1}) == v.at({6, 6, 6}));
}

TEST_CASE("corner crop is zero padded") {
  const ScalarGrid ones(Shape{40, 40}, 1.0f);
  const ScalarGrid c = crop(ones, {0, 0}, 32);
  double sum = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const float expected = (y >= 16 && x >= 16) ? 1.0f : 0.0f;
      CHECK(c.at({y, x}) == expected);
      sum += c.at({y, x});
    }
  CHECK(sum == 16 * 16);
  const ScalarGrid full = crop(ones, {20, 20}, 32);
  double total = 0;
  for (float v : full.values()) total += v;
  CHECK(total == 32 * 32);
  CHECK_THROWS_AS(crop(ones, {0, 0}, 7), ContractError);
  CHECK_THROWS_AS(crop(ones, {40, 0}, 8), ContractError);
}

TEST_CASE("soft labels") {
  BinaryGrid gt(Shape{5, 5});
  gt.at({1, 1}) = gt.at({1, 2}) = gt.at({1, 3}) = 1;
  CHECK(soft_label({{1, 1}, {1, 2}, {1, 3}, {2, 3}}, gt) == 0.75);
  CHECK(soft_label({{1, 1}, {1, 2}}, gt) == 1.0);
  CHECK(soft_label({{4, 4}}, gt) == 0.0);
}

TEST_CASE("graph construction") {
  SynthConfig sc;
  sc.seed = 8;
  sc.gap_rate = 0.2;
  sc.spur_rate = 0.2;
  const SynthCase c = generate_case(sc);
  const MorseSkeleton sk = skeletonize(c.likelihood);
  REQUIRE(sk.structures.size() >= 2);
  const GraphBuilder builder(sk, c.image, c.likelihood);
  SamplerConfig cfg;
  cfg.seed = 3;

  for (int run = 1; run <= 3; ++run) {
    const auto samples = sample_skeleton(sk, c.likelihood, cfg, run);
    const StructureGraph g = builder.build(samples, &c.gt);
    const StructureGraph blind = builder.build(samples, nullptr);
    REQUIRE(g.labels);
    CHECK_FALSE(blind.labels);
    CHECK(g.adjacency == structure_adjacency(sk));
    CHECK(blind.adjacency == g.adjacency);
    REQUIRE(g.nodes.size() == sk.structures.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const NodeInput& n = g.nodes[i];
      CHECK(n.structure_id == static_cast<int>(i));
      CHECK(n.x_crop.shape() == Shape{32, 32});
      CHECK(n.f_crop == crop(c.likelihood, n.center, 32));
      CHECK(n.x_crop == crop(c.image, n.center, 32));
      CHECK(n.m_crop == blind.nodes[i].m_crop);
      CHECK(count_foreground(n.m_crop) > 0);
      CHECK(n.persistence == sk.structures[i].persistence);
      const double z = (*g.labels)[i];
      CHECK((z >= 0.0 && z <= 1.0));
      CHECK(z == soft_label(samples[i].path, c.gt));
    }
  }
}

TEST_CASE("node center keeps the saddle inside the window") {
  Structure s;
  for (int x = 0; x < 60; ++x) s.path.push_back({5, x});
  s.saddle = s.path.front();
  s.max = s.path.back();
  const Coord c = node_center(s, Shape{10, 64}, 32);
  CHECK(c[1] - 16 <= 0);
  CHECK(c[1] + 15 >= 0);
  Structure small;
  small.path = {{3, 3}, {3, 4}, {4, 5}};
  small.saddle = small.path.front();
  small.max = small.path.back();
  CHECK(node_center(small, Shape{10, 10}, 32) == Coord{3, 4});
}

TEST_CASE("missing samples are a data error") {
  const ScalarGrid f = fixture::two_ridges();
  const MorseSkeleton sk = skeletonize(f);
  const auto samples = sample_skeleton(sk, f, SamplerConfig{}, 1);
  auto fewer = samples;
  fewer.pop_back();
  CHECK_THROWS_AS(build_graph(sk, fewer, f, f, nullptr), DataError);
  auto shuffled = samples;
  std::swap(shuffled[0], shuffled[1]);
  CHECK_THROWS_AS(build_graph(sk, shuffled, f, f, nullptr), DataError);
  CHECK_NOTHROW(build_graph(sk, samples, f, f, nullptr));
}
