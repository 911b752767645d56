#include <doctest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "morseuq/morse.hpp"
#include "oracles.hpp"

using namespace morseuq;

namespace {

ScalarGrid row(std::vector<float> v) {
  const int n = static_cast<int>(v.size());
  return ScalarGrid(Shape{1, n}, std::move(v));
}

std::vector<Coord> coords_1d(std::initializer_list<int> xs) {
  std::vector<Coord> out;
  for (int x : xs) out.push_back({0, x});
  return out;
}

std::vector<oracle::Pair> as_oracle(const MergeTree& t) {
  std::vector<oracle::Pair> out;
  for (const auto& p : t.pairs) out.push_back({t.shape.index(p.saddle), t.shape.index(p.max), p.persistence});
  return out;
}

void check_path_invariants(const Structure& s, const ScalarGrid& f, double bg) {
  REQUIRE(!s.path.empty());
  CHECK(s.path.front() == s.saddle);
  CHECK(s.path.back() == s.max);
  std::set<Coord> seen;
  for (std::size_t i = 0; i < s.path.size(); ++i) {
    CHECK(seen.insert(s.path[i]).second);
    CHECK(f.at(s.path[i]) >= bg);
    if (i == 0) continue;
    const auto nb = neighbors(s.path[i - 1], f.shape());
    CHECK(std::find(nb.begin(), nb.end(), s.path[i]) != nb.end());
    CHECK(f.at(s.path[i]) >= f.at(s.path[i - 1]));
  }
}

}  // namespace

TEST_CASE("single row with two peaks") {
  const ScalarGrid f = row({0.9f, 0.2f, 0.8f, 0.1f, 0.0f});
  const MergeTree t = build_merge_tree(f, 0.05);
  REQUIRE(t.maxima.size() == 2);
  CHECK(t.maxima[0] == Coord{0, 0});
  CHECK(t.maxima[1] == Coord{0, 2});
  REQUIRE(t.pairs.size() == 1);
  CHECK(t.pairs[0].saddle == Coord{0, 1});
  CHECK(t.pairs[0].max == Coord{0, 2});
  CHECK(t.pairs[0].persistence == doctest::Approx(0.6).epsilon(1e-6));
  CHECK_FALSE(t.processed(4));
  CHECK(t.parent_link[1] == 0);

  const MorseSkeleton sk = extract_structures(t);
  REQUIRE(sk.structures.size() == 2);
  CHECK(sk.structures[0].path == coords_1d({1, 2}));
  CHECK(sk.structures[1].path == coords_1d({1, 0}));
  for (const auto& s : sk.structures) CHECK(s.persistence == doctest::Approx(0.6).epsilon(1e-6));
  const Adjacency adj = structure_adjacency(sk);
  CHECK(adj == Adjacency{{1}, {0}});
}

TEST_CASE("monotone and constant fields have a single maximum") {
  ScalarGrid mono(Shape{5, 6});
  for (std::size_t i = 0; i < mono.size(); ++i) mono[i] = 0.1f + 0.02f * static_cast<float>(i);
  const MergeTree a = build_merge_tree(mono, 0.01);
  CHECK(a.maxima.size() == 1);
  CHECK(a.pairs.empty());
  CHECK(extract_structures(a).structures.empty());

  const ScalarGrid flat(Shape{4, 4, 3}, 0.7f);
  const MergeTree b = build_merge_tree(flat, 0.01);
  REQUIRE(b.maxima.size() == 1);
  CHECK(b.maxima[0] == Coord{0, 0, 0});
  CHECK(b.pairs.empty());
}

TEST_CASE("ascent property of parent links") {
  const ScalarGrid f = fixture::random_grid(Shape{10, 12}, 77);
  const MergeTree t = build_merge_tree(f, 0.05);
  std::vector<std::size_t> pos(f.size(), f.size());
  for (std::size_t r = 0; r < t.order.size(); ++r) pos[t.order[r]] = r;
  std::set<std::size_t> maxima;
  for (const auto& m : t.maxima) maxima.insert(f.shape().index(m));
  for (const std::size_t i : t.order) {
    if (maxima.count(i)) {
      CHECK(t.parent_link[i] == -1);
      continue;
    }
    REQUIRE(t.parent_link[i] >= 0);
    const auto p = static_cast<std::size_t>(t.parent_link[i]);
    CHECK(pos[p] < pos[i]);
    CHECK(f[p] >= f[i]);
  }
}

TEST_CASE("two crossing ridges") {
  const ScalarGrid f = fixture::two_ridges();
  const MergeTree t = build_merge_tree(f, 0.01);
  REQUIRE(t.pairs.size() == 2);
  const MorseSkeleton sk = extract_structures(t);
  REQUIRE(sk.structures.size() == 4);
  std::set<Coord> saddles, cover;
  for (const auto& s : sk.structures) {
    check_path_invariants(s, f, 0.01);
    saddles.insert(s.saddle);
    cover.insert(s.path.begin(), s.path.end());
  }
  CHECK(saddles == std::set<Coord>{{2, 2}, {6, 6}});
  const auto crest = fixture::two_ridges_crest();
  CHECK(cover == std::set<Coord>(crest.begin(), crest.end()));

  BinaryGrid m(f.shape());
  for (const auto& c : cover) m.at(c) = 1;
  CHECK(oracle::count_components(m) == 1);
  // One pixel wide: no 2x2 block is fully covered.
  for (int y = 0; y + 1 < 9; ++y)
    for (int x = 0; x + 1 < 9; ++x)
      CHECK(m.at({y, x}) + m.at({y + 1, x}) + m.at({y, x + 1}) + m.at({y + 1, x + 1}) < 4);

  const Adjacency adj = structure_adjacency(sk);
  for (std::size_t i = 0; i < adj.size(); ++i)
    for (int j : adj[i]) {
      CHECK(j != static_cast<int>(i));
      CHECK(std::binary_search(adj[static_cast<std::size_t>(j)].begin(),
                               adj[static_cast<std::size_t>(j)].end(), static_cast<int>(i)));
    }
  for (const auto& s : sk.structures)
    for (const auto& o : sk.structures)
      if (s.id != o.id && s.pair_id == o.pair_id)
        CHECK(std::binary_search(adj[static_cast<std::size_t>(s.id)].begin(),
                                 adj[static_cast<std::size_t>(s.id)].end(), o.id));
}

TEST_CASE("far apart curves are not adjacent") {
  ScalarGrid f(Shape{5, 20});
  for (int x = 0; x < 6; ++x) f.at({2, x}) = 0.5f + 0.1f * static_cast<float>(x == 0 || x == 5);
  for (int x = 12; x < 18; ++x) f.at({2, x}) = 0.5f + 0.1f * static_cast<float>(x == 12 || x == 17);
  const MorseSkeleton sk = skeletonize(f, 0.01);
  REQUIRE(sk.structures.size() == 4);
  const Adjacency adj = structure_adjacency(sk);
  CHECK(adj[0] == std::vector<int>{1});
  CHECK(adj[2] == std::vector<int>{3});
}

TEST_CASE("pairs match the brute-force sweep") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Shape s = seed % 5 == 4 ? Shape{5, 4, 6} : Shape{12, 12};
    const ScalarGrid f = fixture::random_grid(s, 1000 + seed, 6 + static_cast<int>(seed % 10));
    const double bg = 0.1;
    auto expected = oracle::persistence_pairs(f, bg);
    auto got = as_oracle(build_merge_tree(f, bg));
    const auto by_voxels = [](const oracle::Pair& a, const oracle::Pair& b) {
      return std::pair(a.saddle, a.max) < std::pair(b.saddle, b.max);
    };
    std::sort(expected.begin(), expected.end(), by_voxels);
    std::sort(got.begin(), got.end(), by_voxels);
    CHECK(got == expected);
  }
}

TEST_CASE("pairs are invariant to strictly increasing transforms") {
  const ScalarGrid f = fixture::random_grid(Shape{12, 12}, 31, 12);
  ScalarGrid g = f, h = f;
  for (auto& v : g.values()) v = v * v * v + 0.25f;
  for (auto& v : h.values()) v += 0.125f;
  const MergeTree tf = build_merge_tree(f, 0.2);
  const MergeTree tg = build_merge_tree(g, 0.2f * 0.2f * 0.2f + 0.25f);
  const MergeTree th = build_merge_tree(h, 0.325);
  REQUIRE(tf.pairs.size() == tg.pairs.size());
  REQUIRE(tf.pairs.size() == th.pairs.size());
  double pf = 0, ph = 0;
  for (std::size_t i = 0; i < tf.pairs.size(); ++i) {
    CHECK(tf.pairs[i].saddle == tg.pairs[i].saddle);
    CHECK(tf.pairs[i].max == tg.pairs[i].max);
    pf += tf.pairs[i].persistence;
    ph += th.pairs[i].persistence;
  }
  CHECK(pf == doctest::Approx(ph).epsilon(1e-6));
}

TEST_CASE("structure paths stay in the processed region") {
  const ScalarGrid f = fixture::random_grid(Shape{16, 16}, 5, 8);
  const double bg = 0.3;
  const MorseSkeleton sk = skeletonize(f, bg);
  CHECK_FALSE(sk.structures.empty());
  for (std::size_t i = 0; i < sk.structures.size(); ++i) {
    CHECK(sk.structures[i].id == static_cast<int>(i));
    check_path_invariants(sk.structures[i], f, bg);
  }
}

TEST_CASE("non-finite input is rejected") {
  ScalarGrid f(Shape{3, 3}, 0.5f);
  f[4] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(build_merge_tree(f), ContractError);
}
