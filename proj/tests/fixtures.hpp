#pragma once

#include <algorithm>
#include <vector>

#include "morseuq/grid.hpp"
#include "morseuq/rng.hpp"
#include "morseuq/structgraph.hpp"

namespace fixture {

using morseuq::Coord;
using morseuq::ScalarGrid;
using morseuq::Shape;

// Two ridges on a 9x9 grid: the main diagonal, dipping at (2,2) and (6,6),
// and an arm from the centre up to the top-right corner.
inline ScalarGrid two_ridges() {
  ScalarGrid f(Shape{9, 9});
  const float diag[9] = {0.9f, 0.6f, 0.3f, 0.5f, 0.55f, 0.5f, 0.35f, 0.6f, 0.8f};
  for (int i = 0; i < 9; ++i) f.at({i, i}) = diag[i];
  f.at({3, 5}) = 0.6f;
  f.at({2, 6}) = 0.65f;
  f.at({1, 7}) = 0.7f;
  f.at({0, 8}) = 0.75f;
  return f;
}

inline std::vector<Coord> two_ridges_crest() {
  std::vector<Coord> c;
  for (int i = 0; i < 9; ++i) c.push_back({i, i});
  for (const Coord& a : {Coord{3, 5}, Coord{2, 6}, Coord{1, 7}, Coord{0, 8}}) c.push_back(a);
  return c;
}

// Values on a coarse lattice of `levels` steps so ties are common.
inline ScalarGrid random_grid(const Shape& s, std::uint64_t seed, int levels = 16) {
  morseuq::Rng rng(seed);
  ScalarGrid f(s);
  for (auto& v : f.values()) v = static_cast<float>(rng.below(static_cast<std::uint64_t>(levels))) / (levels - 1);
  return f;
}

inline morseuq::BinaryGrid random_mask(const Shape& s, std::uint64_t seed, double density = 0.5) {
  morseuq::Rng rng(seed);
  morseuq::BinaryGrid m(s);
  for (auto& v : m.values()) v = rng.bernoulli(density) ? 1 : 0;
  return m;
}

// Graph with random crops, persistence and labels; edges with probability p.
inline morseuq::StructureGraph random_graph(int nodes, int box, int rank, std::uint64_t seed, double p = 0.4) {
  morseuq::Rng rng(seed);
  morseuq::StructureGraph g;
  const Shape window = rank == 2 ? Shape{box, box} : Shape{box, box, box};
  g.adjacency.assign(static_cast<std::size_t>(nodes), {});
  g.labels.emplace();
  for (int i = 0; i < nodes; ++i) {
    morseuq::NodeInput n;
    n.structure_id = i;
    n.x_crop = ScalarGrid(window);
    n.f_crop = ScalarGrid(window);
    n.m_crop = morseuq::BinaryGrid(window);
    for (std::size_t k = 0; k < window.size(); ++k) {
      n.x_crop[k] = static_cast<float>(rng.uniform());
      n.f_crop[k] = static_cast<float>(rng.uniform());
      n.m_crop[k] = rng.bernoulli(0.2) ? 1 : 0;
    }
    n.persistence = rng.uniform();
    g.nodes.push_back(std::move(n));
    g.labels->push_back(rng.uniform());
  }
  for (int i = 0; i < nodes; ++i)
    for (int j = i + 1; j < nodes; ++j)
      if (rng.bernoulli(p)) {
        g.adjacency[static_cast<std::size_t>(i)].push_back(j);
        g.adjacency[static_cast<std::size_t>(j)].push_back(i);
      }
  for (auto& a : g.adjacency) std::sort(a.begin(), a.end());
  return g;
}

}  // namespace fixture
