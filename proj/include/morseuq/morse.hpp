#pragma once

#include <cstdint>
#include <vector>

#include "morseuq/grid.hpp"

namespace morseuq {

inline constexpr double kDefaultBackgroundThreshold = 0.01;

struct PersistencePair {
  Coord saddle;
  Coord max;  // the younger (lower) maximum of the merge
  double persistence = 0.0;
  // Highest-key neighbor of the saddle inside each merged component.
  Coord young_entry;
  Coord elder_max;
  Coord elder_entry;
};

// Superlevel-set merge tree of f with ascent links.
//
// Pixels with f >= bg_threshold are swept in strictly decreasing key order,
// key = (f, lexicographically smaller coordinate first). A pixel touching no
// processed component is a maximum, touching one joins it, touching k >= 2
// is a saddle emitting k-1 pairs under the elder rule.
struct MergeTree {
  Shape shape;
  std::vector<std::size_t> order;  // processed linear indices, decreasing key
  // Per voxel: highest-key processed neighbor at processing time, or -1 for
  // maxima and unprocessed voxels.
  std::vector<std::int64_t> parent_link;
  // Per voxel: linear index of the elder maximum of its final component,
  // or -1 when unprocessed.
  std::vector<std::int64_t> component_root;
  std::vector<Coord> maxima;  // in birth order
  std::vector<PersistencePair> pairs;  // in saddle processing order

  bool processed(std::size_t index) const { return component_root[index] >= 0; }
};

MergeTree build_merge_tree(const ScalarGrid& f, double bg_threshold = kDefaultBackgroundThreshold);

enum class Leg : std::uint8_t { young, elder };

// One saddle-to-maximum ridge leg.
struct Structure {
  int id = 0;
  Coord saddle;
  Coord max;  // terminus of the ascent chain
  std::vector<Coord> path;  // saddle first, max last
  double persistence = 0.0;
  int pair_id = 0;  // shared by the two legs of one persistence pair
  Leg leg = Leg::young;
};

struct MorseSkeleton {
  Shape source_shape;
  std::vector<Structure> structures;
};

// Two legs per pair: (a) through the younger component's entry neighbor,
// (b) through the elder's, each following parent links up to a maximum.
MorseSkeleton extract_structures(const MergeTree& tree);

inline MorseSkeleton skeletonize(const ScalarGrid& f,
                                 double bg_threshold = kDefaultBackgroundThreshold) {
  return extract_structures(build_merge_tree(f, bg_threshold));
}

// adjacency[i] lists, ascending, the structures sharing at least one voxel
// with structure i. Symmetric and irreflexive.
using Adjacency = std::vector<std::vector<int>>;
Adjacency structure_adjacency(const MorseSkeleton& skel);

}  // namespace morseuq
