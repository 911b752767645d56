#pragma once

#include <optional>
#include <vector>

#include "morseuq/grid.hpp"
#include "morseuq/morse.hpp"
#include "morseuq/probdmt.hpp"

namespace morseuq {

inline constexpr int kDefaultBox = 32;

struct NodeInput {
  int structure_id = -1;
  ScalarGrid x_crop;
  ScalarGrid f_crop;  // from the unperturbed likelihood
  BinaryGrid m_crop;  // the current sample's voxels
  double persistence = 0.0;
  Coord center;
};

struct StructureGraph {
  std::vector<NodeInput> nodes;
  Adjacency adjacency;
  std::optional<std::vector<double>> labels;
};

// Window of side `box` per axis with `center` at index box/2, zero outside g.
ScalarGrid crop(const ScalarGrid& g, const Coord& center, int box);
BinaryGrid crop(const BinaryGrid& g, const Coord& center, int box);

// Bounding-box center of the deterministic path, shifted (only when the
// structure is larger than the box) so the window still contains the saddle.
Coord node_center(const Structure& s, const Shape& shape, int box);

// Fraction of the path's voxels that lie on ground-truth foreground.
double soft_label(const std::vector<Coord>& path, const BinaryGrid& gt);

// Caches everything that does not change between sample draws: centers,
// image/likelihood crops and adjacency.
class GraphBuilder {
 public:
  GraphBuilder(const MorseSkeleton& skel, const ScalarGrid& x, const ScalarGrid& f, int box = kDefaultBox);

  // samples[i] must belong to structure i. Labels are filled when gt is given.
  StructureGraph build(const std::vector<SampledSkeleton>& samples, const BinaryGrid* gt) const;

  int box() const { return box_; }
  std::size_t size() const { return base_.size(); }

 private:
  int box_;
  Shape shape_;
  std::vector<NodeInput> base_;
  Adjacency adjacency_;
};

StructureGraph build_graph(const MorseSkeleton& skel, const std::vector<SampledSkeleton>& samples,
                           const ScalarGrid& x, const ScalarGrid& f, const BinaryGrid* gt,
                           int box = kDefaultBox);

}  // namespace morseuq
