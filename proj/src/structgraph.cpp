#include "morseuq/structgraph.hpp"

#include <algorithm>

namespace morseuq {

namespace {

Shape box_shape(int rank, int box) {
  return rank == 2 ? Shape{box, box} : Shape{box, box, box};
}

template <class T>
Grid<T> crop_impl(const Grid<T>& g, const Coord& center, int box) {
  require(box > 0 && box % 2 == 0, "crop: box must be a positive even integer");
  require(g.shape().contains(center), "crop: center out of bounds");
  const Shape& shape = g.shape();
  const Shape out_shape = box_shape(shape.rank(), box);
  Grid<T> out(out_shape);
  const int half = box / 2;
  // Copy row by row along the last axis.
  const int last = shape.rank() - 1;
  const std::size_t rows = out_shape.size() / static_cast<std::size_t>(box);
  for (std::size_t r = 0; r < rows; ++r) {
    Coord local = out_shape.coord(r * static_cast<std::size_t>(box));
    Coord global = local;
    bool inside = true;
    for (int a = 0; a < last; ++a) {
      global[a] = center[a] - half + local[a];
      if (global[a] < 0 || global[a] >= shape.dim(a)) inside = false;
    }
    if (!inside) continue;
    const int start = center[last] - half;
    const int lo = std::max(0, start);
    const int hi = std::min(shape.dim(last), start + box);
    global[last] = 0;
    const std::size_t row_base = shape.index(global);
    for (int x = lo; x < hi; ++x)
      out[r * static_cast<std::size_t>(box) + static_cast<std::size_t>(x - start)] =
          g[row_base + static_cast<std::size_t>(x)];
  }
  return out;
}

}  // namespace

ScalarGrid crop(const ScalarGrid& g, const Coord& center, int box) { return crop_impl(g, center, box); }
BinaryGrid crop(const BinaryGrid& g, const Coord& center, int box) { return crop_impl(g, center, box); }

Coord node_center(const Structure& s, const Shape& shape, int box) {
  const Box bb = bounding_box(s.path);
  Coord c = bb.lo;
  const int half = box / 2;
  for (int a = 0; a < shape.rank(); ++a) {
    c[a] = (bb.lo[a] + bb.hi[a]) / 2;
    c[a] = std::clamp(c[a], s.saddle[a] - half + 1, s.saddle[a] + half);
    c[a] = std::clamp(c[a], 0, shape.dim(a) - 1);
  }
  return c;
}

double soft_label(const std::vector<Coord>& path, const BinaryGrid& gt) {
  if (path.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& c : path) hits += gt.at(c) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(path.size());
}

GraphBuilder::GraphBuilder(const MorseSkeleton& skel, const ScalarGrid& x, const ScalarGrid& f, int box)
    : box_(box), shape_(f.shape()), adjacency_(structure_adjacency(skel)) {
  require(x.shape() == f.shape(), "build_graph: image and likelihood dims differ");
  require(skel.source_shape == f.shape(), "build_graph: skeleton dims differ from likelihood");
  base_.reserve(skel.structures.size());
  for (const auto& s : skel.structures) {
    NodeInput n;
    n.structure_id = s.id;
    n.center = node_center(s, shape_, box);
    n.x_crop = crop(x, n.center, box);
    n.f_crop = crop(f, n.center, box);
    n.persistence = s.persistence;
    base_.push_back(std::move(n));
  }
}

StructureGraph GraphBuilder::build(const std::vector<SampledSkeleton>& samples, const BinaryGrid* gt) const {
  StructureGraph g;
  g.adjacency = adjacency_;
  g.nodes = base_;
  if (gt) {
    require(gt->shape() == shape_, "build_graph: ground truth dims differ");
    g.labels.emplace(base_.size());
  }
  for (std::size_t i = 0; i < base_.size(); ++i)
    if (i >= samples.size() || samples[i].structure_id != static_cast<int>(i))
      throw DataError("build_graph: missing sample for structure " + std::to_string(i));

  const Shape window = box_shape(shape_.rank(), box_);
  const int half = box_ / 2;
  for (std::size_t i = 0; i < base_.size(); ++i) {
    auto& node = g.nodes[i];
    node.m_crop = BinaryGrid(window);
    for (const auto& c : samples[i].path) {
      Coord local = c;
      bool inside = true;
      for (int a = 0; a < shape_.rank(); ++a) {
        local[a] = c[a] - node.center[a] + half;
        if (local[a] < 0 || local[a] >= box_) inside = false;
      }
      if (inside) node.m_crop[window.index(local)] = 1;
    }
    if (gt) (*g.labels)[i] = soft_label(samples[i].path, *gt);
  }
  return g;
}

StructureGraph build_graph(const MorseSkeleton& skel, const std::vector<SampledSkeleton>& samples,
                           const ScalarGrid& x, const ScalarGrid& f, const BinaryGrid* gt, int box) {
  return GraphBuilder(skel, x, f, box).build(samples, gt);
}

}  // namespace morseuq
