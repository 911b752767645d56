#include "morseuq/morse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace morseuq {

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];  // path halving
      x = parent_[x];
    }
    return x;
  }

  // Returns the surviving root.
  std::size_t unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

struct Touch {
  std::size_t root;
  std::size_t entry;  // highest-key neighbor of the current pixel in this component
};

}  // namespace

MergeTree build_merge_tree(const ScalarGrid& f, double bg_threshold) {
  const Shape& shape = f.shape();
  MergeTree tree;
  tree.shape = shape;
  tree.parent_link.assign(shape.size(), -1);
  tree.component_root.assign(shape.size(), -1);

  for (std::size_t i = 0; i < f.size(); ++i) {
    require(std::isfinite(f[i]), "build_merge_tree: non-finite value at " + to_string(shape.coord(i)));
    if (f[i] >= bg_threshold) tree.order.push_back(i);
  }
  std::sort(tree.order.begin(), tree.order.end(), [&](std::size_t a, std::size_t b) {
    if (f[a] != f[b]) return f[a] > f[b];
    return a < b;
  });

  constexpr std::size_t kUnprocessed = static_cast<std::size_t>(-1);
  std::vector<std::size_t> rank_of(shape.size(), kUnprocessed);
  UnionFind uf(shape.size());
  std::vector<std::size_t> comp_max(shape.size(), kUnprocessed);  // valid at roots
  const Neighborhood nbhd(shape);
  std::vector<Touch> touches;

  for (std::size_t pos = 0; pos < tree.order.size(); ++pos) {
    const std::size_t p = tree.order[pos];
    touches.clear();
    std::size_t best = kUnprocessed;
    nbhd.for_each(p, [&](std::size_t n) {
      if (rank_of[n] == kUnprocessed) return;
      if (best == kUnprocessed || rank_of[n] < rank_of[best]) best = n;
      const std::size_t r = uf.find(n);
      auto it = std::find_if(touches.begin(), touches.end(), [&](const Touch& t) { return t.root == r; });
      if (it == touches.end()) {
        touches.push_back({r, n});
      } else if (rank_of[n] < rank_of[it->entry]) {
        it->entry = n;
      }
    });
    rank_of[p] = pos;

    if (touches.empty()) {
      comp_max[p] = p;
      tree.maxima.push_back(shape.coord(p));
      continue;
    }
    tree.parent_link[p] = static_cast<std::int64_t>(best);

    // Elder component first, then the younger ones by decreasing max key.
    std::sort(touches.begin(), touches.end(), [&](const Touch& a, const Touch& b) {
      return rank_of[comp_max[a.root]] < rank_of[comp_max[b.root]];
    });
    const Touch elder = touches.front();
    const std::size_t elder_max = comp_max[elder.root];
    for (std::size_t k = 1; k < touches.size(); ++k) {
      const std::size_t young_max = comp_max[touches[k].root];
      PersistencePair pair;
      pair.saddle = shape.coord(p);
      pair.max = shape.coord(young_max);
      pair.persistence = static_cast<double>(f[young_max]) - static_cast<double>(f[p]);
      pair.young_entry = shape.coord(touches[k].entry);
      pair.elder_max = shape.coord(elder_max);
      pair.elder_entry = shape.coord(elder.entry);
      tree.pairs.push_back(pair);
    }
    std::size_t root = uf.unite(p, elder.root);
    for (std::size_t k = 1; k < touches.size(); ++k) root = uf.unite(root, touches[k].root);
    comp_max[root] = elder_max;
  }

  for (std::size_t p : tree.order)
    tree.component_root[p] = static_cast<std::int64_t>(comp_max[uf.find(p)]);
  return tree;
}

namespace {

std::vector<Coord> ascend(const MergeTree& tree, const Coord& saddle, const Coord& entry) {
  std::vector<Coord> path{saddle};
  std::int64_t cur = static_cast<std::int64_t>(tree.shape.index(entry));
  while (cur >= 0) {
    path.push_back(tree.shape.coord(static_cast<std::size_t>(cur)));
    cur = tree.parent_link[static_cast<std::size_t>(cur)];
  }
  return path;
}

}  // namespace

MorseSkeleton extract_structures(const MergeTree& tree) {
  MorseSkeleton skel;
  skel.source_shape = tree.shape;
  skel.structures.reserve(2 * tree.pairs.size());
  for (std::size_t k = 0; k < tree.pairs.size(); ++k) {
    const auto& pair = tree.pairs[k];
    for (Leg leg : {Leg::young, Leg::elder}) {
      Structure s;
      s.id = static_cast<int>(skel.structures.size());
      s.saddle = pair.saddle;
      s.path = ascend(tree, pair.saddle, leg == Leg::young ? pair.young_entry : pair.elder_entry);
      s.max = s.path.back();
      s.persistence = pair.persistence;
      s.pair_id = static_cast<int>(k);
      s.leg = leg;
      skel.structures.push_back(std::move(s));
    }
  }
  return skel;
}

Adjacency structure_adjacency(const MorseSkeleton& skel) {
  const Shape& shape = skel.source_shape;
  std::unordered_map<std::size_t, std::vector<int>> owners;
  for (const auto& s : skel.structures)
    for (const auto& c : s.path) {
      auto& v = owners[shape.index(c)];
      if (v.empty() || v.back() != s.id) v.push_back(s.id);
    }
  Adjacency adj(skel.structures.size());
  for (const auto& [voxel, ids] : owners)
    for (int a : ids)
      for (int b : ids)
        if (a != b) adj[static_cast<std::size_t>(a)].push_back(b);
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

}  // namespace morseuq
