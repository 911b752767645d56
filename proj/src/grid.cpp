#include "morseuq/grid.hpp"

#include <algorithm>
#include <numeric>

namespace morseuq {

Coord::Coord(std::initializer_list<int> comps) {
  require(comps.size() >= 1 && comps.size() <= kMaxRank, "coord: rank must be 1..3");
  rank = static_cast<int>(comps.size());
  std::copy(comps.begin(), comps.end(), v.begin());
}

std::string to_string(const Coord& c) {
  std::string s = "(";
  for (int a = 0; a < c.rank; ++a) {
    if (a) s += ",";
    s += std::to_string(c[a]);
  }
  return s + ")";
}

Shape::Shape(std::initializer_list<int> dims)
    : Shape(std::span<const int>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const int> dims) {
  require(dims.size() == 2 || dims.size() == 3, "shape: rank must be 2 or 3");
  rank_ = static_cast<int>(dims.size());
  for (int a = 0; a < rank_; ++a) {
    require(dims[static_cast<std::size_t>(a)] >= 1, "shape: dims must be positive");
    dims_[static_cast<std::size_t>(a)] = dims[static_cast<std::size_t>(a)];
  }
  std::size_t stride = 1;
  for (int a = rank_ - 1; a >= 0; --a) {
    strides_[static_cast<std::size_t>(a)] = stride;
    stride *= static_cast<std::size_t>(dims_[static_cast<std::size_t>(a)]);
  }
  size_ = stride;
}

std::vector<int> Shape::dims() const { return {dims_.begin(), dims_.begin() + rank_}; }

bool Shape::contains(const Coord& c) const {
  if (c.rank != rank_) return false;
  for (int a = 0; a < rank_; ++a)
    if (c[a] < 0 || c[a] >= dim(a)) return false;
  return true;
}

std::size_t Shape::index(const Coord& c) const {
  std::size_t i = 0;
  for (int a = 0; a < rank_; ++a) i += static_cast<std::size_t>(c[a]) * stride(a);
  return i;
}

Coord Shape::coord(std::size_t index) const {
  Coord c;
  c.rank = rank_;
  for (int a = 0; a < rank_; ++a) {
    c[a] = static_cast<int>(index / stride(a));
    index %= stride(a);
  }
  return c;
}

std::string to_string(const Shape& s) {
  std::string out = "[";
  for (int a = 0; a < s.rank(); ++a) {
    if (a) out += ",";
    out += std::to_string(s.dim(a));
  }
  return out + "]";
}

namespace {

// Offsets in lexicographic order: -1 < 0 < 1 per axis, first axis slowest.
std::vector<std::array<int, kMaxRank>> make_offsets(int rank, Connectivity conn) {
  std::vector<std::array<int, kMaxRank>> out;
  const int total = rank == 2 ? 9 : 27;
  for (int k = 0; k < total; ++k) {
    std::array<int, kMaxRank> d{};
    int rem = k;
    int nonzero = 0;
    for (int a = rank - 1; a >= 0; --a) {
      d[static_cast<std::size_t>(a)] = rem % 3 - 1;
      rem /= 3;
      nonzero += d[static_cast<std::size_t>(a)] != 0;
    }
    if (nonzero == 0) continue;
    if (conn == Connectivity::face && nonzero != 1) continue;
    out.push_back(d);
  }
  return out;
}

}  // namespace

std::vector<Coord> neighbors(const Coord& c, const Shape& shape, Connectivity conn) {
  require(shape.contains(c), "neighbors: coordinate " + to_string(c) + " out of bounds");
  std::vector<Coord> out;
  for (const auto& d : make_offsets(shape.rank(), conn)) {
    Coord n = c;
    bool inside = true;
    for (int a = 0; a < shape.rank(); ++a) {
      n[a] += d[static_cast<std::size_t>(a)];
      if (n[a] < 0 || n[a] >= shape.dim(a)) inside = false;
    }
    if (inside) out.push_back(n);
  }
  return out;
}

Neighborhood::Neighborhood(const Shape& shape, Connectivity conn) : shape_(shape) {
  for (const auto& d : make_offsets(shape.rank(), conn)) {
    Offset o;
    o.delta = d;
    for (int a = 0; a < shape.rank(); ++a)
      o.linear += static_cast<std::ptrdiff_t>(d[static_cast<std::size_t>(a)]) *
                  static_cast<std::ptrdiff_t>(shape.stride(a));
    offsets_.push_back(o);
  }
}

int differing_axes(const Coord& a, const Coord& b) {
  int n = 0;
  for (int k = 0; k < a.rank; ++k) n += a[k] != b[k];
  return n;
}

BinaryGrid binarize(const ScalarGrid& g, float threshold) {
  BinaryGrid out(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] >= threshold ? 1 : 0;
  return out;
}

ScalarGrid to_scalar(const BinaryGrid& g) {
  ScalarGrid out(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] ? 1.0f : 0.0f;
  return out;
}

std::size_t count_foreground(const BinaryGrid& g) {
  return static_cast<std::size_t>(
      std::count_if(g.values().begin(), g.values().end(), [](std::uint8_t b) { return b != 0; }));
}

}  // namespace morseuq
