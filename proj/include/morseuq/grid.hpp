#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "morseuq/errors.hpp"

namespace morseuq {

inline constexpr int kMaxRank = 3;

// Voxel coordinate. Comparison is lexicographic over the components, which
// for a fixed shape coincides with row-major linear index order.
struct Coord {
  std::array<int, kMaxRank> v{};
  int rank = 0;

  Coord() = default;
  Coord(std::initializer_list<int> comps);

  int operator[](int axis) const { return v[static_cast<std::size_t>(axis)]; }
  int& operator[](int axis) { return v[static_cast<std::size_t>(axis)]; }

  friend bool operator==(const Coord&, const Coord&) = default;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

std::string to_string(const Coord& c);

// Dimensions of a 2D (H,W) or 3D (D,H,W) grid, row-major, last index fastest.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> dims);
  explicit Shape(std::span<const int> dims);

  int rank() const { return rank_; }
  int dim(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
  std::size_t size() const { return size_; }
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }
  std::vector<int> dims() const;

  bool contains(const Coord& c) const;
  std::size_t index(const Coord& c) const;
  Coord coord(std::size_t index) const;

  friend bool operator==(const Shape& a, const Shape& b) {
    return a.rank_ == b.rank_ && a.dims_ == b.dims_;
  }

 private:
  std::array<int, kMaxRank> dims_{};
  std::array<std::size_t, kMaxRank> strides_{};
  std::size_t size_ = 0;
  int rank_ = 0;
};

std::string to_string(const Shape& s);

template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Shape shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
  Grid(Shape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
    require(data_.size() == shape_.size(), "grid: value count does not match dims");
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T at(const Coord& c) const { return data_[checked_index(c)]; }
  T& at(const Coord& c) { return data_[checked_index(c)]; }

  std::span<const T> values() const { return data_; }
  std::span<T> values() { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t checked_index(const Coord& c) const {
    require(shape_.contains(c), "grid: coordinate " + to_string(c) + " out of bounds");
    return shape_.index(c);
  }

  Shape shape_;
  std::vector<T> data_;
};

using ScalarGrid = Grid<float>;
using BinaryGrid = Grid<std::uint8_t>;

enum class Connectivity {
  full,  // 8 in 2D, 26 in 3D
  face,  // 4 in 2D, 6 in 3D
};

// All in-bounds coordinates adjacent to c, in ascending lexicographic order.
std::vector<Coord> neighbors(const Coord& c, const Shape& shape,
                             Connectivity conn = Connectivity::full);

// Precomputed neighbor offsets for hot loops over linear indices.
class Neighborhood {
 public:
  explicit Neighborhood(const Shape& shape, Connectivity conn = Connectivity::full);

  const Shape& shape() const { return shape_; }

  // Calls fn(neighbor_index) for every in-bounds neighbor of `index`,
  // in ascending lexicographic order.
  template <class Fn>
  void for_each(std::size_t index, Fn&& fn) const {
    const Coord c = shape_.coord(index);
    for (const auto& off : offsets_) {
      bool inside = true;
      for (int a = 0; a < shape_.rank(); ++a) {
        const int x = c[a] + off.delta[static_cast<std::size_t>(a)];
        if (x < 0 || x >= shape_.dim(a)) {
          inside = false;
          break;
        }
      }
      if (inside) fn(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(index) + off.linear));
    }
  }

 private:
  struct Offset {
    std::array<int, kMaxRank> delta{};
    std::ptrdiff_t linear = 0;
  };
  Shape shape_;
  std::vector<Offset> offsets_;
};

// Number of axes on which two adjacent coordinates differ (1..rank).
int differing_axes(const Coord& a, const Coord& b);

BinaryGrid binarize(const ScalarGrid& g, float threshold);
ScalarGrid to_scalar(const BinaryGrid& g);
std::size_t count_foreground(const BinaryGrid& g);

}  // namespace morseuq
