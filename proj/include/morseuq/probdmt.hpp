#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "morseuq/grid.hpp"
#include "morseuq/morse.hpp"
#include "morseuq/rng.hpp"

namespace morseuq {

struct SamplerConfig {
  double u = 0.3;       // probability of keeping the deterministic structure
  double gamma = 0.2;   // weight of the distance term in the walk score
  double alpha = 2.0;   // Inverse-Gamma shape
  double beta = 0.01;   // Inverse-Gamma scale
  int max_step = 50;
  std::uint64_t seed = 0;
  int crop_padding = 16;
  // When set, replaces the Inverse-Gamma draw (0 disables perturbation).
  std::optional<double> fixed_variance;

  void validate() const;
};

// Axis-aligned inclusive voxel box.
struct Box {
  Coord lo;
  Coord hi;

  Shape shape() const;
  bool contains(const Coord& c) const;
  Coord to_local(const Coord& c) const;
  Coord to_global(const Coord& c) const;
};

Box bounding_box(const std::vector<Coord>& coords);
Box pad_box(const Box& b, int padding, const Shape& within);
ScalarGrid extract_box(const ScalarGrid& g, const Box& b);

struct SampledSkeleton {
  int structure_id = -1;
  Coord origin;      // global position of mask voxel (0,..,0)
  BinaryGrid mask;   // exactly the walked voxels, in crop coordinates
  std::vector<Coord> path;  // global coordinates, path[0] is the saddle
  bool reached = false;
  bool was_retained = false;
};

// sigma^2 ~ InverseGamma(alpha, beta), drawn as 1/G with G ~ Gamma(alpha, rate beta).
double sample_variance(const SamplerConfig& cfg, Rng& rng);

// f + N(0, variance) per voxel, unclamped.
ScalarGrid perturb(const ScalarGrid& f, double variance, Rng& rng);

// Greedy walk on f_n from c_s towards c_m scored by
//   Q(c') = gamma / |c_m - c'| + (1 - gamma) f_n(c'),
// with c_m taken as soon as it is an unvisited neighbor. Visited voxels are
// never revisited; the walk stops at c_m, at a dead end, or after max_step.
// Coordinates are those of f_n; the result has origin zero.
SampledSkeleton generate_path(const ScalarGrid& f_n, const Coord& c_s, const Coord& c_m,
                              double gamma, int max_step);

// One Bernoulli retain-or-resample draw for structure e. The stream is keyed
// on (cfg.seed, e.id, run_index), so results do not depend on call order.
SampledSkeleton sample_structure(const Structure& e, const ScalarGrid& f, const SamplerConfig& cfg,
                                 int run_index);

// sample_structure for every structure of the skeleton; result[i] belongs to id i.
std::vector<SampledSkeleton> sample_skeleton(const MorseSkeleton& skel, const ScalarGrid& f,
                                             const SamplerConfig& cfg, int run_index, int jobs = 1);

}  // namespace morseuq
