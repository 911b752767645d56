#pragma once

// Brute-force reference implementations used to check the library. They
// share no code with the routines under test beyond the grid containers.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "morseuq/grid.hpp"
#include "morseuq/regressor.hpp"

namespace oracle {

using morseuq::BinaryGrid;
using morseuq::ScalarGrid;

struct Pair {
  std::size_t saddle = 0;
  std::size_t max = 0;
  double persistence = 0.0;
  friend bool operator==(const Pair&, const Pair&) = default;
};

// Adds voxels one at a time in decreasing (f, then smaller index) order and
// relabels the superlevel set from scratch by flood fill after every step.
std::vector<Pair> persistence_pairs(const ScalarGrid& f, double bg_threshold);

// Component id per voxel (-1 on background), full connectivity, flood fill.
std::vector<int> components(const BinaryGrid& m, bool face_only = false);
int count_components(const BinaryGrid& m, bool face_only = false);

// 2D: beta0 by 8-connected flood fill, beta1 = beta0 - chi with chi counted
// over the union of closed pixel squares.
struct Betti2 {
  int b0 = 0;
  int b1 = 0;
};
Betti2 betti_2d(const BinaryGrid& m);

double dice(const BinaryGrid& p, const BinaryGrid& g);
// Pair-counting form over all voxel pairs.
double ari(const BinaryGrid& p, const BinaryGrid& g);
// Sum of the two conditional entropies, in nats.
double voi(const BinaryGrid& p, const BinaryGrid& g);
// Intervals [i/N, (i+1)/N), last one closed, checked by linear scan.
double ece(const std::vector<double>& confidence, const std::vector<bool>& correct, int bins);

// Central-difference check of morseuq::backward. Tensors with more than
// `max_entries` entries are probed on a seeded random subset. Returns per
// tensor ||analytic - numeric|| / max(||analytic||, ||numeric||). With
// `kinks` set, probes whose central difference at eps and eps/10 disagree by
// more than 1% straddle a ReLU or max-pool kink; they are skipped and counted.
std::array<double, morseuq::kTensorCount> gradient_errors(const morseuq::RegressorParams& params,
                                                          const morseuq::StructureGraph& graph,
                                                          const std::vector<double>& labels,
                                                          double eps, std::size_t max_entries,
                                                          std::uint64_t seed, std::size_t* kinks = nullptr);

}  // namespace oracle
