#pragma once

#include <cstdint>

#include "morseuq/grid.hpp"

namespace morseuq {

struct SynthConfig {
  Shape shape{64, 64};
  int n_curves = 3;
  int thickness = 2;
  double gap_rate = 0.0;   // chance of deleting a curve segment from the likelihood
  double spur_rate = 0.0;  // chance of growing a spurious branch off a segment
  double blur_sigma = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  // Throws ContractError naming the offending field.
  void validate() const;
};

struct SynthCase {
  ScalarGrid image;
  BinaryGrid gt;
  ScalarGrid likelihood;
};

SynthCase generate_case(const SynthConfig& cfg);

// Separable Gaussian blur, kernel truncated at 3 sigma, clamp-to-edge borders.
// sigma == 0 returns the input unchanged.
ScalarGrid gaussian_blur(const ScalarGrid& g, double sigma);

}  // namespace morseuq
