#pragma once

#include <string>
#include <vector>

#include "morseuq/grid.hpp"
#include "morseuq/inferpost.hpp"

namespace morseuq {

struct CalSample {
  double confidence = 0.0;
  bool correct = false;
};

struct ReliabilityRow {
  int bin = 0;
  std::size_t count = 0;
  double accuracy = 0.0;    // 0 for an empty bin
  double confidence = 0.0;  // mean confidence, 0 for an empty bin
};

struct Calibration {
  double ece = 0.0;
  std::vector<ReliabilityRow> rows;  // all bins, in order
};

inline constexpr int kCalibrationBins = 20;

// Bin i holds confidences in [i/N, (i+1)/N); the last bin also takes 1.
Calibration calibration(const std::vector<CalSample>& samples, int bins = kCalibrationBins);

// Confidence 1 - u_norm; correct when (p_bar >= 0.5) == (z >= 0.5).
std::vector<CalSample> structure_samples(const std::vector<StructureEstimate>& estimates,
                                         const std::vector<double>& soft_labels);

// "bin,count,acc,conf" header plus one line per row.
std::string reliability_csv(const std::vector<ReliabilityRow>& rows);

double dice(const BinaryGrid& pred, const BinaryGrid& gt);

// Morphological skeleton: union over k of E^k(X) minus its opening, with the
// face-connected cross as structuring element. Outside the grid is background.
BinaryGrid morphological_skeleton(const BinaryGrid& mask);
double cldice(const BinaryGrid& pred, const BinaryGrid& gt);

// Component id per voxel, -1 on background; ids follow first-voxel order.
std::vector<int> label_components(const BinaryGrid& mask, Connectivity conn, int* count = nullptr);

struct AriVoi {
  double ari = 1.0;
  double voi = 0.0;
};
// Clusters are the full-connectivity foreground components plus background.
AriVoi ari_voi(const BinaryGrid& pred, const BinaryGrid& gt);

// 2D: {b0, b1}; 3D: {b0, b1, b2}. Foreground uses full connectivity, the
// background (padded by one voxel) face connectivity.
std::vector<int> betti_numbers(const BinaryGrid& mask);
std::vector<int> betti_errors(const BinaryGrid& pred, const BinaryGrid& gt);

}  // namespace morseuq
