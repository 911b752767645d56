#pragma once

#include <cstdint>
#include <vector>

#include "morseuq/regressor.hpp"

namespace morseuq {

struct StructureEstimate {
  int structure_id = -1;
  double p_bar = 0.0;
  double var_bar = 0.0;
  double u_norm = 0.0;  // 1 - exp(-var_bar)
  bool accepted = false;
  std::vector<std::vector<Coord>> sample_paths;  // one per run
};

struct InferConfig {
  int runs = 5;
  std::uint64_t seed = 0;  // dropout masks; the sampler keeps its own seed
  double dropout = 0.2;
  bool mc_dropout = true;
  int box = kDefaultBox;
  int jobs = 1;

  void validate() const;
};

double normalized_uncertainty(double var_bar);

// T passes of resample-then-forward; run t uses sampler run_index t and
// dropout seed derive_seed(seed, t).
std::vector<StructureEstimate> mc_inference(const RegressorParams& params, const MorseSkeleton& skel,
                                            const ScalarGrid& x, const ScalarGrid& f,
                                            const SamplerConfig& sampler, const InferConfig& cfg);

// Multi-source geodesic labelling restricted to `domain`. Steps cost 1,
// sqrt(2) or sqrt(3) by the number of axes changed. Each voxel takes the
// label of its nearest source; equal distances go to the smaller label.
// Voxels outside the domain or unreachable get -1.
struct GeodesicLabels {
  std::vector<int> label;
  std::vector<double> distance;
};
struct LabeledSource {
  std::size_t index;
  int label;
};
GeodesicLabels geodesic_labels(const BinaryGrid& domain, const std::vector<LabeledSource>& sources);

// Overlay of structure decisions onto a backbone segmentation.
//
// Every voxel of backbone-or-skeleton is attributed once to its nearest
// structure (over all structures, decided or not). The final mask keeps a
// backbone voxel unless its structure is rejected, and adds every accepted
// path. Toggling one structure only touches its own region, which is what
// makes interactive updates cheap.
class Overlay {
 public:
  Overlay(const MorseSkeleton& skel, const BinaryGrid& backbone);

  void set_accepted(int structure_id, bool accepted);
  void set_all(const std::vector<bool>& accepted);
  bool accepted(int structure_id) const { return accepted_[static_cast<std::size_t>(structure_id)]; }

  const BinaryGrid& final_mask() const { return final_; }
  BinaryGrid skeletal_mask() const;
  const BinaryGrid& backbone() const { return backbone_; }
  // Nearest structure per voxel, -1 where none applies.
  const std::vector<int>& owner() const { return owner_; }
  // Voxels attributed to a structure plus its own path.
  const std::vector<std::size_t>& region(int structure_id) const {
    return region_[static_cast<std::size_t>(structure_id)];
  }

 private:
  void refresh(std::size_t voxel);

  const MorseSkeleton* skel_;
  BinaryGrid backbone_;
  std::vector<int> owner_;
  std::vector<std::vector<std::size_t>> paths_;  // linear indices
  std::vector<std::vector<std::size_t>> region_;
  std::vector<bool> accepted_;
  std::vector<int> cover_;  // accepted paths through each voxel
  BinaryGrid final_;
};

struct OverlayMasks {
  BinaryGrid skeletal_mask;
  BinaryGrid final_mask;
};
OverlayMasks threshold_and_overlay(const std::vector<StructureEstimate>& estimates, const MorseSkeleton& skel,
                                   const BinaryGrid& backbone);

// Geodesic spread of accepted structures' u_norm over final_mask; foreground
// unreachable from any accepted path gets 1, background 0.
ScalarGrid diffuse_uncertainty(const std::vector<StructureEstimate>& estimates, const MorseSkeleton& skel,
                               const BinaryGrid& final_mask);

struct CaseResult {
  std::vector<StructureEstimate> estimates;
  BinaryGrid backbone_seg;
  BinaryGrid skeletal_mask;
  BinaryGrid final_mask;
  ScalarGrid heatmap;
};

inline constexpr float kBackboneThreshold = 0.5f;

// Backbone = likelihood >= 0.5, then overlay and diffusion.
CaseResult postprocess(std::vector<StructureEstimate> estimates, const MorseSkeleton& skel,
                       const ScalarGrid& likelihood);

// mc_inference followed by postprocess.
CaseResult infer_case(const RegressorParams& params, const MorseSkeleton& skel, const ScalarGrid& x,
                      const ScalarGrid& f, const SamplerConfig& sampler, const InferConfig& cfg);

}  // namespace morseuq
