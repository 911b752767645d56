#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "morseuq/errors.hpp"
#include "morseuq/inferpost.hpp"

namespace morseuq {

inline constexpr double kReviewThreshold = 0.5;

// Structures with u_norm >= 0.5, most uncertain first, ties by id.
std::vector<int> review_queue(const std::vector<StructureEstimate>& estimates);

enum class DecisionErrc { unknown_structure, already_decided, not_pending };

class DecisionError : public ContractError {
 public:
  DecisionError(DecisionErrc code, const std::string& what) : ContractError(what), code_(code) {}
  DecisionErrc code() const { return code_; }

 private:
  DecisionErrc code_;
};

struct TracePoint {
  int clicks = 0;
  std::optional<double> dice;  // present when ground truth is loaded
  std::optional<double> cldice;
};

class Session {
 public:
  Session(std::string case_id, MorseSkeleton skel, CaseResult result, std::optional<BinaryGrid> gt = {});

  const std::string& case_id() const { return case_id_; }
  const MorseSkeleton& skeleton() const { return *skel_; }
  const CaseResult& initial() const { return initial_; }
  bool has_gt() const { return gt_.has_value(); }

  const std::vector<int>& queue() const { return queue_; }
  std::vector<int> remaining() const;
  const std::vector<std::pair<int, bool>>& decisions() const { return decisions_; }
  std::optional<bool> decision(int structure_id) const;

  TracePoint apply_decision(int structure_id, bool accept);

  const BinaryGrid& final_mask() const { return overlay_->final_mask(); }
  BinaryGrid skeletal_mask() const { return overlay_->skeletal_mask(); }
  // Estimates with `accepted` overridden by the decisions so far.
  std::vector<StructureEstimate> current_estimates() const;
  ScalarGrid current_heatmap() const;
  const std::vector<TracePoint>& trace() const { return trace_; }

  // {"case_id", "decisions":[{"structure_id","accept"}], "trace":[...]}.
  std::string export_json() const;
  // Replays exported decisions onto a session that has none yet.
  void import_json(std::string_view text);

 private:
  TracePoint measure() const;

  std::string case_id_;
  std::shared_ptr<const MorseSkeleton> skel_;
  CaseResult initial_;
  std::optional<BinaryGrid> gt_;
  std::unique_ptr<Overlay> overlay_;
  std::vector<int> queue_;
  std::vector<std::pair<int, bool>> decisions_;
  std::vector<std::optional<bool>> decided_;
  std::vector<TracePoint> trace_;
  std::size_t pred_count_ = 0;
  std::size_t hit_count_ = 0;
  std::size_t gt_count_ = 0;
};

struct CurvePoint {
  int clicks = 0;
  double dice = 0.0;
};

// Oracle user: walks the review queue and accepts iff the soft label of the
// structure's deterministic path is >= 0.5.
std::vector<CurvePoint> simulate(const MorseSkeleton& skel, const CaseResult& result, const BinaryGrid& gt);

// Per-case rows "case,clicks,dice" followed by rows for case "mean": the
// average over cases at each click, a finished case holding its last value.
std::string curves_csv(const std::vector<std::string>& names, const std::vector<std::vector<CurvePoint>>& curves);

}  // namespace morseuq
