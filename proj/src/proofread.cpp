#include "morseuq/proofread.hpp"

#include <algorithm>
#include <json.hpp>
#include <sstream>

#include "morseuq/metrics.hpp"
#include "morseuq/structgraph.hpp"

namespace morseuq {

std::vector<int> review_queue(const std::vector<StructureEstimate>& estimates) {
  std::vector<int> q;
  for (const auto& e : estimates)
    if (e.u_norm >= kReviewThreshold) q.push_back(e.structure_id);
  std::stable_sort(q.begin(), q.end(), [&](int a, int b) {
    const double ua = estimates[static_cast<std::size_t>(a)].u_norm;
    const double ub = estimates[static_cast<std::size_t>(b)].u_norm;
    return ua != ub ? ua > ub : a < b;
  });
  return q;
}

Session::Session(std::string case_id, MorseSkeleton skel, CaseResult result, std::optional<BinaryGrid> gt)
    : case_id_(std::move(case_id)),
      skel_(std::make_shared<const MorseSkeleton>(std::move(skel))),
      initial_(std::move(result)),
      gt_(std::move(gt)) {
  require(initial_.estimates.size() == skel_->structures.size(), "session: estimates do not match the skeleton");
  for (std::size_t i = 0; i < initial_.estimates.size(); ++i)
    require(initial_.estimates[i].structure_id == static_cast<int>(i), "session: estimates must be ordered by id");
  require(!gt_ || gt_->shape() == skel_->source_shape, "session: ground truth dims differ from the case");
  overlay_ = std::make_unique<Overlay>(*skel_, initial_.backbone_seg);
  for (const auto& e : initial_.estimates) overlay_->set_accepted(e.structure_id, e.accepted);
  queue_ = review_queue(initial_.estimates);
  decided_.assign(initial_.estimates.size(), std::nullopt);
  if (gt_) {
    const BinaryGrid& f = overlay_->final_mask();
    for (std::size_t v = 0; v < f.size(); ++v) {
      pred_count_ += f[v] != 0;
      gt_count_ += (*gt_)[v] != 0;
      hit_count_ += f[v] && (*gt_)[v];
    }
  }
  trace_.push_back(measure());
}

TracePoint Session::measure() const {
  TracePoint t;
  t.clicks = static_cast<int>(decisions_.size());
  if (!gt_) return t;
  t.dice = pred_count_ + gt_count_ == 0
               ? 1.0
               : 2.0 * static_cast<double>(hit_count_) / static_cast<double>(pred_count_ + gt_count_);
  t.cldice = cldice(overlay_->final_mask(), *gt_);
  return t;
}

std::vector<int> Session::remaining() const {
  std::vector<int> out;
  for (int id : queue_)
    if (!decided_[static_cast<std::size_t>(id)]) out.push_back(id);
  return out;
}

std::optional<bool> Session::decision(int structure_id) const {
  if (structure_id < 0 || static_cast<std::size_t>(structure_id) >= decided_.size()) return std::nullopt;
  return decided_[static_cast<std::size_t>(structure_id)];
}

TracePoint Session::apply_decision(int structure_id, bool accept) {
  if (structure_id < 0 || static_cast<std::size_t>(structure_id) >= decided_.size())
    throw DecisionError(DecisionErrc::unknown_structure, "unknown structure " + std::to_string(structure_id));
  const auto s = static_cast<std::size_t>(structure_id);
  if (decided_[s])
    throw DecisionError(DecisionErrc::already_decided, "structure " + std::to_string(structure_id) + " already decided");
  if (std::find(queue_.begin(), queue_.end(), structure_id) == queue_.end())
    throw DecisionError(DecisionErrc::not_pending, "structure " + std::to_string(structure_id) + " is not pending review");

  const auto& region = overlay_->region(structure_id);
  const BinaryGrid& f = overlay_->final_mask();
  if (gt_)
    for (const std::size_t v : region) {
      pred_count_ -= f[v] != 0;
      hit_count_ -= f[v] && (*gt_)[v];
    }
  overlay_->set_accepted(structure_id, accept);
  if (gt_)
    for (const std::size_t v : region) {
      pred_count_ += f[v] != 0;
      hit_count_ += f[v] && (*gt_)[v];
    }
  decided_[s] = accept;
  decisions_.emplace_back(structure_id, accept);
  trace_.push_back(measure());
  return trace_.back();
}

std::vector<StructureEstimate> Session::current_estimates() const {
  auto out = initial_.estimates;
  for (auto& e : out) e.accepted = overlay_->accepted(e.structure_id);
  return out;
}

ScalarGrid Session::current_heatmap() const {
  return diffuse_uncertainty(current_estimates(), *skel_, overlay_->final_mask());
}

std::string Session::export_json() const {
  nlohmann::json j;
  j["case_id"] = case_id_;
  j["decisions"] = nlohmann::json::array();
  for (const auto& [id, accept] : decisions_) j["decisions"].push_back({{"structure_id", id}, {"accept", accept}});
  j["trace"] = nlohmann::json::array();
  for (const auto& t : trace_) {
    nlohmann::json p{{"clicks", t.clicks}, {"dice", nullptr}, {"cldice", nullptr}};
    if (t.dice) p["dice"] = *t.dice;
    if (t.cldice) p["cldice"] = *t.cldice;
    j["trace"].push_back(p);
  }
  return j.dump();
}

void Session::import_json(std::string_view text) {
  require(decisions_.empty(), "session: import requires a fresh session");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    if (j.at("case_id").get<std::string>() != case_id_)
      throw DataError("session: export belongs to case " + j.at("case_id").get<std::string>());
    for (const auto& d : j.at("decisions"))
      apply_decision(d.at("structure_id").get<int>(), d.at("accept").get<bool>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("session: malformed export: ") + e.what());
  }
}

std::vector<CurvePoint> simulate(const MorseSkeleton& skel, const CaseResult& result, const BinaryGrid& gt) {
  Session s("", skel, result, gt);
  for (int id : s.queue()) {
    const double z = soft_label(skel.structures[static_cast<std::size_t>(id)].path, gt);
    s.apply_decision(id, z >= 0.5);
  }
  std::vector<CurvePoint> out;
  for (const auto& t : s.trace()) out.push_back({t.clicks, *t.dice});
  return out;
}

std::string curves_csv(const std::vector<std::string>& names, const std::vector<std::vector<CurvePoint>>& curves) {
  require(names.size() == curves.size(), "curves_csv: name count differs from curve count");
  std::ostringstream os;
  os.precision(17);
  os << "case,clicks,dice\n";
  std::size_t longest = 0;
  for (std::size_t c = 0; c < curves.size(); ++c) {
    require(!curves[c].empty(), "curves_csv: empty curve");
    longest = std::max(longest, curves[c].size());
    for (const auto& p : curves[c]) os << names[c] << ',' << p.clicks << ',' << p.dice << '\n';
  }
  for (std::size_t k = 0; k < longest && !curves.empty(); ++k) {
    double sum = 0.0;
    for (const auto& curve : curves) sum += curve[std::min(k, curve.size() - 1)].dice;
    os << "mean," << k << ',' << sum / static_cast<double>(curves.size()) << '\n';
  }
  return os.str();
}

}  // namespace morseuq
