#include "morseuq/inferpost.hpp"

#include <cmath>
#include <queue>
#include <tuple>

namespace morseuq {

namespace {

constexpr double kTieTolerance = 1e-9;

struct Step {
  std::array<int, kMaxRank> delta{};
  double cost = 0.0;
};

std::vector<Step> steps(int rank) {
  std::vector<Step> out;
  const int count = rank == 2 ? 9 : 27;
  for (int k = 0; k < count; ++k) {
    Step s;
    int rem = k, changed = 0;
    for (int a = rank - 1; a >= 0; --a) {
      s.delta[static_cast<std::size_t>(a)] = rem % 3 - 1;
      changed += s.delta[static_cast<std::size_t>(a)] != 0;
      rem /= 3;
    }
    if (changed == 0) continue;
    s.cost = std::sqrt(static_cast<double>(changed));
    out.push_back(s);
  }
  return out;
}

void check_estimates(const std::vector<StructureEstimate>& estimates, const MorseSkeleton& skel) {
  require(estimates.size() == skel.structures.size(), "estimates do not match the skeleton");
  for (std::size_t i = 0; i < estimates.size(); ++i)
    require(estimates[i].structure_id == static_cast<int>(i), "estimates must be ordered by structure id");
}

}  // namespace

void InferConfig::validate() const {
  require(runs >= 1, "infer: runs must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, "infer: dropout rate must lie in [0,1)");
  require(box > 0 && box % 2 == 0, "infer: box must be a positive even integer");
}

double normalized_uncertainty(double var_bar) { return 1.0 - std::exp(-var_bar); }

std::vector<StructureEstimate> mc_inference(const RegressorParams& params, const MorseSkeleton& skel,
                                            const ScalarGrid& x, const ScalarGrid& f,
                                            const SamplerConfig& sampler, const InferConfig& cfg) {
  cfg.validate();
  sampler.validate();
  const std::size_t n = skel.structures.size();
  std::vector<StructureEstimate> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].structure_id = static_cast<int>(i);
  if (n == 0) return out;

  const GraphBuilder builder(skel, x, f, cfg.box);
  for (int t = 1; t <= cfg.runs; ++t) {
    auto samples = sample_skeleton(skel, f, sampler, t, cfg.jobs);
    const StructureGraph graph = builder.build(samples, nullptr);
    const DropoutSpec drop = cfg.mc_dropout
                                 ? DropoutSpec::seeded(derive_seed({cfg.seed, static_cast<std::uint64_t>(t)}),
                                                       cfg.dropout)
                                 : DropoutSpec::off();
    const auto preds = forward(params, graph, drop, cfg.jobs);
    for (std::size_t i = 0; i < n; ++i) {
      out[i].p_bar += preds[i].p_hat;
      out[i].var_bar += preds[i].variance();
      out[i].sample_paths.push_back(std::move(samples[i].path));
    }
  }
  for (auto& e : out) {
    e.p_bar /= cfg.runs;
    e.var_bar /= cfg.runs;
    e.u_norm = normalized_uncertainty(e.var_bar);
    e.accepted = e.p_bar >= 0.5;
  }
  return out;
}

GeodesicLabels geodesic_labels(const BinaryGrid& domain, const std::vector<LabeledSource>& sources) {
  const Shape& shape = domain.shape();
  GeodesicLabels g;
  g.label.assign(shape.size(), -1);
  g.distance.assign(shape.size(), std::numeric_limits<double>::infinity());

  using Entry = std::tuple<double, int, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  const auto improves = [&](double d, int l, std::size_t v) {
    if (g.label[v] < 0) return true;
    if (d < g.distance[v] - kTieTolerance) return true;
    return std::abs(d - g.distance[v]) <= kTieTolerance && l < g.label[v];
  };
  for (const auto& s : sources) {
    require(s.index < shape.size() && s.label >= 0, "geodesic_labels: bad source");
    if (!domain[s.index] || !improves(0.0, s.label, s.index)) continue;
    g.label[s.index] = s.label;
    g.distance[s.index] = 0.0;
    heap.emplace(0.0, s.label, s.index);
  }

  const auto moves = steps(shape.rank());
  while (!heap.empty()) {
    const auto [d, l, v] = heap.top();
    heap.pop();
    if (l != g.label[v] || d != g.distance[v]) continue;  // stale
    const Coord c = shape.coord(v);
    for (const Step& s : moves) {
      Coord nc = c;
      bool inside = true;
      for (int a = 0; a < shape.rank() && inside; ++a) {
        nc[a] += s.delta[static_cast<std::size_t>(a)];
        inside = nc[a] >= 0 && nc[a] < shape.dim(a);
      }
      if (!inside) continue;
      const std::size_t w = shape.index(nc);
      if (!domain[w]) continue;
      const double nd = d + s.cost;
      if (!improves(nd, l, w)) continue;
      g.label[w] = l;
      g.distance[w] = std::min(nd, g.distance[w]);
      heap.emplace(g.distance[w], l, w);
    }
  }
  return g;
}

Overlay::Overlay(const MorseSkeleton& skel, const BinaryGrid& backbone)
    : skel_(&skel), backbone_(backbone), final_(backbone.shape()) {
  require(backbone.shape() == skel.source_shape, "overlay: backbone dims differ from skeleton");
  const Shape& shape = backbone.shape();
  const std::size_t n = skel.structures.size();
  paths_.resize(n);
  region_.resize(n);
  accepted_.assign(n, false);
  cover_.assign(shape.size(), 0);

  BinaryGrid domain = backbone;
  std::vector<LabeledSource> sources;
  for (std::size_t s = 0; s < n; ++s)
    for (const auto& c : skel.structures[s].path) {
      const std::size_t v = shape.index(c);
      paths_[s].push_back(v);
      domain[v] = 1;
      sources.push_back({v, static_cast<int>(s)});
    }
  owner_ = geodesic_labels(domain, sources).label;
  for (std::size_t v = 0; v < owner_.size(); ++v)
    if (owner_[v] >= 0) region_[static_cast<std::size_t>(owner_[v])].push_back(v);
  for (std::size_t s = 0; s < n; ++s)
    for (const std::size_t v : paths_[s])
      if (owner_[v] != static_cast<int>(s)) region_[s].push_back(v);
  for (std::size_t v = 0; v < final_.size(); ++v) refresh(v);
}

void Overlay::refresh(std::size_t v) {
  const int o = owner_[v];
  const bool keep = backbone_[v] && (o < 0 || accepted_[static_cast<std::size_t>(o)]);
  final_[v] = (keep || cover_[v] > 0) ? 1 : 0;
}

void Overlay::set_accepted(int structure_id, bool accepted) {
  require(structure_id >= 0 && static_cast<std::size_t>(structure_id) < accepted_.size(),
          "overlay: unknown structure id");
  const auto s = static_cast<std::size_t>(structure_id);
  if (accepted_[s] == accepted) return;
  accepted_[s] = accepted;
  for (const std::size_t v : paths_[s]) cover_[v] += accepted ? 1 : -1;
  for (const std::size_t v : region_[s]) refresh(v);
}

void Overlay::set_all(const std::vector<bool>& accepted) {
  require(accepted.size() == accepted_.size(), "overlay: decision count differs from structure count");
  for (std::size_t s = 0; s < accepted.size(); ++s) set_accepted(static_cast<int>(s), accepted[s]);
}

BinaryGrid Overlay::skeletal_mask() const {
  BinaryGrid m(final_.shape());
  for (std::size_t v = 0; v < m.size(); ++v) m[v] = cover_[v] > 0 ? 1 : 0;
  return m;
}

OverlayMasks threshold_and_overlay(const std::vector<StructureEstimate>& estimates, const MorseSkeleton& skel,
                                   const BinaryGrid& backbone) {
  check_estimates(estimates, skel);
  Overlay ov(skel, backbone);
  for (const auto& e : estimates) ov.set_accepted(e.structure_id, e.accepted);
  return {ov.skeletal_mask(), ov.final_mask()};
}

ScalarGrid diffuse_uncertainty(const std::vector<StructureEstimate>& estimates, const MorseSkeleton& skel,
                               const BinaryGrid& final_mask) {
  check_estimates(estimates, skel);
  require(final_mask.shape() == skel.source_shape, "diffuse_uncertainty: mask dims differ from skeleton");
  const Shape& shape = final_mask.shape();
  std::vector<LabeledSource> sources;
  for (const auto& e : estimates) {
    if (!e.accepted) continue;
    for (const auto& c : skel.structures[static_cast<std::size_t>(e.structure_id)].path)
      sources.push_back({shape.index(c), e.structure_id});
  }
  const GeodesicLabels g = geodesic_labels(final_mask, sources);
  ScalarGrid heat(shape);
  for (std::size_t v = 0; v < heat.size(); ++v) {
    if (!final_mask[v]) continue;
    heat[v] = g.label[v] >= 0 ? static_cast<float>(estimates[static_cast<std::size_t>(g.label[v])].u_norm) : 1.0f;
  }
  return heat;
}

CaseResult postprocess(std::vector<StructureEstimate> estimates, const MorseSkeleton& skel,
                       const ScalarGrid& likelihood) {
  CaseResult r;
  r.backbone_seg = binarize(likelihood, kBackboneThreshold);
  const OverlayMasks m = threshold_and_overlay(estimates, skel, r.backbone_seg);
  r.skeletal_mask = m.skeletal_mask;
  r.final_mask = m.final_mask;
  r.heatmap = diffuse_uncertainty(estimates, skel, r.final_mask);
  r.estimates = std::move(estimates);
  return r;
}

CaseResult infer_case(const RegressorParams& params, const MorseSkeleton& skel, const ScalarGrid& x,
                      const ScalarGrid& f, const SamplerConfig& sampler, const InferConfig& cfg) {
  return postprocess(mc_inference(params, skel, x, f, sampler, cfg), skel, f);
}

}  // namespace morseuq
