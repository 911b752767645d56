#include "morseuq/probdmt.hpp"

#include <algorithm>
#include <cmath>

#include "morseuq/parallel.hpp"

namespace morseuq {

void SamplerConfig::validate() const {
  require(u >= 0.0 && u <= 1.0, "sampler: u must lie in [0,1]");
  require(gamma >= 0.0 && gamma <= 1.0, "sampler: gamma must lie in [0,1]");
  require(alpha > 1.0, "sampler: alpha must be > 1 (Inverse-Gamma mean undefined otherwise)");
  require(beta > 0.0, "sampler: beta must be > 0");
  require(max_step >= 1, "sampler: max_step must be positive");
  require(crop_padding >= 0, "sampler: crop_padding must be >= 0");
  require(!fixed_variance || *fixed_variance >= 0.0, "sampler: fixed variance must be >= 0");
}

Shape Box::shape() const {
  std::array<int, kMaxRank> d{};
  for (int a = 0; a < lo.rank; ++a) d[static_cast<std::size_t>(a)] = hi[a] - lo[a] + 1;
  return Shape(std::span<const int>(d.data(), static_cast<std::size_t>(lo.rank)));
}

bool Box::contains(const Coord& c) const {
  for (int a = 0; a < lo.rank; ++a)
    if (c[a] < lo[a] || c[a] > hi[a]) return false;
  return true;
}

Coord Box::to_local(const Coord& c) const {
  Coord out = c;
  for (int a = 0; a < lo.rank; ++a) out[a] -= lo[a];
  return out;
}

Coord Box::to_global(const Coord& c) const {
  Coord out = c;
  for (int a = 0; a < lo.rank; ++a) out[a] += lo[a];
  return out;
}

Box bounding_box(const std::vector<Coord>& coords) {
  require(!coords.empty(), "bounding_box: empty coordinate list");
  Box b{coords.front(), coords.front()};
  for (const auto& c : coords)
    for (int a = 0; a < c.rank; ++a) {
      b.lo[a] = std::min(b.lo[a], c[a]);
      b.hi[a] = std::max(b.hi[a], c[a]);
    }
  return b;
}

Box pad_box(const Box& b, int padding, const Shape& within) {
  Box out = b;
  for (int a = 0; a < b.lo.rank; ++a) {
    out.lo[a] = std::max(0, b.lo[a] - padding);
    out.hi[a] = std::min(within.dim(a) - 1, b.hi[a] + padding);
  }
  return out;
}

ScalarGrid extract_box(const ScalarGrid& g, const Box& b) {
  const Shape local = b.shape();
  ScalarGrid out(local);
  for (std::size_t i = 0; i < local.size(); ++i) out[i] = g.at(b.to_global(local.coord(i)));
  return out;
}

double sample_variance(const SamplerConfig& cfg, Rng& rng) {
  require(cfg.alpha > 1.0 && cfg.beta > 0.0, "sample_variance: need alpha > 1 and beta > 0");
  return 1.0 / rng.gamma(cfg.alpha, cfg.beta);
}

ScalarGrid perturb(const ScalarGrid& f, double variance, Rng& rng) {
  require(variance >= 0.0, "perturb: variance must be >= 0");
  if (variance == 0.0) return f;
  const double sd = std::sqrt(variance);
  ScalarGrid out = f;
  for (auto& v : out.values()) v = static_cast<float>(v + sd * rng.normal());
  return out;
}

SampledSkeleton generate_path(const ScalarGrid& f_n, const Coord& c_s, const Coord& c_m,
                              double gamma, int max_step) {
  const Shape& shape = f_n.shape();
  require(shape.contains(c_s) && shape.contains(c_m), "generate_path: endpoint out of bounds");
  require(c_s != c_m, "generate_path: saddle and maximum coincide");

  SampledSkeleton out;
  out.origin = Coord{};
  out.origin.rank = shape.rank();
  out.mask = BinaryGrid(shape);
  const std::size_t target = shape.index(c_m);
  std::size_t cur = shape.index(c_s);
  out.mask[cur] = 1;
  out.path.push_back(c_s);

  const Neighborhood nbhd(shape);
  for (int step = 0; step < max_step && cur != target; ++step) {
    std::size_t next = static_cast<std::size_t>(-1);
    double best = 0.0;
    nbhd.for_each(cur, [&](std::size_t n) {
      if (out.mask[n] || next == target) return;
      if (n == target) {
        next = n;
        return;
      }
      const Coord c = shape.coord(n);
      double dist2 = 0.0;
      for (int a = 0; a < shape.rank(); ++a) {
        const double d = c_m[a] - c[a];
        dist2 += d * d;
      }
      const double q = gamma / std::sqrt(dist2) + (1.0 - gamma) * f_n[n];
      if (next == static_cast<std::size_t>(-1) || q > best) {
        next = n;
        best = q;
      }
    });
    if (next == static_cast<std::size_t>(-1)) break;  // boxed in by visited voxels
    cur = next;
    out.mask[cur] = 1;
    out.path.push_back(shape.coord(cur));
  }
  out.reached = cur == target;
  return out;
}

SampledSkeleton sample_structure(const Structure& e, const ScalarGrid& f, const SamplerConfig& cfg,
                                 int run_index) {
  Rng rng(derive_seed({cfg.seed, static_cast<std::uint64_t>(e.id),
                       static_cast<std::uint64_t>(run_index)}));
  const Box crop = pad_box(bounding_box(e.path), cfg.crop_padding, f.shape());

  SampledSkeleton out;
  if (rng.bernoulli(cfg.u)) {
    out.mask = BinaryGrid(crop.shape());
    for (const auto& c : e.path) out.mask.at(crop.to_local(c)) = 1;
    out.path = e.path;
    out.reached = true;
    out.was_retained = true;
  } else {
    const double variance = cfg.fixed_variance ? *cfg.fixed_variance : sample_variance(cfg, rng);
    const ScalarGrid f_n = perturb(extract_box(f, crop), variance, rng);
    out = generate_path(f_n, crop.to_local(e.saddle), crop.to_local(e.max), cfg.gamma, cfg.max_step);
    for (auto& c : out.path) c = crop.to_global(c);
  }
  out.structure_id = e.id;
  out.origin = crop.lo;
  return out;
}

std::vector<SampledSkeleton> sample_skeleton(const MorseSkeleton& skel, const ScalarGrid& f,
                                             const SamplerConfig& cfg, int run_index, int jobs) {
  cfg.validate();
  std::vector<SampledSkeleton> out(skel.structures.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i] = sample_structure(skel.structures[i], f, cfg, run_index);
  });
  return out;
}

}  // namespace morseuq
