#include "morseuq/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "morseuq/rng.hpp"

namespace morseuq {

namespace {

constexpr int kMinDim = 8;
constexpr int kSegmentLength = 6;
constexpr double kMaxTurn = 0.35;  // radians per step

using Vec = std::array<double, kMaxRank>;

double norm(const Vec& v, int rank) {
  double s = 0.0;
  for (int a = 0; a < rank; ++a) s += v[static_cast<std::size_t>(a)] * v[static_cast<std::size_t>(a)];
  return std::sqrt(s);
}

Vec random_direction(Rng& rng, int rank) {
  Vec d{};
  if (rank == 2) {
    const double t = 2.0 * std::numbers::pi * rng.uniform();
    d[0] = std::sin(t);
    d[1] = std::cos(t);
    return d;
  }
  double n = 0.0;
  do {
    for (int a = 0; a < rank; ++a) d[static_cast<std::size_t>(a)] = rng.normal();
    n = norm(d, rank);
  } while (n < 1e-9);
  for (int a = 0; a < rank; ++a) d[static_cast<std::size_t>(a)] /= n;
  return d;
}

// Momentum-biased heading update: bounded rotation in 2D, bounded jitter in 3D.
Vec turn(const Vec& d, double amount, Rng& rng, int rank) {
  Vec out = d;
  if (rank == 2) {
    const double t = std::atan2(d[0], d[1]) + amount;
    out[0] = std::sin(t);
    out[1] = std::cos(t);
    return out;
  }
  for (int a = 0; a < rank; ++a) out[static_cast<std::size_t>(a)] += std::abs(amount) * rng.normal();
  const double n = norm(out, rank);
  if (n < 1e-9) return d;
  for (int a = 0; a < rank; ++a) out[static_cast<std::size_t>(a)] /= n;
  return out;
}

bool rasterize(const Vec& p, const Shape& shape, Coord& out) {
  out.rank = shape.rank();
  for (int a = 0; a < shape.rank(); ++a) {
    const int x = static_cast<int>(std::lround(p[static_cast<std::size_t>(a)]));
    if (x < 0 || x >= shape.dim(a)) return false;
    out[a] = x;
  }
  return true;
}

// Unit-length steps from `start` along a wandering heading until the grid
// edge or `max_steps`. Consecutive rasterized points are full-neighbors.
std::vector<Coord> walk(const Vec& start, Vec dir, int max_steps, const Shape& shape, Rng& rng) {
  std::vector<Coord> out;
  Vec p = start;
  Coord c;
  for (int s = 0; s < max_steps; ++s) {
    const double amount = kMaxTurn * (2.0 * rng.uniform() - 1.0);
    dir = turn(dir, amount, rng, shape.rank());
    for (int a = 0; a < shape.rank(); ++a) p[static_cast<std::size_t>(a)] += dir[static_cast<std::size_t>(a)];
    if (!rasterize(p, shape, c)) break;
    if (out.empty() || out.back() != c) out.push_back(c);
  }
  return out;
}

std::vector<Coord> make_curve(const Shape& shape, Rng& rng) {
  int max_dim = 0;
  for (int a = 0; a < shape.rank(); ++a) max_dim = std::max(max_dim, shape.dim(a));
  Vec start{};
  for (int a = 0; a < shape.rank(); ++a)
    start[static_cast<std::size_t>(a)] = 2.0 + rng.uniform() * (shape.dim(a) - 5);
  const Vec dir = random_direction(rng, shape.rank());
  Vec back = dir;
  for (int a = 0; a < shape.rank(); ++a) back[static_cast<std::size_t>(a)] = -dir[static_cast<std::size_t>(a)];

  Coord s;
  rasterize(start, shape, s);
  auto fwd = walk(start, dir, max_dim, shape, rng);
  auto bwd = walk(start, back, max_dim, shape, rng);
  std::vector<Coord> curve(bwd.rbegin(), bwd.rend());
  if (curve.empty() || curve.back() != s) curve.push_back(s);
  for (const auto& c : fwd)
    if (curve.back() != c) curve.push_back(c);
  return curve;
}

void paint_dilated(BinaryGrid& g, const Coord& c, int thickness) {
  const Shape& shape = g.shape();
  const int lo = -(thickness - 1) / 2;
  const int hi = thickness / 2;
  const int span = hi - lo + 1;
  int total = 1;
  for (int a = 0; a < shape.rank(); ++a) total *= span;
  for (int k = 0; k < total; ++k) {
    Coord n = c;
    int rem = k;
    bool inside = true;
    for (int a = shape.rank() - 1; a >= 0; --a) {
      n[a] += lo + rem % span;
      rem /= span;
      if (n[a] < 0 || n[a] >= shape.dim(a)) inside = false;
    }
    if (inside) g[shape.index(n)] = 1;
  }
}

}  // namespace

void SynthConfig::validate() const {
  for (int a = 0; a < shape.rank(); ++a)
    require(shape.dim(a) >= kMinDim, "synth: dims too small to host a curve (need >= 8 per axis)");
  require(n_curves >= 1, "synth: n_curves must be >= 1");
  require(thickness >= 1, "synth: thickness must be >= 1");
  require(gap_rate >= 0.0 && gap_rate <= 1.0, "synth: gap_rate must lie in [0,1]");
  require(spur_rate >= 0.0 && spur_rate <= 1.0, "synth: spur_rate must lie in [0,1]");
  require(blur_sigma >= 0.0, "synth: blur_sigma must be >= 0");
  require(noise_sigma >= 0.0, "synth: noise_sigma must be >= 0");
}

ScalarGrid gaussian_blur(const ScalarGrid& g, double sigma) {
  if (sigma <= 0.0) return g;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * k * k / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    sum += w;
  }
  for (auto& w : kernel) w /= sum;

  const Shape& shape = g.shape();
  std::vector<double> cur(g.values().begin(), g.values().end());
  std::vector<double> next(cur.size());
  for (int axis = 0; axis < shape.rank(); ++axis) {
    const auto stride = static_cast<std::ptrdiff_t>(shape.stride(axis));
    const int n = shape.dim(axis);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const int pos = static_cast<int>(i / shape.stride(axis)) % n;
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int q = std::clamp(pos + k, 0, n - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] *
               cur[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + (q - pos) * stride)];
      }
      next[i] = acc;
    }
    std::swap(cur, next);
  }
  ScalarGrid out(shape);
  for (std::size_t i = 0; i < cur.size(); ++i) out[i] = static_cast<float>(cur[i]);
  return out;
}

SynthCase generate_case(const SynthConfig& cfg) {
  cfg.validate();
  const Shape& shape = cfg.shape;
  Rng curve_rng(derive_seed({cfg.seed, 0}));
  Rng texture_rng(derive_seed({cfg.seed, 1}));
  Rng noise_rng(derive_seed({cfg.seed, 2}));

  BinaryGrid gt(shape);
  BinaryGrid corrupted(shape);
  for (int k = 0; k < cfg.n_curves; ++k) {
    std::vector<Coord> curve;
    for (int attempt = 0; attempt < 16 && curve.size() < static_cast<std::size_t>(kMinDim); ++attempt)
      curve = make_curve(shape, curve_rng);

    for (const auto& c : curve) paint_dilated(gt, c, cfg.thickness);

    const std::size_t n_segments = (curve.size() + kSegmentLength - 1) / kSegmentLength;
    for (std::size_t s = 0; s < n_segments; ++s) {
      const double gap_draw = curve_rng.uniform();
      const double spur_draw = curve_rng.uniform();
      const std::size_t begin = s * kSegmentLength;
      const std::size_t end = std::min(curve.size(), begin + kSegmentLength);
      const bool interior = s > 0 && s + 1 < n_segments;
      if (!(interior && gap_draw < cfg.gap_rate))
        for (std::size_t i = begin; i < end; ++i) paint_dilated(corrupted, curve[i], cfg.thickness);

      if (spur_draw < cfg.spur_rate) {
        Vec root{};
        for (int a = 0; a < shape.rank(); ++a)
          root[static_cast<std::size_t>(a)] = curve[begin][a];
        Vec heading = random_direction(curve_rng, shape.rank());
        if (end - begin >= 2) {
          Vec along{};
          for (int a = 0; a < shape.rank(); ++a)
            along[static_cast<std::size_t>(a)] = curve[end - 1][a] - curve[begin][a];
          const double n = norm(along, shape.rank());
          if (n > 0) {
            for (int a = 0; a < shape.rank(); ++a) along[static_cast<std::size_t>(a)] /= n;
            const double side = curve_rng.bernoulli(0.5) ? 1.0 : -1.0;
            heading = turn(along, side * (0.6 + 0.6 * curve_rng.uniform()), curve_rng, shape.rank());
          }
        }
        const int length = 5 + static_cast<int>(curve_rng.below(8));
        for (const auto& c : walk(root, heading, length, shape, curve_rng))
          paint_dilated(corrupted, c, cfg.thickness);
      }
    }
  }

  ScalarGrid likelihood = gaussian_blur(to_scalar(corrupted), cfg.blur_sigma);
  for (auto& v : likelihood.values()) {
    if (cfg.noise_sigma > 0.0) v += static_cast<float>(cfg.noise_sigma * noise_rng.normal());
    v = std::clamp(v, 0.0f, 1.0f);
  }

  ScalarGrid texture(shape);
  for (auto& v : texture.values()) v = static_cast<float>(texture_rng.uniform() - 0.5);
  texture = gaussian_blur(texture, 2.0);
  const ScalarGrid vessels = gaussian_blur(to_scalar(gt), std::max(cfg.blur_sigma, 0.7));
  ScalarGrid image(shape);
  for (std::size_t i = 0; i < image.size(); ++i)
    image[i] = std::clamp(0.2f + 0.6f * vessels[i] + 0.8f * texture[i], 0.0f, 1.0f);

  return {std::move(image), std::move(gt), std::move(likelihood)};
}

}  // namespace morseuq
