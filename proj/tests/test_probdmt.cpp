#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "morseuq/probdmt.hpp"
#include "morseuq/synth.hpp"

using namespace morseuq;

namespace {

int chebyshev(const Coord& a, const Coord& b) {
  int d = 0;
  for (int k = 0; k < a.rank; ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

void check_sample(const SampledSkeleton& s, const Structure& e, const SamplerConfig& cfg) {
  REQUIRE(!s.path.empty());
  CHECK(s.structure_id == e.id);
  CHECK(s.path.front() == e.saddle);
  if (s.reached) CHECK(s.path.back() == e.max);
  CHECK(s.path.size() <= static_cast<std::size_t>(cfg.max_step) + 1);
  std::size_t bits = 0;
  for (auto v : s.mask.values()) bits += v;
  CHECK(bits == s.path.size());
  for (const auto& c : s.path) {
    Coord local = c;
    for (int a = 0; a < c.rank; ++a) local[a] -= s.origin[a];
    CHECK(s.mask.at(local) == 1);
  }
}

// True when greedy ascent with no noise and gamma = 0 is forced to follow
// e.path: every next step is either the adjacent maximum or strictly above
// all other unvisited neighbours.
bool strictly_dominant(const Structure& e, const ScalarGrid& f) {
  std::vector<Coord> visited{e.path.front()};
  for (std::size_t i = 0; i + 1 < e.path.size(); ++i) {
    const auto nb = neighbors(e.path[i], f.shape());
    const bool max_adjacent = std::find(nb.begin(), nb.end(), e.max) != nb.end();
    const Coord next = e.path[i + 1];
    if (max_adjacent) {
      if (next != e.max) return false;
    } else {
      for (const auto& c : nb) {
        if (c == next || std::find(visited.begin(), visited.end(), c) != visited.end()) continue;
        if (f.at(c) >= f.at(next)) return false;
      }
    }
    visited.push_back(next);
  }
  return true;
}

}  // namespace

TEST_CASE("inverse-gamma variance draws") {
  SamplerConfig cfg;
  Rng rng(2024);
  double sum = 0;
  const int n = 1'000'000;
  bool positive = true;
  for (int i = 0; i < n; ++i) {
    const double v = sample_variance(cfg, rng);
    positive = positive && v > 0;
    sum += v;
  }
  CHECK(positive);
  const double expected = cfg.beta / (cfg.alpha - 1.0);
  CHECK(std::abs(sum / n - expected) / expected < 0.05);

  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(sample_variance(cfg, a) == sample_variance(cfg, b));
}

TEST_CASE("sampler config validation") {
  SamplerConfig cfg;
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = SamplerConfig{};
  cfg.beta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = SamplerConfig{};
  cfg.u = 1.2;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = SamplerConfig{};
  cfg.max_step = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("perturbation moments") {
  const ScalarGrid f = fixture::random_grid(Shape{256, 256}, 8);
  Rng rng(99);
  CHECK(perturb(f, 0.0, rng) == f);

  const double var = 0.01;
  const ScalarGrid g = perturb(f, var, rng);
  double mean = 0, sq = 0;
  const double n = static_cast<double>(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = static_cast<double>(g[i]) - f[i];
    mean += d;
    sq += d * d;
  }
  mean /= n;
  CHECK(std::abs(mean) < 3.0 * std::sqrt(var / n));
  const double sample_var = sq / n - mean * mean;
  CHECK(std::abs(sample_var - var) / var < 0.05);
}

TEST_CASE("distance-only walk marches straight") {
  const ScalarGrid flat(Shape{20, 30}, 0.3f);
  const std::vector<std::pair<Coord, Coord>> ends{{{0, 0}, {19, 29}}, {{5, 17}, {12, 3}}, {{10, 10}, {10, 25}}};
  for (const auto& [s, m] : ends) {
    const SampledSkeleton out = generate_path(flat, s, m, 1.0, 50);
    CHECK(out.reached);
    CHECK(static_cast<int>(out.path.size()) - 1 == chebyshev(s, m));
  }
  const ScalarGrid cube(Shape{6, 7, 8}, 0.0f);
  const SampledSkeleton out = generate_path(cube, {0, 0, 0}, {5, 2, 7}, 1.0, 50);
  CHECK(out.reached);
  CHECK(out.path.size() == 8);
}

TEST_CASE("adjacent maximum is taken immediately") {
  const ScalarGrid f = fixture::random_grid(Shape{5, 5}, 4);
  for (double gamma : {0.0, 0.2, 1.0}) {
    const SampledSkeleton out = generate_path(f, {2, 2}, {3, 3}, gamma, 50);
    CHECK(out.reached);
    CHECK(out.path == std::vector<Coord>{{2, 2}, {3, 3}});
  }
  CHECK_THROWS_AS(generate_path(f, {1, 1}, {1, 1}, 0.2, 50), ContractError);
}

TEST_CASE("walks between all critical points of the two-ridge grid") {
  const ScalarGrid f = fixture::two_ridges();
  const std::vector<Coord> critical{{0, 0}, {0, 8}, {2, 2}, {6, 6}, {8, 8}};
  int runs = 0;
  for (const auto& a : critical)
    for (const auto& b : critical) {
      if (a == b) continue;
      const SampledSkeleton out = generate_path(f, a, b, 0.2, 50);
      CHECK_MESSAGE(out.reached, to_string(a) << " -> " << to_string(b));
      CHECK(out.path.size() <= 51);
      ++runs;
    }
  CHECK(runs == 20);
}

TEST_CASE("retaining every structure reproduces the skeleton") {
  SynthConfig sc;
  sc.seed = 12;
  const SynthCase c = generate_case(sc);
  const MorseSkeleton sk = skeletonize(c.likelihood);
  REQUIRE(!sk.structures.empty());
  SamplerConfig cfg;
  cfg.u = 1.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    cfg.seed = seed;
    const auto samples = sample_skeleton(sk, c.likelihood, cfg, 1);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      CHECK(samples[i].was_retained);
      CHECK(samples[i].path == sk.structures[i].path);
      check_sample(samples[i], sk.structures[i], cfg);
    }
  }
}

TEST_CASE("noise-free greedy ascent retraces strict ridges") {
  SamplerConfig cfg;
  cfg.u = 0.0;
  cfg.gamma = 0.0;
  cfg.fixed_variance = 0.0;
  const ScalarGrid row(Shape{1, 5}, std::vector<float>{0.9f, 0.5f, 0.1f, 0.6f, 0.7f});
  int checked = 0;
  for (const ScalarGrid& f : {row, fixture::two_ridges()}) {
    const MorseSkeleton sk = skeletonize(f);
    for (const auto& e : sk.structures) {
      if (!strictly_dominant(e, f)) continue;
      const SampledSkeleton s = sample_structure(e, f, cfg, 1);
      CHECK_FALSE(s.was_retained);
      CHECK(s.reached);
      CHECK(s.path == e.path);
      ++checked;
    }
  }
  CHECK(checked >= 3);
}

TEST_CASE("samples are keyed by seed, structure and run") {
  SynthConfig sc;
  sc.seed = 4;
  sc.gap_rate = 0.2;
  const SynthCase c = generate_case(sc);
  const MorseSkeleton sk = skeletonize(c.likelihood);
  REQUIRE(sk.structures.size() >= 4);
  SamplerConfig cfg;
  cfg.u = 0.0;
  cfg.seed = 77;
  const auto a = sample_skeleton(sk, c.likelihood, cfg, 3, 1);
  const auto b = sample_skeleton(sk, c.likelihood, cfg, 3, 4);
  const auto other = sample_skeleton(sk, c.likelihood, cfg, 4, 1);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].path == b[i].path);
    CHECK(a[i].mask == b[i].mask);
    CHECK(a[i].reached == b[i].reached);
    check_sample(a[i], sk.structures[i], cfg);
    differ += a[i].path != other[i].path;
  }
  CHECK(differ > 0);
  // Sampling one structure alone gives the same draw as sampling all of them.
  const auto& e = sk.structures.back();
  CHECK(sample_structure(e, c.likelihood, cfg, 3).path == a.back().path);
}

TEST_CASE("retain frequency follows u") {
  const ScalarGrid f = fixture::two_ridges();
  const MorseSkeleton sk = skeletonize(f);
  SamplerConfig cfg;
  cfg.seed = 1;
  int retained = 0;
  const int n = 10'000;
  for (int r = 0; r < n; ++r) retained += sample_structure(sk.structures[static_cast<std::size_t>(r % 4)], f, cfg, r / 4).was_retained;
  CHECK(std::abs(retained / static_cast<double>(n) - 0.3) < 0.02);
}

TEST_CASE("every walk respects max_step") {
  SynthConfig sc;
  sc.seed = 21;
  sc.shape = Shape{96, 96};
  sc.n_curves = 5;
  sc.spur_rate = 0.3;
  sc.noise_sigma = 0.05;
  const SynthCase c = generate_case(sc);
  const MorseSkeleton sk = skeletonize(c.likelihood);
  for (int max_step : {5, 50}) {
    SamplerConfig cfg;
    cfg.u = 0.0;
    cfg.max_step = max_step;
    for (int run = 1; run <= 3; ++run) {
      const auto samples = sample_skeleton(sk, c.likelihood, cfg, run);
      for (std::size_t i = 0; i < samples.size(); ++i) check_sample(samples[i], sk.structures[i], cfg);
    }
  }
}
