#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "morseuq/rng.hpp"

namespace oracle {

namespace {

// Offsets with every component in {-1,0,1}, excluding zero; face_only keeps
// the ones that change a single axis.
std::vector<std::array<int, 3>> offsets(int rank, bool face_only) {
  std::vector<std::array<int, 3>> out;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int c = -1; c <= 1; ++c) {
        if (rank == 2 && a != 0) continue;
        const int nz = (a != 0) + (b != 0) + (c != 0);
        if (nz == 0 || (face_only && nz > 1)) continue;
        out.push_back({a, b, c});
      }
  return out;
}

// Flood fill over voxels where in_set(i) is true.
template <class InSet>
std::vector<int> label(const morseuq::Shape& s, InSet&& in_set, bool face_only) {
  const int rank = s.rank();
  const int d0 = rank == 3 ? s.dim(0) : 1;
  const int d1 = s.dim(rank - 2);
  const int d2 = s.dim(rank - 1);
  const auto offs = offsets(rank, face_only);
  std::vector<int> lab(s.size(), -1);
  int next = 0;
  std::vector<std::array<int, 3>> stack;
  for (int z = 0; z < d0; ++z)
    for (int y = 0; y < d1; ++y)
      for (int x = 0; x < d2; ++x) {
        const std::size_t i = (static_cast<std::size_t>(z) * d1 + y) * d2 + x;
        if (!in_set(i) || lab[i] >= 0) continue;
        lab[i] = next;
        stack.push_back({z, y, x});
        while (!stack.empty()) {
          const auto cur = stack.back();
          stack.pop_back();
          for (const auto& o : offs) {
            const int zz = cur[0] + o[0], yy = cur[1] + o[1], xx = cur[2] + o[2];
            if (zz < 0 || zz >= d0 || yy < 0 || yy >= d1 || xx < 0 || xx >= d2) continue;
            const std::size_t j = (static_cast<std::size_t>(zz) * d1 + yy) * d2 + xx;
            if (!in_set(j) || lab[j] >= 0) continue;
            lab[j] = next;
            stack.push_back({zz, yy, xx});
          }
        }
        ++next;
      }
  return lab;
}

// Cluster ids with background as its own cluster.
std::vector<int> clusters(const BinaryGrid& m) {
  std::vector<int> c = components(m);
  for (auto& v : c) v += 1;
  return c;
}

}  // namespace

std::vector<Pair> persistence_pairs(const ScalarGrid& f, double bg_threshold) {
  const std::size_t n = f.size();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i)
    if (f[i] >= bg_threshold) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return f[a] != f[b] ? f[a] > f[b] : a < b;
  });
  std::vector<std::size_t> rank_of(n, n);
  for (std::size_t r = 0; r < order.size(); ++r) rank_of[order[r]] = r;

  const auto offs = offsets(f.shape().rank(), false);
  std::vector<Pair> pairs;
  std::vector<char> in(n, 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::vector<int> lab = label(f.shape(), [&](std::size_t i) { return in[i] != 0; }, false);
    // Highest voxel (smallest rank) of every component.
    std::map<int, std::size_t> top;
    for (std::size_t i = 0; i < n; ++i) {
      if (lab[i] < 0) continue;
      auto it = top.find(lab[i]);
      if (it == top.end() || rank_of[i] < rank_of[it->second]) top[lab[i]] = i;
    }
    const std::size_t p = order[k];
    const morseuq::Coord c = f.shape().coord(p);
    std::set<int> touching;
    for (const auto& o : offs) {
      morseuq::Coord q = c;
      bool ok = true;
      for (int a = 0; a < c.rank; ++a) {
        q[a] += o[static_cast<std::size_t>(3 - c.rank + a)];
        if (q[a] < 0 || q[a] >= f.shape().dim(a)) ok = false;
      }
      if (!ok) continue;
      const std::size_t qi = f.shape().index(q);
      if (lab[qi] >= 0) touching.insert(lab[qi]);
    }
    if (touching.size() >= 2) {
      int elder = *touching.begin();
      for (int t : touching)
        if (rank_of[top[t]] < rank_of[top[elder]]) elder = t;
      for (int t : touching)
        if (t != elder) pairs.push_back({p, top[t], static_cast<double>(f[top[t]]) - f[p]});
    }
    in[p] = 1;
  }
  return pairs;
}

std::vector<int> components(const BinaryGrid& m, bool face_only) {
  return label(m.shape(), [&](std::size_t i) { return m[i] != 0; }, face_only);
}

int count_components(const BinaryGrid& m, bool face_only) {
  const auto lab = components(m, face_only);
  int best = -1;
  for (int v : lab) best = std::max(best, v);
  return best + 1;
}

Betti2 betti_2d(const BinaryGrid& m) {
  Betti2 b;
  b.b0 = count_components(m);
  std::set<std::pair<int, int>> verts;
  std::set<std::array<int, 3>> edges;  // (row, col, 0 horizontal | 1 vertical)
  long faces = 0;
  const int h = m.shape().dim(0), w = m.shape().dim(1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m[static_cast<std::size_t>(y * w + x)]) continue;
      ++faces;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) verts.insert({y + dy, x + dx});
      edges.insert({y, x, 0});
      edges.insert({y + 1, x, 0});
      edges.insert({y, x, 1});
      edges.insert({y, x + 1, 1});
    }
  const long chi = static_cast<long>(verts.size()) - static_cast<long>(edges.size()) + faces;
  b.b1 = static_cast<int>(b.b0 - chi);
  return b;
}

double dice(const BinaryGrid& p, const BinaryGrid& g) {
  double inter = 0, sp = 0, sg = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sp += p[i] ? 1 : 0;
    sg += g[i] ? 1 : 0;
    inter += (p[i] && g[i]) ? 1 : 0;
  }
  if (sp + sg == 0) return 1.0;
  return 2.0 * inter / (sp + sg);
}

double ari(const BinaryGrid& p, const BinaryGrid& g) {
  const auto cp = clusters(p), cg = clusters(g);
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < cp.size(); ++i)
    for (std::size_t j = i + 1; j < cp.size(); ++j) {
      const bool sp = cp[i] == cp[j], sg = cg[i] == cg[j];
      if (sp && sg) n11 += 1;
      else if (sp) n10 += 1;
      else if (sg) n01 += 1;
      else n00 += 1;
    }
  const double den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
  if (den == 0.0) return 1.0;
  return 2.0 * (n00 * n11 - n01 * n10) / den;
}

double voi(const BinaryGrid& p, const BinaryGrid& g) {
  const auto cp = clusters(p), cg = clusters(g);
  const double n = static_cast<double>(cp.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> mp, mg;
  for (std::size_t i = 0; i < cp.size(); ++i) {
    joint[{cp[i], cg[i]}] += 1;
    mp[cp[i]] += 1;
    mg[cg[i]] += 1;
  }
  double h_p_given_g = 0, h_g_given_p = 0;
  for (const auto& [key, count] : joint) {
    const double pij = count / n;
    h_p_given_g -= pij * std::log(count / mg[key.second]);
    h_g_given_p -= pij * std::log(count / mp[key.first]);
  }
  return h_p_given_g + h_g_given_p;
}

double ece(const std::vector<double>& confidence, const std::vector<bool>& correct, int bins) {
  const double n = static_cast<double>(confidence.size());
  double total = 0;
  for (int b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) / bins, hi = static_cast<double>(b + 1) / bins;
    double cnt = 0, acc = 0, conf = 0;
    for (std::size_t i = 0; i < confidence.size(); ++i) {
      const double c = confidence[i];
      const bool inside = b == bins - 1 ? (c >= lo && c <= hi) : (c >= lo && c < hi);
      if (!inside) continue;
      cnt += 1;
      acc += correct[i] ? 1 : 0;
      conf += c;
    }
    if (cnt > 0) total += (cnt / n) * std::abs(acc / cnt - conf / cnt);
  }
  return total;
}

constexpr double kKinkTolerance = 1e-2;

std::array<double, morseuq::kTensorCount> gradient_errors(const morseuq::RegressorParams& params,
                                                          const morseuq::StructureGraph& graph,
                                                          const std::vector<double>& labels,
                                                          double eps, std::size_t max_entries,
                                                          std::uint64_t seed, std::size_t* kinks) {
  using morseuq::DropoutSpec;
  const auto analytic = morseuq::backward(params, graph, labels, DropoutSpec::off()).grads;
  morseuq::RegressorParams probe = params;
  auto probe_ts = probe.tensors();
  const auto grad_ts = analytic.tensors();
  morseuq::Rng rng(seed);
  std::array<double, morseuq::kTensorCount> errors{};
  auto loss_at = [&]() { return morseuq::loss_uq(morseuq::forward(probe, graph, DropoutSpec::off()), labels); };

  for (std::size_t t = 0; t < probe_ts.size(); ++t) {
    Eigen::MatrixXd& w = *probe_ts[t];
    const auto total = static_cast<std::size_t>(w.size());
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    if (total > max_entries) {
      for (std::size_t i = 0; i < max_entries; ++i)
        std::swap(idx[i], idx[i + static_cast<std::size_t>(rng.below(total - i))]);
      idx.resize(max_entries);
    }
    double diff2 = 0, a2 = 0, n2 = 0;
    for (const std::size_t k : idx) {
      double& x = w.data()[k];
      const double saved = x;
      const auto central = [&](double h) {
        x = saved + h;
        const double up = loss_at();
        x = saved - h;
        const double down = loss_at();
        x = saved;
        return (up - down) / (2.0 * h);
      };
      const double numeric = central(eps);
      if (kinks) {
        const double fine = central(eps / 10.0);
        if (std::abs(numeric - fine) > kKinkTolerance * std::max({std::abs(numeric), std::abs(fine), 1e-8})) {
          ++*kinks;
          continue;
        }
      }
      const double a = grad_ts[t]->data()[k];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    const double scale = std::sqrt(std::max(a2, n2));
    errors[t] = scale == 0.0 ? 0.0 : std::sqrt(diff2) / scale;
  }
  return errors;
}

}  // namespace oracle
