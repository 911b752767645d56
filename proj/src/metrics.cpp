#include "morseuq/metrics.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "morseuq/errors.hpp"

namespace morseuq {

namespace {

void require_same(const BinaryGrid& a, const BinaryGrid& b, const char* what) {
  require(a.shape() == b.shape(), std::string(what) + ": dims differ");
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

BinaryGrid erode(const BinaryGrid& m, const Neighborhood& nb) {
  BinaryGrid out(m.shape());
  const Shape& s = m.shape();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const Coord c = s.coord(i);
    bool keep = true;
    for (int a = 0; a < s.rank() && keep; ++a) keep = c[a] > 0 && c[a] < s.dim(a) - 1;
    nb.for_each(i, [&](std::size_t j) { keep = keep && m[j]; });
    out[i] = keep ? 1 : 0;
  }
  return out;
}

BinaryGrid dilate(const BinaryGrid& m, const Neighborhood& nb) {
  BinaryGrid out(m.shape());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    out[i] = 1;
    nb.for_each(i, [&](std::size_t j) { out[j] = 1; });
  }
  return out;
}

// Complement of the mask inside a one-voxel background frame.
BinaryGrid padded_background(const BinaryGrid& m) {
  const Shape& s = m.shape();
  std::vector<int> dims = s.dims();
  for (int& d : dims) d += 2;
  BinaryGrid out{Shape(std::span<const int>(dims))};
  for (auto& v : out.values()) v = 1;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    Coord c = s.coord(i);
    for (int a = 0; a < c.rank; ++a) c[a] += 1;
    out[out.shape().index(c)] = 0;
  }
  return out;
}

// Euler characteristic of the union of closed unit cells, counted on the
// doubled grid where odd coordinates are cell interiors along that axis.
long euler_characteristic(const BinaryGrid& m) {
  const Shape& s = m.shape();
  const int r = s.rank();
  std::vector<int> ddims(static_cast<std::size_t>(r));
  for (int a = 0; a < r; ++a) ddims[static_cast<std::size_t>(a)] = 2 * s.dim(a) + 1;
  const Shape d{std::span<const int>(ddims)};
  long chi = 0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const Coord y = d.coord(k);
    std::array<int, kMaxRank> lo{}, hi{};
    int dim = 0;
    for (int a = 0; a < r; ++a) {
      const auto A = static_cast<std::size_t>(a);
      if (y[a] % 2 == 1) {
        lo[A] = hi[A] = (y[a] - 1) / 2;
        ++dim;
      } else {
        lo[A] = std::max(0, y[a] / 2 - 1);
        hi[A] = std::min(s.dim(a) - 1, y[a] / 2);
      }
    }
    bool present = false;
    Coord c;
    c.rank = r;
    for (int a = 0; a < r; ++a) c[a] = lo[static_cast<std::size_t>(a)];
    while (!present) {
      present = m[s.index(c)] != 0;
      int a = r - 1;
      for (; a >= 0; --a) {
        if (c[a] < hi[static_cast<std::size_t>(a)]) {
          ++c[a];
          break;
        }
        c[a] = lo[static_cast<std::size_t>(a)];
      }
      if (a < 0) break;
    }
    if (present) chi += dim % 2 == 0 ? 1 : -1;
  }
  return chi;
}

}  // namespace

Calibration calibration(const std::vector<CalSample>& samples, int bins) {
  require(bins >= 1, "calibration: bins must be >= 1");
  require(!samples.empty(), "calibration: no samples");
  Calibration out;
  out.rows.resize(static_cast<std::size_t>(bins));
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::size_t> hits(static_cast<std::size_t>(bins), 0);
  for (const auto& s : samples) {
    require(s.confidence >= 0.0 && s.confidence <= 1.0, "calibration: confidence outside [0,1]");
    int b = static_cast<int>(std::floor(s.confidence * bins));
    while (b > 0 && s.confidence < static_cast<double>(b) / bins) --b;
    while (b < bins - 1 && s.confidence >= static_cast<double>(b + 1) / bins) ++b;
    b = std::min(b, bins - 1);
    const auto B = static_cast<std::size_t>(b);
    ++out.rows[B].count;
    conf_sum[B] += s.confidence;
    hits[B] += s.correct ? 1 : 0;
  }
  const auto n = static_cast<double>(samples.size());
  for (int b = 0; b < bins; ++b) {
    auto& row = out.rows[static_cast<std::size_t>(b)];
    row.bin = b;
    if (row.count == 0) continue;
    const auto c = static_cast<double>(row.count);
    row.accuracy = static_cast<double>(hits[static_cast<std::size_t>(b)]) / c;
    row.confidence = conf_sum[static_cast<std::size_t>(b)] / c;
    out.ece += c / n * std::abs(row.accuracy - row.confidence);
  }
  return out;
}

std::vector<CalSample> structure_samples(const std::vector<StructureEstimate>& estimates,
                                         const std::vector<double>& soft_labels) {
  require(estimates.size() == soft_labels.size(), "structure_samples: label count differs");
  std::vector<CalSample> out;
  out.reserve(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i)
    out.push_back({1.0 - estimates[i].u_norm, (estimates[i].p_bar >= 0.5) == (soft_labels[i] >= 0.5)});
  return out;
}

std::string reliability_csv(const std::vector<ReliabilityRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "bin,count,acc,conf\n";
  for (const auto& r : rows) os << r.bin << ',' << r.count << ',' << r.accuracy << ',' << r.confidence << '\n';
  return os.str();
}

double dice(const BinaryGrid& pred, const BinaryGrid& gt) {
  require_same(pred, gt, "dice");
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p += pred[i] != 0;
    g += gt[i] != 0;
    both += pred[i] && gt[i];
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

BinaryGrid morphological_skeleton(const BinaryGrid& mask) {
  const Neighborhood nb(mask.shape(), Connectivity::face);
  BinaryGrid skel(mask.shape());
  BinaryGrid cur = mask;
  while (count_foreground(cur) > 0) {
    BinaryGrid next = erode(cur, nb);
    const BinaryGrid opened = dilate(next, nb);
    for (std::size_t i = 0; i < cur.size(); ++i)
      if (cur[i] && !opened[i]) skel[i] = 1;
    cur = std::move(next);
  }
  return skel;
}

double cldice(const BinaryGrid& pred, const BinaryGrid& gt) {
  require_same(pred, gt, "cldice");
  const std::size_t np = count_foreground(pred), ng = count_foreground(gt);
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const BinaryGrid sp = morphological_skeleton(pred);
  const BinaryGrid sg = morphological_skeleton(gt);
  std::size_t sp_n = 0, sp_in = 0, sg_n = 0, sg_in = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sp_n += sp[i] != 0;
    sp_in += sp[i] && gt[i];
    sg_n += sg[i] != 0;
    sg_in += sg[i] && pred[i];
  }
  const double tprec = static_cast<double>(sp_in) / static_cast<double>(sp_n);
  const double tsens = static_cast<double>(sg_in) / static_cast<double>(sg_n);
  if (tprec + tsens == 0.0) return 0.0;
  return 2.0 * tprec * tsens / (tprec + tsens);
}

std::vector<int> label_components(const BinaryGrid& mask, Connectivity conn, int* count) {
  const Neighborhood nb(mask.shape(), conn);
  std::vector<int> label(mask.size(), -1);
  std::vector<std::size_t> stack;
  int next = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || label[i] >= 0) continue;
    label[i] = next;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      nb.for_each(v, [&](std::size_t w) {
        if (mask[w] && label[w] < 0) {
          label[w] = next;
          stack.push_back(w);
        }
      });
    }
    ++next;
  }
  if (count) *count = next;
  return label;
}

AriVoi ari_voi(const BinaryGrid& pred, const BinaryGrid& gt) {
  require_same(pred, gt, "ari_voi");
  const auto lp = label_components(pred, Connectivity::full);
  const auto lg = label_components(gt, Connectivity::full);
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    joint[{lp[i], lg[i]}] += 1.0;
    rows[lp[i]] += 1.0;
    cols[lg[i]] += 1.0;
  }
  const auto n = static_cast<double>(pred.size());
  AriVoi out;
  double index = 0.0, a = 0.0, b = 0.0, h_joint = 0.0, h_p = 0.0, h_g = 0.0;
  for (const auto& [k, c] : joint) {
    index += choose2(c);
    h_joint -= c / n * std::log(c / n);
  }
  for (const auto& [k, c] : rows) {
    a += choose2(c);
    h_p -= c / n * std::log(c / n);
  }
  for (const auto& [k, c] : cols) {
    b += choose2(c);
    h_g -= c / n * std::log(c / n);
  }
  const double pairs = choose2(n);
  const double expected = pairs > 0.0 ? a * b / pairs : 0.0;
  const double den = 0.5 * (a + b) - expected;
  out.ari = den == 0.0 ? 1.0 : (index - expected) / den;
  out.voi = std::max(0.0, 2.0 * h_joint - h_p - h_g);
  return out;
}

std::vector<int> betti_numbers(const BinaryGrid& mask) {
  const int r = mask.shape().rank();
  require(r == 2 || r == 3, "betti_numbers: rank must be 2 or 3");
  int b0 = 0, bg = 0;
  label_components(mask, Connectivity::full, &b0);
  label_components(padded_background(mask), Connectivity::face, &bg);
  const int holes = bg - 1;
  const long chi = euler_characteristic(mask);
  if (r == 2) return {b0, holes};
  return {b0, static_cast<int>(b0 + holes - chi), holes};
}

std::vector<int> betti_errors(const BinaryGrid& pred, const BinaryGrid& gt) {
  require_same(pred, gt, "betti_errors");
  const auto p = betti_numbers(pred);
  const auto g = betti_numbers(gt);
  std::vector<int> out(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) out[k] = std::abs(p[k] - g[k]);
  return out;
}

}  // namespace morseuq
