#include "morseuq/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <Eigen/SparseCore>
#include <json.hpp>

#include "morseuq/parallel.hpp"
#include "morseuq/rng.hpp"

namespace morseuq {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double>;

namespace {

int kernel_size(int rank) { return rank == 2 ? 9 : 27; }

const std::array<const char*, kTensorCount> kNames{
    "conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias", "gcn1.weight",  "gcn1.bias",
    "gcn2.weight",  "gcn2.bias",  "gcn3.weight",  "gcn3.bias",  "head_p.weight", "head_p.bias",
    "head_s.weight", "head_s.bias"};

std::array<std::pair<int, int>, kTensorCount> expected_shapes(int rank) {
  const int k = kernel_size(rank);
  return {{{kConv1Channels, kInputChannels * k},
           {kConv1Channels, 1},
           {kConv2Channels, kConv1Channels * k},
           {kConv2Channels, 1},
           {kNodeFeatures, kGcnWidths[0]},
           {1, kGcnWidths[0]},
           {kGcnWidths[0], kGcnWidths[1]},
           {1, kGcnWidths[1]},
           {kGcnWidths[1], kGcnWidths[2]},
           {1, kGcnWidths[2]},
           {kGcnWidths[2], 1},
           {1, 1},
           {kGcnWidths[2], 1},
           {1, 1}}};
}

// For each kernel offset k (lexicographic over {-1,0,1}^rank) and voxel v,
// the linear index of v + offset, or -1 where the zero padding applies.
struct ConvGeometry {
  int k = 0;
  Eigen::Index v = 0;
  std::vector<std::int32_t> nbr;

  explicit ConvGeometry(const Shape& shape) {
    const int rank = shape.rank();
    k = kernel_size(rank);
    v = static_cast<Eigen::Index>(shape.size());
    nbr.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(v), -1);
    for (int kk = 0; kk < k; ++kk) {
      std::array<int, 3> off{};
      int rem = kk;
      for (int a = rank - 1; a >= 0; --a) {
        off[static_cast<std::size_t>(a)] = rem % 3 - 1;
        rem /= 3;
      }
      for (Eigen::Index i = 0; i < v; ++i) {
        Coord c = shape.coord(static_cast<std::size_t>(i));
        bool inside = true;
        for (int a = 0; a < rank; ++a) {
          c[a] += off[static_cast<std::size_t>(a)];
          if (c[a] < 0 || c[a] >= shape.dim(a)) inside = false;
        }
        if (inside) at(kk, i) = static_cast<std::int32_t>(shape.index(c));
      }
    }
  }

  std::int32_t& at(int kk, Eigen::Index i) { return nbr[static_cast<std::size_t>(kk * v + i)]; }
  std::int32_t at(int kk, Eigen::Index i) const { return nbr[static_cast<std::size_t>(kk * v + i)]; }

  // Patch column of `in` (C x V) around voxel i, ordered (channel, offset).
  void column(const MatrixXd& in, Eigen::Index i, double* out) const {
    const Eigen::Index c_in = in.rows();
    for (Eigen::Index c = 0; c < c_in; ++c)
      for (int kk = 0; kk < k; ++kk) {
        const std::int32_t n = at(kk, i);
        out[c * k + kk] = n >= 0 ? in(c, n) : 0.0;
      }
  }

  MatrixXd im2col(const MatrixXd& in) const {
    MatrixXd out(in.rows() * k, v);
    for (Eigen::Index i = 0; i < v; ++i) column(in, i, out.col(i).data());
    return out;
  }
};

// Inverted-dropout mask, entries 0 or 1/keep. Each hash of (seed, counter)
// supplies two 32-bit uniforms.
MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed) {
  const double keep = 1.0 - rate;
  const auto threshold = static_cast<std::uint64_t>(std::ldexp(keep, 32));
  MatrixXd m(rows, cols);
  double* d = m.data();
  const Eigen::Index n = m.size();
  for (Eigen::Index i = 0; i < n; i += 2) {
    const std::uint64_t x = splitmix64(seed + static_cast<std::uint64_t>(i));
    d[i] = (x & 0xffffffffULL) < threshold ? 1.0 / keep : 0.0;
    if (i + 1 < n) d[i + 1] = (x >> 32) < threshold ? 1.0 / keep : 0.0;
  }
  return m;
}

bool dropout_active(const DropoutSpec& d) { return d.enabled && d.rate > 0.0; }

std::uint64_t encoder_mask_seed(const DropoutSpec& d, std::size_t node, int layer) {
  return derive_seed({d.seed, 0xE7C0, static_cast<std::uint64_t>(node), static_cast<std::uint64_t>(layer)});
}

std::uint64_t gcn_mask_seed(const DropoutSpec& d, int layer) {
  return derive_seed({d.seed, 0x6C7, static_cast<std::uint64_t>(layer)});
}

struct EncoderCache {
  MatrixXd x0;  // 3 x V
  MatrixXd z1;  // 24 x V
  MatrixXd a1;  // 24 x V
  MatrixXd d1;  // empty when dropout is off
  std::array<Eigen::Index, kConv2Channels> arg{};
  std::array<double, kConv2Channels> z2{};
  std::array<double, kConv2Channels> d2{};
};

MatrixXd node_input(const NodeInput& n) {
  const auto v = static_cast<Eigen::Index>(n.x_crop.size());
  require(n.f_crop.size() == n.x_crop.size() && n.m_crop.size() == n.x_crop.size(),
          "regressor: node crops differ in size");
  MatrixXd x0(kInputChannels, v);
  for (Eigen::Index i = 0; i < v; ++i) {
    const auto u = static_cast<std::size_t>(i);
    x0(0, i) = n.x_crop[u];
    x0(1, i) = n.f_crop[u];
    x0(2, i) = n.m_crop[u] ? 1.0 : 0.0;
  }
  return x0;
}

// Conv-ReLU-dropout twice, then a per-channel global max (first index wins ties).
void encode(const RegressorParams& p, const ConvGeometry& geo, const NodeInput& node, std::size_t node_index,
            const DropoutSpec& dropout, double* pooled, EncoderCache* cache) {
  const bool drop = dropout_active(dropout);
  MatrixXd x0 = node_input(node);
  MatrixXd z1 = p.conv1_w * geo.im2col(x0);
  z1.colwise() += p.conv1_b.col(0);
  MatrixXd a1 = z1.cwiseMax(0.0);
  MatrixXd d1;
  if (drop) {
    d1 = dropout_mask(a1.rows(), a1.cols(), dropout.rate, encoder_mask_seed(dropout, node_index, 1));
    a1.array() *= d1.array();
  }
  MatrixXd z2 = p.conv2_w * geo.im2col(a1);
  z2.colwise() += p.conv2_b.col(0);
  MatrixXd d2;
  if (drop) d2 = dropout_mask(z2.rows(), z2.cols(), dropout.rate, encoder_mask_seed(dropout, node_index, 2));

  for (int c = 0; c < kConv2Channels; ++c) {
    Eigen::Index best_i = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < z2.cols(); ++i) {
      double a = std::max(z2(c, i), 0.0);
      if (drop) a *= d2(c, i);
      if (a > best) {
        best = a;
        best_i = i;
      }
    }
    pooled[c] = best;
    if (cache) {
      cache->arg[static_cast<std::size_t>(c)] = best_i;
      cache->z2[static_cast<std::size_t>(c)] = z2(c, best_i);
      cache->d2[static_cast<std::size_t>(c)] = drop ? d2(c, best_i) : 1.0;
    }
  }
  if (cache) {
    cache->x0 = std::move(x0);
    cache->z1 = std::move(z1);
    cache->a1 = std::move(a1);
    cache->d1 = std::move(d1);
  }
}

struct EncoderGrads {
  MatrixXd w1, b1, w2, b2;
};

EncoderGrads encode_backward(const RegressorParams& p, const ConvGeometry& geo, const EncoderCache& cache,
                             const double* g) {
  EncoderGrads out{MatrixXd::Zero(p.conv1_w.rows(), p.conv1_w.cols()), MatrixXd::Zero(kConv1Channels, 1),
                   MatrixXd::Zero(p.conv2_w.rows(), p.conv2_w.cols()), MatrixXd::Zero(kConv2Channels, 1)};
  const int k = geo.k;
  MatrixXd da1 = MatrixXd::Zero(cache.a1.rows(), cache.a1.cols());
  std::vector<Eigen::Index> touched;
  VectorXd col(p.conv2_w.cols());
  for (int c = 0; c < kConv2Channels; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    if (cache.z2[cu] <= 0.0) continue;
    const double gz = g[c] * cache.d2[cu];
    if (gz == 0.0) continue;
    const Eigen::Index v = cache.arg[cu];
    geo.column(cache.a1, v, col.data());
    out.w2.row(c) += gz * col.transpose();
    out.b2(c, 0) += gz;
    for (Eigen::Index c1 = 0; c1 < cache.a1.rows(); ++c1)
      for (int kk = 0; kk < k; ++kk) {
        const std::int32_t n = geo.at(kk, v);
        if (n < 0) continue;
        da1(c1, n) += p.conv2_w(c, c1 * k + kk) * gz;
        touched.push_back(n);
      }
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

  VectorXd col0(p.conv1_w.cols());
  const bool drop = cache.d1.size() > 0;
  for (const Eigen::Index u : touched) {
    VectorXd dz = da1.col(u);
    for (Eigen::Index c1 = 0; c1 < dz.size(); ++c1) {
      if (cache.z1(c1, u) <= 0.0) dz(c1) = 0.0;
      else if (drop) dz(c1) *= cache.d1(c1, u);
    }
    if (dz.isZero(0.0)) continue;
    geo.column(cache.x0, u, col0.data());
    out.w1.noalias() += dz * col0.transpose();
    out.b1 += dz;
  }
  return out;
}

SparseMat normalized_adjacency(const Adjacency& adj) {
  const auto n = static_cast<Eigen::Index>(adj.size());
  std::vector<double> inv_sqrt(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) inv_sqrt[i] = 1.0 / std::sqrt(1.0 + static_cast<double>(adj[i].size()));
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t i = 0; i < adj.size(); ++i) {
    trips.emplace_back(i, i, inv_sqrt[i] * inv_sqrt[i]);
    for (const int j : adj[i]) {
      require(j >= 0 && static_cast<std::size_t>(j) < adj.size() && static_cast<std::size_t>(j) != i,
              "regressor: malformed adjacency");
      trips.emplace_back(i, j, inv_sqrt[i] * inv_sqrt[static_cast<std::size_t>(j)]);
    }
  }
  SparseMat a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

struct GcnCache {
  SparseMat a_hat;
  MatrixXd h0;
  std::array<MatrixXd, 3> t, z, mask, h;  // t = A_hat * input of the layer
  MatrixXd t_head;
};

struct ForwardState {
  std::vector<NodePrediction> preds;
  std::vector<EncoderCache> enc;
  GcnCache gcn;
};

ForwardState run_forward(const RegressorParams& p, const StructureGraph& graph, const DropoutSpec& dropout,
                         int jobs, bool keep_cache) {
  ForwardState st;
  const std::size_t n = graph.nodes.size();
  require(graph.adjacency.size() == n, "regressor: adjacency size differs from node count");
  if (n == 0) return st;
  const int rank = graph.nodes.front().x_crop.shape().rank();
  require(rank == p.rank, "regressor: parameters were built for a different rank");
  const Shape window = graph.nodes.front().x_crop.shape();
  for (const auto& node : graph.nodes)
    require(node.x_crop.shape() == window, "regressor: node crops differ in shape");
  const ConvGeometry geo(window);

  const bool drop = dropout_active(dropout);
  GcnCache& g = st.gcn;
  g.h0.resize(static_cast<Eigen::Index>(n), kNodeFeatures);
  if (keep_cache) st.enc.resize(n);
  std::vector<std::array<double, kConv2Channels>> pooled(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    encode(p, geo, graph.nodes[i], i, dropout, pooled[i].data(), keep_cache ? &st.enc[i] : nullptr);
  });
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int c = 0; c < kConv2Channels; ++c) g.h0(r, c) = pooled[i][static_cast<std::size_t>(c)];
    g.h0(r, kConv2Channels) = graph.nodes[i].persistence;
  }

  g.a_hat = normalized_adjacency(graph.adjacency);
  const std::array<const MatrixXd*, 3> ws{&p.gcn1_w, &p.gcn2_w, &p.gcn3_w};
  const std::array<const MatrixXd*, 3> bs{&p.gcn1_b, &p.gcn2_b, &p.gcn3_b};
  const MatrixXd* in = &g.h0;
  for (int l = 0; l < 3; ++l) {
    const auto lu = static_cast<std::size_t>(l);
    g.t[lu] = g.a_hat * (*in);
    g.z[lu] = g.t[lu] * (*ws[lu]);
    g.z[lu].rowwise() += bs[lu]->row(0);
    g.h[lu] = g.z[lu].cwiseMax(0.0);
    if (drop) {
      g.mask[lu] = dropout_mask(g.h[lu].rows(), g.h[lu].cols(), dropout.rate, gcn_mask_seed(dropout, l + 1));
      g.h[lu].array() *= g.mask[lu].array();
    }
    in = &g.h[lu];
  }
  g.t_head = g.a_hat * g.h[2];
  const VectorXd phat = g.t_head * p.head_p_w.col(0) + VectorXd::Constant(g.t_head.rows(), p.head_p_b(0, 0));
  const VectorXd s = g.t_head * p.head_s_w.col(0) + VectorXd::Constant(g.t_head.rows(), p.head_s_b(0, 0));
  st.preds.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    st.preds[i].p_hat = phat(static_cast<Eigen::Index>(i));
    st.preds[i].log_variance = s(static_cast<Eigen::Index>(i));
  }
  return st;
}

double uniform_bound(int fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

}  // namespace

RegressorParams RegressorParams::zeros(int rank) {
  require(rank == 2 || rank == 3, "regressor: rank must be 2 or 3");
  RegressorParams p;
  p.rank = rank;
  const auto shapes = expected_shapes(rank);
  auto ts = p.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) *ts[i] = MatrixXd::Zero(shapes[i].first, shapes[i].second);
  return p;
}

RegressorParams RegressorParams::initialize(int rank, std::uint64_t seed) {
  RegressorParams p = zeros(rank);
  Rng rng(seed);
  auto fill = [&](MatrixXd& w, int fan_in) {
    const double b = uniform_bound(fan_in);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = (2.0 * rng.uniform() - 1.0) * b;
  };
  // Conv weights are (out, in*K) so fan-in is the column count; graph
  // weights are (in, out) so it is the row count.
  fill(p.conv1_w, static_cast<int>(p.conv1_w.cols()));
  fill(p.conv2_w, static_cast<int>(p.conv2_w.cols()));
  for (MatrixXd* w : {&p.gcn1_w, &p.gcn2_w, &p.gcn3_w, &p.head_p_w, &p.head_s_w})
    fill(*w, static_cast<int>(w->rows()));
  return p;
}

std::array<MatrixXd*, kTensorCount> RegressorParams::tensors() {
  return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &gcn1_w,   &gcn1_b,   &gcn2_w,
          &gcn2_b,  &gcn3_w,  &gcn3_b,  &head_p_w, &head_p_b, &head_s_w, &head_s_b};
}

std::array<const MatrixXd*, kTensorCount> RegressorParams::tensors() const {
  return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &gcn1_w,   &gcn1_b,   &gcn2_w,
          &gcn2_b,  &gcn3_w,  &gcn3_b,  &head_p_w, &head_p_b, &head_s_w, &head_s_b};
}

const std::array<const char*, kTensorCount>& RegressorParams::tensor_names() { return kNames; }

double NodePrediction::variance() const { return std::exp(log_variance); }

std::vector<NodePrediction> forward(const RegressorParams& params, const StructureGraph& graph,
                                    const DropoutSpec& dropout, int jobs) {
  return run_forward(params, graph, dropout, jobs, false).preds;
}

double loss_uq(const std::vector<NodePrediction>& preds, const std::vector<double>& labels) {
  require(preds.size() == labels.size(), "loss_uq: prediction and label counts differ");
  if (preds.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double r = preds[i].p_hat - labels[i];
    sum += 0.5 * r * r * std::exp(-preds[i].log_variance) + 0.5 * preds[i].log_variance;
  }
  return sum / static_cast<double>(preds.size());
}

BackwardResult backward(const RegressorParams& p, const StructureGraph& graph, const std::vector<double>& labels,
                        const DropoutSpec& dropout, int jobs) {
  require(labels.size() == graph.nodes.size(), "backward: label count differs from node count");
  BackwardResult out;
  out.grads = RegressorParams::zeros(p.rank);
  ForwardState st = run_forward(p, graph, dropout, jobs, true);
  out.preds = st.preds;
  out.loss = loss_uq(st.preds, labels);
  const std::size_t n = graph.nodes.size();
  if (n == 0) return out;

  const auto rows = static_cast<Eigen::Index>(n);
  VectorXd dp(rows), ds(rows);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = st.preds[i].p_hat - labels[i];
    const double inv_var = std::exp(-st.preds[i].log_variance);
    dp(static_cast<Eigen::Index>(i)) = r * inv_var / static_cast<double>(n);
    ds(static_cast<Eigen::Index>(i)) = (0.5 - 0.5 * r * r * inv_var) / static_cast<double>(n);
  }
  RegressorGrads& gr = out.grads;
  GcnCache& g = st.gcn;
  gr.head_p_w = g.t_head.transpose() * dp;
  gr.head_p_b(0, 0) = dp.sum();
  gr.head_s_w = g.t_head.transpose() * ds;
  gr.head_s_b(0, 0) = ds.sum();
  MatrixXd dt = dp * p.head_p_w.transpose() + ds * p.head_s_w.transpose();
  MatrixXd dh = g.a_hat * dt;

  const std::array<const MatrixXd*, 3> ws{&p.gcn1_w, &p.gcn2_w, &p.gcn3_w};
  const std::array<MatrixXd*, 3> gws{&gr.gcn1_w, &gr.gcn2_w, &gr.gcn3_w};
  const std::array<MatrixXd*, 3> gbs{&gr.gcn1_b, &gr.gcn2_b, &gr.gcn3_b};
  for (int l = 2; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    MatrixXd dz = dh;
    for (Eigen::Index j = 0; j < dz.cols(); ++j)
      for (Eigen::Index i = 0; i < dz.rows(); ++i) {
        if (g.z[lu](i, j) <= 0.0) dz(i, j) = 0.0;
        else if (g.mask[lu].size() > 0) dz(i, j) *= g.mask[lu](i, j);
      }
    *gws[lu] = g.t[lu].transpose() * dz;
    *gbs[lu] = dz.colwise().sum();
    dh = g.a_hat * (dz * ws[lu]->transpose());
  }

  const ConvGeometry geo(graph.nodes.front().x_crop.shape());
  std::vector<EncoderGrads> per_node(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    std::array<double, kConv2Channels> gpool{};
    for (int c = 0; c < kConv2Channels; ++c)
      gpool[static_cast<std::size_t>(c)] = dh(static_cast<Eigen::Index>(i), c);
    per_node[i] = encode_backward(p, geo, st.enc[i], gpool.data());
    st.enc[i] = EncoderCache{};
  });
  for (const auto& e : per_node) {
    gr.conv1_w += e.w1;
    gr.conv1_b += e.b1;
    gr.conv2_w += e.w2;
    gr.conv2_b += e.b2;
  }
  return out;
}

void TrainConfig::validate() const {
  require(lr > 0.0, "train: learning rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "train: Adam betas must lie in [0,1)");
  require(eps > 0.0, "train: eps must be positive");
  require(weight_decay >= 0.0, "train: weight decay must be >= 0");
  require(dropout >= 0.0 && dropout < 1.0, "train: dropout rate must lie in [0,1)");
  require(epochs >= 0, "train: epochs must be >= 0");
  require(box > 0 && box % 2 == 0, "train: box must be a positive even integer");
}

Adam::Adam(const RegressorParams& like, const TrainConfig& cfg)
    : cfg_(cfg), m_(RegressorParams::zeros(like.rank)), v_(RegressorParams::zeros(like.rank)) {}

void Adam::step(RegressorParams& params, const RegressorGrads& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto ps = params.tensors();
  const auto gs = grads.tensors();
  auto ms = m_.tensors();
  auto vs = v_.tensors();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    MatrixXd g = *gs[i];
    if (cfg_.weight_decay > 0.0) g += cfg_.weight_decay * (*ps[i]);
    *ms[i] = cfg_.beta1 * (*ms[i]) + (1.0 - cfg_.beta1) * g;
    *vs[i] = cfg_.beta2 * (*vs[i]) + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    ps[i]->array() -= cfg_.lr * (ms[i]->array() / c1) / ((vs[i]->array() / c2).sqrt() + cfg_.eps);
  }
}

std::uint64_t case_sampler_seed(std::uint64_t seed, std::size_t case_index) {
  return derive_seed({seed, 0xCA5E, static_cast<std::uint64_t>(case_index)});
}

TrainResult train(const std::vector<Case>& corpus, const SamplerConfig& sampler, const TrainConfig& cfg,
                  const RegressorParams* init, const EpochCallback& on_epoch) {
  cfg.validate();
  sampler.validate();
  require(!corpus.empty(), "train: empty corpus");
  const int rank = corpus.front().likelihood.shape().rank();

  struct Prepared {
    MorseSkeleton skel;
    GraphBuilder builder;
    SamplerConfig sampler;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(corpus.size());
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const Case& c = corpus[k];
    if (!c.has_gt()) throw DataError("train: case '" + c.name + "' has no ground truth");
    if (c.likelihood.shape().rank() != rank) throw DataError("train: corpus mixes 2D and 3D cases");
    if (c.image.shape() != c.likelihood.shape() || c.gt.shape() != c.likelihood.shape())
      throw DataError("train: case '" + c.name + "' has mismatched dims");
    MorseSkeleton skel = skeletonize(c.likelihood, cfg.bg_threshold);
    GraphBuilder builder(skel, c.image, c.likelihood, cfg.box);
    SamplerConfig sc = sampler;
    sc.seed = case_sampler_seed(sampler.seed, k);
    prepared.push_back({std::move(skel), std::move(builder), sc});
  }

  TrainResult result;
  result.params = init ? *init : RegressorParams::initialize(rank, derive_seed({cfg.seed, 0x1417}));
  require(result.params.rank == rank, "train: initial parameters have the wrong rank");
  Adam adam(result.params, cfg);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < prepared.size(); ++k) {
      Prepared& pk = prepared[k];
      if (pk.builder.size() == 0) continue;
      const auto samples = sample_skeleton(pk.skel, corpus[k].likelihood, pk.sampler, epoch, cfg.jobs);
      const StructureGraph graph = pk.builder.build(samples, &corpus[k].gt);
      const DropoutSpec drop = DropoutSpec::seeded(
          derive_seed({cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(k)}), cfg.dropout);
      const BackwardResult br = backward(result.params, graph, *graph.labels, drop, cfg.jobs);
      total += br.loss;
      ++used;
      adam.step(result.params, br.grads);
    }
    const double mean = used ? total / static_cast<double>(used) : 0.0;
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

void save_params(const RegressorParams& params, const std::filesystem::path& path) {
  nlohmann::json header;
  header["magic"] = "MUQW";
  header["rank"] = params.rank;
  header["dtype"] = "f32";
  header["tensors"] = nlohmann::json::array();
  const auto ts = params.tensors();
  std::string payload;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const MatrixXd& m = *ts[i];
    header["tensors"].push_back({{"name", kNames[i]}, {"shape", {m.rows(), m.cols()}}});
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const auto f = static_cast<float>(m(r, c));
        char buf[sizeof(float)];
        std::memcpy(buf, &f, sizeof(float));
        payload.append(buf, sizeof(float));
      }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_params: cannot open " + path.string());
  out << header.dump() << '\n' << payload;
  if (!out) throw DataError("save_params: write failed for " + path.string());
}

RegressorParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_params: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw DataError("load_params: malformed header in " + path.string());
  }
  if (header.value("magic", "") != "MUQW") throw DataError("load_params: bad magic in " + path.string());
  if (header.value("dtype", "") != "f32") throw DataError("load_params: unsupported dtype");
  const int rank = header.value("rank", 0);
  if (rank != 2 && rank != 3) throw DataError("load_params: bad rank");
  RegressorParams p = RegressorParams::zeros(rank);
  auto ts = p.tensors();
  const auto& list = header["tensors"];
  if (!list.is_array() || list.size() != ts.size()) throw DataError("load_params: wrong tensor count");
  std::ostringstream rest;
  rest << in.rdbuf();
  const std::string payload = rest.str();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    MatrixXd& m = *ts[i];
    if (list[i].value("name", "") != kNames[i] || list[i]["shape"] != nlohmann::json({m.rows(), m.cols()}))
      throw DataError(std::string("load_params: unexpected tensor entry for ") + kNames[i]);
    const std::size_t bytes = static_cast<std::size_t>(m.size()) * sizeof(float);
    if (offset + bytes > payload.size()) throw DataError("load_params: payload length mismatch");
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        float f;
        std::memcpy(&f, payload.data() + offset, sizeof(float));
        offset += sizeof(float);
        m(r, c) = f;
      }
  }
  if (offset != payload.size()) throw DataError("load_params: payload length mismatch");
  return p;
}

}  // namespace morseuq
