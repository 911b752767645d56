#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "morseuq/probdmt.hpp"
#include "morseuq/structgraph.hpp"

namespace morseuq {

inline constexpr int kInputChannels = 3;  // image crop, likelihood crop, sample mask
inline constexpr int kConv1Channels = 24;
inline constexpr int kConv2Channels = 32;
inline constexpr int kNodeFeatures = kConv2Channels + 1;  // pooled channels + persistence
inline constexpr std::array<int, 3> kGcnWidths{32, 64, 32};
inline constexpr int kTensorCount = 14;

// Weights of the joint structure regressor. Conv kernels are 3 per axis, so
// their column count depends on the rank. Biases are column vectors for the
// conv layers and row vectors for graph layers.
struct RegressorParams {
  int rank = 2;
  Eigen::MatrixXd conv1_w, conv1_b;  // 24 x 3K, 24 x 1
  Eigen::MatrixXd conv2_w, conv2_b;  // 32 x 24K, 32 x 1
  Eigen::MatrixXd gcn1_w, gcn1_b;    // 33 x 32, 1 x 32
  Eigen::MatrixXd gcn2_w, gcn2_b;    // 32 x 64, 1 x 64
  Eigen::MatrixXd gcn3_w, gcn3_b;    // 64 x 32, 1 x 32
  Eigen::MatrixXd head_p_w, head_p_b;  // 32 x 1, 1 x 1
  Eigen::MatrixXd head_s_w, head_s_b;  // 32 x 1, 1 x 1

  static RegressorParams zeros(int rank);
  // He-uniform (fan-in) weights, zero biases.
  static RegressorParams initialize(int rank, std::uint64_t seed);

  std::array<Eigen::MatrixXd*, kTensorCount> tensors();
  std::array<const Eigen::MatrixXd*, kTensorCount> tensors() const;
  static const std::array<const char*, kTensorCount>& tensor_names();
};

using RegressorGrads = RegressorParams;

struct NodePrediction {
  double p_hat = 0.0;
  double log_variance = 0.0;
  double variance() const;
};

struct DropoutSpec {
  bool enabled = false;
  std::uint64_t seed = 0;
  double rate = 0.2;

  static DropoutSpec off() { return {}; }
  static DropoutSpec seeded(std::uint64_t seed, double rate = 0.2) { return {true, seed, rate}; }
};

std::vector<NodePrediction> forward(const RegressorParams& params, const StructureGraph& graph,
                                    const DropoutSpec& dropout, int jobs = 1);

// Mean over nodes of  0.5 (p_hat - z)^2 / exp(s) + 0.5 s.
double loss_uq(const std::vector<NodePrediction>& preds, const std::vector<double>& labels);

struct BackwardResult {
  double loss = 0.0;
  std::vector<NodePrediction> preds;
  RegressorGrads grads;
};

// Forward plus reverse pass of loss_uq with the dropout masks held fixed.
BackwardResult backward(const RegressorParams& params, const StructureGraph& graph,
                        const std::vector<double>& labels, const DropoutSpec& dropout, int jobs = 1);

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double dropout = 0.2;
  int epochs = 300;
  std::uint64_t seed = 0;
  int box = kDefaultBox;
  double bg_threshold = kDefaultBackgroundThreshold;
  int jobs = 1;

  void validate() const;
};

class Adam {
 public:
  Adam(const RegressorParams& like, const TrainConfig& cfg);
  void step(RegressorParams& params, const RegressorGrads& grads);

 private:
  TrainConfig cfg_;
  RegressorParams m_, v_;
  long t_ = 0;
};

struct Case {
  std::string name;
  ScalarGrid image;
  ScalarGrid likelihood;
  BinaryGrid gt;  // may be empty (size 0) at inference time
  bool has_gt() const { return gt.size() > 0; }
};

struct TrainResult {
  RegressorParams params;
  std::vector<double> epoch_loss;  // mean L_UQ over cases, one per epoch
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// One Adam step per case per epoch; skeleton samples use run_index = epoch.
TrainResult train(const std::vector<Case>& corpus, const SamplerConfig& sampler,
                  const TrainConfig& cfg, const RegressorParams* init = nullptr,
                  const EpochCallback& on_epoch = {});

// Sampler seed used for case k of a corpus, so cases get distinct streams.
std::uint64_t case_sampler_seed(std::uint64_t seed, std::size_t case_index);

void save_params(const RegressorParams& params, const std::filesystem::path& path);
RegressorParams load_params(const std::filesystem::path& path);

}  // namespace morseuq
