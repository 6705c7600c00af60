#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "activetrack/actionmap.hpp"

namespace activetrack {

struct ConvSpec {
  int filters = 16;
  int kernel = 8;
  int stride = 4;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// Layer sizes. Defaults give the full-size tracker: 84x84x3 input,
/// C8x8-16S4, C4x4-32S2, FC256, LSTM256, six-way actor plus critic.
struct NetConfig {
  int in_width = 84;
  int in_height = 84;
  int in_channels = 3;
  ConvSpec conv1{16, 8, 4};
  ConvSpec conv2{32, 4, 2};
  int fc = 256;
  int lstm = 256;
  ActionSpace action_space = ActionSpace::kDiscrete6;

  int conv1_width() const { return (in_width - conv1.kernel) / conv1.stride + 1; }
  int conv1_height() const { return (in_height - conv1.kernel) / conv1.stride + 1; }
  int conv2_width() const { return (conv1_width() - conv2.kernel) / conv2.stride + 1; }
  int conv2_height() const { return (conv1_height() - conv2.kernel) / conv2.stride + 1; }
  int flat_size() const { return conv2.filters * conv2_width() * conv2_height(); }
  /// Actor outputs: K logits, or 2 means for the continuous space.
  int actor_outputs() const;

  /// Throws ShapeMismatch for impossible geometry.
  void validate() const;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  size_t offset = 0;
  size_t size = 0;
};

/// Flat parameter container with named blocks. Also used for gradients and
/// optimizer moments, which share its layout.
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(const NetConfig& config);  // zero-filled

  const NetConfig& config() const { return config_; }
  const std::vector<TensorInfo>& blocks() const { return blocks_; }
  const TensorInfo& info(const std::string& name) const;

  std::span<double> block(const std::string& name);
  std::span<const double> block(const std::string& name) const;
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  size_t size() const { return data_.size(); }

  NetworkParams zeros_like() const;
  bool all_finite() const;
  /// FNV-1a over the raw parameter bytes.
  std::uint64_t hash() const;

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    return a.config_ == b.config_ && a.data_ == b.data_;
  }

 private:
  NetConfig config_;
  std::vector<TensorInfo> blocks_;
  std::vector<double> data_;
};

/// Orthogonal recurrent weights, fan-in uniform conv/fc, zero biases, actor
/// head scaled by 0.01.
NetworkParams init_params(const NetConfig& config, std::uint64_t seed);

struct RecurrentState {
  std::vector<double> h;
  std::vector<double> c;

  static RecurrentState zeros(int size) {
    return {std::vector<double>(size, 0.0), std::vector<double>(size, 0.0)};
  }
  friend bool operator==(const RecurrentState&, const RecurrentState&) = default;
};

inline constexpr double kMinStd = 1e-4;

struct PolicyOutput {
  ActionSpace space = ActionSpace::kDiscrete6;
  std::vector<double> logits;  // discrete
  std::vector<double> probs;   // discrete
  std::array<double, 2> mean{};  // continuous
  std::array<double, 2> std{};   // continuous, > 0
  double value = 0.0;
  RecurrentState next;
  friend bool operator==(const PolicyOutput&, const PolicyOutput&) = default;
};

/// Intermediate activations of one forward step, kept for backprop.
struct StepCache {
  std::vector<double> input;  // CHW
  std::vector<double> z1, a1, z2, a2, z3, a3;
  std::vector<double> gates;  // i, f, g, o after nonlinearity
  std::vector<double> h_prev, c_prev, c, tanh_c, h;
  std::vector<double> std_pre;  // continuous only
  PolicyOutput out;
};

/// Converts an HWC observation into the network's CHW input.
std::vector<double> to_input(const NetConfig& config, std::span<const float> rgb_hwc);

/// Full forward pass. Throws ShapeMismatch on bad input or state sizes.
PolicyOutput forward(const NetworkParams& params, std::span<const float> rgb_hwc,
                     const RecurrentState& rec);
void forward_cached(const NetworkParams& params, std::vector<double> input,
                    const RecurrentState& rec, StepCache& cache);

/// Per-step loss weights:
///   -advantage * log pi(a) - entropy_weight * H(pi) + value_weight/2 * (value_target - V)^2
struct StepTarget {
  double advantage = 0.0;
  double entropy_weight = 0.0;
  double value_target = 0.0;
  double value_weight = 0.0;
};

struct LossBreakdown {
  double policy = 0.0;   // -sum advantage * log pi
  double entropy = 0.0;  // sum H (unweighted)
  double value = 0.0;    // sum 1/2 * value_weight * (R - V)^2
  double total = 0.0;
};

struct RolloutStep {
  std::vector<float> rgb;  // HWC observation
  Action action;
  StepTarget target;
};

/// Log-probability and entropy of an action under a policy.
double log_prob(const PolicyOutput& policy, const Action& action);
double entropy(const PolicyOutput& policy);

/// Exact gradient of the summed rollout loss by backpropagation through
/// time. The first step starts from `rec`; later steps chain the LSTM state.
/// Throws NonFiniteLoss if the loss or gradient is not finite.
NetworkParams backward(const NetworkParams& params, const std::vector<RolloutStep>& rollout,
                       const RecurrentState& rec, LossBreakdown* loss = nullptr);

/// Same, from caches produced by forward_cached over the rollout in order.
NetworkParams backward_from_cache(const NetworkParams& params, const std::vector<StepCache>& caches,
                                  const std::vector<Action>& actions,
                                  const std::vector<StepTarget>& targets,
                                  LossBreakdown* loss = nullptr);

/// Loss value only, for finite-difference checks.
LossBreakdown rollout_loss(const NetworkParams& params, const std::vector<RolloutStep>& rollout,
                           const RecurrentState& rec);

/// Stochastic action: categorical draw, or per-dimension Gaussian draw
/// clipped to [-1, 1].
Action sample_action(const PolicyOutput& policy, std::mt19937_64& rng);
/// Argmax for discrete policies, clipped mean for continuous ones.
Action greedy_action(const PolicyOutput& policy);

/// |d score / d input| max-reduced over channels and scaled to [0, 1];
/// score is the chosen logit (discrete) or log-density (continuous).
/// Row-major, height x width.
std::vector<double> saliency(const NetworkParams& params, std::span<const float> rgb_hwc,
                             const RecurrentState& rec, const Action& action);

/// Binary checkpoint: "ATRKCKPT", u32 version, u32-length config JSON, u32
/// tensor count, then per tensor u32 name length + name, u32 rank + u32
/// dims, and little-endian float32 values. Values are rounded to float32.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<std::uint8_t> serialize_checkpoint(const NetworkParams& params);
NetworkParams deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);

std::string net_config_to_json(const NetConfig& c);
NetConfig net_config_from_json(const std::string& text);

}  // namespace activetrack
