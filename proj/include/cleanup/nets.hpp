#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cleanup/common.hpp"

namespace cleanup::nets {

// Fixed agent architecture: 3x3 stride-1 convolution with 32 channels
// (valid padding), two ReLU layers of 64 units, the social vector
// concatenated onto the second layer's output, an LSTM with 128 units, and
// linear policy and value heads.
struct NetConfig {
  int window = 15;         // square visual input side
  int channels = 12;       // visual input channels
  int conv_channels = 32;
  int kernel = 3;
  int fc1 = 64;
  int fc2 = 64;
  int lstm = 128;
  int social = 5;
  int actions = 9;

  int conv_out() const { return window - kernel + 1; }
  int conv_flat() const { return conv_out() * conv_out() * conv_channels; }
  int visual_size() const { return window * window * channels; }
  int lstm_input() const { return fc2 + social; }
  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

std::vector<TensorInfo> parameter_layout(const NetConfig& config);

enum Tensor : int {
  kConvW,
  kConvB,
  kFc1W,
  kFc1B,
  kFc2W,
  kFc2B,
  kLstmWx,
  kLstmWh,
  kLstmB,
  kPolicyW,
  kPolicyB,
  kValueW,
  kValueB,
  kNumTensors
};

// All weights in a single flat buffer; matrices are (inputs x outputs),
// row-major, so a layer computes y = x W + b on row vectors.
template <typename T>
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(const NetConfig& config);

  // Orthogonal recurrent weights, fan-in-scaled uniform elsewhere, zero biases.
  static NetworkParams initialize(const NetConfig& config, std::uint64_t seed);

  const NetConfig& config() const { return config_; }
  const std::vector<TensorInfo>& layout() const { return layout_; }
  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }
  std::size_t size() const { return data_.size(); }

  T* tensor(Tensor t) { return data_.data() + layout_[t].offset; }
  const T* tensor(Tensor t) const { return data_.data() + layout_[t].offset; }
  std::span<T> tensor_span(Tensor t) { return {tensor(t), layout_[t].size}; }

  void set_zero();
  bool all_finite() const;

  template <typename U>
  NetworkParams<U> cast() const {
    NetworkParams<U> out(config_);
    auto dst = out.flat();
    for (std::size_t i = 0; i < data_.size(); ++i) dst[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const NetworkParams& o) const {
    return config_ == o.config_ && data_ == o.data_;
  }

 private:
  NetConfig config_;
  std::vector<TensorInfo> layout_;
  AlignedVector<T> data_;
};

template <typename T>
struct RecurrentState {
  AlignedVector<T> h;
  AlignedVector<T> c;

  RecurrentState() = default;
  explicit RecurrentState(int units) : h(units, T(0)), c(units, T(0)) {}
  void reset() {
    std::fill(h.begin(), h.end(), T(0));
    std::fill(c.begin(), c.end(), T(0));
  }
  bool operator==(const RecurrentState&) const = default;
};

// Single-step evaluation with preallocated scratch space. Reentrant across
// instances; one instance must not be shared between threads.
template <typename T>
class PolicyEvaluator {
 public:
  explicit PolicyEvaluator(const NetConfig& config);

  // Advances `state` by one step and writes `actions` logits.
  void step(const NetworkParams<T>& params, std::span<const T> visual,
            std::span<const T> social, RecurrentState<T>& state, std::span<T> logits,
            T& value);

 private:
  NetConfig config_;
  AlignedVector<T> conv_, fc1_, z_, gates_, h_next_;
};

// A batch of B sequences of S steps, stored step-major: row n = s * B + b.
template <typename T>
struct SequenceBatch {
  int batch = 0;
  int steps = 0;
  AlignedVector<T> visual;          // rows x visual_size
  AlignedVector<T> social;          // rows x social
  AlignedVector<T> initial_h;       // batch x lstm
  AlignedVector<T> initial_c;       // batch x lstm

  int rows() const { return batch * steps; }
  void resize(const NetConfig& config, int batch, int steps);
};

// Recorded forward pass over a sequence batch, followed by truncated
// backpropagation through time across the unroll. Gradients do not flow
// into the initial recurrent state.
template <typename T>
class UnrollPass {
 public:
  explicit UnrollPass(const NetConfig& config);

  void forward(const NetworkParams<T>& params, const SequenceBatch<T>& batch);

  // rows x actions and rows, valid after forward().
  std::span<const T> logits() const { return logits_; }
  std::span<const T> values() const { return values_; }

  // Accumulates dLoss/dParams into `grads` (which must share the config)
  // given head gradients of the same shapes as logits() and values().
  void backward(const NetworkParams<T>& params, std::span<const T> dlogits,
                std::span<const T> dvalues, NetworkParams<T>& grads);

 private:
  NetConfig config_;
  const SequenceBatch<T>* batch_ = nullptr;
  int rows_ = 0;
  AlignedVector<T> conv_;    // post-ReLU conv activations, rows x conv_flat
  AlignedVector<T> a1_, a2_, z_;
  AlignedVector<T> gates_;   // post-nonlinearity i, f, g, o; rows x 4H
  AlignedVector<T> cell_, tanh_cell_, hidden_;
  AlignedVector<T> logits_, values_;
  // backward scratch
  AlignedVector<T> dhidden_, dgates_, dz_, da1_, dconv_, hprev_;
};

struct RmsPropConfig {
  double learning_rate = 0.000321;
  double epsilon = 1e-5;
  double decay = 0.99;
  double momentum = 0.0;
};

template <typename T>
struct OptState {
  RmsPropConfig config;
  AlignedVector<T> mean_square;
  AlignedVector<T> momentum_buffer;  // only used when momentum > 0
  std::uint64_t updates = 0;

  OptState() = default;
  OptState(const RmsPropConfig& c, std::size_t n) : config(c), mean_square(n, T(0)) {}
};

// acc <- decay*acc + (1-decay)*g^2 ; theta <- theta - lr*g/sqrt(acc + eps)
template <typename T>
void rmsprop_update(NetworkParams<T>& params, const NetworkParams<T>& grads, OptState<T>& opt);

struct ActionSample {
  int action = 0;
  double log_prob = 0.0;
};

// Numerically stable log-softmax.
template <typename T>
void log_softmax(std::span<const T> logits, std::span<T> out);

// Categorical draw from softmax(logits) by inverse CDF on one uniform.
template <typename T>
ActionSample sample_action(std::span<const T> logits, Rng& rng);

// Versioned binary checkpoint of one agent.
struct AgentCheckpoint {
  NetworkParams<float> params;
  OptState<float> opt;
  double alpha = 0.0;
  double beta = 0.0;
  double lambda = 0.0;
  std::uint64_t steps_consumed = 0;
  std::uint64_t updates = 0;

  void write(std::ostream& out) const;
  static AgentCheckpoint read(std::istream& in);
  void save(const std::string& path) const;
  static AgentCheckpoint load(const std::string& path);
};

extern template class NetworkParams<float>;
extern template class NetworkParams<double>;
extern template class PolicyEvaluator<float>;
extern template class PolicyEvaluator<double>;
extern template struct SequenceBatch<float>;
extern template struct SequenceBatch<double>;
extern template class UnrollPass<float>;
extern template class UnrollPass<double>;

}  // namespace cleanup::nets
