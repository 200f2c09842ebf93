#include "cleanup/nets.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace cleanup::nets {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using MapV = Eigen::Map<RowVec<T>>;
template <typename T>
using CMapV = Eigen::Map<const RowVec<T>>;

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void relu_inplace(T* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) p[i] = p[i] > T(0) ? p[i] : T(0);
}

// Sparse-aware valid convolution of one (H, W, C) input; one-hot views
// have at most one non-zero channel per cell.
template <typename T>
void conv_forward(const NetConfig& cfg, const T* weights, const T* bias, const T* in, T* out) {
  const int w = cfg.window, c = cfg.channels, k = cfg.kernel, o = cfg.conv_out();
  const int oc = cfg.conv_channels;
  for (int p = 0; p < o * o; ++p) std::copy(bias, bias + oc, out + p * oc);
  for (int iy = 0; iy < w; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const T* cell = in + (iy * w + ix) * c;
      for (int ch = 0; ch < c; ++ch) {
        const T v = cell[ch];
        if (v == T(0)) continue;
        for (int ky = 0; ky < k; ++ky) {
          const int oy = iy - ky;
          if (oy < 0 || oy >= o) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ox = ix - kx;
            if (ox < 0 || ox >= o) continue;
            const T* wrow = weights + ((ky * k + kx) * c + ch) * oc;
            T* dst = out + (oy * o + ox) * oc;
            for (int j = 0; j < oc; ++j) dst[j] += v * wrow[j];
          }
        }
      }
    }
  }
  relu_inplace(out, static_cast<std::size_t>(o) * o * oc);
}

// `dout` is the gradient w.r.t. the post-ReLU output, already masked.
template <typename T>
void conv_backward(const NetConfig& cfg, const T* in, const T* dout, T* dweights, T* dbias) {
  const int w = cfg.window, c = cfg.channels, k = cfg.kernel, o = cfg.conv_out();
  const int oc = cfg.conv_channels;
  for (int p = 0; p < o * o; ++p) {
    for (int j = 0; j < oc; ++j) dbias[j] += dout[p * oc + j];
  }
  for (int iy = 0; iy < w; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const T* cell = in + (iy * w + ix) * c;
      for (int ch = 0; ch < c; ++ch) {
        const T v = cell[ch];
        if (v == T(0)) continue;
        for (int ky = 0; ky < k; ++ky) {
          const int oy = iy - ky;
          if (oy < 0 || oy >= o) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ox = ix - kx;
            if (ox < 0 || ox >= o) continue;
            T* dw = dweights + ((ky * k + kx) * c + ch) * oc;
            const T* g = dout + (oy * o + ox) * oc;
            for (int j = 0; j < oc; ++j) dw[j] += v * g[j];
          }
        }
      }
    }
  }
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint: truncated file");
  return v;
}

constexpr char kCheckpointMagic[8] = {'C', 'L', 'N', 'A', 'G', 'T', '0', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void NetConfig::validate() const {
  if (window < kernel || kernel <= 0 || channels <= 0 || conv_channels <= 0 || fc1 <= 0 ||
      fc2 <= 0 || lstm <= 0 || social < 0 || actions <= 0) {
    throw ConfigError("inconsistent network configuration");
  }
}

std::vector<TensorInfo> parameter_layout(const NetConfig& c) {
  c.validate();
  const int h4 = 4 * c.lstm;
  std::vector<TensorInfo> t = {
      {"conv_w", {c.kernel * c.kernel * c.channels, c.conv_channels}},
      {"conv_b", {c.conv_channels}},
      {"fc1_w", {c.conv_flat(), c.fc1}},
      {"fc1_b", {c.fc1}},
      {"fc2_w", {c.fc1, c.fc2}},
      {"fc2_b", {c.fc2}},
      {"lstm_wx", {c.lstm_input(), h4}},
      {"lstm_wh", {c.lstm, h4}},
      {"lstm_b", {h4}},
      {"policy_w", {c.lstm, c.actions}},
      {"policy_b", {c.actions}},
      {"value_w", {c.lstm, 1}},
      {"value_b", {1}},
  };
  std::size_t offset = 0;
  for (auto& info : t) {
    info.size = 1;
    for (int d : info.shape) info.size *= static_cast<std::size_t>(d);
    info.offset = offset;
    offset += info.size;
  }
  return t;
}

template <typename T>
NetworkParams<T>::NetworkParams(const NetConfig& config)
    : config_(config), layout_(parameter_layout(config)) {
  data_.assign(layout_.back().offset + layout_.back().size, T(0));
}

template <typename T>
NetworkParams<T> NetworkParams<T>::initialize(const NetConfig& config, std::uint64_t seed) {
  NetworkParams p(config);
  const auto fan_in_uniform = [&](Tensor t, int fan_in) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const double limit = std::sqrt(3.0 / fan_in);
    for (T& w : p.tensor_span(t)) w = static_cast<T>(uniform(rng, -limit, limit));
  };
  fan_in_uniform(kConvW, config.kernel * config.kernel * config.channels);
  fan_in_uniform(kFc1W, config.conv_flat());
  fan_in_uniform(kFc2W, config.fc1);
  fan_in_uniform(kLstmWx, config.lstm_input());
  fan_in_uniform(kPolicyW, config.lstm);
  fan_in_uniform(kValueW, config.lstm);

  // One orthogonal block per gate.
  const int h = config.lstm;
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(kLstmWh)));
  T* wh = p.tensor(kLstmWh);
  for (int gate = 0; gate < 4; ++gate) {
    Eigen::MatrixXd g(h, h);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < h; ++j) g(i, j) = standard_normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    // Sign fix makes the decomposition unique.
    const Eigen::MatrixXd r = qr.matrixQR().template triangularView<Eigen::Upper>();
    for (int j = 0; j < h; ++j) {
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < h; ++j) wh[i * 4 * h + gate * h + j] = static_cast<T>(q(i, j));
    }
  }
  return p;
}

template <typename T>
void NetworkParams<T>::set_zero() {
  std::fill(data_.begin(), data_.end(), T(0));
}

template <typename T>
bool NetworkParams<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
PolicyEvaluator<T>::PolicyEvaluator(const NetConfig& config)
    : config_(config),
      conv_(config.conv_flat()),
      fc1_(config.fc1),
      z_(config.lstm_input()),
      gates_(4 * config.lstm),
      h_next_(config.lstm) {}

template <typename T>
void PolicyEvaluator<T>::step(const NetworkParams<T>& params, std::span<const T> visual,
                              std::span<const T> social, RecurrentState<T>& state,
                              std::span<T> logits, T& value) {
  const NetConfig& c = config_;
  require(params.config() == c, "PolicyEvaluator::step: parameter shape mismatch");
  require(static_cast<int>(visual.size()) == c.visual_size(), "forward: visual size mismatch");
  require(static_cast<int>(social.size()) == c.social, "forward: social size mismatch");
  require(static_cast<int>(logits.size()) == c.actions, "forward: logits size mismatch");
  require(static_cast<int>(state.h.size()) == c.lstm && static_cast<int>(state.c.size()) == c.lstm,
          "forward: recurrent state size mismatch");
  const int h = c.lstm;

  conv_forward(c, params.tensor(kConvW), params.tensor(kConvB), visual.data(), conv_.data());

  // Post-ReLU conv activations are mostly zero: accumulate only the weight
  // rows of active units.
  MapV<T> fc1(fc1_.data(), c.fc1);
  fc1 = CMapV<T>(params.tensor(kFc1B), c.fc1);
  const T* w1 = params.tensor(kFc1W);
  for (int i = 0; i < c.conv_flat(); ++i) {
    const T x = conv_[i];
    if (x == T(0)) continue;
    fc1 += x * CMapV<T>(w1 + static_cast<std::size_t>(i) * c.fc1, c.fc1);
  }
  relu_inplace(fc1_.data(), fc1_.size());

  MapV<T> fc2(z_.data(), c.fc2);
  fc2.noalias() = fc1 * CMapR<T>(params.tensor(kFc2W), c.fc1, c.fc2);
  fc2 += CMapV<T>(params.tensor(kFc2B), c.fc2);
  relu_inplace(z_.data(), c.fc2);
  std::copy(social.begin(), social.end(), z_.begin() + c.fc2);

  MapV<T> gates(gates_.data(), 4 * h);
  gates.noalias() = CMapV<T>(z_.data(), c.lstm_input()) *
                    CMapR<T>(params.tensor(kLstmWx), c.lstm_input(), 4 * h);
  gates.noalias() += CMapV<T>(state.h.data(), h) * CMapR<T>(params.tensor(kLstmWh), h, 4 * h);
  gates += CMapV<T>(params.tensor(kLstmB), 4 * h);
  for (int k = 0; k < h; ++k) {
    const T i = sigmoid(gates_[k]);
    const T f = sigmoid(gates_[h + k]);
    const T g = std::tanh(gates_[2 * h + k]);
    const T o = sigmoid(gates_[3 * h + k]);
    state.c[k] = f * state.c[k] + i * g;
    state.h[k] = o * std::tanh(state.c[k]);
  }

  MapV<T> out(logits.data(), c.actions);
  out.noalias() = CMapV<T>(state.h.data(), h) * CMapR<T>(params.tensor(kPolicyW), h, c.actions);
  out += CMapV<T>(params.tensor(kPolicyB), c.actions);
  value = CMapV<T>(state.h.data(), h).dot(CMapV<T>(params.tensor(kValueW), h)) +
          params.tensor(kValueB)[0];
}

template <typename T>
void SequenceBatch<T>::resize(const NetConfig& config, int b, int s) {
  batch = b;
  steps = s;
  visual.assign(static_cast<std::size_t>(b) * s * config.visual_size(), T(0));
  social.assign(static_cast<std::size_t>(b) * s * config.social, T(0));
  initial_h.assign(static_cast<std::size_t>(b) * config.lstm, T(0));
  initial_c.assign(static_cast<std::size_t>(b) * config.lstm, T(0));
}

template <typename T>
UnrollPass<T>::UnrollPass(const NetConfig& config) : config_(config) {}

template <typename T>
void UnrollPass<T>::forward(const NetworkParams<T>& params, const SequenceBatch<T>& b) {
  const NetConfig& c = config_;
  require(params.config() == c, "UnrollPass::forward: parameter shape mismatch");
  const int n = b.rows();
  const int h = c.lstm;
  require(b.visual.size() == static_cast<std::size_t>(n) * c.visual_size() &&
              b.social.size() == static_cast<std::size_t>(n) * c.social &&
              b.initial_h.size() == static_cast<std::size_t>(b.batch) * h &&
              b.initial_c.size() == static_cast<std::size_t>(b.batch) * h,
          "UnrollPass::forward: batch shape mismatch");
  batch_ = &b;
  rows_ = n;

  conv_.resize(static_cast<std::size_t>(n) * c.conv_flat());
  for (int r = 0; r < n; ++r) {
    conv_forward(c, params.tensor(kConvW), params.tensor(kConvB),
                 b.visual.data() + static_cast<std::size_t>(r) * c.visual_size(),
                 conv_.data() + static_cast<std::size_t>(r) * c.conv_flat());
  }

  a1_.resize(static_cast<std::size_t>(n) * c.fc1);
  MapR<T> a1(a1_.data(), n, c.fc1);
  a1.noalias() = CMapR<T>(conv_.data(), n, c.conv_flat()) *
                 CMapR<T>(params.tensor(kFc1W), c.conv_flat(), c.fc1);
  a1.rowwise() += CMapV<T>(params.tensor(kFc1B), c.fc1);
  relu_inplace(a1_.data(), a1_.size());

  a2_.resize(static_cast<std::size_t>(n) * c.fc2);
  MapR<T> a2(a2_.data(), n, c.fc2);
  a2.noalias() = a1 * CMapR<T>(params.tensor(kFc2W), c.fc1, c.fc2);
  a2.rowwise() += CMapV<T>(params.tensor(kFc2B), c.fc2);
  relu_inplace(a2_.data(), a2_.size());

  z_.resize(static_cast<std::size_t>(n) * c.lstm_input());
  MapR<T> z(z_.data(), n, c.lstm_input());
  z.leftCols(c.fc2) = a2;
  z.rightCols(c.social) = CMapR<T>(b.social.data(), n, c.social);

  gates_.resize(static_cast<std::size_t>(n) * 4 * h);
  MapR<T> gates(gates_.data(), n, 4 * h);
  gates.noalias() = z * CMapR<T>(params.tensor(kLstmWx), c.lstm_input(), 4 * h);
  gates.rowwise() += CMapV<T>(params.tensor(kLstmB), 4 * h);

  cell_.resize(static_cast<std::size_t>(n) * h);
  tanh_cell_.resize(cell_.size());
  hidden_.resize(cell_.size());
  const CMapR<T> wh(params.tensor(kLstmWh), h, 4 * h);
  for (int s = 0; s < b.steps; ++s) {
    const int r0 = s * b.batch;
    const T* hprev = s == 0 ? b.initial_h.data() : hidden_.data() + (r0 - b.batch) * h;
    const T* cprev = s == 0 ? b.initial_c.data() : cell_.data() + (r0 - b.batch) * h;
    gates.middleRows(r0, b.batch).noalias() += CMapR<T>(hprev, b.batch, h) * wh;
    for (int bi = 0; bi < b.batch; ++bi) {
      T* g = gates_.data() + static_cast<std::size_t>(r0 + bi) * 4 * h;
      T* cell = cell_.data() + static_cast<std::size_t>(r0 + bi) * h;
      T* tc = tanh_cell_.data() + static_cast<std::size_t>(r0 + bi) * h;
      T* hid = hidden_.data() + static_cast<std::size_t>(r0 + bi) * h;
      const T* cp = cprev + static_cast<std::size_t>(bi) * h;
      for (int k = 0; k < h; ++k) {
        g[k] = sigmoid(g[k]);
        g[h + k] = sigmoid(g[h + k]);
        g[2 * h + k] = std::tanh(g[2 * h + k]);
        g[3 * h + k] = sigmoid(g[3 * h + k]);
        cell[k] = g[h + k] * cp[k] + g[k] * g[2 * h + k];
        tc[k] = std::tanh(cell[k]);
        hid[k] = g[3 * h + k] * tc[k];
      }
    }
  }

  const CMapR<T> hid(hidden_.data(), n, h);
  logits_.resize(static_cast<std::size_t>(n) * c.actions);
  MapR<T> logits(logits_.data(), n, c.actions);
  logits.noalias() = hid * CMapR<T>(params.tensor(kPolicyW), h, c.actions);
  logits.rowwise() += CMapV<T>(params.tensor(kPolicyB), c.actions);
  values_.resize(n);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> values(values_.data(), n);
  values.noalias() = hid * Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(
                               params.tensor(kValueW), h);
  values.array() += params.tensor(kValueB)[0];
}

template <typename T>
void UnrollPass<T>::backward(const NetworkParams<T>& params, std::span<const T> dlogits,
                             std::span<const T> dvalues, NetworkParams<T>& grads) {
  const NetConfig& c = config_;
  require(batch_ != nullptr, "UnrollPass::backward: forward() not called");
  require(grads.config() == c, "UnrollPass::backward: gradient shape mismatch");
  const int n = rows_;
  const int h = c.lstm;
  const SequenceBatch<T>& b = *batch_;
  require(dlogits.size() == static_cast<std::size_t>(n) * c.actions &&
              dvalues.size() == static_cast<std::size_t>(n),
          "UnrollPass::backward: head gradient shape mismatch");

  using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
  using CVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
  const CMapR<T> dlog(dlogits.data(), n, c.actions);
  const CVecMap dval(dvalues.data(), n);
  const CMapR<T> hid(hidden_.data(), n, h);

  MapR<T>(grads.tensor(kPolicyW), h, c.actions).noalias() += hid.transpose() * dlog;
  MapV<T>(grads.tensor(kPolicyB), c.actions) += dlog.colwise().sum();
  VecMap(grads.tensor(kValueW), h).noalias() += hid.transpose() * dval;
  grads.tensor(kValueB)[0] += dval.sum();

  dhidden_.resize(static_cast<std::size_t>(n) * h);
  MapR<T> dhid(dhidden_.data(), n, h);
  dhid.noalias() = dlog * CMapR<T>(params.tensor(kPolicyW), h, c.actions).transpose();
  dhid.noalias() += dval * CVecMap(params.tensor(kValueW), h).transpose();

  dgates_.resize(static_cast<std::size_t>(n) * 4 * h);
  MapR<T> dgates(dgates_.data(), n, 4 * h);
  const CMapR<T> wh(params.tensor(kLstmWh), h, 4 * h);
  MatR<T> dh_next = MatR<T>::Zero(b.batch, h);
  MatR<T> dc_next = MatR<T>::Zero(b.batch, h);
  for (int s = b.steps - 1; s >= 0; --s) {
    const int r0 = s * b.batch;
    const T* cprev = s == 0 ? b.initial_c.data() : cell_.data() + (r0 - b.batch) * h;
    for (int bi = 0; bi < b.batch; ++bi) {
      const std::size_t r = static_cast<std::size_t>(r0 + bi);
      const T* g = gates_.data() + r * 4 * h;
      const T* tc = tanh_cell_.data() + r * h;
      const T* cp = cprev + static_cast<std::size_t>(bi) * h;
      const T* dh_out = dhidden_.data() + r * h;
      T* dg = dgates_.data() + r * 4 * h;
      for (int k = 0; k < h; ++k) {
        const T i = g[k], f = g[h + k], gg = g[2 * h + k], o = g[3 * h + k];
        const T dh = dh_out[k] + dh_next(bi, k);
        const T dc = dh * o * (T(1) - tc[k] * tc[k]) + dc_next(bi, k);
        dg[k] = dc * gg * i * (T(1) - i);
        dg[h + k] = dc * cp[k] * f * (T(1) - f);
        dg[2 * h + k] = dc * i * (T(1) - gg * gg);
        dg[3 * h + k] = dh * tc[k] * o * (T(1) - o);
        dc_next(bi, k) = dc * f;
      }
    }
    dh_next.noalias() = dgates.middleRows(r0, b.batch) * wh.transpose();
  }

  hprev_.resize(static_cast<std::size_t>(n) * h);
  MapR<T> hprev(hprev_.data(), n, h);
  hprev.topRows(b.batch) = CMapR<T>(b.initial_h.data(), b.batch, h);
  if (n > b.batch) hprev.bottomRows(n - b.batch) = hid.topRows(n - b.batch);
  MapR<T>(grads.tensor(kLstmWh), h, 4 * h).noalias() += hprev.transpose() * dgates;

  const CMapR<T> z(z_.data(), n, c.lstm_input());
  MapR<T>(grads.tensor(kLstmWx), c.lstm_input(), 4 * h).noalias() += z.transpose() * dgates;
  MapV<T>(grads.tensor(kLstmB), 4 * h) += dgates.colwise().sum();

  dz_.resize(static_cast<std::size_t>(n) * c.lstm_input());
  MapR<T> dz(dz_.data(), n, c.lstm_input());
  dz.noalias() = dgates * CMapR<T>(params.tensor(kLstmWx), c.lstm_input(), 4 * h).transpose();
  // dz's leading fc2 columns become dA2 after the ReLU mask.
  MatR<T> da2 = dz.leftCols(c.fc2);
  const CMapR<T> a2(a2_.data(), n, c.fc2);
  da2 = (a2.array() > T(0)).select(da2, T(0));

  const CMapR<T> a1(a1_.data(), n, c.fc1);
  MapR<T>(grads.tensor(kFc2W), c.fc1, c.fc2).noalias() += a1.transpose() * da2;
  MapV<T>(grads.tensor(kFc2B), c.fc2) += da2.colwise().sum();

  da1_.resize(static_cast<std::size_t>(n) * c.fc1);
  MapR<T> da1(da1_.data(), n, c.fc1);
  da1.noalias() = da2 * CMapR<T>(params.tensor(kFc2W), c.fc1, c.fc2).transpose();
  da1 = (a1.array() > T(0)).select(da1, T(0));

  const CMapR<T> conv(conv_.data(), n, c.conv_flat());
  MapR<T>(grads.tensor(kFc1W), c.conv_flat(), c.fc1).noalias() += conv.transpose() * da1;
  MapV<T>(grads.tensor(kFc1B), c.fc1) += da1.colwise().sum();

  dconv_.resize(static_cast<std::size_t>(n) * c.conv_flat());
  MapR<T> dconv(dconv_.data(), n, c.conv_flat());
  dconv.noalias() = da1 * CMapR<T>(params.tensor(kFc1W), c.conv_flat(), c.fc1).transpose();
  dconv = (conv.array() > T(0)).select(dconv, T(0));

  for (int r = 0; r < n; ++r) {
    conv_backward(c, b.visual.data() + static_cast<std::size_t>(r) * c.visual_size(),
                  dconv_.data() + static_cast<std::size_t>(r) * c.conv_flat(),
                  grads.tensor(kConvW), grads.tensor(kConvB));
  }
}

template <typename T>
void rmsprop_update(NetworkParams<T>& params, const NetworkParams<T>& grads, OptState<T>& opt) {
  require(params.size() == grads.size(), "rmsprop_update: gradient shape mismatch");
  if (opt.mean_square.size() != params.size()) opt.mean_square.assign(params.size(), T(0));
  const T decay = static_cast<T>(opt.config.decay);
  const T lr = static_cast<T>(opt.config.learning_rate);
  const T eps = static_cast<T>(opt.config.epsilon);
  const T mom = static_cast<T>(opt.config.momentum);
  auto theta = params.flat();
  const auto g = grads.flat();
  T* acc = opt.mean_square.data();
  if (mom != T(0) && opt.momentum_buffer.size() != params.size()) {
    opt.momentum_buffer.assign(params.size(), T(0));
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    acc[i] = decay * acc[i] + (T(1) - decay) * g[i] * g[i];
    const T step = lr * g[i] / std::sqrt(acc[i] + eps);
    if (mom != T(0)) {
      opt.momentum_buffer[i] = mom * opt.momentum_buffer[i] + step;
      theta[i] -= opt.momentum_buffer[i];
    } else {
      theta[i] -= step;
    }
  }
  ++opt.updates;
}

template <typename T>
void log_softmax(std::span<const T> logits, std::span<T> out) {
  require(out.size() == logits.size() && !logits.empty(), "log_softmax: size mismatch");
  const T m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (T z : logits) sum += std::exp(static_cast<double>(z - m));
  const T lse = m + static_cast<T>(std::log(sum));
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

template <typename T>
ActionSample sample_action(std::span<const T> logits, Rng& rng) {
  require(!logits.empty(), "sample_action: no logits");
  std::vector<double> lp(logits.size());
  std::vector<double> z(logits.begin(), logits.end());
  log_softmax<double>(z, lp);
  const double u = uniform01(rng);
  double cum = 0.0;
  int chosen = static_cast<int>(logits.size()) - 1;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    cum += std::exp(lp[i]);
    if (u < cum) {
      chosen = static_cast<int>(i);
      break;
    }
  }
  return {chosen, lp[chosen]};
}

void AgentCheckpoint::write(std::ostream& out) const {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod(out, kCheckpointVersion);
  const NetConfig& c = params.config();
  for (int v : {c.window, c.channels, c.conv_channels, c.kernel, c.fc1, c.fc2, c.lstm, c.social,
                c.actions}) {
    write_pod(out, static_cast<std::int32_t>(v));
  }
  write_pod(out, static_cast<std::uint32_t>(params.layout().size()));
  for (const TensorInfo& t : params.layout()) {
    write_pod(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_pod(out, static_cast<std::int32_t>(d));
  }
  write_pod(out, static_cast<std::uint64_t>(params.size()));
  out.write(reinterpret_cast<const char*>(params.flat().data()),
            static_cast<std::streamsize>(params.size() * sizeof(float)));
  write_pod(out, opt.config.learning_rate);
  write_pod(out, opt.config.epsilon);
  write_pod(out, opt.config.decay);
  write_pod(out, opt.config.momentum);
  write_pod(out, opt.updates);
  write_pod(out, static_cast<std::uint64_t>(opt.mean_square.size()));
  out.write(reinterpret_cast<const char*>(opt.mean_square.data()),
            static_cast<std::streamsize>(opt.mean_square.size() * sizeof(float)));
  write_pod(out, static_cast<std::uint64_t>(opt.momentum_buffer.size()));
  out.write(reinterpret_cast<const char*>(opt.momentum_buffer.data()),
            static_cast<std::streamsize>(opt.momentum_buffer.size() * sizeof(float)));
  write_pod(out, alpha);
  write_pod(out, beta);
  write_pod(out, lambda);
  write_pod(out, steps_consumed);
  write_pod(out, updates);
}

AgentCheckpoint AgentCheckpoint::read(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError("checkpoint: bad magic");
  }
  if (read_pod<std::uint32_t>(in) != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version");
  }
  NetConfig c;
  for (int* v : {&c.window, &c.channels, &c.conv_channels, &c.kernel, &c.fc1, &c.fc2, &c.lstm,
                 &c.social, &c.actions}) {
    *v = read_pod<std::int32_t>(in);
  }
  const auto expected = parameter_layout(c);
  if (read_pod<std::uint32_t>(in) != expected.size()) {
    throw ParseError("checkpoint: tensor count mismatch");
  }
  for (const TensorInfo& t : expected) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto ndims = read_pod<std::uint32_t>(in);
    std::vector<int> shape(ndims);
    for (int& d : shape) d = read_pod<std::int32_t>(in);
    if (name != t.name || shape != t.shape) {
      throw ParseError("checkpoint: shape manifest mismatch at tensor '" + t.name + "'");
    }
  }
  AgentCheckpoint ck;
  ck.params = NetworkParams<float>(c);
  if (read_pod<std::uint64_t>(in) != ck.params.size()) {
    throw ParseError("checkpoint: parameter count mismatch");
  }
  in.read(reinterpret_cast<char*>(ck.params.flat().data()),
          static_cast<std::streamsize>(ck.params.size() * sizeof(float)));
  ck.opt.config.learning_rate = read_pod<double>(in);
  ck.opt.config.epsilon = read_pod<double>(in);
  ck.opt.config.decay = read_pod<double>(in);
  ck.opt.config.momentum = read_pod<double>(in);
  ck.opt.updates = read_pod<std::uint64_t>(in);
  ck.opt.mean_square.resize(read_pod<std::uint64_t>(in));
  in.read(reinterpret_cast<char*>(ck.opt.mean_square.data()),
          static_cast<std::streamsize>(ck.opt.mean_square.size() * sizeof(float)));
  ck.opt.momentum_buffer.resize(read_pod<std::uint64_t>(in));
  in.read(reinterpret_cast<char*>(ck.opt.momentum_buffer.data()),
          static_cast<std::streamsize>(ck.opt.momentum_buffer.size() * sizeof(float)));
  ck.alpha = read_pod<double>(in);
  ck.beta = read_pod<double>(in);
  ck.lambda = read_pod<double>(in);
  ck.steps_consumed = read_pod<std::uint64_t>(in);
  ck.updates = read_pod<std::uint64_t>(in);
  return ck;
}

void AgentCheckpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  write(out);
  if (!out) throw ConfigError("write failed for checkpoint '" + path + "'");
}

AgentCheckpoint AgentCheckpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  return read(in);
}

template class NetworkParams<float>;
template class NetworkParams<double>;
template class PolicyEvaluator<float>;
template class PolicyEvaluator<double>;
template struct SequenceBatch<float>;
template struct SequenceBatch<double>;
template class UnrollPass<float>;
template class UnrollPass<double>;
template void rmsprop_update(NetworkParams<float>&, const NetworkParams<float>&,
                             OptState<float>&);
template void rmsprop_update(NetworkParams<double>&, const NetworkParams<double>&,
                             OptState<double>&);
template void log_softmax(std::span<const float>, std::span<float>);
template void log_softmax(std::span<const double>, std::span<double>);
template ActionSample sample_action(std::span<const float>, Rng&);
template ActionSample sample_action(std::span<const double>, Rng&);

}  // namespace cleanup::nets
