#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rpcnet/net/config.hpp"

namespace rpcnet::net {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatRef = Eigen::Ref<const Mat<S>>;

/// splitmix64: tiny, fully specified, reproducible across platforms (unlike
/// std::*_distribution). Used for weight init and epoch shuffling.
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  uint64_t below(uint64_t n) { return next_u64() % n; }

  /// Independent stream for item `index` under a common seed.
  static Rng stream(uint64_t seed, uint64_t index) {
    Rng mix(seed ^ (0x6a09e667f3bcc909ull + index * 0x9e3779b97f4a7c15ull));
    mix.next_u64();
    return mix;
  }
};

template <typename S>
struct Dense {
  Mat<S> w;  // out x in
  Vec<S> b;

  int in() const { return static_cast<int>(w.cols()); }
  int out() const { return static_cast<int>(w.rows()); }

  static Dense random(int in, int out, Rng& rng) {
    Dense d;
    d.w.resize(out, in);
    const double lim = 1.0 / std::sqrt(static_cast<double>(in));
    for (int j = 0; j < in; ++j)
      for (int i = 0; i < out; ++i) d.w(i, j) = static_cast<S>(rng.uniform(-lim, lim));
    d.b = Vec<S>::Zero(out);
    return d;
  }
};

enum LayerId : int { kEmg0 = 0, kEmg1, kAngle0, kAngle1, kRoot0, kRoot1, kLayerSlots };

/// One two-branch sub-network: rectified EMG branch (I_E -> W_E -> W_E),
/// rectified angle branch (I_A -> I_A/3 -> 24), rectified root hidden layer
/// (I_M -> I_M/4) and a linear output.
template <typename S>
class SubNetwork {
 public:
  SubNetworkConfig cfg;
  std::vector<Dense<S>> layers;  // indexed by LayerId; angle slots empty for -B

  static SubNetwork random(const SubNetworkConfig& cfg, Rng& rng) {
    cfg.validate();
    SubNetwork n;
    n.cfg = cfg;
    n.layers.resize(kLayerSlots);
    n.layers[kEmg0] = Dense<S>::random(cfg.emg_input, cfg.emg_hidden, rng);
    n.layers[kEmg1] = Dense<S>::random(cfg.emg_hidden, cfg.emg_hidden, rng);
    if (cfg.has_angle_branch()) {
      n.layers[kAngle0] = Dense<S>::random(cfg.angle_input, cfg.angle_hidden, rng);
      n.layers[kAngle1] = Dense<S>::random(cfg.angle_hidden, cfg.angle_out, rng);
    }
    n.layers[kRoot0] = Dense<S>::random(cfg.merged(), cfg.root_hidden(), rng);
    n.layers[kRoot1] = Dense<S>::random(cfg.root_hidden(), cfg.outputs, rng);
    return n;
  }

  bool has_layer(int id) const { return layers[id].w.size() > 0; }

  long parameter_count() const {
    long n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
  }
  /// Multiplications of one forward pass (the cost measure used by the
  /// variant comparisons).
  long multiply_count() const {
    long n = 0;
    for (const auto& l : layers) n += l.w.size();
    return n;
  }

  /// Batched intermediates kept for backpropagation. Rectified activations
  /// double as their own derivative masks.
  struct Workspace {
    Mat<S> h_e0, h_e1, h_a0, h_a1, merged, h_r0, out;
    Mat<S> d_r0, d_merged, d_e1, d_e0, d_a1, d_a0;  // backward scratch
  };

  const Mat<S>& forward(MatRef<S> emg, MatRef<S> angle, Workspace& ws) const {
    if (emg.rows() != cfg.emg_input)
      throw ContractError("SubNetwork::forward: EMG input size mismatch");
    const bool ab = cfg.has_angle_branch();
    if (ab && angle.rows() != cfg.angle_input)
      throw ContractError("SubNetwork::forward: angle input size mismatch");
    const int b = static_cast<int>(emg.cols());

    ws.h_e0.noalias() = layers[kEmg0].w * emg;
    ws.h_e0.colwise() += layers[kEmg0].b;
    ws.h_e0 = ws.h_e0.cwiseMax(S(0));
    ws.h_e1.noalias() = layers[kEmg1].w * ws.h_e0;
    ws.h_e1.colwise() += layers[kEmg1].b;
    ws.h_e1 = ws.h_e1.cwiseMax(S(0));

    ws.merged.resize(cfg.merged(), b);
    ws.merged.topRows(cfg.emg_hidden) = ws.h_e1;
    if (ab) {
      ws.h_a0.noalias() = layers[kAngle0].w * angle;
      ws.h_a0.colwise() += layers[kAngle0].b;
      ws.h_a0 = ws.h_a0.cwiseMax(S(0));
      ws.h_a1.noalias() = layers[kAngle1].w * ws.h_a0;
      ws.h_a1.colwise() += layers[kAngle1].b;
      ws.h_a1 = ws.h_a1.cwiseMax(S(0));
      ws.merged.bottomRows(cfg.angle_out) = ws.h_a1;
    }

    ws.h_r0.noalias() = layers[kRoot0].w * ws.merged;
    ws.h_r0.colwise() += layers[kRoot0].b;
    ws.h_r0 = ws.h_r0.cwiseMax(S(0));
    ws.out.noalias() = layers[kRoot1].w * ws.h_r0;
    ws.out.colwise() += layers[kRoot1].b;
    return ws.out;
  }

  Mat<S> forward(MatRef<S> emg, MatRef<S> angle) const {
    Workspace ws;
    return forward(emg, angle, ws);
  }

  /// Backpropagates `dout` (outputs x batch) through the workspace of the
  /// last forward call. For every layer the consumer receives (layer id,
  /// delta, layer input) with delta = dLoss/d(pre-activation); dW is
  /// delta * input^T and db its row sums.
  /// The consumer may update a layer in place (the fused Adam path does), so
  /// every backpropagated delta is computed from the pre-update weights
  /// before that layer is handed over.
  template <class Consumer>
  void backward(MatRef<S> emg, MatRef<S> angle, Workspace& ws,
                const Mat<S>& dout, Consumer&& consume) const {
    const bool ab = cfg.has_angle_branch();
    ws.d_r0.noalias() = layers[kRoot1].w.transpose() * dout;
    consume(kRoot1, dout, ws.h_r0);
    ws.d_r0 = ws.d_r0.cwiseProduct((ws.h_r0.array() > S(0)).template cast<S>().matrix());
    ws.d_merged.noalias() = layers[kRoot0].w.transpose() * ws.d_r0;
    consume(kRoot0, ws.d_r0, ws.merged);

    ws.d_e1 = ws.d_merged.topRows(cfg.emg_hidden)
                  .cwiseProduct((ws.h_e1.array() > S(0)).template cast<S>().matrix());
    ws.d_e0.noalias() = layers[kEmg1].w.transpose() * ws.d_e1;
    consume(kEmg1, ws.d_e1, ws.h_e0);
    ws.d_e0 = ws.d_e0.cwiseProduct((ws.h_e0.array() > S(0)).template cast<S>().matrix());
    consume(kEmg0, ws.d_e0, emg);

    if (ab) {
      ws.d_a1 = ws.d_merged.bottomRows(cfg.angle_out)
                    .cwiseProduct((ws.h_a1.array() > S(0)).template cast<S>().matrix());
      ws.d_a0.noalias() = layers[kAngle1].w.transpose() * ws.d_a1;
      consume(kAngle1, ws.d_a1, ws.h_a0);
      ws.d_a0 = ws.d_a0.cwiseProduct((ws.h_a0.array() > S(0)).template cast<S>().matrix());
      consume(kAngle0, ws.d_a0, angle);
    }
  }

  /// Explicit per-layer gradients of the mean-squared-error loss; the
  /// reference path used by the finite-difference checks.
  std::vector<Dense<S>> loss_gradients(MatRef<S> emg, MatRef<S> angle,
                                       MatRef<S> targets, S* loss_out = nullptr) {
    Workspace ws;
    const Mat<S>& out = forward(emg, angle, ws);
    const S scale = S(1) / static_cast<S>(out.size());
    Mat<S> dout = S(2) * scale * (out - targets);
    if (loss_out) *loss_out = (out - targets).squaredNorm() * scale;
    std::vector<Dense<S>> grads(kLayerSlots);
    backward(emg, angle, ws, dout, [&](int id, const auto& delta, const auto& input) {
      grads[id].w.noalias() = delta * input.transpose();
      grads[id].b = delta.rowwise().sum();
    });
    return grads;
  }
};

// ---------------------------------------------------------------------------
// Adam optimizer (PyTorch conventions: epsilon added after the square root
// of the bias-corrected second moment).

template <typename S>
struct AdamLayerState {
  Mat<S> m_w, v_w;
  Vec<S> m_b, v_b;
};

template <typename S>
struct AdamState {
  std::vector<AdamLayerState<S>> layers;
  long step = 0;

  static AdamState for_network(const SubNetwork<S>& n) {
    AdamState st;
    st.layers.resize(kLayerSlots);
    for (int i = 0; i < kLayerSlots; ++i) {
      if (!n.has_layer(i)) continue;
      st.layers[i].m_w = Mat<S>::Zero(n.layers[i].out(), n.layers[i].in());
      st.layers[i].v_w = st.layers[i].m_w;
      st.layers[i].m_b = Vec<S>::Zero(n.layers[i].out());
      st.layers[i].v_b = st.layers[i].m_b;
    }
    return st;
  }
};

namespace detail {

/// One fused Adam pass over `n` contiguous parameters:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
///   p -= step_scale * m / (sqrt(v) + eps_scale)
/// with step_scale = lr*sqrt(1-b2^t)/(1-b1^t) and eps_scale = eps*sqrt(1-b2^t),
/// algebraically identical to the textbook bias-corrected update.
template <typename S>
inline void adam_span(S* p, S* m, S* v, const S* g, long n, S b1, S b2,
                      S step_scale, S eps_scale) {
  const S c1 = S(1) - b1, c2 = S(1) - b2;
#pragma omp simd
  for (long i = 0; i < n; ++i) {
    const S gi = g[i];
    const S mi = b1 * m[i] + c1 * gi;
    const S vi = b2 * v[i] + c2 * gi * gi;
    m[i] = mi;
    v[i] = vi;
    p[i] -= step_scale * mi / (std::sqrt(vi) + eps_scale);
  }
}

}  // namespace detail

/// Applies one Adam update to a layer given delta and the layer input
/// (both column-major, batch columns). The weight gradient delta * input^T
/// is produced in column tiles that stay cache-resident, so it never
/// round-trips through memory.
template <typename S>
class FusedAdamUpdater {
 public:
  FusedAdamUpdater(const TrainingConfig& cfg, int max_out, int max_batch)
      : cfg_(cfg) {
    gbuf_.resize(max_out, kTile);
    in_t_.resize(max_batch, 1);  // resized per layer
  }

  void begin_step(long step_index) {
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_index));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_index));
    step_scale_ = static_cast<S>(cfg_.learning_rate * std::sqrt(c2) / c1);
    eps_scale_ = static_cast<S>(cfg_.epsilon * std::sqrt(c2));
  }

  void update(Dense<S>& layer, AdamLayerState<S>& st, MatRef<S> delta,
              MatRef<S> input) {
    const int out = layer.out(), in = layer.in();
    in_t_.resize(input.cols(), input.rows());
    in_t_ = input.transpose();
    const int tile = std::max(1, std::min<int>(in, kTile * 512 / std::max(out, 1)));
    gbuf_.resize(out, tile);
    for (int j0 = 0; j0 < in; j0 += tile) {
      const int jb = std::min(tile, in - j0);
      auto g = gbuf_.leftCols(jb);
      g.noalias() = delta * in_t_.middleCols(j0, jb);
      detail::adam_span(layer.w.data() + static_cast<size_t>(j0) * out,
                        st.m_w.data() + static_cast<size_t>(j0) * out,
                        st.v_w.data() + static_cast<size_t>(j0) * out, gbuf_.data(),
                        static_cast<long>(out) * jb, static_cast<S>(cfg_.beta1),
                        static_cast<S>(cfg_.beta2), step_scale_, eps_scale_);
    }
    bgrad_ = delta.rowwise().sum();
    detail::adam_span(layer.b.data(), st.m_b.data(), st.v_b.data(), bgrad_.data(),
                      out, static_cast<S>(cfg_.beta1), static_cast<S>(cfg_.beta2),
                      step_scale_, eps_scale_);
  }

  /// Plain update from an explicit gradient (used by the small bias-only
  /// cases and by tests).
  void update_explicit(Dense<S>& layer, AdamLayerState<S>& st, const Dense<S>& grad) {
    detail::adam_span(layer.w.data(), st.m_w.data(), st.v_w.data(), grad.w.data(),
                      layer.w.size(), static_cast<S>(cfg_.beta1),
                      static_cast<S>(cfg_.beta2), step_scale_, eps_scale_);
    detail::adam_span(layer.b.data(), st.m_b.data(), st.v_b.data(), grad.b.data(),
                      layer.b.size(), static_cast<S>(cfg_.beta1),
                      static_cast<S>(cfg_.beta2), step_scale_, eps_scale_);
  }

 private:
  static constexpr int kTile = 128;
  TrainingConfig cfg_;
  S step_scale_ = 0, eps_scale_ = 0;
  Mat<S> gbuf_, in_t_;
  Vec<S> bgrad_;
};

// ---------------------------------------------------------------------------

/// The full model: 24 per-joint sub-networks sharing inputs, or a single
/// monolithic unit for the -I/-W variants.
template <typename S>
struct RpcNet {
  RpcNetConfig cfg;
  std::vector<SubNetwork<S>> nets;

  static RpcNet random(const RpcNetConfig& cfg, uint64_t seed) {
    RpcNet n;
    n.cfg = cfg;
    const int count = cfg.network_count();
    n.nets.reserve(count);
    for (int i = 0; i < count; ++i) {
      Rng rng = Rng::stream(seed, static_cast<uint64_t>(i));
      n.nets.push_back(SubNetwork<S>::random(cfg.subnet(), rng));
    }
    return n;
  }

  /// One time-step forward pass: 24 outputs from shared inputs.
  Vec<S> forward(MatRef<S> emg, MatRef<S> angle) const {
    Vec<S> out(cfg.joints);
    if (variant_monolithic(cfg.variant)) {
      out = nets[0].forward(emg, angle).col(0);
    } else {
      for (int j = 0; j < cfg.joints; ++j)
        out[j] = nets[j].forward(emg, angle)(0, 0);
    }
    return out;
  }

  long multiply_count() const {
    long n = 0;
    for (const auto& sub : nets) n += sub.multiply_count();
    return n;
  }
  long parameter_count() const {
    long n = 0;
    for (const auto& sub : nets) n += sub.parameter_count();
    return n;
  }
};

}  // namespace rpcnet::net
