#pragma once

#include <omp.h>

#include <type_traits>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "rpcnet/net/network.hpp"
#include "rpcnet/signal/windows.hpp"

namespace rpcnet::net {

/// One trial's processed streams, borrowed for training/inference.
struct TrialView {
  const Eigen::MatrixXf* envelope;      // 96 x l (full grid)
  const Eigen::MatrixXf* trajectories;  // 24 x l, normalized
};

/// Gathers EMG history for subset variants through the channel map.
inline void gather_emg_mapped(const Eigen::MatrixXf& envelope, long t,
                              const sig::WindowSpec& w,
                              const std::vector<int>& channel_map, float* out) {
  long k = 0;
  for (int s = 0; s < w.emg_samples(); ++s) {
    const long col = t - w.history + static_cast<long>(s) * w.emg_stride;
    for (int ch : channel_map) out[k++] = envelope(ch, col);
  }
}

struct TrainResult {
  std::vector<double> epoch_loss;                    // mean over nets and batches
  std::vector<std::vector<double>> epoch_loss_per_net;
  long steps = 0;
};

namespace detail {

struct WindowRef {
  int trial;
  long t;
};

inline std::vector<WindowRef> collect_windows(const std::vector<TrialView>& trials,
                                              const sig::WindowSpec& w) {
  std::vector<WindowRef> wins;
  for (size_t ti = 0; ti < trials.size(); ++ti) {
    const long l = trials[ti].envelope->cols();
    if (trials[ti].trajectories->cols() != l)
      throw ContractError("train: unaligned envelope/trajectory lengths");
    for (long t = w.history; t < l; ++t)
      wins.push_back({static_cast<int>(ti), t});
  }
  return wins;
}

}  // namespace detail

/// From-scratch training: teacher forcing (angle history comes from the
/// recording, the recursion loop is not used), shuffled windows, MSE loss,
/// one independent Adam state per sub-network. Deterministic for a fixed
/// config seed regardless of thread count.
template <typename S>
TrainResult train(RpcNet<S>& net, const std::vector<TrialView>& trials,
                  const TrainingConfig& cfg) {
  if (trials.empty()) throw InputError("train: empty training set");
  const RpcNetConfig& nc = net.cfg;
  const sig::WindowSpec& w = nc.window;
  auto wins = detail::collect_windows(trials, w);
  if (wins.empty()) throw InputError("train: no usable windows");

  const int n_nets = static_cast<int>(net.nets.size());
  const int ie = nc.emg_input();
  const int ia = nc.angle_input();
  const int b_max = cfg.batch_size;
  const bool mono = variant_monolithic(nc.variant);

  std::vector<AdamState<S>> adam;
  adam.reserve(n_nets);
  for (const auto& sub : net.nets) adam.push_back(AdamState<S>::for_network(sub));

  const int n_threads = std::max(1, omp_get_max_threads());
  std::vector<typename SubNetwork<S>::Workspace> ws(n_threads);
  std::vector<FusedAdamUpdater<S>> upd(
      n_threads, FusedAdamUpdater<S>(cfg, std::max(net.nets[0].cfg.emg_hidden,
                                                   net.nets[0].cfg.merged()),
                                     b_max));

  Mat<S> emg_in(ie, b_max), ang_in(std::max(ia, 1), b_max);
  Mat<S> targets(nc.joints, b_max);
  std::vector<float> gather_buf(ie);
  std::vector<float> ang_buf(std::max(ia, 1));

  Rng shuffle_rng = Rng::stream(cfg.seed, 0x5351ull);
  TrainResult res;
  res.epoch_loss_per_net.assign(cfg.epochs, std::vector<double>(n_nets, 0.0));
  std::vector<double> net_loss(n_nets);
  long step_index = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the reproducible generator
    for (size_t i = wins.size(); i > 1; --i)
      std::swap(wins[i - 1], wins[shuffle_rng.below(i)]);

    double epoch_loss = 0.0;
    std::vector<double> epoch_net_loss(n_nets, 0.0);
    long batches = 0;

    for (size_t pos = 0; pos < wins.size(); pos += b_max) {
      const int b = static_cast<int>(std::min<size_t>(b_max, wins.size() - pos));
      for (int k = 0; k < b; ++k) {
        const auto& wr = wins[pos + k];
        const auto& tr = trials[wr.trial];
        gather_emg_mapped(*tr.envelope, wr.t, w, nc.channel_map, gather_buf.data());
        for (int i = 0; i < ie; ++i) emg_in(i, k) = static_cast<S>(gather_buf[i]);
        if (ia > 0) {
          sig::gather_angle_window(*tr.trajectories, wr.t, w, ang_buf.data());
          for (int i = 0; i < ia; ++i) ang_in(i, k) = static_cast<S>(ang_buf[i]);
        }
        targets.col(k) = tr.trajectories->col(wr.t).template cast<S>();
      }
      auto emg_b = emg_in.leftCols(b);
      auto ang_b = ang_in.leftCols(b);
      ++step_index;

#pragma omp parallel for schedule(static) if (n_nets > 1)
      for (int j = 0; j < n_nets; ++j) {
        const int tid = omp_get_thread_num();
        auto& sub = net.nets[j];
        auto& wsp = ws[tid];
        auto& updater = upd[tid];
        updater.begin_step(step_index);

        const Mat<S>& out = sub.forward(emg_b, ang_b.topRows(sub.cfg.angle_input), wsp);
        Mat<S> tgt = mono ? Mat<S>(targets.leftCols(b))
                          : Mat<S>(targets.row(j).leftCols(b));
        const S scale = S(1) / static_cast<S>(out.size());
        Mat<S> dout = S(2) * scale * (out - tgt);
        net_loss[j] = static_cast<double>((out - tgt).squaredNorm() * scale);

        sub.backward(emg_b, ang_b.topRows(sub.cfg.angle_input), wsp, dout,
                     [&](int id, const auto& delta, const auto& input) {
                       updater.update(sub.layers[id], adam[j].layers[id], delta, input);
                     });
      }

      double batch_loss = 0.0;
      for (int j = 0; j < n_nets; ++j) {
        batch_loss += net_loss[j];
        epoch_net_loss[j] += net_loss[j];
      }
      batch_loss /= n_nets;
      if (!std::isfinite(batch_loss))
        throw NumericError("train: non-finite loss at step " + std::to_string(step_index));
      epoch_loss += batch_loss;
      ++batches;
    }

    res.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    for (int j = 0; j < n_nets; ++j)
      res.epoch_loss_per_net[epoch][j] = epoch_net_loss[j] / static_cast<double>(batches);
  }
  res.steps = step_index;
  return res;
}

/// Single gradient-descent step on one batch; exposed for the optimizer unit
/// tests (loss before the update is returned).
template <typename S>
S backward_and_step(SubNetwork<S>& sub, AdamState<S>& adam,
                    std::type_identity_t<MatRef<S>> emg,
                    std::type_identity_t<MatRef<S>> angle,
                    std::type_identity_t<MatRef<S>> targets,
                    const TrainingConfig& cfg) {
  typename SubNetwork<S>::Workspace ws;
  FusedAdamUpdater<S> upd(cfg, std::max(sub.cfg.emg_hidden, sub.cfg.merged()),
                          static_cast<int>(emg.cols()));
  const Mat<S>& out = sub.forward(emg, angle, ws);
  const S scale = S(1) / static_cast<S>(out.size());
  Mat<S> dout = S(2) * scale * (out - targets);
  const S loss = (out - targets).squaredNorm() * scale;
  if (!std::isfinite(static_cast<double>(loss)))
    throw NumericError("backward_and_step: non-finite loss");
  adam.step += 1;
  upd.begin_step(adam.step);
  sub.backward(emg, angle, ws, dout, [&](int id, const auto& delta, const auto& input) {
    upd.update(sub.layers[id], adam.layers[id], delta, input);
  });
  return loss;
}

/// RpcNet-level step: one MSE + Adam update per sub-network over a shared
/// batch (teacher-forced inputs). Returns the mean batch loss.
template <typename S>
double rpcnet_backward_and_step(RpcNet<S>& net, std::vector<AdamState<S>>& states,
                                std::type_identity_t<MatRef<S>> emg,
                                std::type_identity_t<MatRef<S>> angle,
                                std::type_identity_t<MatRef<S>> targets,
                                const TrainingConfig& cfg) {
  if (states.size() != net.nets.size())
    throw ContractError("rpcnet_backward_and_step: state/net count mismatch");
  const bool mono = variant_monolithic(net.cfg.variant);
  double total = 0.0;
  for (size_t j = 0; j < net.nets.size(); ++j) {
    auto& sub = net.nets[j];
    states[j].step += 1;
    Mat<S> tgt = mono ? Mat<S>(targets) : Mat<S>(targets.row(static_cast<int>(j)));
    typename SubNetwork<S>::Workspace ws;
    FusedAdamUpdater<S> upd(cfg, std::max(sub.cfg.emg_hidden, sub.cfg.merged()),
                            static_cast<int>(emg.cols()));
    const Mat<S>& out = sub.forward(emg, angle.topRows(sub.cfg.angle_input), ws);
    const S scale = S(1) / static_cast<S>(out.size());
    Mat<S> dout = S(2) * scale * (out - tgt);
    total += static_cast<double>((out - tgt).squaredNorm() * scale);
    upd.begin_step(states[j].step);
    sub.backward(emg, angle.topRows(sub.cfg.angle_input), ws, dout,
                 [&](int id, const auto& delta, const auto& input) {
                   upd.update(sub.layers[id], states[j].layers[id], delta, input);
                 });
  }
  total /= static_cast<double>(net.nets.size());
  if (!std::isfinite(total)) throw NumericError("rpcnet_backward_and_step: non-finite loss");
  return total;
}

}  // namespace rpcnet::net
