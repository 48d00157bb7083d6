#pragma once

#include <omp.h>

#include <Eigen/Dense>
#include <vector>

#include "rpcnet/net/train.hpp"
#include "rpcnet/signal/filters.hpp"
#include "rpcnet/signal/motion.hpp"

namespace rpcnet::net {

struct RecursionOptions {
  /// Test-time seeding of the 64-sample angle-history buffer.
  enum class Seed { RestPose, GroundTruth };
  Seed seed = Seed::RestPose;
  /// 24 x (>= history) recorded angles; required for GroundTruth seeding.
  const Eigen::MatrixXf* truth = nullptr;
  int chunk = 2048;  // timesteps per batched EMG-branch precompute
};

/// Closed-loop inference: a rolling angle-history buffer is fed back into
/// the angle branch at every step ("recursion loop"). The estimate at output
/// column k targets the sample immediately following EMG sample
/// history + k - 1, i.e. output length is l - history.
///
/// The EMG branch depends only on the recorded envelope, so it is evaluated
/// in batched chunks up front; only the angle branch and root run inside the
/// sequential loop. -B variants never read the history buffer.
template <typename S>
Eigen::MatrixXf infer_recursive(const RpcNet<S>& net, const sig::ProcessedEmg& emg,
                                const RecursionOptions& opt = {}) {
  const RpcNetConfig& cfg = net.cfg;
  const sig::WindowSpec& w = cfg.window;
  const long l = emg.length();
  if (l <= w.history)
    throw InputError("infer_recursive: envelope shorter than one input window");
  const long n_out = l - w.history;
  const int n_nets = static_cast<int>(net.nets.size());
  const int ie = cfg.emg_input();
  const int ia = cfg.angle_input();
  const bool mono = variant_monolithic(cfg.variant);

  // history ring: columns t-history .. t-1 (normalized angles)
  Eigen::MatrixXf history(cfg.joints, w.history);
  if (opt.seed == RecursionOptions::Seed::GroundTruth) {
    if (!opt.truth || opt.truth->cols() < w.history)
      throw InputError("infer_recursive: ground-truth seed requires recorded angles");
    history = opt.truth->leftCols(w.history);
  } else {
    history.setConstant(sig::rest_normalized(emg.params));
  }

  Eigen::MatrixXf out(cfg.joints, n_out);
  const int chunk = std::max(1, opt.chunk);

  // per-net EMG-branch outputs for one chunk
  std::vector<Mat<S>> branch(n_nets);
  Mat<S> emg_block;
  std::vector<float> gather_buf(ie);
  Vec<S> ang_vec(std::max(ia, 1));
  std::vector<Vec<S>> merged(n_nets), net_out(n_nets);
  for (int j = 0; j < n_nets; ++j) {
    merged[j].resize(net.nets[j].cfg.merged());
    net_out[j].resize(net.nets[j].cfg.outputs);
  }

  for (long c0 = 0; c0 < n_out; c0 += chunk) {
    const long cn = std::min<long>(chunk, n_out - c0);
    emg_block.resize(ie, cn);
    for (long k = 0; k < cn; ++k) {
      gather_emg_mapped(emg.envelope, w.history + c0 + k, w, cfg.channel_map,
                        gather_buf.data());
      for (int i = 0; i < ie; ++i) emg_block(i, k) = static_cast<S>(gather_buf[i]);
    }
#pragma omp parallel for schedule(static) if (n_nets > 1)
    for (int j = 0; j < n_nets; ++j) {
      const auto& sub = net.nets[j];
      Mat<S> h = (sub.layers[kEmg0].w * emg_block).colwise() + sub.layers[kEmg0].b;
      h = h.cwiseMax(S(0));
      branch[j] = (sub.layers[kEmg1].w * h).colwise() + sub.layers[kEmg1].b;
      branch[j] = branch[j].cwiseMax(S(0));
    }

    for (long k = 0; k < cn; ++k) {
      const long t = w.history + c0 + k;  // target sample index
      if (ia > 0) {
        // strided history window, oldest first: ring position (t - history + s*stride)
        long idx = 0;
        for (int s = 0; s < w.angle_samples(); ++s) {
          const long col = (t - w.history + static_cast<long>(s) * w.angle_stride) %
                           w.history;
          for (int jj = 0; jj < cfg.joints; ++jj)
            ang_vec[idx++] = static_cast<S>(history(jj, col));
        }
      }
#pragma omp parallel for schedule(static) if (n_nets > 4)
      for (int j = 0; j < n_nets; ++j) {
        const auto& sub = net.nets[j];
        auto& m = merged[j];
        m.topRows(sub.cfg.emg_hidden) = branch[j].col(k);
        if (sub.cfg.has_angle_branch()) {
          Vec<S> ha = (sub.layers[kAngle0].w * ang_vec.topRows(sub.cfg.angle_input) +
                       sub.layers[kAngle0].b).cwiseMax(S(0));
          m.bottomRows(sub.cfg.angle_out) =
              ((sub.layers[kAngle1].w * ha) + sub.layers[kAngle1].b).cwiseMax(S(0));
        }
        Vec<S> hr = (sub.layers[kRoot0].w * m + sub.layers[kRoot0].b).cwiseMax(S(0));
        net_out[j] = sub.layers[kRoot1].w * hr + sub.layers[kRoot1].b;
      }
      for (int j = 0; j < cfg.joints; ++j)
        out(j, c0 + k) = static_cast<float>(mono ? net_out[0][j] : net_out[j][0]);
      history.col(t % w.history) = out.col(c0 + k);
    }
  }
  return out;
}

struct ProjectedTrajectory {
  Eigen::MatrixXf filtered;             // normalized angles after the filter
  Eigen::MatrixXd angles_deg;           // denormalized, 24 x n
  std::vector<kin::HandPose3D> poses;   // FKA of every sample
};

/// Output conditioning: causal 4th-order low-pass Butterworth (1 Hz cutoff),
/// denormalization and projection back to 3D marker space via the FKA.
inline ProjectedTrajectory smooth_and_project(const Eigen::MatrixXf& raw_normalized,
                                              const kin::KinematicModel& model,
                                              const sig::PipelineParams& params = {},
                                              double cutoff_hz = 1.0) {
  ProjectedTrajectory out;
  sig::ButterworthLowpass butter(4, cutoff_hz, params.processed_rate_hz());
  out.filtered = butter.filter(raw_normalized);
  out.angles_deg = sig::denormalize_angles(out.filtered, model.rest_angles, params);
  out.poses.resize(out.angles_deg.cols());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < out.angles_deg.cols(); ++i) {
    kin::JointAngles a;
    a.values = out.angles_deg.col(i);
    a.timestamp = static_cast<double>(i) / params.processed_rate_hz();
    out.poses[i] = kin::forward_kinematics(model, a);
  }
  return out;
}

}  // namespace rpcnet::net
