#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "rpcnet/kinematics/inverse.hpp"
#include "rpcnet/signal/emg.hpp"
#include "rpcnet/signal/filters.hpp"

namespace rpcnet::sig {

/// Normalized joint-angle trajectories, time-aligned with a ProcessedEmg.
struct ProcessedAngles {
  Eigen::MatrixXf trajectories;  // 24 x l, (angle - rest + 150) / 240
  PipelineParams params;
  long ik_failures = 0;  // frames where the IK was degenerate or not converged

  long length() const { return trajectories.cols(); }
};

inline float normalize_angle(double deg_minus_rest, const PipelineParams& p) {
  return static_cast<float>((deg_minus_rest + p.angle_offset_deg) / p.angle_scale_deg);
}

/// Normalized value of the rest pose itself: (0 + 150) / 240.
inline float rest_normalized(const PipelineParams& p = {}) {
  return normalize_angle(0.0, p);
}

inline Eigen::MatrixXf normalize_angles(const Eigen::MatrixXd& deg,
                                        const kin::AngleVec& rest,
                                        const PipelineParams& p) {
  Eigen::MatrixXf out(deg.rows(), deg.cols());
  for (int i = 0; i < deg.cols(); ++i)
    out.col(i) = ((deg.col(i) - rest).array() + p.angle_offset_deg)
                     .cast<float>() / static_cast<float>(p.angle_scale_deg);
  return out;
}

inline Eigen::MatrixXd denormalize_angles(const Eigen::MatrixXf& norm,
                                          const kin::AngleVec& rest,
                                          const PipelineParams& p) {
  Eigen::MatrixXd out(norm.rows(), norm.cols());
  for (int i = 0; i < norm.cols(); ++i)
    out.col(i) = norm.col(i).cast<double>() * p.angle_scale_deg -
                 Eigen::VectorXd::Constant(norm.rows(), p.angle_offset_deg) + rest;
  return out;
}

/// Marker post-processing: moving average (order 20), per-frame inverse
/// kinematics, rest-angle subtraction, normalization and linear resampling
/// onto the EMG envelope timestamps (exactly `target_length` samples).
///
/// Digits with missing markers hold the previous frame's angles; frames whose
/// IK is degenerate are flagged and bridged by the resampling step.
inline ProcessedAngles position_postprocess(const std::vector<kin::HandPose3D>& frames,
                                            const kin::KinematicModel& model,
                                            long target_length,
                                            const PipelineParams& params = {},
                                            const kin::SolverOptions& solver = {}) {
  const int nf = static_cast<int>(frames.size());
  if (nf < 2) throw InputError("position_postprocess: need at least 2 frames");

  const double emg_dur = params.envelope_timestamp(target_length - 1);
  const double mocap_dur = (nf - 1) / params.marker_rate_hz;
  if (mocap_dur + 1.0 / params.marker_rate_hz < emg_dur)
    throw InputError("position_postprocess: marker stream shorter than EMG span");

  // moving average over marker coordinates; a marker participates only while
  // valid in every window sample (otherwise the raw value is kept)
  Eigen::MatrixXf coords(3 * kin::kNumMarkers, nf);
  for (int i = 0; i < nf; ++i)
    for (int m = 0; m < kin::kNumMarkers; ++m)
      coords.block<3, 1>(3 * m, i) = frames[i].markers[m].cast<float>();
  Eigen::MatrixXf smooth = moving_average(coords, params.moving_avg_order);

  std::vector<kin::HandPose3D> filtered(frames.begin(), frames.end());
  for (int i = 0; i < nf; ++i)
    for (int m = 0; m < kin::kNumMarkers; ++m)
      if (frames[i].valid(m))
        filtered[i].markers[m] = smooth.block<3, 1>(3 * m, i).cast<double>();

  // per-frame IK (pure per frame, parallel), then a sequential pass applying
  // the hold-last-value policy for digits with missing markers
  std::vector<kin::IkResult> ik(nf);
  std::vector<uint8_t> frame_ok(nf, 1);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nf; ++i) {
    try {
      ik[i] = kin::inverse_kinematics(model, filtered[i], nullptr, solver);
    } catch (const NumericError&) {
      frame_ok[i] = 0;
    }
  }
  long failures = 0;
  for (int i = 0; i < nf; ++i) {
    if (!frame_ok[i]) { ++failures; continue; }
    if (ik[i].held_digits && i > 0 && frame_ok[i - 1]) {
      for (int d = 0; d < kin::kNumDigits; ++d) {
        if (!(ik[i].held_digits & (1u << d))) continue;
        const auto& chain = model.digits[d];
        for (int j = 0; j < chain.dof_count; ++j)
          ik[i].angles.values[chain.first_dof + j] =
              ik[i - 1].angles.values[chain.first_dof + j];
      }
    }
    if (!ik[i].converged) ++failures;
  }

  // assemble valid frames, normalize, resample onto envelope timestamps
  std::vector<double> t_src;
  t_src.reserve(nf);
  Eigen::MatrixXd deg(kin::kNumDofs, nf);
  int nv = 0;
  for (int i = 0; i < nf; ++i) {
    if (!frame_ok[i]) continue;
    deg.col(nv) = ik[i].angles.values;
    t_src.push_back(i / params.marker_rate_hz);
    ++nv;
  }
  if (nv < 2) throw NumericError("position_postprocess: too few usable frames");
  Eigen::MatrixXf norm = normalize_angles(deg.leftCols(nv), model.rest_angles, params);

  std::vector<double> t_dst(target_length);
  for (long i = 0; i < target_length; ++i) t_dst[i] = params.envelope_timestamp(i);

  ProcessedAngles out;
  out.params = params;
  out.trajectories = linear_resample(norm, t_src, t_dst);
  out.ik_failures = failures;
  return out;
}

}  // namespace rpcnet::sig
