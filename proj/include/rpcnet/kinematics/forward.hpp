#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "rpcnet/kinematics/model.hpp"

namespace rpcnet::kin {

/// Wrist rotation from the first three DoFs: intrinsic Rx(ps), Ry(-fe),
/// Rz(aa) so that positive F-E is extension and positive A-A is radial.
inline Eigen::Matrix3d wrist_rotation(const AngleVec& angles) {
  return rot_x(angles[0]) * rot_y(-angles[1]) * rot_z(angles[2]);
}

/// Marker positions of one digit chain in the palm frame.
/// Fingers: q = (MP F-E, MP A-A, IP F-E, ID F-E).
/// Thumb:   q = (MP F-E, MP A-A, IP F-E, IP A-A, ID F-E).
inline void digit_markers(const DigitChain& chain, const double* q,
                          Eigen::Vector3d out[3]) {
  const bool thumb = chain.dof_count == 5;
  Eigen::Matrix3d r = chain.mount * rot_z(q[1]) * rot_y(-q[0]);
  Eigen::Vector3d p = chain.base + r * Eigen::Vector3d(chain.lengths[0], 0, 0);
  out[0] = p;
  r = thumb ? Eigen::Matrix3d(r * rot_z(q[3]) * rot_y(-q[2])) : Eigen::Matrix3d(r * rot_y(-q[2]));
  p += r * Eigen::Vector3d(chain.lengths[1], 0, 0);
  out[1] = p;
  r = r * rot_y(-(thumb ? q[4] : q[3]));
  p += r * Eigen::Vector3d(chain.lengths[2], 0, 0);
  out[2] = p;
}

/// Forward kinematic algorithm: the 23 marker positions implied by 24 joint
/// angles. Pure and deterministic; the two forearm markers are constants.
inline HandPose3D forward_kinematics(const KinematicModel& model,
                                     const JointAngles& angles) {
  if (!angles.values.allFinite())
    throw InputError("forward_kinematics: non-finite joint angle");
  HandPose3D pose;
  pose.timestamp = angles.timestamp;
  const Eigen::Matrix3d rw = wrist_rotation(angles.values);

  pose.markers[kForearmRadial] = model.forearm_markers[0];
  pose.markers[kForearmUlnar] = model.forearm_markers[1];
  for (int i = 0; i < kNumPalmMarkers; ++i)
    pose.markers[kPalmMarkerIds[i]] = rw * model.palm_layout[i];

  Eigen::Vector3d digit_pts[3];
  for (const auto& chain : model.digits) {
    digit_markers(chain, angles.values.data() + chain.first_dof, digit_pts);
    for (int k = 0; k < 3; ++k)
      pose.markers[chain.first_marker + k] = rw * digit_pts[k];
  }
  return pose;
}

/// Fingertip marker slots used by the weighted fingertip distance.
inline constexpr std::array<int, 3> kFingertipMarkers = {kIndexTip, kMiddleTip, kThumbTip};

}  // namespace rpcnet::kin
