#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "rpcnet/kinematics/forward.hpp"
#include "rpcnet/kinematics/least_squares.hpp"
#include "rpcnet/kinematics/model.hpp"

namespace rpcnet::kin {

struct IkResult {
  JointAngles angles;
  double approximation_error_mm = 0.0;  // mean |observed - FKA| over valid hand markers
  std::array<int, 3> per_phase_iterations = {0, 0, 0};
  bool converged = true;
  uint8_t held_digits = 0;  // bit d set: digit d had missing markers, angles held
  std::array<bool, kNumDigits> digit_converged = {true, true, true, true, true};
};

/// Phase 1: wrist rotation carrying the reference palm layout onto the
/// observed palm markers. Closed form via the best-fit rigid rotation
/// (centroid-removed Kabsch), decomposed into the model's wrist DoFs.
inline Eigen::Vector3d ik_phase1_wrist(const KinematicModel& model,
                                       const HandPose3D& pose) {
  Eigen::Vector3d ref_c = Eigen::Vector3d::Zero(), obs_c = Eigen::Vector3d::Zero();
  int nvalid = 0;
  for (int i = 0; i < kNumPalmMarkers; ++i) {
    if (!pose.valid(kPalmMarkerIds[i])) continue;
    ref_c += model.palm_layout[i];
    obs_c += pose.markers[kPalmMarkerIds[i]];
    ++nvalid;
  }
  if (nvalid < 3)
    throw NumericError("ik_phase1_wrist: fewer than 3 valid palm markers");
  ref_c /= nvalid;
  obs_c /= nvalid;

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (int i = 0; i < kNumPalmMarkers; ++i) {
    if (!pose.valid(kPalmMarkerIds[i])) continue;
    h += (model.palm_layout[i] - ref_c) *
         (pose.markers[kPalmMarkerIds[i]] - obs_c).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv[1] < 1e-9 * std::max(sv[0], 1.0))
    throw NumericError("ik_phase1_wrist: degenerate (collinear) palm markers");
  Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
  Eigen::Matrix3d r = v * u.transpose();
  if (r.determinant() < 0) {
    v.col(2) *= -1;
    r = v * u.transpose();
  }

  // r == Rx(a) * Ry(b) * Rz(c); wrist F-E is stored with flipped sign so
  // that positive means extension
  const double b = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
  const double c = std::atan2(-r(0, 1), r(0, 0));
  const double a = std::atan2(-r(1, 2), r(2, 2));
  constexpr double kRad2Deg = 180.0 / M_PI;
  return {a * kRad2Deg, -b * kRad2Deg, c * kRad2Deg};
}

namespace detail {

struct PhaseSolve {
  Eigen::VectorXd angles;
  double cost;
  int iterations;
  bool converged;
};

/// Shared phase-2/3 machinery: fit one digit chain to its three observed
/// markers, expressed in the palm frame, starting from the rest angles.
inline PhaseSolve solve_digit(const KinematicModel& model, const DigitChain& chain,
                              const Eigen::Vector3d obs[3],
                              const SolverOptions& opt) {
  const int n = chain.dof_count;
  Eigen::VectorXd x0(n), lo(n), hi(n);
  for (int j = 0; j < n; ++j) {
    x0[j] = model.rest_angles[chain.first_dof + j];
    lo[j] = model.limit_lo[chain.first_dof + j];
    hi[j] = model.limit_hi[chain.first_dof + j];
  }
  auto residual = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
    Eigen::Vector3d pts[3];
    digit_markers(chain, q.data(), pts);
    for (int k = 0; k < 3; ++k) r.segment<3>(3 * k) = pts[k] - obs[k];
  };
  SolverResult sr = solve_bounded_least_squares(residual, x0, lo, hi, 9, opt);
  return {sr.x, sr.cost, sr.iterations, sr.converged};
}

}  // namespace detail

/// Phase 2: the four angles of one finger (MP F-E, MP A-A, IP F-E, ID F-E),
/// observed markers already rotated into the palm frame.
inline detail::PhaseSolve ik_phase2_finger(const KinematicModel& model,
                                           const HandPose3D& palm_frame_pose,
                                           Digit finger,
                                           const SolverOptions& opt = {}) {
  const DigitChain& chain = model.digit(finger);
  Eigen::Vector3d obs[3] = {palm_frame_pose.markers[chain.first_marker],
                            palm_frame_pose.markers[chain.first_marker + 1],
                            palm_frame_pose.markers[chain.first_marker + 2]};
  return detail::solve_digit(model, chain, obs, opt);
}

/// Phase 3: the five thumb angles (MP F-E, MP A-A, IP F-E, IP A-A, ID F-E).
inline detail::PhaseSolve ik_phase3_thumb(const KinematicModel& model,
                                          const HandPose3D& palm_frame_pose,
                                          const SolverOptions& opt = {}) {
  return ik_phase2_finger(model, palm_frame_pose, Digit::Thumb, opt);
}

/// Full inverse kinematic algorithm for one frame: phase 1 in closed form,
/// then one independent bounded least-squares fit per digit. Pure function
/// of the pose; digits with missing markers take `previous` (or rest) angles
/// and are flagged in `held_digits`.
inline IkResult inverse_kinematics(const KinematicModel& model, const HandPose3D& pose,
                                   const JointAngles* previous = nullptr,
                                   const SolverOptions& opt = {}) {
  IkResult res;
  res.angles.timestamp = pose.timestamp;

  const Eigen::Vector3d wrist = ik_phase1_wrist(model, pose);
  for (int j = 0; j < 3; ++j)
    res.angles.values[j] = std::clamp(wrist[j], model.limit_lo[j], model.limit_hi[j]);

  // express hand markers in the palm frame before fitting digits
  const Eigen::Matrix3d rw_t = wrist_rotation(res.angles.values).transpose();
  HandPose3D palm = pose;
  for (int i = kFirstHandMarker; i < kNumMarkers; ++i)
    palm.markers[i] = rw_t * pose.markers[i];

  for (int d = 0; d < kNumDigits; ++d) {
    const DigitChain& chain = model.digits[d];
    const bool have_markers = pose.valid(chain.first_marker) &&
                              pose.valid(chain.first_marker + 1) &&
                              pose.valid(chain.first_marker + 2);
    if (!have_markers) {
      res.held_digits |= static_cast<uint8_t>(1u << d);
      for (int j = 0; j < chain.dof_count; ++j) {
        int k = chain.first_dof + j;
        res.angles.values[k] = previous ? previous->values[k] : model.rest_angles[k];
      }
      continue;
    }
    auto ps = (d == 4) ? ik_phase3_thumb(model, palm, opt)
                       : ik_phase2_finger(model, palm, static_cast<Digit>(d), opt);
    for (int j = 0; j < chain.dof_count; ++j)
      res.angles.values[chain.first_dof + j] = ps.angles[j];
    res.per_phase_iterations[d == 4 ? 2 : 1] += ps.iterations;
    res.digit_converged[d] = ps.converged;
    if (!ps.converged) res.converged = false;
  }

  // approximation error over valid hand markers
  const HandPose3D rec = forward_kinematics(model, res.angles);
  double err = 0.0;
  int cnt = 0;
  for (int i = kFirstHandMarker; i < kNumMarkers; ++i) {
    if (!pose.valid(i)) continue;
    err += (rec.markers[i] - pose.markers[i]).norm();
    ++cnt;
  }
  res.approximation_error_mm = cnt ? err / cnt : 0.0;
  return res;
}

}  // namespace rpcnet::kin
