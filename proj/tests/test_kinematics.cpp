#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "rpcnet/kinematics/forward.hpp"

using namespace rpcnet;
using Catch::Approx;

TEST_CASE("standard model satisfies its invariants") {
  auto m = kin::KinematicModel::standard();
  REQUIRE_NOTHROW(m.validate());
  int dofs = 3;
  for (const auto& d : m.digits) dofs += d.dof_count;
  REQUIRE(dofs == kin::kNumDofs);
  for (int i = 0; i < kin::kNumDofs; ++i) {
    REQUIRE(m.limit_lo[i] < m.limit_hi[i]);
    REQUIRE(m.rest_angles[i] >= m.limit_lo[i]);
    REQUIRE(m.rest_angles[i] <= m.limit_hi[i]);
  }
}

TEST_CASE("reference pose: finger markers lie on plane K perpendicular to Q") {
  auto m = kin::KinematicModel::standard();
  kin::JointAngles zero;
  auto pose = kin::forward_kinematics(m, zero);

  // fingers: all markers in the palm plane (z = 0), chains straight along +X
  for (int d = 0; d < 4; ++d) {
    const auto& chain = m.digits[d];
    for (int k = 0; k < 3; ++k) {
      const auto& p = pose.markers[chain.first_marker + k];
      CHECK(p.z() == Approx(0.0).margin(1e-12));
      CHECK(p.y() == Approx(chain.base.y()).margin(1e-12));  // line parallel to +X
    }
    CHECK(pose.markers[chain.first_marker + 2].x() ==
          Approx(chain.base.x() + chain.lengths.sum()).margin(1e-9));
  }

  // thumb: markers on plane T (the mount plane), on a line perpendicular to H
  const auto& th = m.digit(kin::Digit::Thumb);
  const Eigen::Vector3d normal_t = th.mount.col(2);
  const Eigen::Vector3d dir = th.mount.col(0);
  for (int k = 0; k < 3; ++k) {
    const auto& p = pose.markers[th.first_marker + k];
    CHECK(std::abs(normal_t.dot(p - th.base)) < 1e-9);
    // collinear with the mount X axis
    const Eigen::Vector3d rel = p - th.base;
    CHECK((rel - rel.dot(dir) * dir).norm() < 1e-9);
  }
}

TEST_CASE("pure wrist rotation rigidly rotates every hand marker") {
  auto m = kin::KinematicModel::standard();
  kin::JointAngles rest_pose;  // zeros
  auto ref = kin::forward_kinematics(m, rest_pose);

  kin::JointAngles flexed;
  flexed.values[1] = 25.0;  // wrist F-E
  auto rot = kin::forward_kinematics(m, flexed);

  const Eigen::Matrix3d r = kin::wrist_rotation(flexed.values);
  for (int i = kin::kFirstHandMarker; i < kin::kNumMarkers; ++i)
    CHECK((rot.markers[i] - r * ref.markers[i]).norm() < 1e-9);
  // forearm markers do not move with the wrist
  CHECK((rot.markers[kin::kForearmRadial] - ref.markers[kin::kForearmRadial]).norm() == 0.0);
}

TEST_CASE("forward kinematics is deterministic and rejects bad input") {
  auto m = kin::KinematicModel::standard();
  kin::JointAngles a;
  for (int i = 0; i < kin::kNumDofs; ++i)
    a.values[i] = m.rest_angles[i] + (i % 5) - 2.0;
  auto p1 = kin::forward_kinematics(m, a);
  auto p2 = kin::forward_kinematics(m, a);
  for (int i = 0; i < kin::kNumMarkers; ++i)
    REQUIRE(p1.markers[i] == p2.markers[i]);  // bit-identical

  a.values[3] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(kin::forward_kinematics(m, a), InputError);
}

TEST_CASE("model config round trip") {
  auto m = kin::KinematicModel::standard();
  m.limit_lo[5] = -123.0;
  m.rest_angles[5] = -30.0;
  m.digits[1].lengths = {51, 29, 23};
  std::stringstream ss;
  m.save_config(ss);
  auto loaded = kin::KinematicModel::load_config(ss);
  CHECK(loaded.limit_lo[5] == -123.0);
  CHECK(loaded.rest_angles[5] == -30.0);
  CHECK(loaded.digits[1].lengths == Eigen::Vector3d(51, 29, 23));

  std::stringstream bad("dof.NOPE.limits = 1 2\n");
  REQUIRE_THROWS_AS(kin::KinematicModel::load_config(bad), ConfigError);
}

TEST_CASE("calibration from a rest frame reproduces segment lengths") {
  auto m = kin::KinematicModel::standard();
  kin::JointAngles rest;
  rest.values = m.rest_angles;
  auto frame = kin::forward_kinematics(m, rest);

  auto scaled = m;
  for (auto& d : scaled.digits) d.lengths *= 1.21;  // wrong priors
  scaled.calibrate_from_rest_frame(frame);
  for (int d = 0; d < kin::kNumDigits; ++d)
    CHECK((scaled.digits[d].lengths - m.digits[d].lengths).norm() < 1e-9);
}
