#include <catch2/catch_amalgamated.hpp>

#include "rpcnet/metrics/bench.hpp"
#include "rpcnet/metrics/scores.hpp"
#include "rpcnet/net/network.hpp"

using namespace rpcnet;
using Catch::Approx;

TEST_CASE("Pearson correlation") {
  Eigen::VectorXd a(4), b(4);
  a << 1, 2, 3, 4;

  SECTION("b == a gives 1, b == -a gives -1") {
    CHECK(stats::pcc(a, a) == Approx(1.0).margin(1e-12));
    Eigen::VectorXd na = -a;
    CHECK(stats::pcc(a, na) == Approx(-1.0).margin(1e-12));
  }
  SECTION("hand-evaluated covariance formula") {
    b << 1, 2, 3, 5;
    CHECK(stats::pcc(a, b) == Approx(0.9827076298239907).margin(1e-12));
  }
  SECTION("zero variance is an error, never a silent zero") {
    b.setConstant(2.0);
    REQUIRE_THROWS_AS(stats::pcc(a, b), DegenerateTestError);
  }
}

TEST_CASE("fingertip and marker distances") {
  auto model = kin::KinematicModel::standard();
  kin::JointAngles rest;
  rest.values = model.rest_angles;
  auto actual = kin::forward_kinematics(model, rest);

  SECTION("estimate == actual gives 0") {
    CHECK(stats::wfd(actual, actual) == 0.0);
    CHECK(stats::umd(actual, actual) == 0.0);
  }

  SECTION("uniform 3 mm offset gives exactly 3 mm for both indicators") {
    auto est = actual;
    for (auto& m : est.markers) m += Eigen::Vector3d(3, 0, 0);
    CHECK(stats::wfd(actual, est) == Approx(3.0).margin(1e-12));
    CHECK(stats::umd(actual, est) == Approx(3.0).margin(1e-12));
  }

  SECTION("index 3, middle 4, thumb 5 mm offsets average to 4 mm") {
    auto est = actual;
    est.markers[kin::kIndexTip] += Eigen::Vector3d(0, 3, 0);
    est.markers[kin::kMiddleTip] += Eigen::Vector3d(4, 0, 0);
    est.markers[kin::kThumbTip] += Eigen::Vector3d(0, 0, 5);
    CHECK(stats::wfd(actual, est) == Approx(4.0).margin(1e-12));
  }

  SECTION("missing tip marker raises") {
    auto est = actual;
    est.set_valid(kin::kIndexTip, false);
    REQUIRE_THROWS_AS(stats::wfd(actual, est), InputError);
  }
}

TEST_CASE("trial scoring") {
  auto model = kin::KinematicModel::standard();
  const int n = 50;
  Eigen::MatrixXd angles(kin::kNumDofs, n);
  std::vector<kin::HandPose3D> poses(n);
  net::Rng rng(4);
  for (int i = 0; i < n; ++i) {
    kin::JointAngles a;
    for (int j = 0; j < kin::kNumDofs; ++j)
      a.values[j] = model.rest_angles[j] +
                    10.0 * std::sin(0.3 * i + j) + rng.uniform(-0.5, 0.5);
    angles.col(i) = a.values;
    poses[i] = kin::forward_kinematics(model, a);
  }

  SECTION("perfect estimate: MPCC = 1, MD = 0") {
    auto s = stats::score_trial(angles, angles, poses, poses);
    CHECK(s.mpcc == Approx(1.0).margin(1e-9));
    CHECK(s.md == 0.0);
    CHECK(s.umd_mean == 0.0);
    CHECK(s.excluded_samples == 0);
  }

  SECTION("MPCC is the arithmetic mean of the per-joint PCCs") {
    Eigen::MatrixXd est = angles;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < kin::kNumDofs; ++j)
        est(j, i) += 3.0 * std::sin(0.7 * i + 2 * j);
    auto s = stats::score_trial(angles, est, poses, poses);
    CHECK(s.mpcc == Approx(s.pcc_per_joint.mean()).margin(1e-12));
    CHECK(s.wfd_summary.t1 <= s.wfd_summary.median + 1e-12);
    CHECK(s.wfd_summary.median <= s.wfd_summary.t2 + 1e-12);
  }

  SECTION("scores are invariant under a consistent joint reordering") {
    Eigen::MatrixXd est = angles;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < kin::kNumDofs; ++j) est(j, i) += 0.2 * ((j % 3) - 1) * i;
    auto s1 = stats::score_trial(angles, est, poses, poses);
    // reverse the joint order in both inputs
    Eigen::MatrixXd ra = angles.colwise().reverse(), re = est.colwise().reverse();
    auto s2 = stats::score_trial(ra, re, poses, poses);
    CHECK(s1.mpcc == Approx(s2.mpcc).margin(1e-12));
    CHECK(s1.md == Approx(s2.md).margin(1e-12));
  }

  SECTION("frames with missing tips are excluded and counted") {
    auto poses2 = poses;
    poses2[7].set_valid(kin::kMiddleTip, false);
    poses2[19].set_valid(kin::kThumbTip, false);
    auto s = stats::score_trial(angles, angles, poses, poses2);
    CHECK(s.excluded_samples == 2);
    CHECK(s.wfd_series.size() == static_cast<size_t>(n - 2));
  }
}

TEST_CASE("summaries use interpolated empirical quantiles") {
  std::vector<double> v = {1, 2, 3, 4};
  CHECK(stats::quantile(v, 0.5) == Approx(2.5));
  CHECK(stats::quantile(v, 1.0 / 3.0) == Approx(2.0));
  CHECK(stats::quantile(v, 0.0) == 1.0);
  CHECK(stats::quantile(v, 1.0) == 4.0);
  auto s = stats::summarize(v);
  CHECK(s.mean == Approx(2.5));
  CHECK(s.t1 <= s.median);
  CHECK(s.median <= s.t2);
}

TEST_CASE("reference results table carries the published S0 row") {
  const auto& rows = stats::reference_results();
  REQUIRE(rows.size() == 12);
  CHECK(rows[0].subject == std::string("S0"));
  CHECK(rows[0].md == 24.1);
  CHECK(rows[0].mpcc == 80.4);
  CHECK(rows[10].md == 42.0);  // S10
}

TEST_CASE("inference timing report smoke") {
  auto cfg = net::make_variant({}, {"full", 0.1, "", "C1"});
  auto model = net::RpcNet<float>::random(cfg, 3);
  auto r = stats::measure_inference_time(model, 50);
  CHECK(r.iterations == 50);
  CHECK(r.mean_ms > 0.0);
  CHECK(r.std_ms >= 0.0);
  CHECK_FALSE(r.hardware.empty());
}
