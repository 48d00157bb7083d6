#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "rpcnet/kinematics/forward.hpp"
#include "rpcnet/metrics/quantiles.hpp"

namespace rpcnet::stats {

/// Pearson product-moment correlation. Zero variance is an error, never a
/// silent zero.
inline double pcc(Eigen::Ref<const Eigen::VectorXd> a, Eigen::Ref<const Eigen::VectorXd> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ContractError("pcc: need two equal-length series of length >= 2");
  const double ma = a.mean(), mb = b.mean();
  const Eigen::ArrayXd da = a.array() - ma, db = b.array() - mb;
  const double va = (da * da).sum(), vb = (db * db).sum();
  if (va <= 0 || vb <= 0)
    throw DegenerateTestError("pcc: zero variance, correlation undefined");
  return (da * db).sum() / std::sqrt(va * vb);
}

/// Weighted fingertip distance of one frame: mean of the index, middle and
/// thumb tip-to-tip distances (mm).
inline double wfd(const kin::HandPose3D& actual, const kin::HandPose3D& estimated) {
  double acc = 0;
  for (int m : kin::kFingertipMarkers) {
    if (!actual.valid(m) || !estimated.valid(m))
      throw InputError("wfd: missing fingertip marker");
    acc += (actual.markers[m] - estimated.markers[m]).norm();
  }
  return acc / 3.0;
}

/// Unweighted marker distance: mean over all 21 hand markers (mm).
inline double umd(const kin::HandPose3D& actual, const kin::HandPose3D& estimated) {
  double acc = 0;
  int n = 0;
  for (int m = kin::kFirstHandMarker; m < kin::kNumMarkers; ++m) {
    if (!actual.valid(m) || !estimated.valid(m))
      throw InputError("umd: missing hand marker");
    acc += (actual.markers[m] - estimated.markers[m]).norm();
    ++n;
  }
  return acc / n;
}

/// All per-trial indicators: per-joint PCCs with their mean (MPCC), the WFD
/// series with its mean (MD) and the all-marker UMD series, each summarized
/// by tertiles and median.
struct TrialScores {
  Eigen::Array<double, Eigen::Dynamic, 1> pcc_per_joint;
  double mpcc = 0;
  IndicatorSummary pcc_summary;
  std::vector<double> wfd_series;
  double md = 0;
  IndicatorSummary wfd_summary;
  std::vector<double> umd_series;
  double umd_mean = 0;
  IndicatorSummary umd_summary;
  long excluded_samples = 0;  // frames skipped for missing tip markers
};

inline TrialScores score_trial(const Eigen::MatrixXd& actual_angles,
                               const Eigen::MatrixXd& estimated_angles,
                               const std::vector<kin::HandPose3D>& actual_poses,
                               const std::vector<kin::HandPose3D>& estimated_poses) {
  if (actual_angles.rows() != estimated_angles.rows() ||
      actual_angles.cols() != estimated_angles.cols())
    throw ContractError("score_trial: angle series shape mismatch");
  if (actual_poses.size() != estimated_poses.size())
    throw ContractError("score_trial: pose series length mismatch");

  TrialScores s;
  const int joints = static_cast<int>(actual_angles.rows());
  s.pcc_per_joint.resize(joints);
  for (int j = 0; j < joints; ++j)
    s.pcc_per_joint[j] = pcc(actual_angles.row(j).transpose(),
                             estimated_angles.row(j).transpose());
  s.mpcc = s.pcc_per_joint.mean();
  std::vector<double> pccs(s.pcc_per_joint.data(), s.pcc_per_joint.data() + joints);
  s.pcc_summary = summarize(pccs);

  s.wfd_series.reserve(actual_poses.size());
  s.umd_series.reserve(actual_poses.size());
  for (size_t i = 0; i < actual_poses.size(); ++i) {
    bool tips_ok = true;
    for (int m : kin::kFingertipMarkers)
      tips_ok = tips_ok && actual_poses[i].valid(m) && estimated_poses[i].valid(m);
    if (!tips_ok) {
      ++s.excluded_samples;
      continue;
    }
    s.wfd_series.push_back(wfd(actual_poses[i], estimated_poses[i]));
    s.umd_series.push_back(umd(actual_poses[i], estimated_poses[i]));
  }
  if (s.wfd_series.empty())
    throw DegenerateTestError("score_trial: no usable frames for WFD");
  s.wfd_summary = summarize(s.wfd_series);
  s.md = s.wfd_summary.mean;
  s.umd_summary = summarize(s.umd_series);
  s.umd_mean = s.umd_summary.mean;
  return s;
}

/// Reference per-subject results of the original recordings (MD in mm with
/// tertiles/median, MPCC in % with tertiles/median); used by the optional
/// dataset-replication tier.
struct ReferenceRow {
  const char* subject;
  double md, md_t1, md_t2, md_med;
  double mpcc, mpcc_t1, mpcc_t2, mpcc_med;
};

inline const std::vector<ReferenceRow>& reference_results() {
  static const std::vector<ReferenceRow> rows = {
      {"S0", 24.1, 18.9, 21.9, 25.3, 80.4, 77.8, 82.2, 87.0},
      {"S1", 23.0, 17.5, 21.5, 26.0, 81.8, 79.8, 86.8, 90.1},
      {"S2", 32.3, 25.2, 30.3, 35.3, 76.3, 69.0, 83.2, 87.3},
      {"S3", 33.5, 23.6, 28.6, 36.7, 77.6, 71.2, 83.3, 87.2},
      {"S4", 32.4, 22.6, 28.0, 33.6, 75.7, 73.6, 77.1, 82.0},
      {"S5", 28.5, 20.4, 25.4, 31.8, 83.0, 78.7, 85.7, 89.7},
      {"S6", 30.2, 22.2, 26.3, 32.7, 78.8, 74.6, 81.6, 85.3},
      {"S7", 26.2, 19.6, 23.6, 29.1, 79.5, 75.7, 83.0, 86.0},
      {"S8", 26.7, 19.3, 23.9, 29.4, 66.0, 66.5, 71.6, 77.8},
      {"S9", 27.3, 17.5, 21.2, 26.2, 76.9, 74.7, 79.3, 85.4},
      {"S10", 42.0, 26.1, 33.5, 43.7, 77.8, 79.6, 83.9, 86.7},
      {"S11", 29.9, 21.8, 27.5, 33.7, 79.3, 81.3, 84.5, 87.0},
  };
  return rows;
}

}  // namespace rpcnet::stats
