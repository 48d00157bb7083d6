#pragma once

#include <omp.h>

#include <Eigen/Dense>
#include <algorithm>
#include <iomanip>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "rpcnet/experiment/plan.hpp"
#include "rpcnet/io/container.hpp"
#include "rpcnet/metrics/scores.hpp"
#include "rpcnet/metrics/stats.hpp"
#include "rpcnet/net/checkpoint.hpp"
#include "rpcnet/net/infer.hpp"
#include "rpcnet/net/train.hpp"
#include "rpcnet/signal/motion.hpp"
#include "rpcnet/signal/windows.hpp"

namespace rpcnet::plan {

/// A trial after post-processing: the two aligned network streams plus the
/// recorded marker positions resampled onto the envelope timestamps (the
/// reference for the distance indicators).
struct ProcessedTrial {
  std::string subject_id, trial_id;
  io::TrialRole role = io::TrialRole::Train;
  sig::ProcessedEmg emg;
  sig::ProcessedAngles angles;
  std::vector<kin::HandPose3D> poses;
};

namespace detail {

inline std::vector<kin::HandPose3D> resample_poses(const std::vector<kin::HandPose3D>& frames,
                                                   const std::vector<double>& t_dst,
                                                   double rate_hz) {
  Eigen::MatrixXf coords(3 * kin::kNumMarkers, static_cast<int>(frames.size()));
  for (size_t i = 0; i < frames.size(); ++i)
    for (int m = 0; m < kin::kNumMarkers; ++m)
      coords.block<3, 1>(3 * m, static_cast<int>(i)) = frames[i].markers[m].cast<float>();
  std::vector<double> t_src(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) t_src[i] = static_cast<double>(i) / rate_hz;
  Eigen::MatrixXf res = sig::linear_resample(coords, t_src, t_dst);

  std::vector<kin::HandPose3D> out(t_dst.size());
  for (size_t i = 0; i < t_dst.size(); ++i) {
    out[i].timestamp = t_dst[i];
    // a marker survives resampling only if valid in both bracketing frames
    const double ft = t_dst[i] * rate_hz;
    const size_t f0 = std::min(frames.size() - 1, static_cast<size_t>(std::max(0.0, ft)));
    const size_t f1 = std::min(frames.size() - 1, f0 + 1);
    for (int m = 0; m < kin::kNumMarkers; ++m) {
      out[i].markers[m] = res.block<3, 1>(3 * m, static_cast<int>(i)).cast<double>();
      out[i].set_valid(m, frames[f0].valid(m) && frames[f1].valid(m));
    }
  }
  return out;
}

}  // namespace detail

/// Full per-trial post-processing chain.
inline ProcessedTrial preprocess_trial(const io::TrialRecord& trial,
                                       const kin::KinematicModel& model,
                                       const kin::SolverOptions& solver = {}) {
  trial.validate();
  ProcessedTrial out;
  out.subject_id = trial.subject_id;
  out.trial_id = trial.trial_id;
  out.role = trial.role;
  out.emg = sig::emg_postprocess(trial.emg);
  out.angles = sig::position_postprocess(trial.markers, model, out.emg.length(),
                                         trial.emg.params, solver);
  out.poses = detail::resample_poses(trial.markers, out.emg.timestamps(),
                                     trial.emg.params.marker_rate_hz);
  return out;
}

/// Model calibrated from the first frame of a subject's first training trial
/// (the protocol starts at rest in the reference orientation).
inline kin::KinematicModel calibrated_model(const kin::KinematicModel& base,
                                            const io::TrialRecord& first_trial) {
  kin::KinematicModel m = base;
  if (!first_trial.markers.empty())
    m.calibrate_from_rest_frame(first_trial.markers.front());
  return m;
}

struct EvaluationResult {
  stats::TrialScores scores;
  double rest_baseline_md = 0;  // MD of the constant-rest-pose estimator
  long samples = 0;
};

/// Scores one trained model on a test trial: closed-loop inference, output
/// filtering, FKA projection, then every indicator against the recorded
/// reference. The first `history` samples of the session are excluded.
template <typename S>
EvaluationResult evaluate_net(const net::RpcNet<S>& model_net, const ProcessedTrial& test,
                              const kin::KinematicModel& model,
                              const net::RecursionOptions& ropt = {}) {
  const int hist = model_net.cfg.window.history;
  Eigen::MatrixXf raw = net::infer_recursive(model_net, test.emg, ropt);
  net::ProjectedTrajectory proj = net::smooth_and_project(raw, model, test.emg.params);

  const long n = raw.cols();
  Eigen::MatrixXd actual_deg = sig::denormalize_angles(
      test.angles.trajectories.middleCols(hist, n), model.rest_angles, test.emg.params);

  std::vector<kin::HandPose3D> actual_poses(test.poses.begin() + hist,
                                            test.poses.begin() + hist + n);
  EvaluationResult r;
  r.samples = n;
  r.scores = stats::score_trial(actual_deg, proj.angles_deg, actual_poses, proj.poses);

  kin::JointAngles rest;
  rest.values = model.rest_angles;
  const kin::HandPose3D rest_pose = kin::forward_kinematics(model, rest);
  double acc = 0;
  for (const auto& p : actual_poses) acc += stats::wfd(p, rest_pose);
  r.rest_baseline_md = acc / static_cast<double>(actual_poses.size());
  return r;
}

/// Evaluation of the oracle estimator (the recorded data fed back as the
/// estimate); a plumbing check that must give MD = 0, MPCC = 1.
inline EvaluationResult evaluate_oracle(const ProcessedTrial& test,
                                        const kin::KinematicModel& model,
                                        int history = 64) {
  EvaluationResult r;
  const long n = test.angles.length() - history;
  Eigen::MatrixXd actual_deg = sig::denormalize_angles(
      test.angles.trajectories.middleCols(history, n), model.rest_angles,
      test.emg.params);
  std::vector<kin::HandPose3D> actual_poses(test.poses.begin() + history,
                                            test.poses.begin() + history + n);
  r.samples = n;
  r.scores = stats::score_trial(actual_deg, actual_deg, actual_poses, actual_poses);
  kin::JointAngles rest;
  rest.values = model.rest_angles;
  const kin::HandPose3D rest_pose = kin::forward_kinematics(model, rest);
  double acc = 0;
  for (const auto& p : actual_poses) acc += stats::wfd(p, rest_pose);
  r.rest_baseline_md = acc / static_cast<double>(actual_poses.size());
  return r;
}

/// Trains one variant on a subject's training trials with the published
/// regime (teacher forcing, 3 epochs, Adam).
template <typename S = float>
std::pair<net::RpcNet<S>, net::TrainResult> train_variant(
    const net::RpcNetConfig& cfg, const std::vector<const ProcessedTrial*>& train,
    const net::TrainingConfig& tcfg) {
  net::RpcNet<S> model_net = net::RpcNet<S>::random(cfg, tcfg.seed);
  std::vector<net::TrialView> views;
  views.reserve(train.size());
  for (const auto* t : train)
    views.push_back({&t->emg.envelope, &t->angles.trajectories});
  net::TrainResult tr = net::train(model_net, views, tcfg);
  return {std::move(model_net), std::move(tr)};
}

/// Seeded-random test-trial selection (recorded by the caller's manifest).
inline int pick_test_trial(const ExperimentPlan& p, const std::string& subject) {
  if (p.test_trial >= 0) return p.test_trial;
  net::Rng rng = net::Rng::stream(p.seed, 0x7e57ull);
  for (const auto& s : p.subjects) {
    const int pick = static_cast<int>(rng.below(static_cast<uint64_t>(p.trials_per_subject)));
    if (s == subject) return pick;
  }
  throw ConfigError("pick_test_trial: unknown subject " + subject);
}

// ---------------------------------------------------------------------------
// caption-style statistics lines

inline std::string fmt_sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(1) << v;
  return s.str();
}

inline std::string t_test_line(const std::string& indicator, const std::string& a,
                               const std::string& b, stats::Tail tail,
                               const stats::TTestResult& r) {
  std::ostringstream s;
  s << "one-sided paired t-test " << indicator << " (H0: " << a
    << (tail == stats::Tail::Less ? " >= " : " <= ") << b << "): t(" << r.dof
    << ")=" << std::fixed << std::setprecision(3) << r.t << ", p=" << fmt_sci(r.p);
  return s.str();
}

inline std::string wilcoxon_line(const std::string& indicator, const std::string& a,
                                 const std::string& b, stats::Tail tail,
                                 const stats::WilcoxonResult& r) {
  std::ostringstream s;
  s << "Wilcoxon signed-rank " << indicator << " (H0: median " << a
    << (tail == stats::Tail::Less ? " >= " : " <= ") << "median " << b
    << "): W=" << std::fixed << std::setprecision(1) << r.w << ", p=" << fmt_sci(r.p);
  return s.str();
}

inline std::string sign_test_line(const std::string& indicator, const std::string& a,
                                  const std::string& b, stats::Tail tail,
                                  const stats::SignTestResult& r) {
  std::ostringstream s;
  s << "sign test " << indicator << " (H0: median " << a
    << (tail == stats::Tail::Less ? " >= " : " <= ") << "median " << b
    << "): S=" << r.positive << ", p=" << fmt_sci(r.p);
  return s.str();
}

inline std::string regression_line(const std::string& indicator, const std::string& unit,
                                   const stats::RegressionResult& r) {
  std::ostringstream s;
  s << "regression " << indicator << " vs input length (H0: beta1=0): beta1="
    << std::fixed << std::setprecision(4) << r.beta1 << " " << unit
    << ", SE=" << fmt_sci(r.se) << ", t=" << fmt_sci(r.t) << ", p=" << fmt_sci(r.p)
    << ", R2=" << fmt_sci(r.r2) << ", adjR2=" << fmt_sci(r.adj_r2);
  return s.str();
}

/// Variant slug for file names and table labels.
inline std::string variant_slug(const net::VariantRequest& req) {
  std::string s = req.variant.empty() ? "full" : req.variant;
  if (req.input_length_s > 0) {
    std::ostringstream os;
    os << "_len" << std::fixed << std::setprecision(1) << req.input_length_s;
    s += os.str();
  }
  if (!req.width_code.empty()) s += "_" + req.width_code;
  if (!req.electrode_code.empty()) s += "_" + req.electrode_code;
  return s;
}

}  // namespace rpcnet::plan
