#pragma once

#include <omp.h>

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "rpcnet/io/container.hpp"
#include "rpcnet/kinematics/forward.hpp"
#include "rpcnet/net/network.hpp"
#include "rpcnet/signal/filters.hpp"

namespace rpcnet::io {

/// Synthetic trial generator. Joint trajectories follow a prompted-pose
/// schedule (isolated wrist / finger / thumb pose classes with smooth
/// transitions, plus small band-limited jitter so every DoF carries
/// variance); the EMG is synthesized from antagonist muscle drives (rectified
/// position and velocity excursions) mixed through a sparse nonnegative
/// matrix onto 96 noise carriers.
struct SyntheticSpec {
  double duration_s = 450.0;
  uint64_t seed = 0;
  double smoothness_hz = 0.8;       // jitter low-pass cutoff
  double noise_level = 0.2;         // additive EMG noise, fraction of signal RMS
  double pose_period_s = 8.0;
  double transition_s = 1.5;
  double excursion_min_deg = 30.0;
  double excursion_max_deg = 60.0;
  double jitter_deg = 3.0;
  double velocity_gain = 0.2;
  double mix_scale = 0.35;          // mean summed drive weight per channel
  double base_activation = 0.05;
  double marker_noise_mm = 0.0;

  void validate() const {
    if (duration_s < 2.0) throw ConfigError("SyntheticSpec: duration must be >= 2 s");
    if (noise_level < 0 || mix_scale <= 0 || smoothness_hz <= 0)
      throw ConfigError("SyntheticSpec: invalid parameter");
  }
};

namespace detail {

struct PoseComponent {
  int dof;
  double weight;  // signed fraction of the drawn excursion
};

/// 18 prompted pose classes; together (with the jitter) they exercise all
/// 24 DoFs of the model.
inline const std::vector<std::vector<PoseComponent>>& pose_classes() {
  static const std::vector<std::vector<PoseComponent>> classes = {
      {{1, -1.0}},                                          // wrist flexion
      {{1, +1.0}},                                          // wrist extension
      {{2, -1.0}},                                          // wrist adduction
      {{2, +1.0}},                                          // wrist abduction
      {{0, -1.0}},                                          // pronation
      {{0, +1.0}},                                          // supination
      {{3, -1.0}},                                          // index MP flexion
      {{3, +0.7}},                                          // index MP extension
      {{5, -1.0}, {6, -0.6}},                               // index PIP flexion
      {{5, +0.15}, {6, +0.1}},                              // index PIP extension
      {{7, -1.0}, {9, -0.8}, {10, -0.5}, {11, -1.0}, {13, -0.8}, {14, -0.5},
       {15, -1.0}, {17, -0.8}, {18, -0.5}},                 // MRL flexion
      {{7, +0.6}, {9, +0.15}, {10, +0.1}, {11, +0.6}, {13, +0.15}, {14, +0.1},
       {15, +0.6}, {17, +0.15}, {18, +0.1}},                // MRL extension
      {{4, -0.5}, {8, +0.5}, {12, +0.3}, {16, +0.3}},       // index/middle adduction
      {{4, +0.5}, {8, -0.5}, {12, -0.3}, {16, -0.3}},       // index/middle abduction
      {{19, -1.0}, {21, -0.8}, {23, -0.6}},                 // thumb flexion
      {{19, +0.8}, {21, +0.4}, {23, +0.4}},                 // thumb extension
      {{20, -0.8}, {22, -0.6}},                             // thumb adduction
      {{20, +0.8}, {22, +0.6}},                             // thumb abduction
  };
  return classes;
}

inline double smoothstep(double x) { return x * x * (3.0 - 2.0 * x); }

}  // namespace detail

/// Smooth random 24-joint trajectories at the marker rate, inside the joint
/// limits and within +-60 degrees of rest.
inline Eigen::MatrixXd synthesize_trajectory(const SyntheticSpec& spec,
                                             const kin::KinematicModel& model,
                                             net::Rng& rng) {
  const double rate = 100.0;
  const long n = static_cast<long>(std::llround(spec.duration_s * rate));
  const int j = kin::kNumDofs;
  Eigen::MatrixXd theta(j, n);
  theta.colwise() = model.rest_angles;

  const auto& classes = detail::pose_classes();
  const double lead = 3.0;
  const long n_poses =
      std::max<long>(0, static_cast<long>((spec.duration_s - lead - spec.pose_period_s) /
                                          spec.pose_period_s) + 1);
  // shuffled tiling of the pose classes so each is visited evenly
  std::vector<int> schedule(n_poses);
  for (long k = 0; k < n_poses; ++k) schedule[k] = static_cast<int>(k % classes.size());
  for (long i = n_poses; i > 1; --i)
    std::swap(schedule[i - 1], schedule[rng.below(static_cast<uint64_t>(i))]);

  kin::AngleVec current = model.rest_angles;
  for (long k = 0; k < n_poses; ++k) {
    kin::AngleVec target = model.rest_angles;
    const double exc = rng.uniform(spec.excursion_min_deg, spec.excursion_max_deg);
    for (const auto& comp : classes[schedule[k]]) {
      const int d = comp.dof;
      double v = model.rest_angles[d] + comp.weight * exc;
      v = std::clamp(v, std::max(model.limit_lo[d], model.rest_angles[d] - 60.0),
                     std::min(model.limit_hi[d], model.rest_angles[d] + 60.0));
      target[d] = v;
    }
    const long i0 = static_cast<long>((lead + k * spec.pose_period_s) * rate);
    const long i1 = std::min<long>(i0 + static_cast<long>(spec.transition_s * rate), n);
    for (long i = i0; i < i1; ++i) {
      const double s = detail::smoothstep(static_cast<double>(i - i0) /
                                          static_cast<double>(i1 - i0));
      theta.col(i) = current * (1.0 - s) + target * s;
    }
    for (long i = i1; i < n; ++i) theta.col(i) = target;
    current = target;
  }

  // band-limited jitter keeps every DoF informative
  if (spec.jitter_deg > 0) {
    Eigen::MatrixXf noise(j, n);
    for (int d = 0; d < j; ++d) {
      net::Rng nr = net::Rng::stream(rng.next_u64(), static_cast<uint64_t>(d));
      for (long i = 0; i < n; ++i)
        noise(d, i) = static_cast<float>(nr.uniform(-1.0, 1.0));
    }
    sig::ButterworthLowpass lp(2, spec.smoothness_hz, rate);
    Eigen::MatrixXf filtered = lp.filter(noise);
    // normalize the filtered noise to the requested jitter amplitude
    const double measured = std::sqrt(filtered.array().square().mean());
    if (measured > 0)
      theta += (filtered.cast<double>() * (spec.jitter_deg / measured));
    for (int d = 0; d < j; ++d)
      for (long i = 0; i < n; ++i)
        theta(d, i) = std::clamp(theta(d, i),
                                 std::max(model.limit_lo[d], model.rest_angles[d] - 60.0),
                                 std::min(model.limit_hi[d], model.rest_angles[d] + 60.0));
  }
  return theta;
}

/// Generates one full trial: trajectory -> markers via the FKA at 100 Hz,
/// EMG at 2048 Hz from mixed antagonist drives. Deterministic given the seed.
inline TrialRecord generate_synthetic_trial(const SyntheticSpec& spec,
                                            const kin::KinematicModel& model,
                                            const std::string& subject_id = "SYN",
                                            const std::string& trial_id = "T0",
                                            TrialRole role = TrialRole::Train) {
  spec.validate();
  net::Rng rng = net::Rng::stream(spec.seed, 0x5eedull);

  const double mrate = 100.0;
  Eigen::MatrixXd theta = synthesize_trajectory(spec, model, rng);
  const long nf = theta.cols();

  TrialRecord t;
  t.subject_id = subject_id;
  t.trial_id = trial_id;
  t.role = role;
  t.prompt_period_s = spec.pose_period_s;
  t.prompt_count = static_cast<int>((spec.duration_s - 3.0) / spec.pose_period_s);

  // markers
  t.markers.resize(nf);
  net::Rng mark_rng = net::Rng::stream(spec.seed, 0xa11ull);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < nf; ++i) {
    kin::JointAngles a;
    a.values = theta.col(i);
    a.timestamp = i / mrate;
    t.markers[i] = kin::forward_kinematics(model, a);
  }
  if (spec.marker_noise_mm > 0) {
    for (long i = 0; i < nf; ++i)
      for (auto& m : t.markers[i].markers)
        for (int k = 0; k < 3; ++k) {
          const double u1 = std::max(mark_rng.uniform(), 1e-12), u2 = mark_rng.uniform();
          m[k] += spec.marker_noise_mm * std::sqrt(-2.0 * std::log(u1)) *
                  std::cos(2.0 * M_PI * u2);
        }
  }

  // antagonist drives at the marker rate: rectified position and velocity
  const int nd = 2 * kin::kNumDofs;
  Eigen::MatrixXd drives(nd, nf);
  for (long i = 0; i < nf; ++i) {
    for (int d = 0; d < kin::kNumDofs; ++d) {
      const double u = (theta(d, i) - model.rest_angles[d]) / 60.0;
      const long ip = std::max<long>(i - 1, 0), in_ = std::min<long>(i + 1, nf - 1);
      const double vel = (theta(d, in_) - theta(d, ip)) * mrate /
                         (static_cast<double>(in_ - ip)) / 120.0;
      drives(2 * d, i) = std::max(u, 0.0) + spec.velocity_gain * std::max(vel, 0.0);
      drives(2 * d + 1, i) = std::max(-u, 0.0) + spec.velocity_gain * std::max(-vel, 0.0);
    }
  }

  // sparse nonnegative mixing onto the 96 channels
  Eigen::MatrixXd mix = Eigen::MatrixXd::Zero(sig::kEmgChannels, nd);
  net::Rng mix_rng = net::Rng::stream(spec.seed, 0x312bull);
  for (int c = 0; c < sig::kEmgChannels; ++c) {
    const int k = 1 + static_cast<int>(mix_rng.below(3));
    for (int q = 0; q < k; ++q)
      mix(c, mix_rng.below(static_cast<uint64_t>(nd))) = mix_rng.uniform(0.2, 1.0);
  }
  mix *= spec.mix_scale / (mix.sum() / sig::kEmgChannels);

  Eigen::MatrixXd activation = mix * drives;  // channels x nf
  activation.array() += spec.base_activation;
  const double signal_rms = std::sqrt(activation.array().square().mean());
  const double eta = spec.noise_level * signal_rms;

  // EMG carrier synthesis at the full rate; a_c(t) * w + eta * xi is
  // distributionally identical to sqrt(a_c^2 + eta^2) * w for independent
  // gaussians, which halves the random draws
  const auto& p = t.emg.params;
  const long ns = static_cast<long>(std::llround(spec.duration_s * p.fs_hz));
  t.emg.samples.resize(sig::kEmgChannels, ns);
  const double volts_to_code = p.gain * 65536.0 / p.dynamic_range_v;
  const double amp_v = p.norm_mv * 1e-3;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < sig::kEmgChannels; ++c) {
    net::Rng crng = net::Rng::stream(spec.seed, 0xe000ull + static_cast<uint64_t>(c));
    for (long i = 0; i < ns; ++i) {
      const double tf = static_cast<double>(i) / p.fs_hz * mrate;
      const long f0 = std::min<long>(static_cast<long>(tf), nf - 1);
      const long f1 = std::min<long>(f0 + 1, nf - 1);
      const double w = tf - static_cast<double>(f0);
      const double a = activation(c, f0) * (1.0 - w) + activation(c, f1) * w;
      const double u1 = std::max(crng.uniform(), 1e-12), u2 = crng.uniform();
      const double gauss = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      const double v = amp_v * std::sqrt(a * a + eta * eta) * gauss;
      const double code = std::round(v * volts_to_code);
      t.emg.samples(c, i) =
          static_cast<int16_t>(std::clamp(code, -32768.0, 32767.0));
    }
  }
  t.validate();
  return t;
}

}  // namespace rpcnet::io
