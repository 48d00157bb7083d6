#pragma once

#include <Eigen/Dense>

#include "rpcnet/signal/emg.hpp"
#include "rpcnet/signal/motion.hpp"

namespace rpcnet::sig {

/// Input windowing: the estimate at sample t consumes the preceding
/// `history` samples, EMG strided by 4 (81.92 -> 20.48 Hz) and angles
/// strided by 8 (-> 10.24 Hz). Defaults give 16 EMG samples and 8 angle
/// samples, I_E = 16 * channels and I_A = 8 * 24.
struct WindowSpec {
  int history = 64;     // samples preceding the target
  int emg_stride = 4;
  int angle_stride = 8;

  int emg_samples() const { return history / emg_stride; }
  int angle_samples() const { return history / angle_stride; }
  int emg_input_size(int channels) const { return emg_samples() * channels; }
  int angle_input_size(int joints = 24) const { return angle_samples() * joints; }
  /// Usable windows for a signal of length l: targets t = history .. l-1.
  long window_count(long l) const { return l - history; }
};

/// Flattens EMG samples {t-64, t-60, ..., t-4} (oldest first, channel-minor)
/// into `out` (size emg_input_size).
template <class Derived, class Scalar>
void gather_emg_window(const Eigen::MatrixBase<Derived>& envelope, long t,
                       const WindowSpec& w, Scalar* out) {
  const int c = static_cast<int>(envelope.rows());
  long k = 0;
  for (int s = 0; s < w.emg_samples(); ++s) {
    const long col = t - w.history + static_cast<long>(s) * w.emg_stride;
    for (int ch = 0; ch < c; ++ch) out[k++] = static_cast<Scalar>(envelope(ch, col));
  }
}

/// Flattens angle samples {t-64, t-56, ..., t-8} (oldest first, joint-minor).
template <class Derived, class Scalar>
void gather_angle_window(const Eigen::MatrixBase<Derived>& angles, long t,
                         const WindowSpec& w, Scalar* out) {
  const int j = static_cast<int>(angles.rows());
  long k = 0;
  for (int s = 0; s < w.angle_samples(); ++s) {
    const long col = t - w.history + static_cast<long>(s) * w.angle_stride;
    for (int jj = 0; jj < j; ++jj) out[k++] = static_cast<Scalar>(angles(jj, col));
  }
}

/// One materialized training example (mostly for tests; training gathers
/// batches in place).
struct TrainingWindow {
  Eigen::VectorXf emg_input;    // I_E
  Eigen::VectorXf angle_input;  // I_A
  Eigen::VectorXf target;       // 24
  long t = 0;
};

/// Materializes every usable (emg, angle-history, target) triple of a trial.
inline std::vector<TrainingWindow> make_training_windows(const ProcessedEmg& emg,
                                                         const ProcessedAngles& angles,
                                                         const WindowSpec& w = {}) {
  if (emg.length() != angles.length())
    throw ContractError("make_training_windows: unaligned streams");
  const long l = emg.length();
  std::vector<TrainingWindow> out;
  if (l <= w.history) return out;
  out.reserve(l - w.history);
  const int c = static_cast<int>(emg.envelope.rows());
  for (long t = w.history; t < l; ++t) {
    TrainingWindow tw;
    tw.t = t;
    tw.emg_input.resize(w.emg_input_size(c));
    tw.angle_input.resize(w.angle_input_size());
    gather_emg_window(emg.envelope, t, w, tw.emg_input.data());
    gather_angle_window(angles.trajectories, t, w, tw.angle_input.data());
    tw.target = angles.trajectories.col(t);
    out.push_back(std::move(tw));
  }
  return out;
}

}  // namespace rpcnet::sig
