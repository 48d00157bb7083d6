#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rpcnet/common.hpp"

namespace rpcnet::sig {

inline constexpr int kEmgChannels = 96;  // 6 rows x 16 columns
inline constexpr int kGridRows = 6;
inline constexpr int kGridCols = 16;

/// Acquisition and post-processing constants. The defaults are the recording
/// parameters of the dataset (2048 Hz, 192 V/V, 16 bit over 2.4 V, RMS over
/// 200-sample windows stepped by 25) and must only be changed explicitly.
struct PipelineParams {
  double fs_hz = 2048.0;
  double gain = 192.0;
  double dynamic_range_v = 2.4;
  int window_len = 200;   // samples, 97.7 ms
  int window_step = 25;   // samples -> 81.92 Hz output
  double norm_mv = 5.0;   // rectified signal divided by 5 mV
  int moving_avg_order = 20;
  double marker_rate_hz = 100.0;
  double angle_offset_deg = 150.0;
  double angle_scale_deg = 240.0;

  double processed_rate_hz() const { return fs_hz / window_step; }
  /// Closed-form post-processing output length for n input samples.
  long output_length(long n_samples) const {
    return (n_samples - window_len) / window_step + 1;
  }
  /// Envelope sample i is stamped at the causal end of its RMS window.
  double envelope_timestamp(long i) const {
    return (static_cast<double>(i) * window_step + window_len) / fs_hz;
  }
};

/// Raw multi-channel EMG: 16-bit ADC codes, one column per time instant.
struct RawEmgRecording {
  Eigen::Matrix<int16_t, Eigen::Dynamic, Eigen::Dynamic> samples;  // channels x n
  PipelineParams params;

  int channels() const { return static_cast<int>(samples.rows()); }
  long length() const { return samples.cols(); }
  double duration_s() const { return length() / params.fs_hz; }
};

/// RMS envelope at fs/ws = 81.92 Hz, nominally in [0, 1].
struct ProcessedEmg {
  Eigen::MatrixXf envelope;  // channels x l
  PipelineParams params;
  long over_unity = 0;  // envelope samples above 1 (kept, not clamped)

  long length() const { return envelope.cols(); }
  std::vector<double> timestamps() const {
    std::vector<double> t(envelope.cols());
    for (long i = 0; i < envelope.cols(); ++i) t[i] = params.envelope_timestamp(i);
    return t;
  }
};

/// EMG post-processing: bit->volt, per-channel offset removal, rectification,
/// division by 5 mV, sliding RMS. Output length obeys
/// l = floor((L*fs - w_l)/w_s) + 1. Values above 1 are kept and counted.
inline ProcessedEmg emg_postprocess(const RawEmgRecording& raw) {
  const auto& p = raw.params;
  const int c = raw.channels();
  const long n = raw.length();
  if (n < p.window_len)
    throw InputError("emg_postprocess: recording shorter than one RMS window");

  const double lsb = p.dynamic_range_v / 65536.0 / p.gain;  // volts per code

  // per-channel mean in volts
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(c);
  for (long i = 0; i < n; ++i) mean += raw.samples.col(i).cast<double>();
  mean *= lsb / static_cast<double>(n);

  // rectified, normalized signal
  Eigen::MatrixXf x(c, n);
  const double inv_norm = 1.0 / (p.norm_mv * 1e-3);
  for (long i = 0; i < n; ++i)
    x.col(i) = ((raw.samples.col(i).cast<double>() * lsb - mean).cwiseAbs() * inv_norm)
                   .cast<float>();

  const long l = p.output_length(n);
  ProcessedEmg out;
  out.params = p;
  out.envelope.resize(c, l);
  Eigen::VectorXd sumsq(c);
  for (long i = 0; i < l; ++i) {
    sumsq.setZero();
    const long start = i * p.window_step;
    for (long k = start; k < start + p.window_len; ++k) {
      Eigen::VectorXd v = x.col(k).cast<double>();
      sumsq += v.cwiseProduct(v);
    }
    out.envelope.col(i) = (sumsq / p.window_len).cwiseSqrt().cast<float>();
  }
  out.over_unity = (out.envelope.array() > 1.0f).count();
  return out;
}

}  // namespace rpcnet::sig
