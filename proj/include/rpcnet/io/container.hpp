#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpcnet/kinematics/model.hpp"
#include "rpcnet/signal/emg.hpp"

namespace rpcnet::io {

enum class TrialRole : uint8_t { Train, Test };

inline const char* role_name(TrialRole r) { return r == TrialRole::Train ? "train" : "test"; }
inline TrialRole role_from_name(const std::string& s) {
  if (s == "train") return TrialRole::Train;
  if (s == "test") return TrialRole::Test;
  throw ConfigError("unknown trial role: " + s);
}

/// One recorded (or generated) trial: raw EMG plus the 100 Hz marker stream
/// and the acquisition metadata.
struct TrialRecord {
  std::string subject_id;
  std::string trial_id;
  TrialRole role = TrialRole::Train;
  sig::RawEmgRecording emg;
  std::vector<kin::HandPose3D> markers;  // at marker_rate_hz
  // electrode grid geometry (6 x 16, 10 mm along rows, 15 mm along columns)
  double row_pitch_mm = 10.0;
  double col_pitch_mm = 15.0;
  // pose prompt schedule
  int prompt_count = 54;
  double prompt_period_s = 8.0;

  double marker_duration_s() const {
    return markers.empty() ? 0.0
                           : static_cast<double>(markers.size()) / emg.params.marker_rate_hz;
  }

  void validate() const {
    if (emg.channels() != sig::kEmgChannels)
      throw DataFormatError("trial: expected " + std::to_string(sig::kEmgChannels) +
                            " EMG channels, got " + std::to_string(emg.channels()));
    if (markers.empty()) throw DataFormatError("trial: empty marker stream");
    const double dt = 1.0 / emg.params.marker_rate_hz;
    if (std::abs(emg.duration_s() - marker_duration_s()) > dt + 1e-9)
      throw DataFormatError("trial: EMG and marker streams cover different spans");
  }
};

// On-disk container: magic "RPCT", u32 format version, u32 JSON header
// length, JSON header, then the EMG block (int16 little-endian, channel-major
// within each time instant) and the marker block (per frame: 23 x 3 float64
// little-endian plus a u32 validity mask).
inline constexpr uint32_t kTrialFormatVersion = 1;

inline void save_trial(const TrialRecord& t, const std::string& path) {
  t.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write trial file: " + path);
  out.write("RPCT", 4);
  const uint32_t version = kTrialFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  nlohmann::json hdr = {
      {"subject", t.subject_id},
      {"trial", t.trial_id},
      {"role", role_name(t.role)},
      {"fs_hz", t.emg.params.fs_hz},
      {"gain", t.emg.params.gain},
      {"dynamic_range_v", t.emg.params.dynamic_range_v},
      {"channels", t.emg.channels()},
      {"emg_samples", t.emg.length()},
      {"marker_rate_hz", t.emg.params.marker_rate_hz},
      {"marker_frames", t.markers.size()},
      {"row_pitch_mm", t.row_pitch_mm},
      {"col_pitch_mm", t.col_pitch_mm},
      {"prompt_count", t.prompt_count},
      {"prompt_period_s", t.prompt_period_s},
  };
  const std::string hs = hdr.dump();
  const uint32_t hlen = static_cast<uint32_t>(hs.size());
  out.write(reinterpret_cast<const char*>(&hlen), 4);
  out.write(hs.data(), hlen);
  out.write(reinterpret_cast<const char*>(t.emg.samples.data()),
            static_cast<std::streamsize>(t.emg.samples.size() * sizeof(int16_t)));
  for (const auto& f : t.markers) {
    for (const auto& m : f.markers)
      out.write(reinterpret_cast<const char*>(m.data()), 3 * sizeof(double));
    out.write(reinterpret_cast<const char*>(&f.validity), sizeof(uint32_t));
  }
  if (!out) throw InputError("trial write failed: " + path);
}

inline TrialRecord load_trial(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open trial file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "RPCT")
    throw DataFormatError("corrupt trial container (bad magic): " + path);
  uint32_t version = 0, hlen = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (!in) throw DataFormatError("corrupt trial container (truncated): " + path);
  if (version > kTrialFormatVersion)
    throw DataFormatError("trial container from a future format version " +
                          std::to_string(version) + ": " + path);
  in.read(reinterpret_cast<char*>(&hlen), 4);
  if (!in) throw DataFormatError("corrupt trial container (truncated): " + path);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw DataFormatError("corrupt trial container (truncated header): " + path);
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError("corrupt trial container (header): " + std::string(e.what()));
  }

  TrialRecord t;
  t.subject_id = hdr.at("subject").get<std::string>();
  t.trial_id = hdr.at("trial").get<std::string>();
  t.role = role_from_name(hdr.at("role").get<std::string>());
  t.emg.params.fs_hz = hdr.at("fs_hz").get<double>();
  t.emg.params.gain = hdr.at("gain").get<double>();
  t.emg.params.dynamic_range_v = hdr.at("dynamic_range_v").get<double>();
  t.emg.params.marker_rate_hz = hdr.at("marker_rate_hz").get<double>();
  t.row_pitch_mm = hdr.at("row_pitch_mm").get<double>();
  t.col_pitch_mm = hdr.at("col_pitch_mm").get<double>();
  t.prompt_count = hdr.at("prompt_count").get<int>();
  t.prompt_period_s = hdr.at("prompt_period_s").get<double>();

  const int channels = hdr.at("channels").get<int>();
  const long samples = hdr.at("emg_samples").get<long>();
  const size_t frames = hdr.at("marker_frames").get<size_t>();
  if (channels != sig::kEmgChannels)
    throw DataFormatError("trial has " + std::to_string(channels) +
                          " channels, expected " + std::to_string(sig::kEmgChannels));

  t.emg.samples.resize(channels, samples);
  in.read(reinterpret_cast<char*>(t.emg.samples.data()),
          static_cast<std::streamsize>(t.emg.samples.size() * sizeof(int16_t)));
  if (!in) throw DataFormatError("corrupt trial container (EMG block): " + path);
  t.markers.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    auto& f = t.markers[i];
    for (auto& m : f.markers)
      in.read(reinterpret_cast<char*>(m.data()), 3 * sizeof(double));
    in.read(reinterpret_cast<char*>(&f.validity), sizeof(uint32_t));
    f.timestamp = static_cast<double>(i) / t.emg.params.marker_rate_hz;
    if (!in) throw DataFormatError("corrupt trial container (marker block): " + path);
  }
  char extra;
  if (in.read(&extra, 1))
    throw DataFormatError("corrupt trial container (trailing bytes): " + path);
  t.validate();
  return t;
}

}  // namespace rpcnet::io
