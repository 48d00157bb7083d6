#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rpcnet/experiment/runner.hpp"

namespace rpcnet::io {

// Processed-trial container: magic "RPCD", u32 version, u32 JSON header
// length, JSON header (ids, pipeline parameters, lengths, the calibrated
// model config as text), then float32 envelope (channel-major per sample),
// float32 normalized angles, float64 resampled marker positions with u32
// validity masks.
inline constexpr uint32_t kProcessedFormatVersion = 1;

inline void save_processed(const plan::ProcessedTrial& t, const kin::KinematicModel& model,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write processed trial: " + path);
  out.write("RPCD", 4);
  const uint32_t version = kProcessedFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  std::ostringstream model_cfg;
  model.save_config(model_cfg);
  nlohmann::json hdr = {
      {"subject", t.subject_id},
      {"trial", t.trial_id},
      {"role", role_name(t.role)},
      {"channels", t.emg.envelope.rows()},
      {"length", t.emg.length()},
      {"fs_hz", t.emg.params.fs_hz},
      {"window_len", t.emg.params.window_len},
      {"window_step", t.emg.params.window_step},
      {"over_unity", t.emg.over_unity},
      {"ik_failures", t.angles.ik_failures},
      {"model_config", model_cfg.str()},
  };
  const std::string hs = hdr.dump();
  const uint32_t hlen = static_cast<uint32_t>(hs.size());
  out.write(reinterpret_cast<const char*>(&hlen), 4);
  out.write(hs.data(), hlen);
  out.write(reinterpret_cast<const char*>(t.emg.envelope.data()),
            static_cast<std::streamsize>(t.emg.envelope.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(t.angles.trajectories.data()),
            static_cast<std::streamsize>(t.angles.trajectories.size() * sizeof(float)));
  for (const auto& f : t.poses) {
    for (const auto& m : f.markers)
      out.write(reinterpret_cast<const char*>(m.data()), 3 * sizeof(double));
    out.write(reinterpret_cast<const char*>(&f.validity), sizeof(uint32_t));
  }
  if (!out) throw InputError("processed trial write failed: " + path);
}

struct LoadedProcessed {
  plan::ProcessedTrial trial;
  kin::KinematicModel model;
};

inline LoadedProcessed load_processed(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open processed trial: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "RPCD")
    throw DataFormatError("corrupt processed container (bad magic): " + path);
  uint32_t version = 0, hlen = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&hlen), 4);
  if (!in) throw DataFormatError("corrupt processed container: " + path);
  if (version > kProcessedFormatVersion)
    throw DataFormatError("processed container from a future version: " + path);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw DataFormatError("corrupt processed container (header): " + path);
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError("corrupt processed container: " + std::string(e.what()));
  }

  LoadedProcessed lp;
  auto& t = lp.trial;
  t.subject_id = hdr.at("subject").get<std::string>();
  t.trial_id = hdr.at("trial").get<std::string>();
  t.role = role_from_name(hdr.at("role").get<std::string>());
  const int channels = hdr.at("channels").get<int>();
  const long length = hdr.at("length").get<long>();
  t.emg.params.fs_hz = hdr.at("fs_hz").get<double>();
  t.emg.params.window_len = hdr.at("window_len").get<int>();
  t.emg.params.window_step = hdr.at("window_step").get<int>();
  t.emg.over_unity = hdr.at("over_unity").get<long>();
  t.angles.ik_failures = hdr.at("ik_failures").get<long>();
  t.angles.params = t.emg.params;
  std::istringstream mcfg(hdr.at("model_config").get<std::string>());
  lp.model = kin::KinematicModel::load_config(mcfg);

  t.emg.envelope.resize(channels, length);
  in.read(reinterpret_cast<char*>(t.emg.envelope.data()),
          static_cast<std::streamsize>(t.emg.envelope.size() * sizeof(float)));
  t.angles.trajectories.resize(kin::kNumDofs, length);
  in.read(reinterpret_cast<char*>(t.angles.trajectories.data()),
          static_cast<std::streamsize>(t.angles.trajectories.size() * sizeof(float)));
  t.poses.resize(length);
  for (long i = 0; i < length; ++i) {
    auto& f = t.poses[i];
    for (auto& m : f.markers)
      in.read(reinterpret_cast<char*>(m.data()), 3 * sizeof(double));
    in.read(reinterpret_cast<char*>(&f.validity), sizeof(uint32_t));
    f.timestamp = t.emg.params.envelope_timestamp(i);
  }
  if (!in) throw DataFormatError("corrupt processed container (blocks): " + path);
  char extra;
  if (in.read(&extra, 1))
    throw DataFormatError("corrupt processed container (trailing bytes): " + path);
  return lp;
}

}  // namespace rpcnet::io
