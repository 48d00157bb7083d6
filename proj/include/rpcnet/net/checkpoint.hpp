#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpcnet/net/network.hpp"

namespace rpcnet::net {

inline void to_json(nlohmann::json& j, const RpcNetConfig& c) {
  j = nlohmann::json{{"variant", variant_name(c.variant)},
                     {"channel_map", c.channel_map},
                     {"history", c.window.history},
                     {"emg_stride", c.window.emg_stride},
                     {"angle_stride", c.window.angle_stride},
                     {"emg_hidden_override", c.emg_hidden_override},
                     {"joints", c.joints},
                     {"width_mult", c.width_mult}};
}

inline void from_json(const nlohmann::json& j, RpcNetConfig& c) {
  c.variant = variant_from_name(j.at("variant").get<std::string>());
  c.channel_map = j.at("channel_map").get<std::vector<int>>();
  c.window.history = j.at("history").get<int>();
  c.window.emg_stride = j.at("emg_stride").get<int>();
  c.window.angle_stride = j.at("angle_stride").get<int>();
  c.emg_hidden_override = j.at("emg_hidden_override").get<int>();
  c.joints = j.at("joints").get<int>();
  c.width_mult = j.at("width_mult").get<int>();
}

// Checkpoint container: "RPCN" magic, u32 format version, u32 JSON header
// length, the JSON config, then per network and layer the weight matrix
// (column-major) and bias as little-endian float32 blobs.
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataFormatError("checkpoint: truncated file");
  return v;
}

}  // namespace detail

template <typename S>
void save_checkpoint(const RpcNet<S>& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint: " + path);
  out.write("RPCN", 4);
  detail::write_pod(out, kCheckpointVersion);
  nlohmann::json hdr;
  hdr["config"] = net.cfg;
  hdr["nets"] = net.nets.size();
  const std::string hs = hdr.dump();
  detail::write_pod(out, static_cast<uint32_t>(hs.size()));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  std::vector<float> buf;
  for (const auto& sub : net.nets) {
    for (const auto& layer : sub.layers) {
      if (layer.w.size() == 0) continue;
      buf.resize(layer.w.size());
      for (long i = 0; i < layer.w.size(); ++i) buf[i] = static_cast<float>(layer.w.data()[i]);
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
      buf.resize(layer.b.size());
      for (long i = 0; i < layer.b.size(); ++i) buf[i] = static_cast<float>(layer.b.data()[i]);
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
  }
  if (!out) throw InputError("checkpoint write failed: " + path);
}

template <typename S>
RpcNet<S> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "RPCN")
    throw DataFormatError("checkpoint: bad magic in " + path);
  const auto version = detail::read_pod<uint32_t>(in);
  if (version > kCheckpointVersion)
    throw DataFormatError("checkpoint: unsupported future version " +
                          std::to_string(version));
  const auto hlen = detail::read_pod<uint32_t>(in);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw DataFormatError("checkpoint: truncated header");
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  RpcNet<S> net;
  net.cfg = hdr.at("config").get<RpcNetConfig>();
  const auto count = hdr.at("nets").get<size_t>();
  if (count != static_cast<size_t>(net.cfg.network_count()))
    throw DataFormatError("checkpoint: network count mismatch");
  net.nets.resize(count);
  std::vector<float> buf;
  for (auto& sub : net.nets) {
    sub.cfg = net.cfg.subnet();
    sub.layers.resize(kLayerSlots);
    auto read_dense = [&](Dense<S>& d, int in_dim, int out_dim) {
      d.w.resize(out_dim, in_dim);
      d.b.resize(out_dim);
      buf.resize(static_cast<size_t>(in_dim) * out_dim);
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
      for (long i = 0; i < d.w.size(); ++i) d.w.data()[i] = static_cast<S>(buf[i]);
      buf.resize(out_dim);
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
      for (long i = 0; i < d.b.size(); ++i) d.b.data()[i] = static_cast<S>(buf[i]);
      if (!in) throw DataFormatError("checkpoint: truncated parameter blob");
    };
    const auto& sc = sub.cfg;
    read_dense(sub.layers[kEmg0], sc.emg_input, sc.emg_hidden);
    read_dense(sub.layers[kEmg1], sc.emg_hidden, sc.emg_hidden);
    if (sc.has_angle_branch()) {
      read_dense(sub.layers[kAngle0], sc.angle_input, sc.angle_hidden);
      read_dense(sub.layers[kAngle1], sc.angle_hidden, sc.angle_out);
    }
    read_dense(sub.layers[kRoot0], sc.merged(), sc.root_hidden());
    read_dense(sub.layers[kRoot1], sc.root_hidden(), sc.outputs);
  }
  char extra;
  if (in.read(&extra, 1))
    throw DataFormatError("checkpoint: trailing bytes in " + path);
  return net;
}

}  // namespace rpcnet::net
