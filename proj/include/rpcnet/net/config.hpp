#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "rpcnet/common.hpp"
#include "rpcnet/signal/emg.hpp"
#include "rpcnet/signal/windows.hpp"

namespace rpcnet::net {

/// Layer widths of one two-branch sub-network. Hidden layers are rectified,
/// the output layer is linear. Widths follow the input sizes: branch hidden
/// width is I_x/3 (the EMG branch keeps it for both of its layers, the angle
/// branch contracts to 24), the root hidden width is floor(I_M/4).
struct SubNetworkConfig {
  int emg_input = 1536;   // I_E
  int angle_input = 192;  // I_A, 0 drops the angle branch entirely
  int emg_hidden = 512;   // W_E
  int angle_hidden = 64;
  int angle_out = 24;
  int outputs = 1;

  bool has_angle_branch() const { return angle_input > 0; }
  int merged() const { return emg_hidden + (has_angle_branch() ? angle_out : 0); }
  int root_hidden() const { return std::max(1, merged() / 4); }

  /// Widths from the input sizes; `width_mult` scales every branch width
  /// (the -W variants use 5).
  static SubNetworkConfig from_rule(int emg_input, int angle_input, int outputs = 1,
                                    int width_mult = 1) {
    SubNetworkConfig c;
    c.emg_input = emg_input;
    c.angle_input = angle_input;
    c.emg_hidden = emg_input / 3 * width_mult;
    c.angle_hidden = angle_input > 0 ? std::max(1, angle_input / 3) * width_mult : 0;
    c.angle_out = angle_input > 0 ? 24 * width_mult : 0;
    c.outputs = outputs;
    if (c.emg_hidden < 1) throw ConfigError("SubNetworkConfig: EMG branch width < 1");
    return c;
  }

  void validate() const {
    if (emg_input < 1 || emg_hidden < 1 || outputs < 1)
      throw ConfigError("SubNetworkConfig: widths must be >= 1");
    if (angle_input > 0 && (angle_hidden < 1 || angle_out < 1))
      throw ConfigError("SubNetworkConfig: angle branch widths must be >= 1");
  }
};

/// Adam + MSE training regime. Defaults are the published values and are
/// only ever changed explicitly.
struct TrainingConfig {
  double learning_rate = 1e-5;
  double epsilon = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  int batch_size = 10;
  int epochs = 3;
  uint64_t seed = 0;
};

enum class Variant : uint8_t { Full, B, I, W, IB, WB };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::B: return "B";
    case Variant::I: return "I";
    case Variant::W: return "W";
    case Variant::IB: return "I-B";
    case Variant::WB: return "W-B";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "full" || s.empty()) return Variant::Full;
  if (s == "B" || s == "b") return Variant::B;
  if (s == "I" || s == "i") return Variant::I;
  if (s == "W" || s == "w") return Variant::W;
  if (s == "I-B" || s == "i-b" || s == "IB") return Variant::IB;
  if (s == "W-B" || s == "w-b" || s == "WB") return Variant::WB;
  throw ConfigError("unknown variant: " + s);
}

inline bool variant_monolithic(Variant v) {
  return v == Variant::I || v == Variant::W || v == Variant::IB || v == Variant::WB;
}
inline bool variant_has_angle_branch(Variant v) {
  return v == Variant::Full || v == Variant::I || v == Variant::W;
}

/// Electrode subset codes (rows on the proximo-distal axis, columns around
/// the circumference; channel = row * 16 + column, zero-based).
inline std::vector<int> electrode_subset(const std::string& code) {
  auto rows = [](std::initializer_list<int> rs) {
    std::vector<int> ch;
    for (int r : rs)
      for (int c = 0; c < sig::kGridCols; ++c) ch.push_back((r - 1) * sig::kGridCols + c);
    std::sort(ch.begin(), ch.end());
    return ch;
  };
  auto cols = [](std::initializer_list<int> cs) {
    std::vector<int> ch;
    for (int r = 0; r < sig::kGridRows; ++r)
      for (int c : cs) ch.push_back(r * sig::kGridCols + (c - 1));
    std::sort(ch.begin(), ch.end());
    return ch;
  };
  if (code == "A1") return rows({1, 2, 3, 4});
  if (code == "A2") return rows({1, 2, 5, 6});
  if (code == "A3") return rows({3, 4, 5, 6});
  if (code == "B1") return rows({1, 2});
  if (code == "B2") return rows({3, 4});
  if (code == "B3") return rows({5, 6});
  if (code.size() == 2 && code[0] == 'C' && code[1] >= '1' && code[1] <= '6')
    return rows({code[1] - '0'});
  if (code == "D1") return cols({2, 4, 6, 8, 10, 12, 14, 16});
  if (code == "D2") return cols({1, 3, 5, 7, 9, 11, 13, 15});
  if (code == "F1") return cols({1, 5, 9, 13});
  if (code == "F2") return cols({2, 6, 10, 14});
  if (code == "F3") return cols({3, 7, 11, 15});
  if (code == "F4") return cols({4, 8, 12, 16});
  throw ConfigError("unknown electrode subset code: " + code);
}

inline const std::vector<std::string>& electrode_subset_codes() {
  static const std::vector<std::string> codes = {
      "A1", "A2", "A3", "B1", "B2", "B3", "C1", "C2", "C3",
      "C4", "C5", "C6", "D1", "D2", "F1", "F2", "F3", "F4"};
  return codes;
}

/// Width-sweep codes for the EMG branch (E-1 .. E-5).
inline int emg_width_for_code(const std::string& code) {
  if (code == "E-1") return 384;
  if (code == "E-2") return 307;
  if (code == "E-3") return 256;
  if (code == "E-4") return 219;
  if (code == "E-5") return 192;
  throw ConfigError("unknown width code: " + code);
}

/// A fully resolved model family member: variant kind, electrode subset,
/// input window and width overrides.
struct RpcNetConfig {
  Variant variant = Variant::Full;
  std::vector<int> channel_map;  // indices into the 96-channel grid
  sig::WindowSpec window;        // history length and strides
  int emg_hidden_override = 0;   // E-codes set this, 0 keeps the width rule
  int joints = 24;
  int width_mult = 1;            // 5 for -W variants

  RpcNetConfig() {
    channel_map.resize(sig::kEmgChannels);
    for (int i = 0; i < sig::kEmgChannels; ++i) channel_map[i] = i;
  }

  int channels() const { return static_cast<int>(channel_map.size()); }
  int network_count() const { return variant_monolithic(variant) ? 1 : joints; }
  int emg_input() const { return window.emg_input_size(channels()); }
  int angle_input() const {
    return variant_has_angle_branch(variant) ? window.angle_input_size(joints) : 0;
  }

  SubNetworkConfig subnet() const {
    auto c = SubNetworkConfig::from_rule(emg_input(), angle_input(),
                                         variant_monolithic(variant) ? joints : 1,
                                         width_mult);
    if (emg_hidden_override > 0) c.emg_hidden = emg_hidden_override;
    return c;
  }
};

/// Builds a variant configuration from a request: base config plus any of
/// variant tag, input-length seconds (0.1 .. 0.8), width code (E-n) and
/// electrode subset code from the grid table.
struct VariantRequest {
  std::string variant;         // "full", "B", "I", "W", "I-B", "W-B"
  double input_length_s = 0;   // 0 keeps the base window
  std::string width_code;      // "E-1".."E-5" or empty
  std::string electrode_code;  // "A1".."C6", "D1","D2","F1".."F4" or empty
};

inline RpcNetConfig make_variant(const RpcNetConfig& base, const VariantRequest& req) {
  RpcNetConfig cfg = base;
  if (!req.variant.empty()) cfg.variant = variant_from_name(req.variant);
  cfg.width_mult = (cfg.variant == Variant::W || cfg.variant == Variant::WB) ? 5 : 1;
  if (req.input_length_s > 0) {
    // lengths are multiples of 0.1 s at 81.92 Hz, i.e. 8-sample steps of
    // history; 0.8 s is the original 64-sample window
    const double samples = req.input_length_s * 81.92;
    const int hist = static_cast<int>(std::lround(samples / 8.0)) * 8;
    if (hist < 8 || hist > 64)
      throw ConfigError("input length out of range: " + std::to_string(req.input_length_s));
    cfg.window.history = hist;
  }
  if (!req.electrode_code.empty()) cfg.channel_map = electrode_subset(req.electrode_code);
  cfg.emg_hidden_override = req.width_code.empty() ? 0 : emg_width_for_code(req.width_code);
  cfg.subnet().validate();
  return cfg;
}

}  // namespace rpcnet::net
