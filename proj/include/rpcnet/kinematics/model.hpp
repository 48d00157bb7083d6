#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rpcnet/common.hpp"

namespace rpcnet::kin {

inline constexpr int kNumDofs = 24;       // 3 wrist + 4x4 fingers + 5 thumb
inline constexpr int kNumMarkers = 23;    // 21 hand markers + 2 forearm markers
inline constexpr int kNumHandMarkers = 21;
inline constexpr int kNumPalmMarkers = 6;
inline constexpr int kNumDigits = 5;

using AngleVec = Eigen::Matrix<double, kNumDofs, 1>;

// Marker slot assignment. The palm is rigid and carries six markers (two at
// the wrist base, one proximal to each finger MP joint). Each digit carries
// three markers at the distal end of its three segments; the last one is the
// digit tip. Two markers on the forearm define line G and do not move with
// any of the 24 DoFs.
enum MarkerId : int {
  kForearmRadial = 0,
  kForearmUlnar = 1,
  kPalmWristRadial = 2,
  kPalmWristUlnar = 3,
  kPalmIndexMcp = 4,
  kPalmMiddleMcp = 5,
  kPalmRingMcp = 6,
  kPalmLittleMcp = 7,
  kIndexPip = 8, kIndexDip = 9, kIndexTip = 10,
  kMiddlePip = 11, kMiddleDip = 12, kMiddleTip = 13,
  kRingPip = 14, kRingDip = 15, kRingTip = 16,
  kLittlePip = 17, kLittleDip = 18, kLittleTip = 19,
  kThumbIp = 20, kThumbId = 21, kThumbTip = 22,
};
inline constexpr int kFirstHandMarker = kPalmWristRadial;
inline constexpr std::array<int, kNumPalmMarkers> kPalmMarkerIds = {2, 3, 4, 5, 6, 7};

enum class DofKind : uint8_t {
  FlexionExtension,
  AdductionAbduction,
  PronationSupination,
};

enum class Digit : int { Index = 0, Middle = 1, Ring = 2, Little = 3, Thumb = 4 };

struct DofInfo {
  std::string code;   // e.g. "WRFE", "INMPFE", "THIPAA"
  DofKind kind;
  int digit;          // -1 for wrist, otherwise Digit index
  int joint_level;    // wrist: axis index; digits: 0=MP, 1=IP, 2=ID
};

/// One joint-angle sample. Values are degrees, ordered by the model's DoF
/// table (wrist x/y/z, then index, middle, ring, little, thumb). Zero is the
/// reference pose; positive values are extensions / radial deviations.
struct JointAngles {
  AngleVec values = AngleVec::Zero();
  double timestamp = 0.0;
};

/// One motion-capture frame: 23 marker positions in mm plus a per-marker
/// visibility mask.
struct HandPose3D {
  std::array<Eigen::Vector3d, kNumMarkers> markers{};
  uint32_t validity = (1u << kNumMarkers) - 1;  // all valid
  double timestamp = 0.0;

  bool valid(int i) const { return (validity >> i) & 1u; }
  void set_valid(int i, bool v) {
    if (v) validity |= (1u << i); else validity &= ~(1u << i);
  }
  bool palm_valid() const {
    for (int m : kPalmMarkerIds) if (!valid(m)) return false;
    return true;
  }
};

struct DigitChain {
  Eigen::Vector3d base;     // chain origin in the palm frame, mm
  Eigen::Matrix3d mount;    // chain orientation at zero angles
  Eigen::Vector3d lengths;  // three segment lengths, mm
  int first_dof;            // index into the 24-vector
  int dof_count;            // 4 (finger) or 5 (thumb)
  int first_marker;         // marker slot of the chain's first marker
};

inline Eigen::Matrix3d rot_x(double deg) {
  return Eigen::AngleAxisd(deg * M_PI / 180.0, Eigen::Vector3d::UnitX()).toRotationMatrix();
}
inline Eigen::Matrix3d rot_y(double deg) {
  return Eigen::AngleAxisd(deg * M_PI / 180.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
}
inline Eigen::Matrix3d rot_z(double deg) {
  return Eigen::AngleAxisd(deg * M_PI / 180.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

/// The 24-DoF hand model.
///
/// Palm frame: origin at the wrist centre, +X distal (along the palm), +Y
/// radial (towards the thumb), +Z dorsal. Plane K is the palm X-Y plane,
/// line Q runs along +Y (the knuckle line) and line G (forearm markers) is
/// parallel to Q in the reference pose. Fingers at zero angles extend along
/// +X, i.e. lie on plane K perpendicular to Q. The thumb chain is mounted on
/// a tilted frame; its zero pose lies on plane T (the mount's X-Y plane)
/// perpendicular to line H (the mount's Y axis).
///
/// Sign conventions: flexion-extension rotates about the local -Y axis so
/// that positive angles are extensions (dorsal); adduction-abduction rotates
/// about the local +Z axis so that positive angles are radial deviations.
/// The wrist composes intrinsic rotations Rx(ps) * Ry(-fe) * Rz(aa).
class KinematicModel {
 public:
  std::array<DofInfo, kNumDofs> dof_table;
  AngleVec limit_lo, limit_hi;   // degrees
  AngleVec rest_angles;          // degrees, inside the limits
  std::array<Eigen::Vector3d, kNumPalmMarkers> palm_layout;  // palm frame, mm
  std::array<Eigen::Vector3d, 2> forearm_markers;            // global frame, mm
  std::array<DigitChain, kNumDigits> digits;
  double thumb_mount_rz_deg = 60.0;
  double thumb_mount_rx_deg = -45.0;

  /// Default model: documented anthropometric segment lengths, anatomical
  /// range-of-motion limits and rest angles. All of it can be overridden
  /// from a config file.
  static KinematicModel standard();

  void validate() const;

  const DigitChain& digit(Digit d) const { return digits[static_cast<int>(d)]; }

  /// Rebuilds the thumb mount rotation from the two mount angles.
  void refresh_thumb_mount() {
    digits[static_cast<int>(Digit::Thumb)].mount =
        rot_z(thumb_mount_rz_deg) * rot_x(thumb_mount_rx_deg);
  }

  // -- key-value config file ------------------------------------------------
  static KinematicModel load_config(std::istream& in);
  void save_config(std::ostream& out) const;

  /// Per-subject calibration from a rest frame: digit bases are moved to the
  /// observed MP markers and segment lengths are set to the observed
  /// inter-marker distances along each chain.
  void calibrate_from_rest_frame(const HandPose3D& rest);
};

namespace detail {

inline const char* digit_code(int d) {
  static const char* codes[] = {"IN", "MI", "RI", "LI", "TH"};
  return codes[d];
}

inline std::array<DofInfo, kNumDofs> build_dof_table() {
  std::array<DofInfo, kNumDofs> t;
  t[0] = {"WRPS", DofKind::PronationSupination, -1, 0};
  t[1] = {"WRFE", DofKind::FlexionExtension, -1, 1};
  t[2] = {"WRAA", DofKind::AdductionAbduction, -1, 2};
  int i = 3;
  for (int d = 0; d < 4; ++d) {
    std::string p = digit_code(d);
    t[i++] = {p + "MPFE", DofKind::FlexionExtension, d, 0};
    t[i++] = {p + "MPAA", DofKind::AdductionAbduction, d, 0};
    t[i++] = {p + "IPFE", DofKind::FlexionExtension, d, 1};
    t[i++] = {p + "IDFE", DofKind::FlexionExtension, d, 2};
  }
  t[i++] = {"THMPFE", DofKind::FlexionExtension, 4, 0};
  t[i++] = {"THMPAA", DofKind::AdductionAbduction, 4, 0};
  t[i++] = {"THIPFE", DofKind::FlexionExtension, 4, 1};
  t[i++] = {"THIPAA", DofKind::AdductionAbduction, 4, 1};
  t[i++] = {"THIDFE", DofKind::FlexionExtension, 4, 2};
  return t;
}

}  // namespace detail

inline KinematicModel KinematicModel::standard() {
  KinematicModel m;
  m.dof_table = detail::build_dof_table();

  m.palm_layout[0] = {8, 26, 0};     // wrist radial
  m.palm_layout[1] = {5, -28, 0};    // wrist ulnar
  m.palm_layout[2] = {86, 24, 0};    // index MP
  m.palm_layout[3] = {90, 4, 0};     // middle MP
  m.palm_layout[4] = {84, -14, 0};   // ring MP
  m.palm_layout[5] = {76, -30, 0};   // little MP
  m.forearm_markers[0] = {-60, 24, 0};
  m.forearm_markers[1] = {-60, -24, 0};

  const Eigen::Vector3d finger_len[4] = {
      {45, 25, 22}, {50, 28, 24}, {46, 26, 24}, {36, 20, 20}};
  for (int d = 0; d < 4; ++d) {
    m.digits[d].base = m.palm_layout[2 + d];
    m.digits[d].mount = Eigen::Matrix3d::Identity();
    m.digits[d].lengths = finger_len[d];
    m.digits[d].first_dof = 3 + 4 * d;
    m.digits[d].dof_count = 4;
    m.digits[d].first_marker = kIndexPip + 3 * d;
  }
  auto& th = m.digits[4];
  th.base = {22, 30, -4};
  th.lengths = {46, 32, 26};
  th.first_dof = 19;
  th.dof_count = 5;
  th.first_marker = kThumbIp;
  m.refresh_thumb_mount();

  // limits per DoF kind; flexion is negative
  auto set = [&](int i, double lo, double hi, double rest) {
    m.limit_lo[i] = lo; m.limit_hi[i] = hi; m.rest_angles[i] = rest;
  };
  set(0, -90, 90, 0);   // WRPS
  set(1, -80, 80, 0);   // WRFE
  set(2, -30, 30, 0);   // WRAA
  for (int d = 0; d < 4; ++d) {
    int i = 3 + 4 * d;
    set(i + 0, -90, 45, -20);    // MP F-E
    set(i + 1, -25, 25, 0);      // MP A-A
    set(i + 2, -110, 10, -25);   // IP F-E
    set(i + 3, -80, 10, -10);    // ID F-E
  }
  set(19, -70, 40, -10);  // TH MP F-E
  set(20, -40, 40, 0);    // TH MP A-A
  set(21, -80, 25, -15);  // TH IP F-E
  set(22, -30, 30, 0);    // TH IP A-A
  set(23, -80, 25, -10);  // TH ID F-E
  return m;
}

inline void KinematicModel::validate() const {
  for (int i = 0; i < kNumDofs; ++i) {
    if (!(limit_lo[i] < limit_hi[i]))
      throw ConfigError("joint limit min >= max for DoF " + dof_table[i].code);
    if (rest_angles[i] < limit_lo[i] || rest_angles[i] > limit_hi[i])
      throw ConfigError("rest angle outside joint limits for DoF " + dof_table[i].code);
  }
  for (const auto& d : digits) {
    if ((d.lengths.array() <= 0).any())
      throw ConfigError("non-positive segment length");
  }
  int dofs = 0;
  for (const auto& d : digits) dofs += d.dof_count;
  if (dofs + 3 != kNumDofs) throw ConfigError("DoF table does not sum to 24");
}

// ---------------------------------------------------------------------------
// Key-value config, one `key = values` entry per line, '#' starts a comment.

inline void KinematicModel::save_config(std::ostream& out) const {
  auto vec = [](const Eigen::Vector3d& v) {
    std::ostringstream s;
    s << v.x() << " " << v.y() << " " << v.z();
    return s.str();
  };
  out << "# rpcnet hand model configuration (lengths/positions mm, angles deg)\n";
  static const char* palm_keys[] = {"wrist_radial", "wrist_ulnar", "index_mp",
                                    "middle_mp", "ring_mp", "little_mp"};
  for (int i = 0; i < kNumPalmMarkers; ++i)
    out << "palm." << palm_keys[i] << " = " << vec(palm_layout[i]) << "\n";
  out << "forearm.radial = " << vec(forearm_markers[0]) << "\n";
  out << "forearm.ulnar = " << vec(forearm_markers[1]) << "\n";
  static const char* digit_keys[] = {"index", "middle", "ring", "little", "thumb"};
  for (int d = 0; d < kNumDigits; ++d) {
    out << "digit." << digit_keys[d] << ".base = " << vec(digits[d].base) << "\n";
    out << "digit." << digit_keys[d] << ".lengths = " << vec(digits[d].lengths) << "\n";
  }
  out << "thumb.mount_rz_deg = " << thumb_mount_rz_deg << "\n";
  out << "thumb.mount_rx_deg = " << thumb_mount_rx_deg << "\n";
  for (int i = 0; i < kNumDofs; ++i) {
    out << "dof." << dof_table[i].code << ".limits = " << limit_lo[i] << " "
        << limit_hi[i] << "\n";
    out << "dof." << dof_table[i].code << ".rest = " << rest_angles[i] << "\n";
  }
}

inline KinematicModel KinematicModel::load_config(std::istream& in) {
  KinematicModel m = standard();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw ConfigError("model config line " + std::to_string(lineno) +
                          ": expected 'key = values'");
      continue;
    }
    std::istringstream ks(line.substr(0, eq)), vs(line.substr(eq + 1));
    std::string key;
    ks >> key;
    std::vector<double> vals;
    double x;
    while (vs >> x) vals.push_back(x);
    auto need = [&](size_t n) {
      if (vals.size() != n)
        throw ConfigError("model config key '" + key + "' expects " +
                          std::to_string(n) + " values");
    };
    auto as_vec3 = [&]() { need(3); return Eigen::Vector3d(vals[0], vals[1], vals[2]); };

    static const char* palm_keys[] = {"wrist_radial", "wrist_ulnar", "index_mp",
                                      "middle_mp", "ring_mp", "little_mp"};
    static const char* digit_keys[] = {"index", "middle", "ring", "little", "thumb"};
    bool handled = false;
    for (int i = 0; i < kNumPalmMarkers && !handled; ++i)
      if (key == std::string("palm.") + palm_keys[i]) { m.palm_layout[i] = as_vec3(); handled = true; }
    for (int d = 0; d < kNumDigits && !handled; ++d) {
      std::string p = std::string("digit.") + digit_keys[d];
      if (key == p + ".base") { m.digits[d].base = as_vec3(); handled = true; }
      else if (key == p + ".lengths") { m.digits[d].lengths = as_vec3(); handled = true; }
    }
    if (!handled) {
      if (key == "forearm.radial") { m.forearm_markers[0] = as_vec3(); handled = true; }
      else if (key == "forearm.ulnar") { m.forearm_markers[1] = as_vec3(); handled = true; }
      else if (key == "thumb.mount_rz_deg") { need(1); m.thumb_mount_rz_deg = vals[0]; handled = true; }
      else if (key == "thumb.mount_rx_deg") { need(1); m.thumb_mount_rx_deg = vals[0]; handled = true; }
      else if (key.rfind("dof.", 0) == 0) {
        std::string rest = key.substr(4);
        auto dot = rest.find('.');
        if (dot == std::string::npos) throw ConfigError("bad dof key: " + key);
        std::string code = rest.substr(0, dot), field = rest.substr(dot + 1);
        int idx = -1;
        for (int i = 0; i < kNumDofs; ++i)
          if (m.dof_table[i].code == code) { idx = i; break; }
        if (idx < 0) throw ConfigError("unknown DoF code: " + code);
        if (field == "limits") { need(2); m.limit_lo[idx] = vals[0]; m.limit_hi[idx] = vals[1]; }
        else if (field == "rest") { need(1); m.rest_angles[idx] = vals[0]; }
        else throw ConfigError("unknown dof field: " + field);
        handled = true;
      }
    }
    if (!handled) throw ConfigError("unknown model config key: " + key);
  }
  // digit bases for fingers track the palm MP markers
  for (int d = 0; d < 4; ++d) m.digits[d].base = m.palm_layout[2 + d];
  m.refresh_thumb_mount();
  m.validate();
  return m;
}

inline void KinematicModel::calibrate_from_rest_frame(const HandPose3D& rest) {
  // The calibration frame is assumed to be captured in the reference wrist
  // orientation, so observed marker positions can be read as palm-frame
  // coordinates. Segment lengths are pose-invariant either way.
  for (int i = 0; i < kNumPalmMarkers; ++i)
    if (rest.valid(kPalmMarkerIds[i])) palm_layout[i] = rest.markers[kPalmMarkerIds[i]];
  for (int d = 0; d < kNumDigits; ++d) {
    auto& ch = digits[d];
    const Eigen::Vector3d* base;
    if (d < 4) {
      if (!rest.valid(kPalmIndexMcp + d)) continue;
      base = &rest.markers[kPalmIndexMcp + d];
      ch.base = *base;
    } else {
      base = &ch.base;  // no marker at the thumb chain origin
    }
    int fm = ch.first_marker;
    if (!rest.valid(fm) || !rest.valid(fm + 1) || !rest.valid(fm + 2)) continue;
    ch.lengths[0] = (rest.markers[fm] - *base).norm();
    ch.lengths[1] = (rest.markers[fm + 1] - rest.markers[fm]).norm();
    ch.lengths[2] = (rest.markers[fm + 2] - rest.markers[fm + 1]).norm();
  }
  validate();
}

}  // namespace rpcnet::kin
