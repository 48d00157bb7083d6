#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "rpcnet/common.hpp"
#include "rpcnet/net/config.hpp"

namespace rpcnet::net {

// ADL serializers for the variant request live beside its type
inline void to_json(nlohmann::json& j, const VariantRequest& v) {
  j = nlohmann::json{{"variant", v.variant},
                     {"input_length_s", v.input_length_s},
                     {"width_code", v.width_code},
                     {"electrode_code", v.electrode_code}};
}

inline void from_json(const nlohmann::json& j, VariantRequest& v) {
  v.variant = j.value("variant", std::string());
  v.input_length_s = j.value("input_length_s", 0.0);
  v.width_code = j.value("width_code", std::string());
  v.electrode_code = j.value("electrode_code", std::string());
}

}  // namespace rpcnet::net

namespace rpcnet::plan {

/// One experiment: dataset selection, a train/test split with exactly one
/// test trial per subject (explicit index or seeded-random), the variant
/// list and the output location.
struct ExperimentPlan {
  std::vector<std::string> subjects;
  int trials_per_subject = 6;  // five for training plus one for testing
  int test_trial = -1;         // -1: seeded-random selection, recorded in the manifest
  std::vector<net::VariantRequest> variants = {{}};
  uint64_t seed = 0;
  std::string dataset_dir;
  std::string out_dir = "out";

  void validate() const {
    if (subjects.empty()) throw ConfigError("plan: no subjects");
    if (trials_per_subject < 2)
      throw ConfigError("plan: need at least one train and one test trial");
    if (test_trial >= trials_per_subject)
      throw ConfigError("plan: test trial index out of range");
    for (const auto& v : variants) {
      net::RpcNetConfig base;
      net::make_variant(base, v);  // throws on unknown codes
    }
  }
};

inline void to_json(nlohmann::json& j, const ExperimentPlan& p) {
  j = nlohmann::json{{"subjects", p.subjects},
                     {"trials_per_subject", p.trials_per_subject},
                     {"test_trial", p.test_trial},
                     {"variants", p.variants},
                     {"seed", p.seed},
                     {"dataset_dir", p.dataset_dir},
                     {"out_dir", p.out_dir}};
}

inline void from_json(const nlohmann::json& j, ExperimentPlan& p) {
  p.subjects = j.at("subjects").get<std::vector<std::string>>();
  p.trials_per_subject = j.value("trials_per_subject", 6);
  p.test_trial = j.value("test_trial", -1);
  if (j.contains("variants"))
    p.variants = j.at("variants").get<std::vector<net::VariantRequest>>();
  p.seed = j.value("seed", 0ull);
  p.dataset_dir = j.value("dataset_dir", std::string());
  p.out_dir = j.value("out_dir", std::string("out"));
}

/// FNV-1a over the canonical JSON dump; links output artifacts to the exact
/// configuration that produced them.
inline std::string config_hash(const nlohmann::json& j) {
  const std::string s = j.dump();
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rpcnet::plan
