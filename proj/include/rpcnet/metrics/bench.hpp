#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <string>

#include "rpcnet/net/network.hpp"

namespace rpcnet::stats {

struct InferenceTimeReport {
  double mean_ms = 0;
  double std_ms = 0;
  long iterations = 0;
  std::string hardware;
};

inline std::string cpu_model_name() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(colon + 2);
    }
  }
  return "unknown CPU";
}

/// Times single forward passes on fixed random input. Single-threaded by
/// contract: the measurement assumes a quiescent machine, noted in the
/// hardware descriptor.
template <typename S>
InferenceTimeReport measure_inference_time(const net::RpcNet<S>& model,
                                           long iterations = 100000) {
  if (iterations < 1) throw ContractError("measure_inference_time: iterations >= 1");
  net::Rng rng(0xb019u);
  net::Vec<S> emg(model.cfg.emg_input());
  net::Vec<S> angle(model.cfg.angle_input());
  for (long i = 0; i < emg.size(); ++i) emg[i] = static_cast<S>(rng.uniform());
  for (long i = 0; i < angle.size(); ++i) angle[i] = static_cast<S>(rng.uniform());

  volatile double sink = 0;
  const long warmup = std::max<long>(3, iterations / 100);
  for (long i = 0; i < warmup; ++i) sink = sink + model.forward(emg, angle)[0];

  using Clock = std::chrono::steady_clock;
  double sum = 0, sumsq = 0;
  for (long i = 0; i < iterations; ++i) {
    const auto t0 = Clock::now();
    sink = sink + model.forward(emg, angle)[0];
    const auto t1 = Clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    sum += ms;
    sumsq += ms * ms;
  }
  InferenceTimeReport r;
  r.iterations = iterations;
  r.mean_ms = sum / iterations;
  r.std_ms = std::sqrt(std::max(0.0, sumsq / iterations - r.mean_ms * r.mean_ms));
  r.hardware = cpu_model_name() + " (single-threaded, quiescent-machine contract)";
  return r;
}

}  // namespace rpcnet::stats
