#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rpcnet/common.hpp"

namespace rpcnet::stats {

/// Empirical quantile with linear interpolation between order statistics
/// (the numpy default: h = (n-1)p).
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ContractError("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

/// Mean with first/second tertile and median, the per-indicator summary of
/// the results tables.
struct IndicatorSummary {
  double mean = 0, t1 = 0, t2 = 0, median = 0;
};

inline IndicatorSummary summarize(const std::vector<double>& v) {
  if (v.empty()) throw ContractError("summarize: empty sample");
  IndicatorSummary s;
  double acc = 0;
  for (double x : v) acc += x;
  s.mean = acc / static_cast<double>(v.size());
  s.t1 = quantile(v, 1.0 / 3.0);
  s.t2 = quantile(v, 2.0 / 3.0);
  s.median = quantile(v, 0.5);
  return s;
}

}  // namespace rpcnet::stats
