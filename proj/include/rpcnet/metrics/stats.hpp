#pragma once

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "rpcnet/common.hpp"

namespace rpcnet::stats {

/// Direction of the one-sided alternative for paired tests on x vs y.
enum class Tail { Greater, Less };

inline double student_t_cdf(double t, double dof) {
  boost::math::students_t_distribution<double> d(dof);
  return boost::math::cdf(d, t);
}
inline double normal_cdf(double z) {
  boost::math::normal_distribution<double> d;
  return boost::math::cdf(d, z);
}

struct TTestResult {
  double t = 0;
  double p = 1;
  int dof = 0;
};

/// Classical one-sided paired t-test on the differences x - y. All-zero
/// differences give t = 0, p = 0.5; zero variance around a nonzero mean is
/// degenerate.
inline TTestResult paired_t_one_sided(const std::vector<double>& x,
                                      const std::vector<double>& y, Tail tail) {
  if (x.size() != y.size() || x.size() < 2)
    throw ContractError("paired_t_one_sided: need paired samples of length >= 2");
  const int n = static_cast<int>(x.size());
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[i] = x[i] - y[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1));
  TTestResult r;
  r.dof = n - 1;
  if (sd == 0) {
    if (mean == 0) {
      r.t = 0;
      r.p = 0.5;
      return r;
    }
    throw DegenerateTestError("paired_t_one_sided: zero-variance differences");
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double cdf = student_t_cdf(r.t, r.dof);
  r.p = tail == Tail::Greater ? 1.0 - cdf : cdf;
  return r;
}

struct WilcoxonResult {
  double w = 0;  // sum of the ranks of positive differences
  double p = 1;
  int n_used = 0;
  bool exact = false;
};

namespace detail {

/// Ranks of |d| with average ranks for ties, returned doubled so they are
/// integers even with .5 ties.
inline std::vector<long> doubled_ranks(const std::vector<double>& absd) {
  const int n = static_cast<int>(absd.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return absd[a] < absd[b]; });
  std::vector<long> r2(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && absd[idx[j + 1]] == absd[idx[i]]) ++j;
    const long sum2 = static_cast<long>(i + 1 + j + 1);  // 2 * average rank
    for (int k = i; k <= j; ++k) r2[idx[k]] = sum2;
    i = j + 1;
  }
  return r2;
}

}  // namespace detail

/// One-sided Wilcoxon signed-rank test. W is the sum of the ranks of the
/// positive differences x - y; zero differences are dropped and ties get
/// average ranks. Exact tail probability (conditional on the observed ranks,
/// by dynamic programming over sign assignments) for n <= 20, otherwise the
/// normal approximation with tie-corrected variance and continuity
/// correction.
inline WilcoxonResult wilcoxon_signed_rank_one_sided(const std::vector<double>& x,
                                                     const std::vector<double>& y,
                                                     Tail tail) {
  if (x.size() != y.size())
    throw ContractError("wilcoxon_signed_rank_one_sided: length mismatch");
  std::vector<double> d, absd;
  for (size_t i = 0; i < x.size(); ++i) {
    const double v = x[i] - y[i];
    if (v != 0) {
      d.push_back(v);
      absd.push_back(std::abs(v));
    }
  }
  const int n = static_cast<int>(d.size());
  if (n == 0)
    throw DegenerateTestError("wilcoxon_signed_rank_one_sided: all differences zero");

  const auto r2 = detail::doubled_ranks(absd);
  long w2 = 0;
  long total2 = 0;
  for (int i = 0; i < n; ++i) {
    total2 += r2[i];
    if (d[i] > 0) w2 += r2[i];
  }

  WilcoxonResult res;
  res.w = static_cast<double>(w2) / 2.0;
  res.n_used = n;

  if (n <= 20) {
    // subset-sum distribution of the doubled ranks: counts[s] = number of
    // sign assignments with doubled W == s
    std::vector<double> counts(static_cast<size_t>(total2) + 1, 0.0);
    counts[0] = 1.0;
    size_t maxs = 0;
    for (int i = 0; i < n; ++i) {
      const size_t s = static_cast<size_t>(r2[i]);
      maxs += s;
      for (size_t k = maxs + 1; k-- > s;) counts[k] += counts[k - s];
    }
    const double denom = std::pow(2.0, n);
    double acc = 0;
    if (tail == Tail::Greater) {
      for (size_t k = static_cast<size_t>(w2); k <= static_cast<size_t>(total2); ++k)
        acc += counts[k];
    } else {
      for (size_t k = 0; k <= static_cast<size_t>(w2); ++k) acc += counts[k];
    }
    res.p = acc / denom;
    res.exact = true;
  } else {
    double mu = 0, var = 0;
    for (int i = 0; i < n; ++i) {
      mu += r2[i] / 2.0;
      var += (r2[i] / 2.0) * (r2[i] / 2.0);
    }
    mu /= 2.0;   // sum of ranks / 2
    var /= 4.0;  // sum of squared ranks / 4
    const double cc = 0.5;
    if (tail == Tail::Greater)
      res.p = 1.0 - normal_cdf((res.w - mu - cc) / std::sqrt(var));
    else
      res.p = normal_cdf((res.w - mu + cc) / std::sqrt(var));
  }
  return res;
}

struct SignTestResult {
  int positive = 0;
  int n_used = 0;
  double p = 1;
};

/// Exact one-sided sign test: binomial tail on the count of positive
/// differences, ties dropped.
inline SignTestResult sign_test_one_sided(const std::vector<double>& x,
                                          const std::vector<double>& y, Tail tail) {
  if (x.size() != y.size()) throw ContractError("sign_test_one_sided: length mismatch");
  int k = 0, m = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double v = x[i] - y[i];
    if (v == 0) continue;
    ++m;
    if (v > 0) ++k;
  }
  if (m == 0) throw DegenerateTestError("sign_test_one_sided: all pairs tied");
  auto binom_tail_geq = [](int kk, int mm) {
    double acc = 0;
    for (int j = kk; j <= mm; ++j)
      acc += std::exp(std::lgamma(mm + 1.0) - std::lgamma(j + 1.0) -
                      std::lgamma(mm - j + 1.0) - mm * std::log(2.0));
    return std::min(acc, 1.0);
  };
  SignTestResult r;
  r.positive = k;
  r.n_used = m;
  r.p = tail == Tail::Greater ? binom_tail_geq(k, m) : binom_tail_geq(m - k, m);
  return r;
}

struct RegressionResult {
  double beta0 = 0, beta1 = 0;
  double se = 0;      // standard error of beta1
  double t = 0;
  double p = 1;       // two-sided test of beta1 == 0
  double r2 = 0, adj_r2 = 0;
  int n = 0;
};

/// Ordinary least squares y = b0 + b1 x with the slope t-test and the
/// goodness-of-fit numbers the analysis captions report.
inline RegressionResult linreg_slope_test(const std::vector<double>& x,
                                          const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3)
    throw ContractError("linreg_slope_test: need >= 3 paired points");
  const int n = static_cast<int>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw DegenerateTestError("linreg_slope_test: constant regressor");
  RegressionResult r;
  r.n = n;
  r.beta1 = sxy / sxx;
  r.beta0 = my - r.beta1 * mx;
  double rss = 0;
  for (int i = 0; i < n; ++i) {
    const double e = y[i] - (r.beta0 + r.beta1 * x[i]);
    rss += e * e;
  }
  const double sigma2 = rss / (n - 2);
  r.se = std::sqrt(sigma2 / sxx);
  if (syy == 0) {
    // constant response: zero slope by construction
    r.r2 = 0;
    r.adj_r2 = 0;
    r.t = 0;
    r.p = 1;
    return r;
  }
  r.r2 = 1.0 - rss / syy;
  r.adj_r2 = 1.0 - (1.0 - r.r2) * (n - 1.0) / (n - 2.0);
  if (r.se == 0) {
    r.t = std::numeric_limits<double>::infinity();
    r.p = 0;
    return r;
  }
  r.t = r.beta1 / r.se;
  r.p = 2.0 * (1.0 - student_t_cdf(std::abs(r.t), n - 2));
  return r;
}

}  // namespace rpcnet::stats
