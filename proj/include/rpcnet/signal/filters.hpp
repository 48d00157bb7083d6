#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "rpcnet/common.hpp"

namespace rpcnet::sig {

/// Causal moving average with a shrinking window at the start: output i is
/// the mean of inputs max(0, i-order+1) .. i. DC gain is exactly 1.
inline Eigen::MatrixXf moving_average(const Eigen::MatrixXf& in, int order) {
  if (order < 1) throw ContractError("moving_average: order must be >= 1");
  Eigen::MatrixXf out(in.rows(), in.cols());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(in.rows());
  for (int i = 0; i < in.cols(); ++i) {
    acc += in.col(i).cast<double>();
    if (i >= order) acc -= in.col(i - order).cast<double>();
    const int n = std::min(i + 1, order);
    out.col(i) = (acc / n).cast<float>();
  }
  return out;
}

/// Piecewise-linear resampling of column signals sampled at `tx` onto query
/// times `tq`; outside the source span the edge value is held.
inline Eigen::MatrixXf linear_resample(const Eigen::MatrixXf& y,
                                       const std::vector<double>& tx,
                                       const std::vector<double>& tq) {
  if (static_cast<int>(tx.size()) != y.cols())
    throw ContractError("linear_resample: time/sample count mismatch");
  if (tx.size() < 2) throw ContractError("linear_resample: need >= 2 samples");
  Eigen::MatrixXf out(y.rows(), static_cast<int>(tq.size()));
  size_t k = 0;
  for (size_t i = 0; i < tq.size(); ++i) {
    const double t = tq[i];
    if (t <= tx.front()) { out.col(i) = y.col(0); continue; }
    if (t >= tx.back()) { out.col(i) = y.col(y.cols() - 1); continue; }
    while (tx[k + 1] < t) ++k;
    const double w = (t - tx[k]) / (tx[k + 1] - tx[k]);
    out.col(i) = (y.col(k).cast<double>() * (1.0 - w) +
                  y.col(k + 1).cast<double>() * w).cast<float>();
  }
  return out;
}

/// Low-pass Butterworth IIR filter, impulse-invariant discretization.
///
/// Impulse invariance keeps the digital magnitude response on the analog
/// frequency axis (|H(e^{j2*pi*f/fs})| ~ (1 + (f/fc)^(2n))^(-1/2)), which a
/// bilinear transform would warp noticeably one decade above cutoff. With
/// fc << fs the aliasing term is ~(fs/fc)^(-n). Coefficients are normalized
/// to exact unity DC gain.
class ButterworthLowpass {
 public:
  ButterworthLowpass(int order, double cutoff_hz, double fs_hz)
      : order_(order) {
    if (order < 1 || cutoff_hz <= 0 || fs_hz <= 2 * cutoff_hz)
      throw ContractError("ButterworthLowpass: invalid design parameters");
    using C = std::complex<double>;
    const double wc = 2.0 * M_PI * cutoff_hz;
    const double ts = 1.0 / fs_hz;
    std::vector<C> s(order), p(order);
    for (int k = 0; k < order; ++k) {
      const double ang = M_PI * (2.0 * (k + 1) + order - 1.0) / (2.0 * order);
      s[k] = wc * C(std::cos(ang), std::sin(ang));
      p[k] = std::exp(s[k] * ts);
    }
    // partial fractions of wc^n / prod(s - s_k)
    std::vector<C> res(order);
    for (int k = 0; k < order; ++k) {
      C d = 1.0;
      for (int j = 0; j < order; ++j)
        if (j != k) d *= s[k] - s[j];
      res[k] = std::pow(C(wc, 0), order) / d;
    }
    // H(z) = sum_k (res_k * ts) / (1 - p_k z^-1), recombined over the common
    // denominator with complex polynomial arithmetic
    auto poly_mul = [](const std::vector<C>& a, const std::vector<C>& b) {
      std::vector<C> r(a.size() + b.size() - 1, C(0));
      for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
      return r;
    };
    std::vector<C> den = {C(1)};
    for (int k = 0; k < order; ++k) den = poly_mul(den, {C(1), -p[k]});
    std::vector<C> num(order, C(0));
    for (int k = 0; k < order; ++k) {
      std::vector<C> term = {res[k] * ts};
      for (int j = 0; j < order; ++j)
        if (j != k) term = poly_mul(term, {C(1), -p[j]});
      for (size_t i = 0; i < term.size(); ++i) num[i] += term[i];
    }
    b_.resize(order);
    a_.resize(order + 1);
    for (int i = 0; i < order; ++i) b_[i] = num[i].real();
    for (int i = 0; i <= order; ++i) a_[i] = den[i].real();
    // exact unity DC gain
    double bs = 0, as = 0;
    for (double v : b_) bs += v;
    for (double v : a_) as += v;
    for (double& v : b_) v *= as / bs;
  }

  int order() const { return order_; }
  const std::vector<double>& b() const { return b_; }
  const std::vector<double>& a() const { return a_; }

  /// Causal single-pass filtering of each row, zero initial state.
  Eigen::MatrixXf filter(const Eigen::MatrixXf& in) const {
    Eigen::MatrixXf out(in.rows(), in.cols());
    const int n = order_;
    std::vector<double> w(static_cast<size_t>(in.rows()) * n, 0.0);  // DF2T state
    for (int t = 0; t < in.cols(); ++t) {
      for (int r = 0; r < in.rows(); ++r) {
        double* st = &w[static_cast<size_t>(r) * n];
        const double x = in(r, t);
        const double y = b_[0] * x + st[0];
        for (int k = 0; k < n - 1; ++k)
          st[k] = (k + 1 < static_cast<int>(b_.size()) ? b_[k + 1] * x : 0.0) +
                  st[k + 1] - a_[k + 1] * y;
        st[n - 1] = -a_[n] * y;
        out(r, t) = static_cast<float>(y);
      }
    }
    return out;
  }

  /// |H(e^{j 2 pi f / fs})| where f is in units of fs.
  double magnitude(double f_over_fs) const {
    const std::complex<double> z = std::exp(std::complex<double>(0, -2.0 * M_PI * f_over_fs));
    std::complex<double> num(0), den(0), zp(1);
    for (size_t i = 0; i < b_.size(); ++i) { num += b_[i] * zp; zp *= z; }
    zp = 1;
    for (size_t i = 0; i < a_.size(); ++i) { den += a_[i] * zp; zp *= z; }
    return std::abs(num / den);
  }

 private:
  int order_;
  std::vector<double> b_, a_;
};

}  // namespace rpcnet::sig
