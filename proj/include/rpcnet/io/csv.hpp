#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "rpcnet/common.hpp"

namespace rpcnet::io {

/// Minimal CSV writer: header row then numeric rows, '.' decimal point,
/// newline-terminated. Output is deterministic for identical inputs.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw InputError("cannot write: " + path);
    out_ << std::setprecision(9);
  }

  void header(const std::vector<std::string>& cols) { row_strings(cols); }

  template <class... Ts>
  void row(Ts... vals) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, out_ << vals), ...);
    out_ << "\n";
  }

  void row_strings(const std::vector<std::string>& vals) {
    for (size_t i = 0; i < vals.size(); ++i)
      out_ << (i ? "," : "") << vals[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

/// Column-per-channel dump of a signal matrix with a time column.
inline void write_signal_csv(const std::string& path, const Eigen::MatrixXf& m,
                             double rate_hz, const std::string& prefix) {
  CsvWriter csv(path);
  std::vector<std::string> hdr = {"time_s"};
  for (int r = 0; r < m.rows(); ++r) hdr.push_back(prefix + std::to_string(r));
  csv.header(hdr);
  for (int c = 0; c < m.cols(); ++c) {
    std::vector<std::string> row = {std::to_string(c / rate_hz)};
    for (int r = 0; r < m.rows(); ++r) row.push_back(std::to_string(m(r, c)));
    csv.row_strings(row);
  }
}

}  // namespace rpcnet::io
