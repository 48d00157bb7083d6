#pragma once

#include <stdexcept>
#include <string>

namespace rpcnet {

inline constexpr const char* kVersion = "0.1.0";

/// Caller broke an interface contract (wrong sizes, non-finite values, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Bad input data: missing files, malformed containers, invalid configuration.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unknown variant code, inconsistent plan, bad model config.
struct ConfigError : InputError {
  using InputError::InputError;
};

/// Corrupt or truncated on-disk container.
struct DataFormatError : InputError {
  using InputError::InputError;
};

/// Numerical failure at runtime (non-finite loss, degenerate geometry, ...).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Statistical test cannot be computed on the given sample (zero variance,
/// empty after dropping ties, ...).
struct DegenerateTestError : NumericError {
  using NumericError::NumericError;
};

}  // namespace rpcnet
