#pragma once

#include <stdexcept>
#include <string>

namespace tbcal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid or mutually inconsistent configuration values.
struct ConfigError : Error {
  using Error::Error;
};

/// Malformed or mismatched input data (traces, records, files).
struct DataError : Error {
  using Error::Error;
};

/// Parameters outside the operating regimes the estimators support.
struct RegimeUnsupported : Error {
  using Error::Error;
};

/// Estimator denominator statistically consistent with zero.
struct DegenerateDenominator : Error {
  using Error::Error;
};

}  // namespace tbcal
