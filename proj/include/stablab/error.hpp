#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stablab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed window, box or region.
struct ConfigError : Error {
  using Error::Error;
};

/// Density violates its declared sup bound or is negative.
struct DensityError : Error {
  using Error::Error;
};

/// Score or statistic parameters outside their documented range.
struct SpecError : Error {
  using Error::Error;
};

struct InsufficientPointsError : Error {
  InsufficientPointsError(std::size_t needed, std::size_t available)
      : Error("need " + std::to_string(needed) + " other points, have " +
              std::to_string(available)),
        deficit(needed - available) {}
  std::size_t deficit;
};

struct DegenerateSimplexError : Error {
  using Error::Error;
};

/// Brute-force enumeration would exceed the configured size cap.
struct CapacityError : Error {
  using Error::Error;
};

/// Singular or ill-posed numerical problem (whitening, rate fits).
struct NumericError : Error {
  using Error::Error;
};

}  // namespace stablab
