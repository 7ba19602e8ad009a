// Unit conventions used throughout:
//   time               microseconds (us)
//   angular frequency  rad/us
//   ordinary frequency MHz  (1 MHz = 2*pi rad/us)
//   magnetic field     tesla
//   spectral density   rad/us (one-sided, angular-frequency argument)

#pragma once

#include <stdexcept>
#include <string>

namespace spinspec {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

constexpr double mhz_to_rad_per_us(double f_mhz) { return kTwoPi * f_mhz; }
constexpr double rad_per_us_to_mhz(double omega) { return omega / kTwoPi; }

// Error categories map onto the CLI exit codes (2, 3, 4).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace spinspec
