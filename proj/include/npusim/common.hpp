#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace npusim {

using Cycle = std::uint64_t;
using Vpn = std::uint64_t;
using FrameNumber = std::uint64_t;

// Raised for configuration/precondition violations that a caller can report
// and recover from (bad config values, overlapping segments, double maps).
class SimError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

constexpr std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

} // namespace npusim
