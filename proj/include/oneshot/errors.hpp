#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oneshot {

// Malformed configuration or input file. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Misreport enumeration larger than the configured cap. CLI exit code 3.
class MisreportCapError : public std::runtime_error {
 public:
  MisreportCapError(std::size_t count, std::size_t cap)
      : std::runtime_error("misreport enumeration of " + std::to_string(count) +
                           " vectors exceeds the configured cap of " + std::to_string(cap)),
        count(count),
        cap(cap) {}

  std::size_t count;
  std::size_t cap;
};

}  // namespace oneshot
