#pragma once

#include <stdexcept>
#include <string>

namespace wis {

/// Invalid configuration or input. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace wis
