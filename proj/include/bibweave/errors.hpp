#ifndef BIBWEAVE_ERRORS_HPP
#define BIBWEAVE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bibweave {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Invalid configuration values or references. The message names the
/// offending field.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(message) {}
};

}  // namespace bibweave

#endif  // BIBWEAVE_ERRORS_HPP
