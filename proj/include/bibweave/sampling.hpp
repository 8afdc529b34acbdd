#ifndef BIBWEAVE_SAMPLING_HPP
#define BIBWEAVE_SAMPLING_HPP

#include <cstdio>
#include <optional>
#include <string>

#include "bibweave/errors.hpp"

namespace bibweave {

namespace detail {

/// Fixed 6-decimal rendering used wherever sampling reals enter canonical
/// serializations (fingerprints, config keys).
inline std::string format_real6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

}  // namespace detail

/// One sampling configuration of the sweep. `repeat_index` distinguishes
/// repetitions under identical sampling parameters.
struct GenerationConfig {
  double temperature = 0.0;
  std::optional<int> top_k;
  double top_p = 1.0;
  int repeat_index = 0;

  void validate() const {
    if (temperature < 0.0 || temperature > 2.0) {
      throw ConfigError("temperature must be in [0, 2], got " +
                        detail::format_real6(temperature));
    }
    if (top_k.has_value() && *top_k < 1) {
      throw ConfigError("top_k must be >= 1 when present, got " +
                        std::to_string(*top_k));
    }
    if (!(top_p > 0.0) || top_p > 1.0) {
      throw ConfigError("top_p must be in (0, 1], got " +
                        detail::format_real6(top_p));
    }
    if (repeat_index < 0) {
      throw ConfigError("repeat_index must be non-negative");
    }
  }

  bool operator==(const GenerationConfig& other) const = default;
};

}  // namespace bibweave

#endif  // BIBWEAVE_SAMPLING_HPP
