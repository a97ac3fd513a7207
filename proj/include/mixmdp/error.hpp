#pragma once

#include <stdexcept>
#include <string>

namespace mixmdp {

/// Raised for contract violations and stage failures anywhere in the pipeline.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace mixmdp
