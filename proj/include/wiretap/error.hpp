#pragma once

#include <stdexcept>
#include <string>

namespace wiretap {

enum class ErrorKind {
  zero_element,
  invalid_seed,
  dimension,
  infeasible_size,
  empty_set,
  divergence,
  too_few_samples,
  short_trace,
  infeasible,
  non_degraded,
  out_of_range,
  configuration,
  missing_model,
  unknown_tag,
  io,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace wiretap
