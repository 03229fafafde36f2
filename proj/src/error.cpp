#include "wiretap/error.hpp"

namespace wiretap {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::zero_element: return "zero element";
    case ErrorKind::invalid_seed: return "invalid seed";
    case ErrorKind::dimension: return "dimension mismatch";
    case ErrorKind::infeasible_size: return "infeasible size";
    case ErrorKind::empty_set: return "empty set";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::too_few_samples: return "too few samples";
    case ErrorKind::short_trace: return "short trace";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::non_degraded: return "non-degraded channel";
    case ErrorKind::out_of_range: return "out of range";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::missing_model: return "missing model";
    case ErrorKind::unknown_tag: return "unknown tag";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

}  // namespace wiretap
