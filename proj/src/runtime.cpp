#include "wiretap/runtime.hpp"

#include <malloc.h>

namespace wiretap {

void configure_allocator() {
  constexpr int kThreshold = 1 << 30;
  mallopt(M_MMAP_THRESHOLD, kThreshold);
  mallopt(M_TRIM_THRESHOLD, kThreshold);
}

}  // namespace wiretap
