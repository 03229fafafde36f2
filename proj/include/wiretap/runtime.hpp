#pragma once

namespace wiretap {

// Keeps large Eigen temporaries on the heap instead of returning them to the
// kernel after every batch. Call once at program start.
void configure_allocator();

}  // namespace wiretap
