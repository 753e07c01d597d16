#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ssmgan {

/// Keeps large tensor buffers on the heap instead of fresh mmap regions.
/// Training allocates and frees many equal-sized buffers per step, and
/// without this each one costs a round of page faults.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace ssmgan
