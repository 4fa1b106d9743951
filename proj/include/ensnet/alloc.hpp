#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ensnet {

// Keeps large tensor buffers on the heap and cached between steps instead of
// mapping and unmapping them for every allocation.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
  mallopt(M_TOP_PAD, 64 * 1024 * 1024);
#endif
}

}  // namespace ensnet
