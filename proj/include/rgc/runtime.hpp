#pragma once

// Process-level setup for the long-running binaries.

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace rgc {

/// Keeps freed tensor buffers inside the heap instead of returning them to
/// the kernel. Training reallocates the same large activation buffers on
/// every step, and fresh pages cost far more than the arithmetic on them.
/// No-op outside glibc.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, -1);
#endif
}

}  // namespace rgc
