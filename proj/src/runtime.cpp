#include "gesture/runtime.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gesture {

void configure_allocator() {
#if defined(__GLIBC__)
  constexpr int kLarge = 1 << 30;
  mallopt(M_MMAP_THRESHOLD, kLarge);
  mallopt(M_TRIM_THRESHOLD, kLarge);
  mallopt(M_TOP_PAD, 1 << 26);
#endif
}

}  // namespace gesture
