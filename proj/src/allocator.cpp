#include "maflow/allocator.hpp"

#include <cstdlib>  // defines __GLIBC__ where applicable

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace maflow {

void configure_allocator() {
#if defined(__GLIBC__)
    // Both are needed: a fixed mmap threshold alone turns off glibc's
    // adaptive trimming and makes things worse.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace maflow
