#pragma once

namespace maflow {

/// Keeps freed blocks on the heap instead of returning them to the OS.
/// Training allocates and frees the same large trajectory buffers every
/// step; with glibc defaults a quarter of the wall time goes to mmap/munmap
/// and page faults. No-op on other C libraries. Call once from main().
void configure_allocator();

}  // namespace maflow
