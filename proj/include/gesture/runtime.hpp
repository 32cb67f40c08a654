#pragma once

namespace gesture {

/// Keeps large tensor buffers in the heap instead of mapping and unmapping
/// them on every allocation. No-op outside glibc.
void configure_allocator();

}  // namespace gesture
