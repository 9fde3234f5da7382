#pragma once

namespace nondiss {

/// Keeps freed activation buffers in the heap instead of returning them to
/// the kernel after every tape. No-op outside glibc.
void configure_allocator();

}  // namespace nondiss
