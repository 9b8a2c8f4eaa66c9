#pragma once

namespace htr {

/// Keeps large training buffers on the heap instead of fresh mmap'd pages per step.
/// No effect outside glibc.
void tune_allocator();

}  // namespace htr
