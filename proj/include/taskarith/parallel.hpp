#pragma once

#include <cstddef>
#include <functional>

namespace taskarith {

/// Number of worker threads used by parallel_for. Defaults to 1.
void set_thread_count(std::size_t n);
std::size_t thread_count() noexcept;

/// Calls fn(i) for i in [0, n). Work is split into contiguous chunks, one
/// per worker. Callers write into per-index slots and reduce afterwards in
/// index order, so results never depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace taskarith
