#pragma once

#include <cstddef>
#include <optional>
#include <type_traits>

namespace pcdan {

/// Worker count from an explicit request, else the PCDAN_THREADS environment
/// variable, else the hardware concurrency. Always at least 1.
std::size_t resolve_threads(std::optional<std::size_t> requested = std::nullopt);

namespace detail {
void run_chunks(std::size_t n, std::size_t threads, void (*fn)(void*, std::size_t, std::size_t),
                void* ctx);
}

/// Calls body(i) for i in [0, n) using up to `threads` workers. Each index is
/// visited exactly once; callers write results into per-index slots so the
/// outcome does not depend on scheduling.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  detail::run_chunks(
      n, threads,
      [](void* ctx, std::size_t begin, std::size_t end) {
        auto& b = *static_cast<std::remove_reference_t<Body>*>(ctx);
        for (std::size_t i = begin; i < end; ++i) {
          b(i);
        }
      },
      &body);
}

}  // namespace pcdan
