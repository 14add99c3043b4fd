#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace pollstrat {

/// 0 means "one per hardware thread".
inline std::size_t resolve_threads(std::size_t requested)
{
    if (requested != 0) {
        return requested;
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Reads POLLSTRAT_THREADS; unset or unparsable falls back to `fallback`.
inline std::size_t threads_from_env(std::size_t fallback = 0)
{
    char const* raw = std::getenv("POLLSTRAT_THREADS");
    if (raw == nullptr || *raw == '\0') {
        return fallback;
    }
    try {
        return static_cast<std::size_t>(std::stoul(raw));
    } catch (...) {
        return fallback;
    }
}

/// Calls fn(i) for i in [0, n) on up to `threads` workers. Work items are
/// handed out dynamically, so fn must only write to per-index state. The
/// first exception thrown by any worker is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn)
{
    threads = std::min(resolve_threads(threads), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> workers;
        workers.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            workers.emplace_back([&] {
                while (!failed.load(std::memory_order_relaxed)) {
                    auto const i = next.fetch_add(1);
                    if (i >= n) {
                        return;
                    }
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) {
                            error = std::current_exception();
                        }
                        failed = true;
                    }
                }
            });
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace pollstrat
