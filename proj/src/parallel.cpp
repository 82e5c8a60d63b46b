#include "probcast/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <future>
#include <thread>
#include <vector>

namespace probcast {

std::size_t default_thread_count() {
    if (const char* env = std::getenv("PROBCAST_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return std::min<std::size_t>(hw, 8);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (threads == 0) threads = default_thread_count();
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::future<void>> futures;
    futures.reserve(threads);
    std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        std::size_t begin = t * chunk;
        std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        futures.push_back(std::async(std::launch::async, [begin, end, &fn] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        }));
    }
    for (auto& f : futures) f.get();
}

}  // namespace probcast
