#include "dentofuse/parallel.hpp"

#include <atomic>

namespace dfuse {

namespace {
std::atomic<int> g_threads{0};
}

void set_thread_count(int n) { g_threads.store(n < 0 ? 0 : n); }

int thread_count() {
    int n = g_threads.load();
    if (n == 0) {
        unsigned hc = std::thread::hardware_concurrency();
        n = hc == 0 ? 1 : int(hc);
    }
    return n;
}

void parallel_for_chunked(std::size_t n,
                          const std::function<void(std::size_t, std::size_t)>& fn) {
    int workers = thread_count();
    if (n == 0) return;
    if (workers <= 1 || n < 1024) {
        fn(0, n);
        return;
    }
    std::size_t w = std::min<std::size_t>(std::size_t(workers), n);
    std::size_t chunk = (n + w - 1) / w;
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        std::size_t b = t * chunk;
        std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    parallel_for_chunked(n, [&fn](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

}  // namespace dfuse
