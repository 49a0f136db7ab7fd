#include "noisecast/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace noisecast {

namespace {
std::atomic<int> g_workers{0};

int env_workers() {
    if (const char* s = std::getenv("NOISECAST_WORKERS")) {
        int v = std::atoi(s);
        if (v >= 1) return v;
    }
    return 0;
}
}  // namespace

int default_workers() {
    int w = g_workers.load();
    if (w >= 1) return w;
    if (int e = env_workers(); e >= 1) return e;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

void set_default_workers(int workers) { g_workers.store(workers); }

void parallel_for(long n, const std::function<void(long)>& fn, int workers) {
    if (n <= 0) return;
    if (workers <= 0) workers = default_workers();
    if (workers > n) workers = static_cast<int>(n);
    if (workers <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) return;
            long i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace noisecast
