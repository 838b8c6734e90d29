#include "iforge/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace iforge {

std::size_t thread_budget() {
    static const std::size_t budget = [] {
        if (const char* env = std::getenv("INTERP_FORGE_THREADS")) {
            try {
                const long v = std::stol(env);
                return static_cast<std::size_t>(std::max(1L, v));
            } catch (...) {
                // fall through to the hardware default on unparseable values
            }
        }
        const unsigned hc = std::thread::hardware_concurrency();
        return static_cast<std::size_t>(hc == 0 ? 1 : hc);
    }();
    return budget;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(thread_budget(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (std::thread& t : pool) t.join();
}

} // namespace iforge
