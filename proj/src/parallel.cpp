#include "ptlab/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ptlab {

int eval_worker_count() {
    if (const char* env = std::getenv("PT_LAB_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_ranges(size_t n, const std::function<void(size_t, size_t, int)>& fn) {
    if (n == 0) return;
    int workers = std::min<size_t>(static_cast<size_t>(eval_worker_count()), n);
    if (workers <= 1) {
        fn(0, n, 0);
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers));
    size_t chunk = (n + static_cast<size_t>(workers) - 1) / static_cast<size_t>(workers);
    for (int w = 0; w < workers; ++w) {
        size_t begin = static_cast<size_t>(w) * chunk;
        size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&, begin, end, w] {
            try {
                fn(begin, end, w);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ptlab
