#include "qmc/parallel.hpp"

#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace qmc {

unsigned effective_threads() {
    if (const char* env = std::getenv("QMC_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

void parallel_for_chunks(size_t n, unsigned threads,
                         const std::function<void(size_t, size_t)>& body) {
    if (n == 0) return;
    if (threads > n) threads = static_cast<unsigned>(n);
    if (threads <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        const size_t begin = n * t / threads;
        const size_t end = n * (t + 1) / threads;
        pool.emplace_back([&, t, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

void parallel_for_chunks(size_t n, const std::function<void(size_t, size_t)>& body) {
    parallel_for_chunks(n, effective_threads(), body);
}

} // namespace qmc
