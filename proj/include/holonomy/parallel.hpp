#pragma once
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace holonomy {

// Index-parallel loop with order-stable semantics: f(i) must write only to
// slot i of its output. The first exception thrown wins and is rethrown on
// the calling thread.
template <class F>
void parallel_for(int n, int jobs, F&& f) {
    if (n <= 0) return;
    if (jobs <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr err;
    std::mutex err_mx;
    const int J = std::min(jobs, n);
    std::vector<std::thread> pool;
    pool.reserve(J);
    for (int t = 0; t < J; ++t) {
        pool.emplace_back([&] {
            int i;
            while (!failed.load(std::memory_order_relaxed) && (i = next.fetch_add(1)) < n) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mx);
                    if (!err) err = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace holonomy
