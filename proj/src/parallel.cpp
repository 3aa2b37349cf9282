#include "ietidg/parallel.hpp"

#include "ietidg/errors.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ietidg {

namespace {
std::atomic<int> g_jobs{1};
}

void set_num_jobs(int jobs) {
    if (jobs < 1) throw ParameterError("jobs must be >= 1");
    g_jobs = jobs;
}

int num_jobs() { return g_jobs; }

void parallel_for(int n, const std::function<void(int)>& body) {
    const int workers = std::min(g_jobs.load(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace ietidg
