#include "slate_forge/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace slate_forge {

namespace {

std::size_t initial_threads() noexcept {
    if (const char* env = std::getenv("SLATE_FORGE_THREADS")) {
        try {
            const long value = std::stol(env);
            if (value > 0) return static_cast<std::size_t>(value);
        } catch (...) {
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::atomic<std::size_t>& thread_cap() {
    static std::atomic<std::size_t> cap{initial_threads()};
    return cap;
}

}  // namespace

std::size_t max_threads() noexcept { return thread_cap().load(std::memory_order_relaxed); }

void set_max_threads(std::size_t n) noexcept {
    thread_cap().store(std::max<std::size_t>(1, n), std::memory_order_relaxed);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(max_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

double pairwise_sum(std::span<const double> values) noexcept {
    if (values.size() <= 8) {
        double total = 0.0;
        for (double v : values) total += v;
        return total;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::vector<double> pairwise_sum(std::span<const std::vector<double>> vectors) {
    if (vectors.empty()) return {};
    if (vectors.size() == 1) return vectors.front();
    const std::size_t half = vectors.size() / 2;
    std::vector<double> left = pairwise_sum(vectors.first(half));
    const std::vector<double> right = pairwise_sum(vectors.subspan(half));
    for (std::size_t j = 0; j < left.size(); ++j) left[j] += right[j];
    return left;
}

}  // namespace slate_forge
