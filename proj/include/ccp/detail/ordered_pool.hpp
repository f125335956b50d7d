#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace ccp {

template <typename T>
void run_ordered(std::size_t count, std::size_t threads, const std::function<T(std::size_t)>& work,
                 const std::function<void(std::size_t, T&&)>& sink) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = std::min(threads, std::max<std::size_t>(count, 1));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            sink(i, work(i));
        }
        return;
    }

    std::vector<std::optional<T>> slots(count);
    std::mutex mu;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;

    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= count || failed.load()) {
                return;
            }
            try {
                T value = work(i);
                std::lock_guard lock(mu);
                slots[i] = std::move(value);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) {
                    error = std::current_exception();
                }
                failed = true;
            }
            ready.notify_all();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back(worker);
    }

    std::exception_ptr sink_error;
    try {
        for (std::size_t i = 0; i < count; ++i) {
            std::unique_lock lock(mu);
            ready.wait(lock, [&] { return slots[i].has_value() || failed.load(); });
            if (failed.load()) {
                break;
            }
            T value = std::move(*slots[i]);
            slots[i].reset();
            lock.unlock();
            sink(i, std::move(value));
        }
    } catch (...) {
        sink_error = std::current_exception();
        failed = true;
    }
    for (auto& t : pool) {
        t.join();
    }
    if (sink_error) {
        std::rethrow_exception(sink_error);
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace ccp
