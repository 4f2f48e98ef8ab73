#include "gridse/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <memory>

namespace gridse {

ThreadPool::ThreadPool(std::size_t workers) {
    const std::size_t extra = workers > 1 ? workers - 1 : 0;
    threads_.reserve(extra);
    for (std::size_t i = 0; i < extra; ++i) {
        threads_.emplace_back([this] { worker_loop(); });
    }
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
}

void ThreadPool::worker_loop() {
    for (;;) {
        std::function<void()> job;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            job = std::move(queue_.front());
            queue_.pop_front();
        }
        job();
    }
}

void ThreadPool::enqueue(std::function<void()> job) {
    {
        std::lock_guard lock(mutex_);
        queue_.push_back(std::move(job));
    }
    cv_.notify_one();
}

namespace {

struct LoopState {
    std::size_t n = 0;
    std::size_t chunk = 1;
    std::size_t chunk_count = 0;
    std::atomic<std::size_t> next{0};
    std::size_t done = 0;
    std::exception_ptr error;
    std::mutex mutex;
    std::condition_variable cv;
    const std::function<void(std::size_t, std::size_t)>* fn = nullptr;

    // Claims and runs chunks until none are left.
    void drain() {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= chunk_count) return;
            const std::size_t begin = c * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            std::exception_ptr err;
            try {
                (*fn)(begin, end);
            } catch (...) {
                err = std::current_exception();
            }
            std::lock_guard lock(mutex);
            if (err && !error) error = err;
            if (++done == chunk_count) cv.notify_all();
        }
    }
};

}  // namespace

void ThreadPool::parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                              std::size_t grain) {
    if (n == 0) return;
    grain = std::max<std::size_t>(grain, 1);
    const std::size_t workers = size();
    if (workers == 1 || n <= grain) {
        fn(0, n);
        return;
    }

    auto state = std::make_shared<LoopState>();
    state->n = n;
    state->chunk = std::max(grain, (n + workers * 4 - 1) / (workers * 4));
    state->chunk_count = (n + state->chunk - 1) / state->chunk;
    state->fn = &fn;

    const std::size_t helpers = std::min(threads_.size(), state->chunk_count - 1);
    for (std::size_t i = 0; i < helpers; ++i) {
        // Late helpers find no chunks left and return without touching fn.
        enqueue([state] { state->drain(); });
    }
    state->drain();

    std::unique_lock lock(state->mutex);
    state->cv.wait(lock, [&] { return state->done == state->chunk_count; });
    if (state->error) std::rethrow_exception(state->error);
}

}  // namespace gridse
