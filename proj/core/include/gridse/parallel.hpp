#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gridse {

/// Fixed-size worker pool. The calling thread always takes part in
/// parallel_for, so nested calls from inside a task cannot deadlock: a
/// waiting caller only ever waits on chunks that another thread is
/// actively running.
class ThreadPool {
  public:
    /// `workers` counts the calling thread; 1 means everything runs inline.
    explicit ThreadPool(std::size_t workers = 1);
    ~ThreadPool();

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    std::size_t size() const noexcept { return threads_.size() + 1; }

    /// Calls fn(begin, end) over disjoint chunks covering [0, n). Chunks are
    /// at least `grain` long. Blocks until all chunks finished; rethrows the
    /// first exception raised by any chunk.
    void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                      std::size_t grain = 1);

  private:
    void worker_loop();
    void enqueue(std::function<void()> job);

    std::vector<std::thread> threads_;
    std::deque<std::function<void()>> queue_;
    std::mutex mutex_;
    std::condition_variable cv_;
    bool stopping_ = false;
};

/// Runs fn over [0, n) on `pool` when given, inline otherwise.
inline void for_each_chunk(ThreadPool* pool, std::size_t n,
                           const std::function<void(std::size_t, std::size_t)>& fn,
                           std::size_t grain = 1) {
    if (pool == nullptr || pool->size() == 1 || n <= grain) {
        if (n > 0) fn(0, n);
        return;
    }
    pool->parallel_for(n, fn, grain);
}

}  // namespace gridse
