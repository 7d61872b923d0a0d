#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pavg::detail {

/// Fixed set of threads that run `fn(i)` for i in [0, n) and return when
/// every index is done. With one thread the calling thread does the work.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  /// Runs all indices; rethrows the exception of the lowest failing index.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  void thread_main(std::size_t slot);

  std::size_t thread_count_ = 0;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::size_t task_size_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stopping_ = false;
  std::vector<std::exception_ptr> errors_;
};

}  // namespace pavg::detail
