#include "worker_pool.hpp"

namespace pavg::detail {

WorkerPool::WorkerPool(std::size_t threads) {
  if (threads <= 1) return;
  thread_count_ = threads;
  threads_.reserve(threads);
  for (std::size_t slot = 0; slot < threads; ++slot) threads_.emplace_back([this, slot] { thread_main(slot); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  start_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  errors_.assign(n, nullptr);
  if (threads_.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors_[i] = std::current_exception();
      }
    }
  } else {
    std::unique_lock lock(mutex_);
    task_ = &fn;
    task_size_ = n;
    pending_ = thread_count_;
    ++generation_;
    start_cv_.notify_all();
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    task_ = nullptr;
  }
  for (const auto& error : errors_) {
    if (error) std::rethrow_exception(error);
  }
}

void WorkerPool::thread_main(std::size_t slot) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t)>* task;
    std::size_t n;
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      task = task_;
      n = task_size_;
    }
    // Static striding: slot s handles indices s, s + T, s + 2T, ...
    for (std::size_t i = slot; i < n; i += thread_count_) {
      try {
        (*task)(i);
      } catch (...) {
        errors_[i] = std::current_exception();
      }
    }
    {
      std::lock_guard lock(mutex_);
      if (--pending_ == 0) done_cv_.notify_one();
    }
  }
}

}  // namespace pavg::detail
