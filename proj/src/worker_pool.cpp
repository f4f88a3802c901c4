#include "smmconv/worker_pool.hpp"

#include <algorithm>
#include <stdexcept>

namespace smmconv {

WorkerPool::WorkerPool(std::size_t workers) : size_(workers) {
  if (workers < 1) throw std::invalid_argument("worker count must be >= 1");
  threads_.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w)
    threads_.emplace_back([this, w] { worker_loop(w); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  start_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::run(const Task& task) {
  {
    std::lock_guard lock(mutex_);
    task_ = &task;
    barrier_ = std::make_unique<PhaseBarrier>(std::ptrdiff_t(size_));
    error_ = nullptr;
    pending_ = size_ - 1;
    ++generation_;
  }
  start_cv_.notify_all();
  execute(0);

  std::unique_lock lock(mutex_);
  done_cv_.wait(lock, [this] { return pending_ == 0; });
  task_ = nullptr;
  barrier_.reset();
  if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
}

void WorkerPool::parallel_for(
    std::size_t n,
    const std::function<void(std::size_t, std::size_t)>& body) {
  run([&](std::size_t worker, PhaseBarrier&) {
    const Partition part = partition(n, size_, worker);
    if (part.begin < part.end) body(part.begin, part.end);
  });
}

void WorkerPool::worker_loop(std::size_t worker) {
  std::size_t seen = 0;
  for (;;) {
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
    }
    execute(worker);
    {
      std::lock_guard lock(mutex_);
      --pending_;
    }
    done_cv_.notify_one();
  }
}

void WorkerPool::execute(std::size_t worker) noexcept {
  try {
    (*task_)(worker, *barrier_);
  } catch (...) {
    {
      std::lock_guard lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
    barrier_->arrive_and_drop();
  }
}

Partition partition(std::size_t total, std::size_t workers,
                    std::size_t worker) {
  const std::size_t chunk = (total + workers - 1) / workers;
  const std::size_t begin = std::min(total, worker * chunk);
  const std::size_t end = std::min(total, begin + chunk);
  return {begin, end};
}

std::size_t default_thread_count() {
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace smmconv
