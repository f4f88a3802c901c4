#pragma once

#include <barrier>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace smmconv {

/// Full barrier shared by the workers of one WorkerPool::run call.
class PhaseBarrier {
 public:
  explicit PhaseBarrier(std::ptrdiff_t workers) : barrier_(workers) {}
  void arrive_and_wait() { barrier_.arrive_and_wait(); }
  void arrive_and_drop() { barrier_.arrive_and_drop(); }

 private:
  std::barrier<> barrier_;
};

/// Fixed set of workers running one SPMD task at a time. The calling thread
/// acts as worker 0, so a pool of size 1 spawns no threads.
///
/// A worker whose task throws drops out of the barrier so the others can
/// finish; the first exception is rethrown from run().
class WorkerPool {
 public:
  using Task = std::function<void(std::size_t worker, PhaseBarrier& barrier)>;

  explicit WorkerPool(std::size_t workers);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const { return size_; }

  void run(const Task& task);

  /// Splits [0, n) into size() contiguous chunks, one per worker.
  void parallel_for(std::size_t n,
                    const std::function<void(std::size_t begin,
                                             std::size_t end)>& body);

 private:
  void worker_loop(std::size_t worker);
  void execute(std::size_t worker) noexcept;

  std::size_t size_;
  std::vector<std::thread> threads_;

  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stopping_ = false;
  const Task* task_ = nullptr;
  std::unique_ptr<PhaseBarrier> barrier_;
  std::exception_ptr error_;
};

/// Contiguous range [begin, end) of `total` items owned by `worker` when the
/// items are split into chunks of ceil(total / workers).
struct Partition {
  std::size_t begin = 0;
  std::size_t end = 0;
};
Partition partition(std::size_t total, std::size_t workers, std::size_t worker);

std::size_t default_thread_count();

}  // namespace smmconv
