#pragma once

#include <cstddef>
#include <functional>
#include <memory>

namespace muffin {

/// Fixed-size worker pool for the master/worker phases of an iteration.
///
/// for_each(count, fn) runs fn(0) ... fn(count - 1), each index exactly once,
/// and returns after all of them finished (a barrier). Tasks must write to
/// disjoint outputs; every cross-task reduction is done by the caller in index
/// order afterwards, which keeps results bitwise identical for any worker
/// count.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers = 1);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t workers() const noexcept { return workers_; }

  void for_each(std::size_t count,
                const std::function<void(std::size_t)>& fn) const;

  /// min(bands, hardware threads), at least 1.
  static std::size_t default_workers(std::size_t bands);

 private:
  struct Arena;
  std::size_t workers_;
  std::unique_ptr<Arena> arena_;
};

}  // namespace muffin
