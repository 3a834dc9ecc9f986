#include "muffin/parallel.hpp"

#include <algorithm>
#include <thread>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/partitioner.h>
#include <tbb/task_arena.h>

#include "muffin/error.hpp"

namespace muffin {

struct WorkerPool::Arena {
  explicit Arena(int concurrency) : arena(concurrency) {}
  tbb::task_arena arena;
};

WorkerPool::WorkerPool(std::size_t workers) : workers_(workers) {
  if (workers_ == 0) throw ConfigError("worker count must be at least 1");
  if (workers_ > 1) {
    arena_ = std::make_unique<Arena>(static_cast<int>(workers_));
  }
}

WorkerPool::~WorkerPool() = default;

void WorkerPool::for_each(std::size_t count,
                          const std::function<void(std::size_t)>& fn) const {
  if (!arena_ || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  arena_->arena.execute([&] {
    tbb::parallel_for(
        tbb::blocked_range<std::size_t>(0, count, 1),
        [&](const tbb::blocked_range<std::size_t>& range) {
          for (std::size_t i = range.begin(); i != range.end(); ++i) fn(i);
        },
        tbb::simple_partitioner());
  });
}

std::size_t WorkerPool::default_workers(std::size_t bands) {
  const std::size_t cores =
      std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(bands, cores));
}

}  // namespace muffin
