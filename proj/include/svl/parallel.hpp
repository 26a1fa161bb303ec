#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace svl {

/** Deterministic block map-reduce.
 *
 *  The index range is cut into fixed-size blocks; each block accumulates into
 *  its own copy of the accumulator and the block results are combined in block
 *  order on the calling thread. Results are bit-identical for any worker
 *  count, including jobs = 1.
 */
template <class Acc, class PerIndex, class Combine>
Acc parallel_block_reduce(std::size_t n, const Acc& zero, PerIndex per_index, Combine combine,
                          int jobs, std::size_t block_size = 512) {
  if (n == 0) return zero;
  if (jobs <= 0) jobs = int(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  const std::size_t n_blocks = (n + block_size - 1) / block_size;
  std::vector<Acc> partial(n_blocks, zero);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      Acc& acc = partial[b];
      const std::size_t begin = b * block_size;
      const std::size_t end = std::min(n, begin + block_size);
      for (std::size_t i = begin; i < end; ++i) per_index(i, acc);
    }
  };

  if (jobs == 1 || n_blocks == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n_threads = std::min<std::size_t>(jobs, n_blocks);
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  Acc total = zero;
  for (std::size_t b = 0; b < n_blocks; ++b) combine(total, partial[b]);
  return total;
}

}  // namespace svl
