#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace eadmnc {

// Work is cut into fixed-size chunks regardless of worker count and partial
// results are folded in chunk order, so outputs are bit-identical for any
// number of workers.
inline constexpr std::size_t kParallelChunk = 8192;

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// fn(chunk_index, begin, end) is called once per chunk; chunk_index is dense
// starting at 0 so callers can keep per-chunk slots.
template <typename Fn>
void for_each_chunk(std::size_t n, int workers, Fn&& fn,
                    std::size_t chunk = kParallelChunk) {
  if (n == 0) return;
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  workers = resolve_workers(workers);
  if (workers <= 1 || nchunks == 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    }
  };
  std::vector<std::thread> pool;
  const std::size_t nthreads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), nchunks);
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(run);
  for (auto& t : pool) t.join();
}

// Map each chunk to a partial value, then reduce partials left-to-right in
// chunk order. Reduction order never depends on scheduling.
template <typename T, typename MapFn, typename ReduceFn>
T map_reduce_chunks(std::size_t n, int workers, T init, MapFn&& map_chunk,
                    ReduceFn&& reduce, std::size_t chunk = kParallelChunk) {
  if (n == 0) return init;
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  std::vector<T> partials(nchunks, init);
  for_each_chunk(
      n, workers,
      [&](std::size_t c, std::size_t b, std::size_t e) {
        partials[c] = map_chunk(b, e);
      },
      chunk);
  T acc = init;
  for (std::size_t c = 0; c < nchunks; ++c) acc = reduce(acc, partials[c]);
  return acc;
}

}  // namespace eadmnc
