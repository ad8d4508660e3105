#pragma once

#include <functional>
#include <vector>

namespace mtlts::par {

// Deterministic batch parallelism. Work over n items is cut into blocks whose
// boundaries depend only on n, never on the thread count. Blocks run
// concurrently; anything order-sensitive (floating-point reductions) is folded
// serially in block order afterwards, so results are bit-identical for any
// thread count, including the serial reference path (threads <= 1).

int block_count(int n_items);
std::pair<int, int> block_range(int n_items, int n_blocks, int block);

// fn(block, begin, end): processes items [begin, end). threads <= 1 runs the
// serial reference loop.
void for_blocks(int n_items, int threads,
                const std::function<void(int, int, int)>& fn);

// Independent-slot map: fn(i) writes only slot i. Deterministic regardless of
// schedule.
void parallel_for(int n_items, int threads, const std::function<void(int)>& fn);

// Blockwise map-reduce with ordered fold. make() builds a zeroed accumulator,
// item(acc, i) folds item i into it (serially within a block), and the partial
// accumulators are folded left-to-right with merge(total, part).
template <typename Acc>
Acc block_map_reduce(int n_items, int threads, const std::function<Acc()>& make,
                     const std::function<void(Acc&, int)>& item,
                     const std::function<void(Acc&, const Acc&)>& merge) {
  int nb = block_count(n_items);
  std::vector<Acc> parts;
  parts.reserve(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) parts.push_back(make());
  for_blocks(n_items, threads, [&](int b, int begin, int end) {
    for (int i = begin; i < end; ++i) item(parts[static_cast<std::size_t>(b)], i);
  });
  Acc total = make();
  for (int b = 0; b < nb; ++b) merge(total, parts[static_cast<std::size_t>(b)]);
  return total;
}

int max_hardware_threads();

}  // namespace mtlts::par
