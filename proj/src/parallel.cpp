#include "mtlts/parallel.hpp"

#include <omp.h>

#include <algorithm>

namespace mtlts::par {

int block_count(int n_items) { return std::max(1, std::min(16, n_items)); }

std::pair<int, int> block_range(int n_items, int n_blocks, int block) {
  // even split, first (n_items % n_blocks) blocks take one extra
  int base = n_items / n_blocks;
  int extra = n_items % n_blocks;
  int begin = block * base + std::min(block, extra);
  int len = base + (block < extra ? 1 : 0);
  return {begin, begin + len};
}

void for_blocks(int n_items, int threads,
                const std::function<void(int, int, int)>& fn) {
  if (n_items <= 0) return;
  int nb = block_count(n_items);
  if (threads <= 1) {
    // serial reference path
    for (int b = 0; b < nb; ++b) {
      auto [begin, end] = block_range(n_items, nb, b);
      fn(b, begin, end);
    }
    return;
  }
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int b = 0; b < nb; ++b) {
    auto [begin, end] = block_range(n_items, nb, b);
    fn(b, begin, end);
  }
}

void parallel_for(int n_items, int threads, const std::function<void(int)>& fn) {
  if (n_items <= 0) return;
  if (threads <= 1) {
    for (int i = 0; i < n_items; ++i) fn(i);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int i = 0; i < n_items; ++i) fn(i);
}

int max_hardware_threads() { return omp_get_max_threads(); }

}  // namespace mtlts::par
