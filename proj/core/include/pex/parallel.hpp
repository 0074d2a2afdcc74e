#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace pex {

/// Worker count used by every parallel loop in the library (default 1).
void set_threads(unsigned n);
unsigned threads();

/// Runs fn(i) for i in [0, n) on the worker pool. Tasks are claimed from a
/// shared counter, so fn must not depend on which worker runs it.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Evaluates fn(i) for every task and returns the results in task order.
/// Any reduction done over the returned vector is therefore independent of
/// the thread count.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F&& fn) {
  std::vector<T> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

/// Splits [0, n) into a fixed number of contiguous chunks (independent of the
/// thread count) and returns fn(begin, end) for each chunk in order.
template <class Acc, class F>
std::vector<Acc> map_chunks(std::size_t n, F&& fn, std::size_t max_chunks = 64) {
  const std::size_t chunks = n < max_chunks ? n : max_chunks;
  return parallel_map<Acc>(chunks, [&](std::size_t c) {
    return fn(n * c / chunks, n * (c + 1) / chunks);
  });
}

}  // namespace pex
