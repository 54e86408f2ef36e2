#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace slate_forge {

/// Global cap on worker threads (>= 1). Defaults to hardware concurrency,
/// or SLATE_FORGE_THREADS when set in the environment.
std::size_t max_threads() noexcept;
void set_max_threads(std::size_t n) noexcept;

/// Runs fn(i) for i in [0, n) over up to max_threads() workers. Work is split
/// into contiguous blocks; fn must only write to per-index state.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Pairwise (tree) summation. The association order depends only on the
/// number of terms, so results do not depend on how terms were produced.
double pairwise_sum(std::span<const double> values) noexcept;

/// Element-wise pairwise sum of equally sized vectors.
std::vector<double> pairwise_sum(std::span<const std::vector<double>> vectors);

}  // namespace slate_forge
