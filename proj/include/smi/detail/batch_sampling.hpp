#pragma once

#include <algorithm>
#include <numeric>
#include <random>

namespace smi {

template <typename Gen>
std::vector<Index> sample_batch_indices(Index n, Index size, Gen& gen) {
    if (size < 1 || size > n) throw InvalidInput("batch size must lie in [1, N]");
    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index{0});
    // Partial Fisher-Yates: the first `size` slots end up a uniform subset.
    for (Index i = 0; i < size; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(gen))]);
    }
    pool.resize(static_cast<std::size_t>(size));
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace smi
