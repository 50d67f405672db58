#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include "smi/types.hpp"

namespace smi {

/// SplitMix64 bit generator. Small state, so one can be created per
/// Monte Carlo draw without measurable cost.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Mixes a list of 64-bit words into one seed. Order matters.
constexpr std::uint64_t mix_seed(std::uint64_t h, std::uint64_t v) noexcept {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    return h;
}

/// Purposes for derived streams, so that e.g. minibatch selection never
/// shares a stream with guide draws at the same (step, particle, draw).
enum class StreamPurpose : std::uint64_t {
    GuideDraw = 1,
    Minibatch = 2,
    Initialization = 3,
    Predictive = 4,
    Data = 5,
};

/// Generator for the stream identified by (seed, purpose, step, particle, draw).
/// The result depends only on those keys, never on evaluation order.
inline SplitMix64 stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t step,
                         std::uint64_t particle = 0, std::uint64_t draw = 0) noexcept {
    std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(purpose));
    h = mix_seed(h, step);
    h = mix_seed(h, particle);
    h = mix_seed(h, draw);
    return SplitMix64(h);
}

/// Fills `out` with independent standard normal variates from `gen`.
template <typename Gen, typename Derived>
void fill_standard_normal(Gen& gen, Eigen::DenseBase<Derived>& out) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index j = 0; j < out.cols(); ++j)
        for (Index i = 0; i < out.rows(); ++i) out(i, j) = normal(gen);
}

template <typename Gen>
Vector standard_normal_vector(Gen& gen, Index n) {
    Vector v(n);
    fill_standard_normal(gen, v);
    return v;
}

template <typename Gen>
Matrix uniform_matrix(Gen& gen, Index rows, Index cols, double low, double high) {
    std::uniform_real_distribution<double> unif(low, high);
    Matrix out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = unif(gen);
    return out;
}

}  // namespace smi
