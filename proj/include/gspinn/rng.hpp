#pragma once

#include <cstdint>

namespace gspinn {

/// Named random streams. Each draw is a pure function of
/// (seed, stream, epoch, index, component), so batches do not depend on
/// evaluation order or thread count.
enum class Stream : std::uint64_t {
    init_weights = 1,
    initial_points = 2,
    residual_points = 3,
    symmetry_points = 4,
    data_points = 5,
    test_cases = 6,
};

namespace detail {
// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, Stream stream, std::uint64_t epoch = 0)
        : key_(detail::mix64(detail::mix64(detail::mix64(seed) ^ static_cast<std::uint64_t>(stream)) ^ epoch)) {}

    constexpr std::uint64_t bits(std::uint64_t index, std::uint32_t component = 0) const {
        return detail::mix64(key_ ^ detail::mix64(index * 8U + component));
    }

    /// Uniform in [0, 1).
    constexpr double uniform(std::uint64_t index, std::uint32_t component = 0) const {
        return static_cast<double>(bits(index, component) >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    constexpr double uniform(double lo, double hi, std::uint64_t index, std::uint32_t component = 0) const {
        return lo + (hi - lo) * uniform(index, component);
    }

private:
    std::uint64_t key_;
};

} // namespace gspinn
