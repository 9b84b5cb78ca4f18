#pragma once

#include <cstdint>

#include "convexnet/math.hpp"

namespace convexnet {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}
} // namespace detail

/// Counter-based generator (splitmix64 stream). Every (seed, stream,
/// substream) triple yields an independent sequence, so parallel path
/// generation produces results identical to sequential generation.
class Rng {
public:
    Rng() : Rng(0, 0, 0) {}
    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
        key_ = detail::mix64(seed + 0x9E3779B97F4A7C15ULL);
        key_ = detail::mix64(key_ ^ (stream + 0xD1B54A32D192ED03ULL));
        key_ = detail::mix64(key_ ^ (substream + 0x8CB92BA72F3D8DD7ULL));
        ctr_ = 0;
    }

    std::uint64_t next_u64() {
        return detail::mix64(key_ + (++ctr_) * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform on the open interval (0,1); never returns an endpoint.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via inverse CDF (monotone coupling with uniform01).
    double normal() { return norm_inv(uniform01()); }

private:
    std::uint64_t key_;
    std::uint64_t ctr_;
};

/// Stream tags keep the independent uses of one user seed apart.
namespace rng_stream {
inline constexpr std::uint64_t net_init = 0x01;
inline constexpr std::uint64_t train_batch = 0x02;
inline constexpr std::uint64_t mc_target = 0x03;
inline constexpr std::uint64_t path_sim = 0x04;
inline constexpr std::uint64_t evaluation = 0x05;
inline constexpr std::uint64_t pilot = 0x06;
inline constexpr std::uint64_t test_points = 0x07;
} // namespace rng_stream

} // namespace convexnet
