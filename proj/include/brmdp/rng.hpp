#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace brmdp {

/// Counter-based random stream.
///
/// A stream is a 64-bit key plus a draw counter; the n-th output is a pure
/// function of (key, n). Child streams are derived by hashing a tag into the
/// key, so any (seed, replication, stage, action, draw) coordinate maps to the
/// same numbers regardless of the order in which work is scheduled.
class Stream {
public:
    using result_type = std::uint64_t;

    constexpr explicit Stream(std::uint64_t key = 0) noexcept : key_(key) {}

    /// Stream keyed by an ordered tuple of integers.
    static Stream keyed(std::initializer_list<std::uint64_t> parts) noexcept;

    /// Independent child stream; does not advance this stream.
    [[nodiscard]] Stream child(std::uint64_t tag) const noexcept;
    [[nodiscard]] Stream child(std::initializer_list<std::uint64_t> tags) const noexcept;

    std::uint64_t next_u64() noexcept;
    result_type operator()() noexcept { return next_u64(); }
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;

    /// Standard normal by inversion.
    double normal() noexcept;

    [[nodiscard]] std::uint64_t key() const noexcept { return key_; }
    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// 64-bit finalizer (murmur3 fmix64 variant).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Order-dependent hash combine.
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept;

}  // namespace brmdp
