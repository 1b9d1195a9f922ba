#include "brmdp/rng.hpp"

#include "brmdp/special.hpp"

namespace brmdp {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
    return mix64(seed ^ (mix64(value + kGolden) + kGolden + (seed << 6) + (seed >> 2)));
}

Stream Stream::keyed(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t k = 0x5851F42D4C957F2DULL;
    for (auto p : parts) k = hash_combine(k, p);
    return Stream(k);
}

Stream Stream::child(std::uint64_t tag) const noexcept {
    return Stream(hash_combine(key_, tag));
}

Stream Stream::child(std::initializer_list<std::uint64_t> tags) const noexcept {
    std::uint64_t k = key_;
    for (auto t : tags) k = hash_combine(k, t);
    return Stream(k);
}

std::uint64_t Stream::next_u64() noexcept {
    // Two rounds: the counter is whitened before being keyed so that
    // neighbouring keys do not produce correlated sequences.
    const std::uint64_t c = mix64(++counter_ * kGolden);
    return mix64(key_ ^ c) ^ mix64(c + key_ * kGolden);
}

double Stream::uniform() noexcept {
    // 53 random bits, shifted off zero.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() noexcept { return normal_quantile(uniform()); }

}  // namespace brmdp
