#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ddsrec {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for a named sub-stream of a root seed. Streams with different labels
/// are independent, so adding a consumer never shifts another's draws.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0) noexcept {
    return mix64(mix64(root ^ fnv1a(label)) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
    return std::mt19937_64(derive_seed(root, label, index));
}

}  // namespace ddsrec
