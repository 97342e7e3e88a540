#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "feddp/core.hpp"

// Counter-based pseudo-random streams. A stream is a 64-bit key plus a draw
// counter; output i is splitmix64(key + i * golden). Substreams derive a new
// key from the parent key and a tag, so disjoint tags give independent
// streams regardless of how many values the parent has produced. All
// distributions use fixed algorithms (53-bit uniforms, Box-Muller normals,
// inverse-CDF Laplace) so sequences are identical across platforms.

namespace feddp {

inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

inline std::uint64_t hash_label(std::string_view label) {
    // FNV-1a, then one mixing round.
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return mix64(h);
}

class RngStream {
public:
    RngStream() : key_(mix64(kGolden64)) {}
    explicit RngStream(std::uint64_t seed) : key_(mix64(seed + kGolden64)) {}

    // Independent child stream. Children with distinct tags never collide
    // with each other or with the parent's own output sequence.
    RngStream substream(std::uint64_t tag) const {
        RngStream child;
        child.key_ = mix64(key_ ^ mix64(tag + kGolden64));
        child.counter_ = 0;
        return child;
    }

    RngStream substream(std::string_view label) const { return substream(hash_label(label)); }

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(key_ + counter_ * kGolden64);
    }

    // Uniform on [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on the open interval (0, 1); safe as a log argument.
    double uniform_open01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; one draw consumes two uniforms and the
    // sine branch is discarded so the stream has no hidden state.
    double normal() {
        const double u1 = uniform_open01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Laplace(0, b) by inverse CDF.
    double laplace(double b) {
        const double u = uniform_open01() - 0.5;
        const double a = 1.0 - 2.0 * std::abs(u);
        const double mag = -b * std::log(a);
        return u < 0.0 ? -mag : (u > 0.0 ? mag : 0.0);
    }

    Vec normal_vec(std::size_t n, double stddev) {
        Vec v(n);
        for (double& x : v) x = stddev * normal();
        return v;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace feddp
