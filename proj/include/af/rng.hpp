/// @file rng.hpp
/// @brief Counter-based random stream. A draw is a pure function of
/// (seed, label, counter), so identically labelled streams reproduce the same
/// sequence on any platform and independent sub-streams never collide.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace af {

class RngStream {
  public:
    RngStream(std::uint64_t seed, std::string_view label)
        : seed_(seed), label_(fnv1a(label)), counter_(0) {}

    /// Derive an independent child stream; the child's label folds in the
    /// parent label so "policy"/"ep3" and "policy/ep3" stay distinct.
    RngStream sub(std::string_view label) const {
        RngStream s(seed_, label);
        s.label_ = mix(label_ ^ 0x9e3779b97f4a7c15ULL, s.label_);
        return s;
    }

    RngStream sub(std::uint64_t index) const {
        RngStream s = *this;
        s.label_ = mix(label_, 0xd1342543de82ef95ULL + index);
        s.counter_ = 0;
        return s;
    }

    std::uint64_t next_u64() {
        return mix(mix(seed_, label_), 0xbf58476d1ce4e5b9ULL + counter_++);
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; two uniforms per draw, no cached spare.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) { return next_u64() % n; }

    std::uint64_t seed() const { return seed_; }

  private:
    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    // splitmix64 finalizer applied to a combined word.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t label_;
    std::uint64_t counter_;
};

}  // namespace af
