/// @file types.hpp
/// @brief Shared basics: index type, flop accounting, deterministic RNG.
#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

namespace vlump {

using index_t = std::int32_t;

inline constexpr const char* kArtifactVersion = "vlump 0.1.0";

/// Global counter of floating-point work. Kernels add their cost in bulk
/// (one call per kernel invocation), so totals are deterministic and the
/// atomic makes concurrent use race-free.
///
/// Cost model (1 flop per floating add/sub/mul/div):
///   spmv, spmv_transpose      2*nnz
///   sor_sweep                 2*nnz + 2*n per sweep
///   triple_product            2 per multiply-add in the numeric phase
///   dot, axpy, norm2          2*n
///   dense Cholesky solve      n*(n+1) forward + n*(n+1) backward
class FlopCounter {
public:
    static void add(std::uint64_t n) noexcept {
        total_.fetch_add(n, std::memory_order_relaxed);
    }
    static std::uint64_t total() noexcept {
        return total_.load(std::memory_order_relaxed);
    }
    static void reset() noexcept { total_.store(0, std::memory_order_relaxed); }

private:
    static std::atomic<std::uint64_t> total_;
};

/// splitmix64: tiny, fully specified generator so that seeded runs are
/// bit-identical on every platform (std::mt19937 distributions are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53 random bits.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * next_double(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace vlump
