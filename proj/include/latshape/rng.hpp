#pragma once

// Seed splitting: every simulation chunk gets its own mt19937_64 seeded from
// splitmix64(seed, chunk), so results do not depend on the worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

namespace latshape {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{splitmix64(seed), splitmix64(seed ^ splitmix64(stream + 1))};
    return std::mt19937_64(seq);
}

// Uniform double in (0, 1], so log() is always finite.
inline double uniform_open0(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

// Circular complex Gaussian with E|z|^2 = variance, by Box-Muller.
inline std::complex<double> complex_gaussian(std::mt19937_64& rng, double variance = 1.0) {
    const double u1 = uniform_open0(rng);
    const double u2 = uniform_open0(rng);
    const double r = std::sqrt(-variance * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(t), r * std::sin(t)};
}

// Runs fn(chunk) for chunk = 0..n_chunks-1 on up to `workers` threads and
// returns the results indexed by chunk, so callers can merge them in a fixed
// order.
template <class Fn>
auto run_chunks(std::size_t n_chunks, unsigned workers, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using Partial = decltype(fn(std::size_t{}));
    std::vector<Partial> out(n_chunks);
    if (workers <= 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) out[c] = fn(c);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(workers, n_chunks));
    for (unsigned w = 0; w < n; ++w)
        pool.emplace_back([&] {
            for (std::size_t c = next++; c < n_chunks; c = next++) {
                try {
                    out[c] = fn(c);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace latshape
