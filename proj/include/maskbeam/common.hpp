// common.hpp
// Shared error types, constants and small utilities.

#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace maskbeam {

using cdouble = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLogPi = 1.1447298858494001741;
inline constexpr double kSpeedOfSound = 343.0;  // m/s

// Malformed or inconsistent input data (files, shapes, configs). CLI exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure (singular covariance, non-finite density). CLI exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// splitmix64: cheap, well-mixed stream derivation. Child seeds for trials and
// per-trial sub-streams are derived with this so that parallel scheduling can
// never change which random sequence a consumer sees.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 1));
}

// Static partition of [begin, end) over at most `threads` workers. Each index
// is handled by exactly one worker, so results are identical for any thread
// count as long as the body only writes state owned by its index.
inline void parallel_for(std::size_t begin, std::size_t end,
                         const std::function<void(std::size_t)>& body,
                         unsigned threads = 0) {
    const std::size_t n = end > begin ? end - begin : 0;
    if (n == 0) return;
    unsigned hw = std::thread::hardware_concurrency();
    if (threads == 0) threads = hw ? hw : 1;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = begin; i < end; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr first_error;
    std::mutex err_mutex;
    for (unsigned w = 0; w < threads; ++w) {
        std::size_t lo = begin + n * w / threads;
        std::size_t hi = begin + n * (w + 1) / threads;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace maskbeam
