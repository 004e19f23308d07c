#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <type_traits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace malab {

inline constexpr const char* kVersion = "0.1.0";

/// Ill-formed parameters (bad radii ordering, non-SPD matrix, ...). CLI maps to exit 2.
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Point outside the grid box, grid too small, and similar domain violations.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Rejected input data (boundary trace not convex, uncertified field, ...).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Compensated summation; used wherever a sum feeds a pass/fail decision.
struct KahanSum {
    double sum = 0.0;
    double c = 0.0;
    void add(double value) {
        const double y = value - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

/// FNV-1a over bytes; reports embed input hashes so runs are reproducible.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 1469598103934665603ull) {
    return fnv1a(s.data(), s.size(), seed);
}

/// Thread cap from MA_LAB_THREADS (0 or unset = hardware concurrency).
inline unsigned thread_limit() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("MA_LAB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v) < hw ? static_cast<unsigned>(v) : hw;
    }
    return hw;
}

/// Function parameters of array alias type go through this so the dimension
/// is deduced from the grid/field argument only.
template <typename T>
using NoDeduce = std::type_identity_t<T>;

/// Chunked parallel loop over [0, n). Bodies must write disjoint slots only,
/// so results are identical for any thread count. Reductions stay serial.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    const unsigned nt = thread_limit();
    if (nt <= 1 || n < 4096) {
        body(0, n);
        return;
    }
    const std::size_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (unsigned t = 0; t < nt; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace malab
