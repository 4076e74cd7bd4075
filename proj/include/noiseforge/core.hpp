// SPDX-License-Identifier: Apache-2.0
#pragma once
// Shared primitives: error kinds, dense row-major matrix, reproducible RNG,
// small text helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace noiseforge {

// Exit codes of the CLI double as error categories.
enum class ErrorKind : int { input = 2, service = 3, numeric = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class ServiceError : public Error {
public:
    explicit ServiceError(const std::string& what) : Error(ErrorKind::service, what) {}
};

class AuthError : public ServiceError {
public:
    explicit AuthError(const std::string& what) : ServiceError(what) {}
};

/// Rethrows `e` as the same category with `prefix` prepended.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& prefix) {
    const std::string what = prefix + e.what();
    if (dynamic_cast<const AuthError*>(&e)) throw AuthError(what);
    switch (e.kind()) {
        case ErrorKind::input: throw InputError(what);
        case ErrorKind::service: throw ServiceError(what);
        case ErrorKind::numeric: throw NumericError(what);
    }
    throw Error(e.kind(), what);
}

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Randomness
//
// All randomness goes through Pcg32 (PCG-XSH-RR 64/32, O'Neill 2014) and our
// own conversions to doubles and bounded integers, so draws are identical on
// every platform and standard library. std::*_distribution is never used.
// ---------------------------------------------------------------------------

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `index` of a master seed:
/// splitmix64(master ^ splitmix64(index + 1)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(master ^ splitmix64(index + 1));
}

class Pcg32 {
public:
    static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
    static constexpr std::uint64_t kDefaultStream = 0xDA3E39CB94B95BDBULL;

    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = kDefaultStream) noexcept {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() noexcept {
        const std::uint64_t old = state_;
        state_ = old * kMultiplier + inc_;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1].
    double uniform_pos() noexcept { return 1.0 - uniform(); }

    /// Unbiased integer in [0, bound) by rejection.
    std::uint32_t bounded(std::uint32_t bound) noexcept {
        const std::uint32_t threshold = (0u - bound) % bound;
        for (;;) {
            const std::uint32_t r = next_u32();
            if (r >= threshold) return r % bound;
        }
    }

    /// Standard normal via Box-Muller (one value per call).
    double normal() noexcept {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

/// Fisher-Yates shuffle driven by Pcg32.
template <typename T>
void shuffle(std::vector<T>& v, Pcg32& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.bounded(static_cast<std::uint32_t>(i));
        std::swap(v[i - 1], v[j]);
    }
}

// ---------------------------------------------------------------------------
// Misc helpers
// ---------------------------------------------------------------------------

/// Runs body(begin, end) over [0, n) split across worker threads. Each index
/// belongs to exactly one chunk, so per-index writes are race free. The first
/// exception thrown by any chunk is rethrown on the calling thread.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                         unsigned max_threads = 0, std::size_t min_parallel = 256) {
    unsigned threads = max_threads ? max_threads : std::max(1u, std::thread::hardware_concurrency());
    if (n < min_parallel || n < 2 || threads == 1) {
        body(0, n);
        return;
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, &errors, t, b, e] {
            try {
                body(b, e);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

/// Shortest text form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// 64-bit FNV-1a; stable content hash for cache keys and config digests.
constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ULL) noexcept {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Checks that every row is a nonnegative distribution summing to 1 within tol.
inline bool rows_stochastic(const Matrix& m, double tol) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (double x : m.row(i)) {
            if (!(x >= 0.0) || !std::isfinite(x)) return false;
            s += x;
        }
        if (std::abs(s - 1.0) > tol) return false;
    }
    return true;
}

}  // namespace noiseforge
