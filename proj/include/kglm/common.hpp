#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace kglm {

// Error taxonomy maps onto CLI exit codes: ConfigError -> 2,
// ArtifactError -> 3, DivergenceError -> 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Rng: mt19937_64 core with self-contained sampling, so results are
// reproducible across standard library implementations.
// ---------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {
        // splitmix64 warmup decorrelates small seeds
        for (int i = 0; i < 4; ++i) next();
    }

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform integer in [0, n), n > 0
    uint64_t uniform(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next()) * n) >> 64);
    }

    // uniform double in [0, 1)
    double real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = real();
        double u2 = real();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // normal(0, std) truncated to +/- 2 std
    double trunc_normal(double stddev) {
        double v = normal();
        while (v < -2.0 || v > 2.0) v = normal();
        return v * stddev;
    }

    // derive an independent stream (e.g. per epoch, per worker)
    Rng fork(uint64_t salt) const {
        Rng r(state_ ^ (0xd1b54a32d192ed03ull * (salt + 1)));
        return r;
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit, used for vocab fingerprints in caches and checkpoints.
// ---------------------------------------------------------------------------
inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Static-chunk parallel for: fn(begin, end, chunk_index). Chunking depends
// only on (n, threads), so results are reproducible for a fixed thread count.
inline void parallel_for(size_t n, int threads,
                         const std::function<void(size_t, size_t, int)>& fn) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        fn(0, n, 0);
        return;
    }
    int t = std::min<size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(t);
    size_t chunk = (n + t - 1) / t;
    for (int i = 0; i < t; ++i) {
        size_t b = i * chunk;
        size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back(fn, b, e, i);
    }
    for (auto& th : pool) th.join();
}

inline std::string lowercase(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) out.push_back(c >= 'A' && c <= 'Z' ? char(c - 'A' + 'a') : char(c));
    return out;
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r' || s[i] == '\n')) ++i;
        size_t b = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r' && s[i] != '\n') ++i;
        if (i > b) out.emplace_back(s.substr(b, i - b));
    }
    return out;
}

}  // namespace kglm
