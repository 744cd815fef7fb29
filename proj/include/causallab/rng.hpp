#pragma once

// Counter-based random streams.
//
// Every stream is a Philox4x32-10 keystream: a 64-bit key selects the
// stream and a 128-bit counter walks through it. Child streams are derived
// by hashing (parent key, tag) with the SplitMix64 finalizer, so any
// (experiment, cell, trial) path maps to an independent, reproducible
// stream without any shared state.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace causallab {

/// SplitMix64 output function (Steele, Lea & Flood).
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3").
class Philox4x32 {
  public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter block(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

  private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53U;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;
};

/// A reproducible random stream. Satisfies UniformRandomBitGenerator.
///
/// Streams are cheap values (a key, a block counter and a two-word buffer);
/// pass them by reference to samplers, and derive per-task children with
/// `split` instead of sharing one stream across threads.
class RngStream {
  public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed) noexcept : key_(splitmix64_mix(seed)) {}

    /// Independent child stream identified by `tag`. Does not advance `*this`.
    RngStream split(std::uint64_t tag) const noexcept {
        RngStream child(0);
        child.key_ = splitmix64_mix(key_ ^ splitmix64_mix(tag + 0x632BE59BD9B4E019ULL));
        return child;
    }

    /// Child along a path of tags: `split({a, b, c}) == split(a).split(b).split(c)`.
    RngStream split(std::initializer_list<std::uint64_t> path) const noexcept {
        RngStream s = *this;
        for (auto tag : path) s = s.split(tag);
        return s;
    }

    std::uint64_t key() const noexcept { return key_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept {
        if (buffered_ == 0) refill();
        return buffer_[--buffered_];
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform on [lo, hi].
    double uniform(double lo, double hi) noexcept {
        if (lo == hi) return lo;
        return lo + (hi - lo) * uniform();
    }

    /// Uniform integer on the closed range [lo, hi], without modulo bias.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>((*this)());
        const std::uint64_t limit = max() - max() % span;
        std::uint64_t r;
        do {
            r = (*this)();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    /// Standard normal via Box-Muller (one variate per call).
    double normal() noexcept {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// log of a Gamma(shape, 1) variate.
    ///
    /// Marsaglia-Tsang squeeze for shape >= 1; for shape < 1 the boost
    /// Gamma(a) = Gamma(a + 1) * U^(1/a) is applied in log space so tiny
    /// shapes (2^-8 and below) never underflow.
    double log_gamma(double shape) noexcept {
        if (shape == 1.0) return std::log(-std::log(uniform()));
        if (shape < 1.0) return log_gamma(shape + 1.0) + std::log(uniform()) / shape;
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x;
            double v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2 || std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
                return std::log(d) + std::log(v);
            }
        }
    }

    double gamma(double shape) noexcept { return std::exp(log_gamma(shape)); }

  private:
    void refill() noexcept {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(counter_),
                                      static_cast<std::uint32_t>(counter_ >> 32), 0U, 0U};
        const Philox4x32::Key key{static_cast<std::uint32_t>(key_),
                                  static_cast<std::uint32_t>(key_ >> 32)};
        const auto out = Philox4x32::block(ctr, key);
        ++counter_;
        buffer_[1] = (std::uint64_t{out[0]} << 32) | out[1];
        buffer_[0] = (std::uint64_t{out[2]} << 32) | out[3];
        buffered_ = 2;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
};

} // namespace causallab
