#pragma once

#include <cstdint>
#include <cmath>

namespace mfc {

/// Substream domains. Folding the domain into the key keeps draws for
/// different purposes (Brownian increments, subsampling, probe points, ...)
/// on disjoint streams even when their counters coincide.
enum class StreamDomain : std::uint32_t {
    brownian = 1,
    subsample = 2,
    projection = 3,
    probe = 4,
    direction = 5,
    scratch = 6,
};

namespace detail {

struct PhiloxOut {
    std::uint32_t v[4];
};

// Philox4x32-10 (Salmon et al.), the standard counter-based generator.
inline PhiloxOut philox4x32(std::uint32_t c0, std::uint32_t c1,
                            std::uint32_t c2, std::uint32_t c3,
                            std::uint32_t k0, std::uint32_t k1) {
    constexpr std::uint32_t M0 = 0xD2511F53u;
    constexpr std::uint32_t M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u;
    constexpr std::uint32_t W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c0;
        const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c2;
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        const std::uint32_t n0 = hi1 ^ c1 ^ k0;
        const std::uint32_t n1 = lo1;
        const std::uint32_t n2 = hi0 ^ c3 ^ k1;
        const std::uint32_t n3 = lo0;
        c0 = n0; c1 = n1; c2 = n2; c3 = n3;
        k0 += W0; k1 += W1;
    }
    return PhiloxOut{{c0, c1, c2, c3}};
}

} // namespace detail

/// Seedable, stateless random source. Every output is a pure function of
/// (master_seed, domain, i, k, j, draw), so results are bit-identical
/// across runs and independent of evaluation order or thread schedule.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t master_seed) : seed_(master_seed) {}

    std::uint64_t master_seed() const { return seed_; }

    /// Two 64-bit words from substream (domain, i, k, j, draw).
    void words(StreamDomain domain, std::uint32_t i, std::uint32_t k,
               std::uint32_t j, std::uint32_t draw,
               std::uint64_t& w0, std::uint64_t& w1) const {
        const auto out = detail::philox4x32(
            i, k, j ^ (static_cast<std::uint32_t>(domain) << 24), draw,
            static_cast<std::uint32_t>(seed_),
            static_cast<std::uint32_t>(seed_ >> 32) ^
                (static_cast<std::uint32_t>(domain) * 0x85EBCA6Bu));
        w0 = (static_cast<std::uint64_t>(out.v[0]) << 32) | out.v[1];
        w1 = (static_cast<std::uint64_t>(out.v[2]) << 32) | out.v[3];
    }

    /// Uniform in (0,1), strictly positive so it is safe under log().
    double uniform(StreamDomain domain, std::uint32_t i, std::uint32_t k,
                   std::uint32_t j = 0, std::uint32_t draw = 0) const {
        std::uint64_t w0, w1;
        words(domain, i, k, j, draw, w0, w1);
        return to_unit(w0);
    }

    /// Standard normal via Box-Muller on substream (domain, i, k, j, draw).
    double normal(StreamDomain domain, std::uint32_t i, std::uint32_t k,
                  std::uint32_t j = 0, std::uint32_t draw = 0) const {
        std::uint64_t w0, w1;
        words(domain, i, k, j, draw, w0, w1);
        const double u1 = to_unit(w0);
        const double u2 = to_unit(w1);
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(StreamDomain domain, std::uint32_t i, std::uint32_t k,
                        std::uint32_t j, std::uint32_t draw,
                        std::uint64_t n) const {
        std::uint64_t w0, w1;
        words(domain, i, k, j, draw, w0, w1);
        return w0 % n;
    }

private:
    static double to_unit(std::uint64_t w) {
        // 53 random bits, offset by half an ulp: result lies in (0,1).
        return (static_cast<double>(w >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    std::uint64_t seed_;
};

} // namespace mfc
