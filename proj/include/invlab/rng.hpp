#pragma once

#include <cmath>
#include <cstdint>

namespace invlab {

namespace detail {

constexpr std::uint64_t GOLDEN = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += GOLDEN);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fmix64(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xFF51AFD7ED558CCDull;
    k ^= k >> 33;
    k *= 0xC4CEB9FE1A85EC53ull;
    k ^= k >> 33;
    return k;
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// Deterministic counter-keyed stream: the pair (seed, stream_id) fully
// determines the draw sequence, independent of construction order or of any
// other stream. fork(k) derives a child stream without consuming state.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), id_(stream_id) {
        std::uint64_t sm = seed ^ detail::fmix64(stream_id);
        for (auto& w : s_) w = detail::splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on the open interval (0,1); safe as input to log/inverse CDFs.
    double uniform_open() { return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52; }

    double uniform_range(double a, double b) { return a + (b - a) * uniform(); }

    // Box-Muller with a cached spare so consecutive calls cost one transform.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Laplace(0, b) by inverse CDF.
    double laplace(double b) {
        const double u = uniform_open() - 0.5;
        return (u < 0.0 ? b : -b) * std::log1p(-2.0 * std::abs(u));
    }

    RngStream fork(std::uint64_t k) const {
        return RngStream(seed_, detail::fmix64(id_ * detail::GOLDEN + k + 1));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return id_; }

  private:
    std::uint64_t seed_, id_;
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace invlab
