#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace ggm {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Each
// (key, counter) pair maps to four 32-bit words through ten bijective
// rounds, so draws are addressable: stream state never has to be carried
// across paths and any (path, block) substream can be regenerated in any
// order. This is what makes Monte Carlo results independent of scheduling.
struct Philox4x32 {
    using ctr_t = std::array<std::uint32_t, 4>;
    using key_t = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t M0 = 0xD2511F53u;
    static constexpr std::uint32_t M1 = 0xCD9E8D57u;
    static constexpr std::uint32_t W0 = 0x9E3779B9u;
    static constexpr std::uint32_t W1 = 0xBB67AE85u;

    static ctr_t round(ctr_t c, key_t k) {
        std::uint64_t p0 = std::uint64_t(M0) * c[0];
        std::uint64_t p1 = std::uint64_t(M1) * c[2];
        std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
        std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    static ctr_t block(ctr_t c, key_t k) {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                k[0] += W0;
                k[1] += W1;
            }
            c = round(c, k);
        }
        return c;
    }
};

// Uniform in (0, 1): 53 random bits plus a half-ulp offset keeps the value
// strictly inside the open interval, which Box-Muller needs.
inline double u32_pair_to_unit(std::uint32_t hi, std::uint32_t lo) {
    std::uint64_t v = (std::uint64_t(hi) << 32) | lo;
    return (double(v >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Deterministic stream of N(0,1) draws addressed by (seed, stream, substream).
// Layout: key = seed split in two words, counter = {stream_lo, stream_hi,
// block, substream}. One Philox block yields two uniforms -> two normals.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream, std::uint32_t substream = 0)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
          base_{std::uint32_t(stream), std::uint32_t(stream >> 32), 0u, substream} {}

    double next() {
        if (have_) {
            have_ = false;
            return cached_;
        }
        Philox4x32::ctr_t c = base_;
        c[2] = block_++;
        auto r = Philox4x32::block(c, key_);
        double u1 = u32_pair_to_unit(r[0], r[1]);
        double u2 = u32_pair_to_unit(r[2], r[3]);
        double rad = std::sqrt(-2.0 * std::log(u1));
        double ang = 2.0 * M_PI * u2;
        cached_ = rad * std::sin(ang);
        have_ = true;
        return rad * std::cos(ang);
    }

    // Uniform in (0,1) from the same addressed stream (burns one block).
    double next_uniform() {
        Philox4x32::ctr_t c = base_;
        c[2] = block_++;
        auto r = Philox4x32::block(c, key_);
        have_ = false;
        return u32_pair_to_unit(r[0], r[1]);
    }

private:
    Philox4x32::key_t key_;
    Philox4x32::ctr_t base_;
    std::uint32_t block_ = 0;
    bool have_ = false;
    double cached_ = 0.0;
};

}  // namespace ggm
