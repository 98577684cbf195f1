#pragma once

#include <cmath>
#include <cstdint>

namespace idgen {

// PCG32 with a hand-rolled Box-Muller on top. std:: distributions are
// implementation-defined, which would break byte-identical reproducibility
// across toolchains, so every random draw in the project goes through this.
struct Rng {
    uint64_t state = 0;
    uint64_t inc = 0;

    explicit Rng(uint64_t seed, uint64_t stream = 0) {
        inc = (stream << 1u) | 1u;
        state = 0;
        next_u32();
        state += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state;
        state = old * 6364136223846793005ULL + inc;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    // Independent sub-stream, e.g. one per sampling job.
    Rng fork(uint64_t substream) const {
        return Rng(state ^ 0x9e3779b97f4a7c15ULL, inc ^ (substream * 2ULL + 1ULL));
    }

    float uniform() {  // [0, 1)
        return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f;
    }

    float uniform(float lo, float hi) {
        return lo + (hi - lo) * uniform();
    }

    int uniform_int(int n) {  // [0, n)
        return static_cast<int>((static_cast<uint64_t>(next_u32()) * static_cast<uint64_t>(n)) >> 32);
    }

    float normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        // u1 in (0, 1] so the log is finite
        double u1 = 1.0 - static_cast<double>(uniform());
        double u2 = static_cast<double>(uniform());
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_ = static_cast<float>(r * std::sin(theta));
        has_cached_ = true;
        return static_cast<float>(r * std::cos(theta));
    }

private:
    bool has_cached_ = false;
    float cached_ = 0.0f;
};

}  // namespace idgen
