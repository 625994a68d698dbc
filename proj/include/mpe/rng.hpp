#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace mpe {

// splitmix64 step; used to expand (seed, stream id) pairs into stream state.
inline std::uint64_t splitmix64_next(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// xoshiro256++ stream, derived deterministically from (seed, stream_id) by a
// counter construction. Streams with distinct ids are independent for our
// purposes and reproducible under any parallel schedule.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0) {
        std::uint64_t s = seed ^ (0xA0761D6478BD642FULL * (stream_id + 1));
        for (auto& w : state_) w = splitmix64_next(s);
    }

    std::uint64_t next_u64() {
        std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform on [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform on (0, 1] (safe as a log argument)
    double uniform_pos() { return 1.0 - uniform(); }

    double exponential(double rate) {
        if (!(rate > 0)) throw std::invalid_argument("exponential: rate must be > 0");
        return -std::log(uniform_pos()) / rate;
    }

    // index into w with probabilities w[i]/wsum (linear scan)
    int categorical(std::span<const double> w, double wsum) {
        double u = uniform() * wsum;
        double acc = 0;
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            acc += w[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(w.size()) - 1;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t state_[4];
};

}  // namespace mpe
