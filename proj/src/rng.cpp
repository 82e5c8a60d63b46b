#include "probcast/rng.hpp"

#include <cmath>
#include <numbers>

#include "probcast/errors.hpp"

namespace probcast {

namespace {

// splitmix64, used to decorrelate (seed, stream) pairs before seeding the engine.
std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
    std::uint64_t state = seed ^ 0x6a09e667f3bcc908ULL;
    std::uint64_t a = splitmix64(state);
    state ^= stream_id * 0x9e3779b97f4a7c15ULL + 0x1234567890abcdefULL;
    std::uint64_t b = splitmix64(state);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    engine_.seed(seq);
}

RngStream RngStream::derive(std::uint64_t substream) const {
    std::uint64_t mix = stream_id_;
    std::uint64_t salt = splitmix64(mix);
    return RngStream(seed_, salt ^ (substream + 0x517cc1b727220a95ULL));
}

double RngStream::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform_open();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
}

bool RngStream::bernoulli(double p) {
    if (p < 0.0 || p > 1.0) throw ContractError("bernoulli probability outside [0,1]");
    return uniform() < p;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
    if (n == 0) throw ContractError("uniform_index requires n >= 1");
    // rejection sampling keeps the draw exactly uniform
    std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

std::vector<double> RngStream::normals(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = normal();
    return out;
}

}  // namespace probcast
