#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace probcast {

/// Deterministic random stream identified by (seed, stream_id).
///
/// The same pair always reproduces the identical draw sequence, independent
/// of platform or standard-library internals: uniforms come straight from
/// mt19937_64 words and normals from an explicit Box-Muller transform, so no
/// implementation-defined distribution adaptors are involved.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    /// A new stream derived from this one's identity; derive(i) != derive(j)
    /// produce independent sequences for i != j.
    RngStream derive(std::uint64_t substream) const;

    /// Uniform draw in [0, 1).
    double uniform();
    /// Uniform draw in (0, 1).
    double uniform_open();
    /// Standard normal draw (Box-Muller, pairs cached).
    double normal();
    /// Bernoulli draw with success probability p.
    bool bernoulli(double p);
    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

    std::vector<double> normals(std::size_t n);

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::mt19937_64 engine_;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace probcast
