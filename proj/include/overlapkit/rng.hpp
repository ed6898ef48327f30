#pragma once

#include <array>
#include <cstdint>

namespace overlapkit {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

// Stream identifiers keep the different consumers of one seed apart.
enum class StreamDomain : std::uint64_t {
    Ensemble = 1,
    Sde = 2,
    Bridge = 3,
    Warm = 4,
    Direct = 5,
    Correlation = 6,
};

inline std::uint64_t make_stream(StreamDomain d, std::uint64_t a, std::uint64_t b = 0) {
    return (static_cast<std::uint64_t>(d) << 56) ^ (a << 16) ^ b;
}

// Standard normals addressed by (seed, stream, index): any entry can be drawn independently of
// the others, so results do not depend on evaluation order.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
    double operator()(std::uint64_t index) const;
    // Uniform in (0, 1), addressed the same way.
    double uniform(std::uint64_t index) const;

    template <class It>
    void fill(It first, It last, std::uint64_t offset = 0) const {
        std::uint64_t k = offset;
        for (; first != last; ++first) *first = (*this)(k++);
    }

private:
    std::array<std::uint32_t, 4> block(std::uint64_t b) const;

    std::uint64_t seed_;
    std::uint64_t stream_;
};

}  // namespace overlapkit
