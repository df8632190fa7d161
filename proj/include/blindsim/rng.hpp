#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace blindsim {

// Named random streams. Every draw in a run is a pure function of
// (master seed, stream, slot index, draw counter), so evaluation order of
// slots or of other streams can never shift a stream's values.
enum class Stream : std::uint64_t {
    AliceBits = 1,
    AliceBasis = 2,
    EveBasis = 3,
    BobBasis = 4,
    BobVoa = 5,
    DetectorNoise = 6,
};

constexpr std::string_view stream_name(Stream s)
{
    switch (s) {
    case Stream::AliceBits: return "alice-bits";
    case Stream::AliceBasis: return "alice-basis";
    case Stream::EveBasis: return "eve-basis";
    case Stream::BobBasis: return "bob-basis";
    case Stream::BobVoa: return "bob-voa";
    case Stream::DetectorNoise: return "detector-noise";
    }
    return "?";
}

namespace detail {

// splitmix64 finalizer; full 64-bit avalanche.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

// Counter-based generator bound to one (seed, stream, slot) cell.
class SlotRng {
public:
    SlotRng(std::uint64_t master_seed, Stream stream, std::uint64_t slot_index)
        : key_(detail::mix64(detail::mix64(master_seed ^ 0x5deece66dULL) ^
                             detail::mix64(static_cast<std::uint64_t>(stream) * 0xd6e8feb86659fd93ULL) ^
                             detail::mix64(slot_index + 0x632be59bd9b4e019ULL)))
    {
    }

    std::uint64_t next_u64()
    {
        return detail::mix64(key_ + counter_++ * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform in [0, 1).
    double next_double()
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return next_double() < p; }

    /// Uniform over {0, ..., n-1}.
    std::uint64_t uniform_index(std::uint64_t n)
    {
        // 64-bit multiply-shift; bias is negligible for the small n used here.
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Poisson count with the given mean (Knuth multiplication method; the
    /// means in this simulator are O(1) or smaller).
    std::uint64_t poisson(double mean)
    {
        if (mean <= 0.0)
            return 0;
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= next_double();
        } while (p > limit);
        return k - 1;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace blindsim
