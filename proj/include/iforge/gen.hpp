#pragma once

#include "iforge/types.hpp"

#include <cstdint>

namespace iforge {

// How many output tokens each pair gets.
enum class MPolicy {
    Fixed,   // always m_fixed (input lengths are drawn >= m_fixed)
    Uniform, // uniform in 1..n^j, independently per pair
};

struct GenConfig {
    std::uint64_t seed = 0;
    int d = 2;
    std::size_t N = 1;     // number of sequence pairs
    std::size_t n_max = 4; // input lengths are uniform in 1..n_max
    MPolicy m_policy = MPolicy::Uniform;
    std::size_t m_fixed = 1;
};

// Seeded random dataset meeting the interpolation requirements: standard
// normal tokens, rejection-sampled so tokens within a sequence stay at least
// 1e-6 apart and input sequences differ as sets. Deterministic per config.
// Throws ContractError on bad config, ConstructionError if rejection caps out.
Dataset gen_dataset(const GenConfig& cfg);

} // namespace iforge
