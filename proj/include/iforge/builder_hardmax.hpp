#pragma once

#include "iforge/model.hpp"
#include "iforge/types.hpp"

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace iforge {

// Four-step hardmax construction: separation -> leader selection -> collapse
// -> interpolation. Every builder returns real transformer blocks plus the
// states obtained by actually evaluating those blocks, so the report shows
// exactly what the produced network computes.

struct StepLedgerEntry {
    std::string step; // separation | leader_selection | collapse | interpolation
    std::size_t blocks = 0;
    std::vector<int> ff_widths; // dp per emitted block, in order
};

struct ConstructionReport {
    std::vector<StepLedgerEntry> steps;
    std::size_t L = 0;       // total blocks
    std::size_t P = 0;       // nonzero parameter count
    std::size_t bound_L = 0; // hardmax: 2*sum(m^j) + 2N + 1; softmax: 2*sum(m^j) + 3N
    double bound_P_coeff = 0.0; // c with P <= c * d * sum(m^j)
    // One snapshot of all sequences after each of the four steps.
    std::vector<std::vector<Sequence>> intermediate_states;
};

struct SeparationResult {
    std::vector<TransformerBlock> blocks;
    std::vector<Sequence> states;
    double delta1 = 0.0; // half the min pairwise token distance, post-separation
};

struct PlacementPlan {
    Vec shift;          // hypercube shift applied by the first block
    double a1 = 0.0;    // B = [a1, a2]^d holds every shifted token
    double a2 = 0.0;
    // Per sequence: leader token indices (apex first), the apex coordinate
    // value (also the sphere radius for that sequence), and the exact target
    // positions the leaders were moved to (apex first).
    std::vector<std::vector<std::size_t>> leaders;
    std::vector<double> radius;
    std::vector<std::vector<Vec>> targets;
};

struct LeaderSelectionResult {
    std::vector<TransformerBlock> blocks;
    std::vector<Sequence> states;
    PlacementPlan plan;
};

struct InterpolationResult {
    std::vector<TransformerBlock> blocks;
    std::vector<Sequence> states;
    std::size_t detours = 0; // extra blocks consumed from the slack reserve
};

// Emits one global-shift block making every token nonzero, then at most two
// blocks per additional sequence until all sequences are pairwise disjoint.
SeparationResult build_separation(const Dataset& ds);

// One hypercube-shift block, then one hat block per requested leader: the
// first leader of sequence j goes to its apex on the positive diagonal, the
// remaining ones to distinct points on that sequence's sphere intersected
// with the negative orthant. out_lengths[j] = m^j.
LeaderSelectionResult build_leader_selection(const std::vector<Sequence>& states,
                                             const std::vector<std::size_t>& out_lengths);

// Single block (identity FF; rho=0, V=I, A=I) collapsing each sequence onto
// its leaders. Verifies the partial-clustering hypotheses per sequence first.
TransformerBlock build_collapse(const std::vector<Sequence>& placed, const PlacementPlan& plan);

// One hat block per output token, pairing collapsed values with outputs
// lexicographically; transient collisions route through a detour point, each
// detour consuming one block from `detour_slack`.
InterpolationResult build_interpolation(const std::vector<Sequence>& collapsed,
                                        const std::vector<Sequence>& outputs,
                                        std::size_t detour_slack);

// Full pipeline. Verifies T(X^j) matches Y^j within 1e-9 for every pair and
// that the block count stays within 2*sum(m^j) + 2N + 1 before returning.
std::pair<Transformer, ConstructionReport> build_hardmax(const Dataset& ds);

} // namespace iforge
