#pragma once

#include "iforge/builder_hardmax.hpp"
#include "iforge/model.hpp"
#include "iforge/types.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <tuple>
#include <vector>

namespace iforge {

// Constants of one collapse iteration's width-3 FF (see collapse_ff).
struct CollapseIteration {
    double s = 0.0;
    double c_pos = 0.0;
    double c_neg = 0.0;
};

// Geometry and temperatures chosen by the softmax construction.
struct SoftmaxPlan {
    // Containment radius: after the calibrated collapse attention, every
    // token sits within delta/2 of its hardmax image.
    double delta = 0.0;
    // Unit collapse direction with strictly negative coordinates; projections
    // p(x) = <-w, x> of all placed leaders are pairwise separated.
    Vec w;
    double R = 0.0; // smallest leader sphere radius
    // One temperature per block, in network order; 1.0 wherever the block's
    // attention is inert (A = 0) and the temperature has no effect.
    std::vector<double> taus;
    std::vector<CollapseIteration> iterations; // one per collapse block
    double tau_min = 1.0;           // smallest calibrated temperature
    bool tau_min_global_ok = false; // tau_min verified as a single global temperature
    std::string note;               // outcome of the global-temperature re-check
};

// Signed acceptance margin of a candidate post-state; >= 0 means pass.
using MarginFn = std::function<double(const std::vector<Sequence>&)>;

// Largest temperature in {1, 1/2, 1/4, ...} whose post-state (the block
// applied to `states`) passes `margin`. The block must use softmax attention
// (ContractError otherwise). A block with A = 0 scores every token equally at
// any temperature, so 1.0 is returned without searching. Throws
// CalibrationError after 60 halvings, reporting the best residual margin.
double calibrate_tau(const TransformerBlock& block, const std::vector<Sequence>& states,
                     const MarginFn& margin);

// Width-3 FF acting along the line spanned by the unit direction w (all
// coordinates negative). Writing p(x) = <-w, x>, the output is g(p) where
//   p >= s + c_pos          -> 0 (every neuron inactive; exact zero)
//   s <= p <= s + c_pos     -> (s + c_pos - p) * (-w)   slope -1, injective
//   s - c_neg <= p <= s     -> c_pos * (1 - (s - p)/c_neg) * (-w)
//   p <= s - c_neg          -> (c_pos / (2 c_neg)) * (s - c_neg - p) * w
// so the farthest group collapses to the origin, groups inside [s, s + c_pos]
// land on disjoint segments of the positive ray, and points below s - c_neg
// (the parked ones) map injectively into the negative orthant.
FeedForwardLayer collapse_ff(const Vec& w, double s, double c_pos, double c_neg);

// Full softmax pipeline: separation with per-block temperature calibration,
// leader selection, a calibrated collapse attention fused into the last
// leader block followed by one collapse_ff block per sequence
// (farthest-first), and interpolation. Verifies L <= 2*sum(m^j) + 3N and a
// final Hausdorff distance <= 1e-9 per pair.
std::tuple<Transformer, ConstructionReport, SoftmaxPlan> build_softmax(const Dataset& ds);

} // namespace iforge
