#pragma once

#include "iforge/matrix.hpp"
#include "iforge/model.hpp"
#include "iforge/types.hpp"

#include <cstddef>
#include <vector>

namespace iforge {

// Euclidean projection of a query point onto the convex hull of a finite set.
struct HullProjection {
    Vec point;                  // projection of query onto co(points)
    double distance = 0.0;      // ||query - point||
    double gap = 0.0;           // duality gap at termination
    std::size_t major_cycles = 0;
};

// Minimum-norm-point scheme (Wolfe-style major/minor cycles) run until the
// duality gap falls below tol * (1 + max_j ||p_j - query||^2), with a
// no-progress safeguard for float stalls. Throws ConstructionError with the
// achieved gap if the iteration cap is exceeded.
HullProjection min_norm_point_in_hull(const std::vector<Vec>& points, const Vec& query,
                                      double tol = 1e-12);

// Witness of strict linear separation of token i from the other tokens.
struct SeparationCertificate {
    Vec v;                   // <v, x_i> > <v, x_l> for all l != i
    double margin = 0.0;     // min over l != i of <v, x_i> - <v, x_l>, positive
    std::size_t witness = 0; // index attaining the minimal gap
};

struct ExtremeResult {
    bool extreme = false;
    double distance = 0.0;      // distance from x_i to co(X \ {x_i})
    SeparationCertificate cert; // populated only when extreme is true
};

// Token i is reported extreme iff its distance to the hull of the remaining
// tokens exceeds tol AND the recovered direction v = x_i - projection has a
// strictly positive recomputed margin (both must hold, so the stored
// certificate is always valid). A singleton sequence is extreme by
// convention with v = x_i, margin = ||x_i||^2, witness = i.
ExtremeResult is_extreme(const Sequence& X, std::size_t i, double tol = 1e-9);

// Rank-one symmetric A = sign(<v,x_i>) * v v^T such that the hardmax cluster
// C_i(X, A) is exactly {i}; the cluster is re-verified before returning.
// Preconditions: all tokens nonzero, x_i extreme (HypothesisError otherwise).
Matrix leader_matrix(const Sequence& X, std::size_t i);

// Direction v with a unique <v,.>-argmax in every sequence, the argmax of
// sequence jstar being istar, and <v, x^jstar_istar> != 0. Built by
// induction: start from the separation certificate of the prescribed token,
// then break per-sequence argmax ties by adding eps * u, where u separates an
// extreme member of the tied subset and eps is half the largest step that
// preserves every previously established strict inequality.
Vec global_leader_direction(const std::vector<Sequence>& sequences, std::size_t jstar,
                            std::size_t istar);

struct LeaderSelection {
    FeedForwardLayer ff;              // width-1 constant shift along v
    Vec v;                            // unit direction used by the shift
    std::vector<std::size_t> leaders; // i_j per sequence; leaders[jstar] == istar
};

// Width-1 FF layer FF(x) = x + b*v (v unit, b = eps_shift - min <v, token>)
// that moves every token to the <v,.> > 0 half-space so that afterwards the
// hardmax cluster C_l(FF(X^j), v v^T) equals {i_j} for every token l of every
// sequence j. eps_shift starts at 1.0 and doubles on verification failure
// (cap 50 doublings).
LeaderSelection choose_leader_ff(const std::vector<Sequence>& sequences, std::size_t jstar,
                                 std::size_t istar);

// Width-3 "hat" layer: moves points[i] exactly to y while fixing every other
// listed point. Points on the dead side of the hat are fixed bitwise; the
// moved point and the active side are exact to 1e-12 relative. The hat
// direction is drawn from a deterministic candidate list seeded by an
// instance hash, and each candidate is verified on all points before being
// accepted, so the returned layer always satisfies the exactness contract.
FeedForwardLayer hat_ff(const std::vector<Vec>& points, std::size_t i, const Vec& y);

} // namespace iforge
