#pragma once

#include "iforge/matrix.hpp"
#include "iforge/types.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace iforge {

// Configuration of the discrete hardmax token dynamics
//   x_i(k+1) = x_i(k) + gamma * (mean of cluster C_i(X(k), A) - x_i(k)),
// i.e. rho = 1 - gamma and V = gamma * I. A is restricted to the two shapes
// the asymptotic results cover: rank-one symmetric v v^T or xi * I, xi > 0.
struct DynamicsConfig {
    double gamma = 1.0; // in (0, 1]
    Matrix A;

    static DynamicsConfig rank_one(Vec v, double gamma) {
        DynamicsConfig c;
        c.gamma = gamma;
        c.A = Matrix::rank_one_sym(std::move(v), 1.0);
        return c;
    }
    static DynamicsConfig scaled_identity(int d, double xi, double gamma) {
        DynamicsConfig c;
        c.gamma = gamma;
        c.A = Matrix::scaled_identity(d, xi);
        return c;
    }
};

struct Trajectory {
    std::vector<Sequence> iterates; // X(0), X(1), ..., excluding the sub-tol confirming step
    bool converged = false;
    Sequence equilibrium;           // last iterate when converged, else empty
    std::size_t steps_taken = 0;    // number of state-changing steps recorded
};

// One synchronous update: every cluster is computed on the pre-update state.
// gamma == 1 copies the cluster mean bitwise, so full/partial clustering is
// exact in one step; singleton clusters are exact fixed points for every gamma.
Sequence dynamics_step(const Sequence& X, const DynamicsConfig& cfg);

// 10 * ceil(log(conv_tol)/log(1-gamma)) for gamma < 1, else 2.
std::size_t default_max_steps(double gamma, double conv_tol);

// Iterates until the max per-token displacement of a step falls below
// conv_tol (converged; the confirming step is not recorded) or until
// max_steps step attempts are exhausted (not converged). max_steps == 0
// selects the default budget.
Trajectory simulate(const Sequence& X0, const DynamicsConfig& cfg, std::size_t max_steps = 0,
                    double conv_tol = 1e-10);

// Predicted limit under A = v v^T: token i goes to x_M(0) when
// <v, x_i(0)> > 0 and to x_m(0) otherwise, where M/m are the unique
// argmax/argmin of <v, .>. Hypotheses (nonzero inner products, unique
// extremes) are checked with margin 1e-9; HypothesisError on violation.
Sequence predict_rank1_equilibrium(const Sequence& X0, const Vec& v);

// Predicted limit under A = xi*I from a partially clustered start: leaders
// (first index = apex R*1_d, the rest on S_R in the negative orthant) stay
// fixed, every other token goes to the apex. Hypotheses are checked with
// margin 1e-9; HypothesisError names the violated clause.
Sequence predict_partial_equilibrium(const Sequence& X0, const std::vector<std::size_t>& leaders,
                                     double R);

// CSV export: header step,token_index,coord_0..coord_{d-1}; one row per
// (step, token), coordinates printed with %.17g.
std::string trajectory_csv(const Trajectory& t);

} // namespace iforge
