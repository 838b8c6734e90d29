#include "iforge/dynamics.hpp"

#include "iforge/core.hpp"
#include "iforge/error.hpp"
#include "iforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace iforge {

namespace {

void validate_config(const Sequence& X, const DynamicsConfig& cfg) {
    if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0))
        throw ContractError("dynamics: gamma must lie in (0, 1]");
    if (cfg.A.kind == Matrix::Kind::Dense)
        throw ContractError("dynamics: A must be rank-one symmetric or a scaled identity");
    if (cfg.A.kind == Matrix::Kind::ScaledIdentity && !(cfg.A.scale > 0.0))
        throw ContractError("dynamics: scaled-identity A needs xi > 0");
    if (cfg.A.kind == Matrix::Kind::RankOneSym) {
        const double n2 = kernels::dot(cfg.A.v.data(), cfg.A.v.data(), cfg.A.v.size());
        if (!(n2 > 0.0)) throw ContractError("dynamics: rank-one A needs nonzero v");
    }
    if (static_cast<int>(X.dim()) != cfg.A.d)
        throw ContractError("dynamics: dimension mismatch between state and A");
}

constexpr double kHypMargin = 1e-9;

} // namespace

Sequence dynamics_step(const Sequence& X, const DynamicsConfig& cfg) {
    validate_config(X, cfg);
    const std::size_t d = X.dim();
    Sequence out;
    out.tokens.reserve(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        const Vec mean = cluster_mean(X, hardmax_cluster(X, cfg.A, i));
        if (cfg.gamma == 1.0) {
            out.tokens.push_back(mean); // bitwise: one-step clustering is exact
            continue;
        }
        Vec x = X[i];
        for (std::size_t c = 0; c < d; ++c) x[c] += cfg.gamma * (mean[c] - x[c]);
        out.tokens.push_back(std::move(x));
    }
    return out;
}

std::size_t default_max_steps(double gamma, double conv_tol) {
    if (gamma >= 1.0) return 2;
    const double steps = std::ceil(std::log(conv_tol) / std::log1p(-gamma));
    return 10 * static_cast<std::size_t>(std::max(1.0, steps));
}

Trajectory simulate(const Sequence& X0, const DynamicsConfig& cfg, std::size_t max_steps,
                    double conv_tol) {
    validate_config(X0, cfg);
    if (!(conv_tol > 0.0)) throw ContractError("simulate: conv_tol must be positive");
    if (max_steps == 0) max_steps = default_max_steps(cfg.gamma, conv_tol);

    Trajectory traj;
    traj.iterates.push_back(X0);
    const std::size_t d = X0.dim();

    for (std::size_t k = 1; k <= max_steps; ++k) {
        const Sequence& cur = traj.iterates.back();
        Sequence next = dynamics_step(cur, cfg);
        double disp = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i)
            disp = std::max(disp, std::sqrt(kernels::sqdist(cur[i].data(), next[i].data(), d)));
        if (disp < conv_tol) {
            traj.converged = true;
            traj.equilibrium = cur;
            traj.steps_taken = k - 1;
            return traj;
        }
        traj.iterates.push_back(std::move(next));
    }
    traj.steps_taken = max_steps;
    return traj;
}

Sequence predict_rank1_equilibrium(const Sequence& X0, const Vec& v) {
    if (v.size() != X0.dim()) throw ContractError("predict_rank1_equilibrium: dimension mismatch");
    if (!(kernels::dot(v.data(), v.data(), v.size()) > 0.0))
        throw ContractError("predict_rank1_equilibrium: v must be nonzero");
    const std::size_t n = X0.size();
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = kernels::dot(v.data(), X0[i].data(), v.size());
        if (!(std::abs(p[i]) > kHypMargin))
            throw HypothesisError("predict_rank1_equilibrium: <v, x_i(0)> vanishes (margin 1e-9)");
    }
    std::size_t M = 0, m = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (p[i] > p[M]) M = i;
        if (p[i] < p[m]) m = i;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (i != M && !(p[M] - p[i] > kHypMargin))
            throw HypothesisError("predict_rank1_equilibrium: argmax of <v, .> not unique (margin 1e-9)");
        if (i != m && !(p[i] - p[m] > kHypMargin))
            throw HypothesisError("predict_rank1_equilibrium: argmin of <v, .> not unique (margin 1e-9)");
    }
    Sequence out;
    out.tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.tokens.push_back(p[i] > 0.0 ? X0[M] : X0[m]);
    return out;
}

Sequence predict_partial_equilibrium(const Sequence& X0, const std::vector<std::size_t>& leaders,
                                     double R) {
    if (!(R > 0.0)) throw ContractError("predict_partial_equilibrium: R must be positive");
    if (leaders.empty()) throw ContractError("predict_partial_equilibrium: empty leader set");
    const std::size_t n = X0.size();
    const std::size_t d = X0.dim();
    std::vector<char> is_leader(n, 0);
    for (std::size_t idx : leaders) {
        if (idx >= n) throw ContractError("predict_partial_equilibrium: leader index out of range");
        if (is_leader[idx]) throw ContractError("predict_partial_equilibrium: duplicate leader index");
        is_leader[idx] = 1;
    }

    // Clause i): non-leaders strictly inside the open hypercube (0, R)^d.
    for (std::size_t i = 0; i < n; ++i) {
        if (is_leader[i]) continue;
        for (std::size_t c = 0; c < d; ++c)
            if (!(X0[i][c] > kHypMargin && X0[i][c] < R - kHypMargin))
                throw HypothesisError(
                    "predict_partial_equilibrium: non-leader token leaves the open hypercube (0,R)^d");
    }
    // Clause ii): the first leader is the apex R*1_d.
    const std::size_t apex = leaders[0];
    for (std::size_t c = 0; c < d; ++c)
        if (!(std::abs(X0[apex][c] - R) <= kHypMargin))
            throw HypothesisError("predict_partial_equilibrium: first leader is not the apex R*1_d");
    // Clause iii): remaining leaders on S_R inside the negative orthant.
    for (std::size_t j = 1; j < leaders.size(); ++j) {
        const Vec& x = X0[leaders[j]];
        const double r = std::sqrt(kernels::dot(x.data(), x.data(), d));
        if (!(std::abs(r - R) <= kHypMargin))
            throw HypothesisError("predict_partial_equilibrium: negative leader leaves the sphere S_R");
        for (std::size_t c = 0; c < d; ++c)
            if (!(x[c] < -kHypMargin))
                throw HypothesisError(
                    "predict_partial_equilibrium: negative leader leaves the negative orthant");
    }
    // Leaders pairwise distinct (needed for their clusters to be singletons).
    for (std::size_t a = 0; a + 1 < leaders.size(); ++a)
        for (std::size_t b = a + 1; b < leaders.size(); ++b) {
            const double dist2 = kernels::sqdist(X0[leaders[a]].data(), X0[leaders[b]].data(), d);
            if (!(dist2 > kHypMargin * kHypMargin))
                throw HypothesisError("predict_partial_equilibrium: leaders not pairwise distinct");
        }

    Sequence out;
    out.tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.tokens.push_back(is_leader[i] ? X0[i] : X0[apex]);
    return out;
}

std::string trajectory_csv(const Trajectory& t) {
    std::ostringstream os;
    const std::size_t d = t.iterates.empty() ? 0 : t.iterates.front().dim();
    os << "step,token_index";
    for (std::size_t c = 0; c < d; ++c) os << ",coord_" << c;
    os << "\n";
    char buf[64];
    for (std::size_t k = 0; k < t.iterates.size(); ++k) {
        const Sequence& X = t.iterates[k];
        for (std::size_t i = 0; i < X.size(); ++i) {
            os << k << "," << i;
            for (std::size_t c = 0; c < d; ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", X[i][c]);
                os << "," << buf;
            }
            os << "\n";
        }
    }
    return os.str();
}

} // namespace iforge
