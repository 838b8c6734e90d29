#pragma once

#include "iforge/matrix.hpp"
#include "iforge/types.hpp"

#include <cstddef>
#include <vector>

namespace iforge {

// FF(x) = eta*x + W sigma(U x + b), sigma = ReLU, width dp <= 4 in built
// networks. W is d x dp (stored column-major: one d-column per neuron),
// U is dp x d (row-major: one d-row per neuron).
struct FeedForwardLayer {
    int d = 0;
    int dp = 0;
    double eta = 1.0;
    std::vector<double> w; // d*dp, column-major
    std::vector<double> u; // dp*d, row-major
    Vec b;                 // dp

    static FeedForwardLayer identity(int d) {
        FeedForwardLayer f;
        f.d = d;
        f.dp = 0;
        f.eta = 1.0;
        return f;
    }

    const double* w_col(int k) const { return w.data() + static_cast<std::size_t>(k) * d; }
    const double* u_row(int k) const { return u.data() + static_cast<std::size_t>(k) * d; }

    std::size_t nonzero_param_count() const {
        std::size_t n = eta != 0.0 ? 1 : 0;
        for (double x : w) n += x != 0.0;
        for (double x : u) n += x != 0.0;
        for (double x : b) n += x != 0.0;
        return n;
    }
};

enum class AttentionKind { Hardmax, Softmax };

// SA_i(X) = rho*x_i + V sum_l pi_il(X, A) x_l. Hardmax puts uniform weight on
// the argmax cluster of <A x_i, x_l>; softmax uses temperature tau.
struct SelfAttentionLayer {
    int d = 0;
    AttentionKind kind = AttentionKind::Hardmax;
    double rho = 1.0;
    double tau = 1.0; // softmax only
    Matrix V;
    Matrix A;

    static SelfAttentionLayer identity(int d, AttentionKind kind = AttentionKind::Hardmax) {
        SelfAttentionLayer s;
        s.d = d;
        s.kind = kind;
        s.rho = 1.0;
        s.tau = 1.0;
        s.V = Matrix::zero(d);
        s.A = Matrix::zero(d);
        return s;
    }

    std::size_t nonzero_param_count() const {
        return (rho != 0.0 ? 1 : 0) + V.nonzero_param_count() + A.nonzero_param_count();
    }
};

// One block applies FF first, then SA, matching the composition used by the
// construction: T = (SA^L o FF^L) o ... o (SA^1 o FF^1).
struct TransformerBlock {
    FeedForwardLayer ff;
    SelfAttentionLayer sa;
};

struct Transformer {
    int d = 0;
    std::vector<TransformerBlock> blocks;

    std::size_t depth() const { return blocks.size(); }
};

} // namespace iforge
