#pragma once

#include "iforge/model.hpp"
#include "iforge/types.hpp"

#include <cstddef>
#include <vector>

namespace iforge {

// Hardmax ties: l belongs to the cluster of i when its score is within
// tie_tol of the max, tie_tol = 1e-9 * (1 + |max|).
inline double hardmax_tie_tol(double max_score) {
    return 1e-9 * (1.0 + (max_score < 0 ? -max_score : max_score));
}

Vec ff_apply(const FeedForwardLayer& ff, const Vec& x);
Sequence ff_apply(const FeedForwardLayer& ff, const Sequence& xs);

// Indices of the argmax cluster C_i(X, A), ascending.
std::vector<std::size_t> hardmax_cluster(const Sequence& xs, const Matrix& A, std::size_t i);

// Mean over an index cluster; a singleton cluster returns its token
// bit-for-bit, which downstream fixed-point arguments rely on.
Vec cluster_mean(const Sequence& xs, const std::vector<std::size_t>& cluster);

// Attention row i: uniform on the argmax cluster.
std::vector<double> hardmax_weights(const Sequence& xs, const Matrix& A, std::size_t i);

// Attention row i: softmax of <A x_i, x_l> / tau with max subtraction.
std::vector<double> softmax_weights(const Sequence& xs, const Matrix& A, double tau, std::size_t i);

Sequence sa_apply(const SelfAttentionLayer& sa, const Sequence& xs);
Sequence transformer_apply(const Transformer& t, const Sequence& xs);

// Symmetric Hausdorff distance between token sets under the l2 metric.
double hausdorff_distance(const Sequence& a, const Sequence& b);

bool sequences_equal_as_sets(const Sequence& a, const Sequence& b, double tol = 1e-9);

// Count of nonzero stored scalars across all layer parameters; tagged
// matrices count in factored form.
std::size_t param_count(const Transformer& t);

// Checks the interpolation-dataset requirements; reports the first violated
// clause instead of throwing.
ValidationResult validate_dataset(const Dataset& ds);

} // namespace iforge
