#include "iforge/core.hpp"

#include "iforge/error.hpp"
#include "iforge/kernels.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace iforge {
namespace {

void check_token_dim(const Sequence& xs, int d, const char* who) {
    for (const Vec& t : xs.tokens)
        if (static_cast<int>(t.size()) != d)
            throw ContractError(std::string(who) + ": token dimension mismatch");
}

} // namespace

Vec ff_apply(const FeedForwardLayer& ff, const Vec& x) {
    if (static_cast<int>(x.size()) != ff.d) throw ContractError("ff_apply: dimension mismatch");
    if (ff.w.size() != static_cast<std::size_t>(ff.d) * ff.dp ||
        ff.u.size() != static_cast<std::size_t>(ff.d) * ff.dp ||
        ff.b.size() != static_cast<std::size_t>(ff.dp))
        throw ContractError("ff_apply: inconsistent layer shapes");

    Vec out(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = ff.eta * x[c];
    if (ff.dp == 0) return out;

    Vec pre(ff.dp);
    for (int k = 0; k < ff.dp; ++k)
        pre[k] = kernels::dot(ff.u_row(k), x.data(), x.size()) + ff.b[k];
    Vec h(ff.dp);
    kernels::relu(h.data(), pre.data(), pre.size());
    for (int k = 0; k < ff.dp; ++k)
        if (h[k] != 0.0) kernels::axpy(out.data(), h[k], ff.w_col(k), out.size());
    return out;
}

Sequence ff_apply(const FeedForwardLayer& ff, const Sequence& xs) {
    Sequence out;
    out.tokens.reserve(xs.size());
    for (const Vec& t : xs.tokens) out.tokens.push_back(ff_apply(ff, t));
    return out;
}

std::vector<std::size_t> hardmax_cluster(const Sequence& xs, const Matrix& A, std::size_t i) {
    if (i >= xs.size()) throw ContractError("hardmax_cluster: index out of range");
    check_token_dim(xs, A.d, "hardmax_cluster");
    const std::size_t n = xs.size();
    std::vector<double> s(n);
    double smax = -HUGE_VAL;
    for (std::size_t l = 0; l < n; ++l) {
        s[l] = A.score(xs[i], xs[l]);
        if (s[l] > smax) smax = s[l];
    }
    const double tol = hardmax_tie_tol(smax);
    std::vector<std::size_t> cluster;
    for (std::size_t l = 0; l < n; ++l)
        if (smax - s[l] <= tol) cluster.push_back(l);
    return cluster;
}

std::vector<double> hardmax_weights(const Sequence& xs, const Matrix& A, std::size_t i) {
    const std::vector<std::size_t> cluster = hardmax_cluster(xs, A, i);
    std::vector<double> w(xs.size(), 0.0);
    const double p = 1.0 / static_cast<double>(cluster.size());
    for (std::size_t l : cluster) w[l] = p;
    return w;
}

std::vector<double> softmax_weights(const Sequence& xs, const Matrix& A, double tau, std::size_t i) {
    if (!(tau > 0.0)) throw ContractError("softmax_weights: tau must be positive");
    if (i >= xs.size()) throw ContractError("softmax_weights: index out of range");
    check_token_dim(xs, A.d, "softmax_weights");
    const std::size_t n = xs.size();
    std::vector<double> s(n);
    double smax = -HUGE_VAL;
    for (std::size_t l = 0; l < n; ++l) {
        s[l] = A.score(xs[i], xs[l]);
        if (s[l] > smax) smax = s[l];
    }
    double z = 0.0;
    std::vector<double> w(n);
    for (std::size_t l = 0; l < n; ++l) {
        w[l] = std::exp((s[l] - smax) / tau);
        z += w[l];
    }
    for (std::size_t l = 0; l < n; ++l) w[l] /= z;
    return w;
}

// Mean over an index cluster, computed from the index set so a singleton
// cluster returns its token bit-for-bit.
Vec cluster_mean(const Sequence& xs, const std::vector<std::size_t>& cluster) {
    if (cluster.size() == 1) return xs[cluster.front()];
    Vec m(xs.dim(), 0.0);
    for (std::size_t l : cluster)
        for (std::size_t c = 0; c < m.size(); ++c) m[c] += xs[l][c];
    const double inv = 1.0 / static_cast<double>(cluster.size());
    for (double& c : m) c *= inv;
    return m;
}

namespace {

// rho*x + V*mix evaluated in the form that keeps the construction exact:
//  - rho == 0: the x term vanishes, so collapsed tokens equal V*mix bitwise;
//  - scaled-identity V with rho + scale == 1: convex-combination update
//    x + scale*(mix - x), which fixes x exactly when mix == x.
Vec sa_combine(double rho, const Matrix& V, const Vec& x, const Vec& mix) {
    if (rho == 0.0) return V.apply(mix);
    if (V.kind == Matrix::Kind::ScaledIdentity && rho + V.scale == 1.0) {
        Vec out(x.size());
        for (std::size_t c = 0; c < x.size(); ++c) out[c] = x[c] + V.scale * (mix[c] - x[c]);
        return out;
    }
    Vec out = V.apply(mix);
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = rho * x[c] + out[c];
    return out;
}

} // namespace

Sequence sa_apply(const SelfAttentionLayer& sa, const Sequence& xs) {
    check_token_dim(xs, sa.d, "sa_apply");
    Sequence out;
    out.tokens.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Vec mix;
        if (sa.kind == AttentionKind::Hardmax) {
            mix = cluster_mean(xs, hardmax_cluster(xs, sa.A, i));
        } else {
            const std::vector<double> w = softmax_weights(xs, sa.A, sa.tau, i);
            mix.assign(xs.dim(), 0.0);
            for (std::size_t l = 0; l < xs.size(); ++l)
                kernels::axpy(mix.data(), w[l], xs[l].data(), mix.size());
        }
        out.tokens.push_back(sa_combine(sa.rho, sa.V, xs[i], mix));
    }
    return out;
}

Sequence transformer_apply(const Transformer& t, const Sequence& xs) {
    if (static_cast<int>(xs.dim()) != t.d && !t.blocks.empty())
        throw ContractError("transformer_apply: dimension mismatch");
    Sequence cur = xs;
    for (const TransformerBlock& blk : t.blocks)
        cur = sa_apply(blk.sa, ff_apply(blk.ff, cur));
    return cur;
}

namespace {

double directed_sq(const Sequence& a, const Sequence& b) {
    double worst = 0.0;
    for (const Vec& x : a.tokens) {
        double best = HUGE_VAL;
        for (const Vec& y : b.tokens) {
            const double d2 = kernels::sqdist(x.data(), y.data(), x.size());
            if (d2 < best) best = d2;
        }
        if (best > worst) worst = best;
    }
    return worst;
}

} // namespace

double hausdorff_distance(const Sequence& a, const Sequence& b) {
    if (a.tokens.empty() || b.tokens.empty())
        throw ContractError("hausdorff_distance: empty sequence");
    if (a.dim() != b.dim())
        throw ContractError("hausdorff_distance: dimension mismatch");
    const double fwd = directed_sq(a, b);
    const double bwd = directed_sq(b, a);
    return std::sqrt(fwd > bwd ? fwd : bwd);
}

bool sequences_equal_as_sets(const Sequence& a, const Sequence& b, double tol) {
    return hausdorff_distance(a, b) <= tol;
}

std::size_t param_count(const Transformer& t) {
    std::size_t n = 0;
    for (const TransformerBlock& blk : t.blocks)
        n += blk.ff.nonzero_param_count() + blk.sa.nonzero_param_count();
    return n;
}

namespace {

bool tokens_identical(const Vec& a, const Vec& b) {
    for (std::size_t c = 0; c < a.size(); ++c)
        if (a[c] != b[c]) return false;
    return true;
}

ValidationResult fail(std::string clause, std::string detail) {
    return ValidationResult{false, std::move(clause), std::move(detail)};
}

std::string at(std::size_t j, std::size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "pair %zu, token %zu", j, i);
    return buf;
}

} // namespace

ValidationResult validate_dataset(const Dataset& ds) {
    if (ds.d < 2) return fail("d >= 2", "d = " + std::to_string(ds.d));
    if (ds.pairs.empty()) return fail("N >= 1", "dataset has no pairs");
    for (std::size_t j = 0; j < ds.pairs.size(); ++j) {
        const SeqPair& p = ds.pairs[j];
        if (p.input.tokens.empty()) return fail("n^j >= 1", "pair " + std::to_string(j));
        if (p.output.tokens.empty()) return fail("m^j >= 1", "pair " + std::to_string(j));
        if (p.output.size() > p.input.size())
            return fail("m^j <= n^j", "pair " + std::to_string(j));
        for (std::size_t i = 0; i < p.input.size(); ++i) {
            if (static_cast<int>(p.input[i].size()) != ds.d)
                return fail("input tokens in R^d", at(j, i));
            for (double c : p.input[i])
                if (!std::isfinite(c)) return fail("finite input coordinates", at(j, i));
        }
        for (std::size_t i = 0; i < p.output.size(); ++i) {
            if (static_cast<int>(p.output[i].size()) != ds.d)
                return fail("output tokens in R^d", at(j, i));
            for (double c : p.output[i])
                if (!std::isfinite(c)) return fail("finite output coordinates", at(j, i));
        }
        for (std::size_t i = 0; i < p.input.size(); ++i)
            for (std::size_t k = i + 1; k < p.input.size(); ++k)
                if (tokens_identical(p.input[i], p.input[k]))
                    return fail("distinct tokens within each input", at(j, i) + " == token " + std::to_string(k));
        for (std::size_t i = 0; i < p.output.size(); ++i)
            for (std::size_t k = i + 1; k < p.output.size(); ++k)
                if (tokens_identical(p.output[i], p.output[k]))
                    return fail("distinct tokens within each output", at(j, i) + " == token " + std::to_string(k));
    }
    for (std::size_t j = 0; j < ds.pairs.size(); ++j)
        for (std::size_t k = j + 1; k < ds.pairs.size(); ++k)
            if (hausdorff_distance(ds.pairs[j].input, ds.pairs[k].input) == 0.0)
                return fail("inputs pairwise distinct as sets",
                            "pairs " + std::to_string(j) + " and " + std::to_string(k));
    return ValidationResult{};
}

} // namespace iforge
