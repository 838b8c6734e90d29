#pragma once

#include "iforge/error.hpp"
#include "iforge/kernels.hpp"
#include "iforge/types.hpp"

#include <cstddef>

namespace iforge {

// Square d x d matrix stored in the cheapest faithful form. The tag is part
// of the artifact: parameter counting and serialization must see whether a
// matrix is a scalar multiple of the identity (1 scalar), a symmetric rank-one
// s*v*v^T (d scalars, factored), or dense (d*d scalars).
struct Matrix {
    enum class Kind { Dense, ScaledIdentity, RankOneSym };

    Kind kind = Kind::ScaledIdentity;
    int d = 0;
    double scale = 0.0;          // ScaledIdentity: scale * I
    Vec v;                       // RankOneSym: sign * v v^T
    double sign = 1.0;           // RankOneSym: +1 or -1
    std::vector<double> dense;   // Dense: row-major d x d

    static Matrix zero(int d) { return scaled_identity(d, 0.0); }
    static Matrix identity(int d) { return scaled_identity(d, 1.0); }

    static Matrix scaled_identity(int d, double s) {
        Matrix m;
        m.kind = Kind::ScaledIdentity;
        m.d = d;
        m.scale = s;
        return m;
    }

    static Matrix rank_one_sym(Vec v, double sign) {
        if (sign != 1.0 && sign != -1.0) throw ContractError("rank_one_sym: sign must be +1 or -1");
        Matrix m;
        m.kind = Kind::RankOneSym;
        m.d = static_cast<int>(v.size());
        m.v = std::move(v);
        m.sign = sign;
        return m;
    }

    static Matrix from_dense(int d, std::vector<double> rows) {
        if (rows.size() != static_cast<std::size_t>(d) * d)
            throw ContractError("from_dense: need d*d entries");
        Matrix m;
        m.kind = Kind::Dense;
        m.d = d;
        m.dense = std::move(rows);
        return m;
    }

    // y = M x
    Vec apply(const Vec& x) const {
        if (static_cast<int>(x.size()) != d) throw ContractError("Matrix::apply: dimension mismatch");
        Vec y(x.size(), 0.0);
        switch (kind) {
        case Kind::ScaledIdentity:
            for (std::size_t c = 0; c < x.size(); ++c) y[c] = scale * x[c];
            break;
        case Kind::RankOneSym: {
            const double s = sign * kernels::dot(v.data(), x.data(), v.size());
            kernels::axpy(y.data(), s, v.data(), v.size());
            break;
        }
        case Kind::Dense:
            for (int r = 0; r < d; ++r) y[r] = kernels::dot(dense.data() + static_cast<std::size_t>(r) * d, x.data(), x.size());
            break;
        }
        return y;
    }

    // <M a, b>; rank-one scores reduce to two dot products.
    double score(const Vec& a, const Vec& b) const {
        if (static_cast<int>(a.size()) != d || static_cast<int>(b.size()) != d)
            throw ContractError("Matrix::score: dimension mismatch");
        switch (kind) {
        case Kind::ScaledIdentity:
            return scale * kernels::dot(a.data(), b.data(), a.size());
        case Kind::RankOneSym:
            return sign * kernels::dot(v.data(), a.data(), v.size()) * kernels::dot(v.data(), b.data(), v.size());
        case Kind::Dense: {
            const Vec ma = apply(a);
            return kernels::dot(ma.data(), b.data(), b.size());
        }
        }
        return 0.0;
    }

    std::size_t nonzero_param_count() const {
        switch (kind) {
        case Kind::ScaledIdentity:
            return scale != 0.0 ? 1 : 0;
        case Kind::RankOneSym:
            return static_cast<std::size_t>(d); // stored factored: the d entries of v
        case Kind::Dense: {
            std::size_t n = 0;
            for (double x : dense) n += x != 0.0;
            return n;
        }
        }
        return 0;
    }
};

} // namespace iforge
