#include <doctest.h>

#include "iforge/core.hpp"
#include "iforge/error.hpp"
#include "support/test_util.hpp"

#include <cmath>

using namespace iforge;
using test_util::random_sequence;
using test_util::random_transformer;

TEST_SUITE_BEGIN("core");

namespace {

Sequence seq(std::vector<Vec> t) { return Sequence(std::move(t)); }

} // namespace

TEST_CASE("ff_apply identity and zero maps") {
    const Vec x{1.5, -2.0};
    auto id = FeedForwardLayer::identity(2);
    CHECK(ff_apply(id, x) == x);

    FeedForwardLayer zero = id;
    zero.eta = 0.0;
    CHECK(ff_apply(zero, x) == Vec{0.0, 0.0});

    FeedForwardLayer wzero;
    wzero.d = 2;
    wzero.dp = 2;
    wzero.eta = 1.0;
    wzero.w.assign(4, 0.0);
    wzero.u.assign(4, 1.0);
    wzero.b.assign(2, 1.0);
    CHECK(ff_apply(wzero, x) == x);

    CHECK_THROWS_AS(ff_apply(id, Vec{1.0, 2.0, 3.0}), ContractError);
}

TEST_CASE("ff_apply single neuron relu arithmetic") {
    // FF(x) = x + w * relu(<u, x> + b) with u = (1, 0), b = -1, w = (0, 2):
    // at x = (3, 0): relu(2) = 2 -> (3, 4); at x = (0, 5): relu(-1) = 0 -> fixed.
    FeedForwardLayer f;
    f.d = 2;
    f.dp = 1;
    f.eta = 1.0;
    f.w = {0.0, 2.0};
    f.u = {1.0, 0.0};
    f.b = {-1.0};
    CHECK(ff_apply(f, Vec{3.0, 0.0}) == Vec{3.0, 4.0});
    CHECK(ff_apply(f, Vec{0.0, 5.0}) == Vec{0.0, 5.0});
}

TEST_CASE("hardmax_weights argmax cluster") {
    const Sequence x = seq({{2.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}});
    const Matrix I = Matrix::identity(2);
    CHECK(hardmax_weights(x, I, 0) == std::vector<double>{1.0, 0.0, 0.0});
    CHECK(hardmax_weights(x, I, 1) == std::vector<double>{0.0, 0.5, 0.5});
    CHECK(hardmax_weights(x, Matrix::zero(2), 0) ==
          std::vector<double>(3, 1.0 / 3.0));
}

TEST_CASE("hardmax tie tolerance is relative to the max score") {
    // Scores 1 and 1 - 5e-10 tie at tie_tol = 1e-9 * (1 + 1).
    const Sequence x = seq({{1.0, 0.0}, {1.0 - 5e-10, 0.0}});
    const auto c = hardmax_cluster(x, Matrix::identity(2), 0);
    CHECK(c == std::vector<std::size_t>{0, 1});
}

TEST_CASE("softmax_weights closed form and properties") {
    const Sequence x = seq({{1.0, 0.0}, {0.0, 0.0}});
    const Matrix I = Matrix::identity(2);
    const auto w = softmax_weights(x, I, 1.0, 0);
    const double e = std::exp(1.0);
    CHECK(w[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-15));

    CHECK(softmax_weights(x, Matrix::zero(2), 1.0, 0) == std::vector<double>{0.5, 0.5});
    CHECK_THROWS_AS(softmax_weights(x, I, 0.0, 0), ContractError);

    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const Sequence s = random_sequence(rng, 2 + rng.below(6), 3);
        const Matrix A = test_util::random_matrix(rng, 3);
        const auto ws = softmax_weights(s, A, 0.3 + rng.uniform(), rng.below(s.size()));
        double sum = 0.0;
        for (double wi : ws) {
            CHECK(wi > 0.0);
            sum += wi;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("softmax approaches hardmax as tau shrinks") {
    Rng rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        const Sequence s = random_sequence(rng, 4 + rng.below(5), 3);
        const Matrix A = test_util::random_matrix(rng, 3);
        double tau = 1.0;
        bool ok = false;
        for (int h = 0; h <= 60; ++h) {
            double gap = 0.0;
            for (std::size_t i = 0; i < s.size(); ++i) {
                const auto hm = hardmax_weights(s, A, i);
                const auto sm = softmax_weights(s, A, tau, i);
                for (std::size_t l = 0; l < s.size(); ++l)
                    gap = std::max(gap, std::abs(hm[l] - sm[l]));
            }
            if (gap < 1e-6) {
                ok = true;
                break;
            }
            tau *= 0.5;
        }
        CHECK(ok);
    }
}

TEST_CASE("sa_apply identity and exact fixed points") {
    const Sequence x = seq({{1.0, 1.0}, {0.5, 0.5}});
    auto id = SelfAttentionLayer::identity(2);
    const Sequence y = sa_apply(id, x);
    CHECK(y.tokens == x.tokens);

    // rho = 1 - a, V = a*I, A = I: token 0 is its own cluster, fixed exactly
    // even for non-dyadic a.
    SelfAttentionLayer sa;
    sa.d = 2;
    sa.kind = AttentionKind::Hardmax;
    const double a = 1.0 / 3.0;
    sa.rho = 1.0 - a;
    sa.V = Matrix::scaled_identity(2, 1.0 - sa.rho);
    sa.A = Matrix::identity(2);
    const Sequence z = sa_apply(sa, x);
    CHECK(z[0] == x[0]); // bitwise
    // token 1 moves toward token 0 by factor a
    CHECK(z[1][0] == doctest::Approx(0.5 + a * 0.5).epsilon(1e-15));
}

TEST_CASE("sa_apply softmax mean collapse") {
    const Sequence x = seq({{2.0, 0.0}, {0.0, 4.0}});
    SelfAttentionLayer sa;
    sa.d = 2;
    sa.kind = AttentionKind::Softmax;
    sa.rho = 0.0;
    sa.tau = 1.0;
    sa.V = Matrix::identity(2);
    sa.A = Matrix::zero(2);
    const Sequence y = sa_apply(sa, x);
    CHECK(y[0] == Vec{1.0, 2.0});
    CHECK(y[1] == Vec{1.0, 2.0});
}

TEST_CASE("hardmax collapse copies the cluster mean bitwise at rho 0") {
    // Apex (3,3) dominates; both box tokens map to the apex coordinates.
    const Sequence x = seq({{3.0, 3.0}, {1.0, 2.0}, {2.0, 1.0}});
    SelfAttentionLayer sa;
    sa.d = 2;
    sa.kind = AttentionKind::Hardmax;
    sa.rho = 0.0;
    sa.V = Matrix::identity(2);
    sa.A = Matrix::identity(2);
    const Sequence y = sa_apply(sa, x);
    CHECK(y[0] == x[0]);
    CHECK(y[1] == x[0]);
    CHECK(y[2] == x[0]);
}

TEST_CASE("transformer_apply composition") {
    Transformer t;
    t.d = 2;
    const Sequence x = seq({{1.0, 2.0}, {3.0, 4.0}});
    CHECK(transformer_apply(t, x).tokens == x.tokens); // zero blocks

    TransformerBlock blk;
    blk.ff = FeedForwardLayer::identity(2);
    blk.sa = SelfAttentionLayer::identity(2);
    t.blocks.push_back(blk);
    CHECK(transformer_apply(t, x).tokens == x.tokens);
}

TEST_CASE("hausdorff distance hand-checked values") {
    const Sequence a = seq({{0.0, 0.0}});
    const Sequence b = seq({{3.0, 4.0}});
    CHECK(hausdorff_distance(a, a) == 0.0);
    CHECK(hausdorff_distance(a, b) == 5.0);

    const Sequence c = seq({{0.0, 0.0}, {10.0, 0.0}});
    const Sequence d = seq({{0.0, 1.0}});
    CHECK(hausdorff_distance(c, d) == doctest::Approx(std::sqrt(101.0)).epsilon(1e-15));
    CHECK(hausdorff_distance(d, c) == hausdorff_distance(c, d));

    // order-insensitive: permuted copies are equal as sets
    const Sequence e = seq({{10.0, 0.0}, {0.0, 0.0}});
    CHECK(hausdorff_distance(c, e) == 0.0);
    CHECK(sequences_equal_as_sets(c, e));
    CHECK_FALSE(sequences_equal_as_sets(c, d));

    CHECK_THROWS_AS(hausdorff_distance(a, seq({{1.0, 2.0, 3.0}})), ContractError);
}

TEST_CASE("hausdorff is a pseudometric on random triples") {
    Rng rng(23);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t d = 2 + rng.below(4);
        const Sequence a = random_sequence(rng, 1 + rng.below(6), d);
        const Sequence b = random_sequence(rng, 1 + rng.below(6), d);
        const Sequence c = random_sequence(rng, 1 + rng.below(6), d);
        const double ab = hausdorff_distance(a, b);
        const double ba = hausdorff_distance(b, a);
        const double ac = hausdorff_distance(a, c);
        const double cb = hausdorff_distance(c, b);
        CHECK(ab == ba);
        CHECK(ab <= ac + cb + 1e-12);
    }
}

TEST_CASE("param_count counts nonzero scalars with factored matrices") {
    Transformer t;
    t.d = 3;
    CHECK(param_count(t) == 0);

    TransformerBlock blk;
    blk.ff = FeedForwardLayer::identity(3); // eta = 1 -> 1 scalar
    blk.sa.d = 3;
    blk.sa.rho = 0.0;
    blk.sa.V = Matrix::identity(3);                          // 1 scalar
    blk.sa.A = Matrix::rank_one_sym(Vec{1.0, 2.0, 0.5}, 1.0); // d = 3 scalars
    t.blocks.push_back(blk);
    CHECK(param_count(t) == 1 + 1 + 3);

    t.blocks[0].sa.V = Matrix::from_dense(3, {1, 0, 0, 0, 2, 0, 0, 0, 0});
    CHECK(param_count(t) == 1 + 2 + 3);
}

TEST_CASE("validate_dataset reports first violated clause") {
    Dataset ds;
    ds.d = 2;
    ds.pairs.push_back({seq({{0.0, 0.0}, {1.0, 0.0}}), seq({{5.0, 5.0}})});
    ds.pairs.push_back({seq({{2.0, 2.0}}), seq({{0.0, 1.0}})});
    CHECK(validate_dataset(ds).ok);

    Dataset bad = ds;
    bad.pairs[0].input.tokens[1] = bad.pairs[0].input.tokens[0];
    CHECK(validate_dataset(bad).clause == "distinct tokens within each input");

    bad = ds;
    bad.pairs[0].output.tokens.push_back(Vec{1.0, 1.0});
    bad.pairs[0].output.tokens.push_back(Vec{2.0, 1.0});
    CHECK(validate_dataset(bad).clause == "m^j <= n^j");

    bad = ds;
    bad.pairs[1].input = seq({{1.0, 0.0}, {0.0, 0.0}}); // same set as pair 0, permuted
    CHECK(validate_dataset(bad).clause == "inputs pairwise distinct as sets");

    bad = ds;
    bad.d = 1;
    CHECK(validate_dataset(bad).clause == "d >= 2");
}

TEST_CASE("permutation equivariance and length preservation") {
    Rng rng(31);
    for (int rep = 0; rep < 60; ++rep) {
        const int d = 2 + static_cast<int>(rng.below(4));
        const Transformer t = random_transformer(rng, d, 1 + rng.below(3));
        const Sequence x = random_sequence(rng, 1 + rng.below(7), d);
        const Sequence px = test_util::permuted(x, rng);
        const Sequence y = transformer_apply(t, x);
        const Sequence py = transformer_apply(t, px);
        CHECK(y.size() == x.size());
        CHECK(py.size() == px.size());
        CHECK(hausdorff_distance(y, py) <= 1e-12);
    }
}

TEST_SUITE_END();
