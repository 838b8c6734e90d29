#include <doctest.h>

#include "iforge/builder_softmax.hpp"
#include "iforge/core.hpp"
#include "iforge/error.hpp"
#include "iforge/matrix.hpp"
#include "iforge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

using namespace iforge;

namespace {

Sequence seq(std::initializer_list<Vec> toks) {
    Sequence s;
    s.tokens = toks;
    return s;
}

double dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return std::sqrt(s);
}

double min_pairwise(const std::vector<Sequence>& states) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < states.size(); ++j)
        for (std::size_t i = 0; i < states[j].size(); ++i) {
            for (std::size_t i2 = i + 1; i2 < states[j].size(); ++i2)
                best = std::min(best, dist(states[j][i], states[j][i2]));
            for (std::size_t j2 = j + 1; j2 < states.size(); ++j2)
                for (std::size_t i2 = 0; i2 < states[j2].size(); ++i2)
                    best = std::min(best, dist(states[j][i], states[j2][i2]));
        }
    return best;
}

std::vector<Sequence> apply_one(const TransformerBlock& blk, std::vector<Sequence> states) {
    for (Sequence& s : states) s = sa_apply(blk.sa, ff_apply(blk.ff, s));
    return states;
}

std::vector<Sequence> inputs_of(const Dataset& ds) {
    std::vector<Sequence> v;
    for (const SeqPair& p : ds.pairs) v.push_back(p.input);
    return v;
}

bool inert(const SelfAttentionLayer& sa) {
    return sa.A.kind == Matrix::Kind::ScaledIdentity && sa.A.scale == 0.0;
}

// Random dataset satisfying the interpolation requirements; same sampling
// scheme as the hardmax suite so the two builders face identical inputs.
Dataset random_dataset(Rng& rng, int d, const std::vector<std::size_t>& n,
                       const std::vector<std::size_t>& m, double gap = 0.05) {
    Dataset ds;
    ds.d = d;
    const auto fresh_token = [&](const std::vector<Vec>& taken) {
        for (;;) {
            Vec t = rng.normal_vec(static_cast<std::size_t>(d));
            for (double& c : t) c *= 2.0;
            bool ok = true;
            for (const Vec& q : taken)
                if (dist(t, q) < gap) {
                    ok = false;
                    break;
                }
            if (ok) return t;
        }
    };
    std::vector<Vec> taken_in;
    for (std::size_t j = 0; j < n.size(); ++j) {
        SeqPair p;
        for (std::size_t i = 0; i < n[j]; ++i) {
            Vec t = fresh_token(taken_in);
            taken_in.push_back(t);
            p.input.tokens.push_back(std::move(t));
        }
        std::vector<Vec> taken_out;
        for (std::size_t k = 0; k < m[j]; ++k) {
            Vec t = fresh_token(taken_out);
            taken_out.push_back(t);
            p.output.tokens.push_back(std::move(t));
        }
        ds.pairs.push_back(std::move(p));
    }
    REQUIRE(validate_dataset(ds).ok);
    return ds;
}

void check_report(const Dataset& ds, const Transformer& T, const ConstructionReport& rep) {
    std::size_t sum_m = 0;
    for (const SeqPair& p : ds.pairs) sum_m += p.output.size();
    CHECK(rep.L == T.blocks.size());
    CHECK(rep.bound_L == 2 * sum_m + 3 * ds.size());
    CHECK(rep.L <= rep.bound_L);
    CHECK(rep.P == param_count(T));
    CHECK(rep.bound_P_coeff ==
          doctest::Approx(static_cast<double>(rep.P) /
                          (static_cast<double>(ds.d) * static_cast<double>(sum_m))));
    REQUIRE(rep.steps.size() == 4);
    CHECK(rep.steps[0].step == "separation");
    CHECK(rep.steps[1].step == "leader_selection");
    CHECK(rep.steps[2].step == "collapse");
    CHECK(rep.steps[3].step == "interpolation");
    std::size_t total = 0;
    for (const StepLedgerEntry& e : rep.steps) {
        CHECK(e.ff_widths.size() == e.blocks);
        total += e.blocks;
    }
    CHECK(total == rep.L);
    REQUIRE(rep.intermediate_states.size() == 4);
    for (const auto& snapshot : rep.intermediate_states) {
        REQUIRE(snapshot.size() == ds.size());
        for (std::size_t j = 0; j < ds.size(); ++j)
            CHECK(snapshot[j].size() == ds.pairs[j].input.size());
    }
    // Separation is re-verified under softmax semantics block by block, so
    // the recorded post-separation state must already be pairwise disjoint.
    CHECK(min_pairwise(rep.intermediate_states[0]) >= 1e-9);
    for (std::size_t j = 0; j < ds.size(); ++j)
        CHECK(hausdorff_distance(transformer_apply(T, ds.pairs[j].input), ds.pairs[j].output) <=
              1e-9);
}

void check_plan(const Dataset& ds, const Transformer& T, const ConstructionReport& rep,
                const SoftmaxPlan& plan) {
    REQUIRE(plan.w.size() == static_cast<std::size_t>(ds.d));
    double nrm = 0.0;
    for (double c : plan.w) {
        CHECK(c < 0.0);
        nrm += c * c;
    }
    CHECK(std::sqrt(nrm) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(plan.delta > 0.0);
    CHECK(plan.R > 0.0);
    CHECK(!plan.note.empty());

    REQUIRE(plan.taus.size() == rep.L);
    REQUIRE(rep.L == T.blocks.size());
    double expect_min = 1.0;
    for (std::size_t k = 0; k < T.blocks.size(); ++k) {
        const SelfAttentionLayer& sa = T.blocks[k].sa;
        CHECK(sa.kind == AttentionKind::Softmax);
        CHECK(plan.taus[k] == sa.tau);
        CHECK(plan.taus[k] > 0.0);
        if (inert(sa))
            CHECK(plan.taus[k] == 1.0);
        else
            expect_min = std::min(expect_min, sa.tau);
    }
    CHECK(plan.tau_min == expect_min);

    REQUIRE(plan.iterations.size() == ds.size());
    for (const CollapseIteration& it : plan.iterations) {
        CHECK(it.s > 0.0);
        CHECK(it.c_pos > 0.0);
        CHECK(it.c_neg > 0.0);
    }

    // The recorded global-temperature verdict must match what the network
    // actually does when every calibrated block runs at tau_min.
    Transformer uniform = T;
    for (TransformerBlock& b : uniform.blocks)
        if (!inert(b.sa)) b.sa.tau = plan.tau_min;
    bool ok = true;
    for (std::size_t j = 0; j < ds.size() && ok; ++j)
        ok = hausdorff_distance(transformer_apply(uniform, ds.pairs[j].input),
                                ds.pairs[j].output) <= 1e-9;
    CHECK(plan.tau_min_global_ok == ok);
}

// Independent piecewise evaluation of the width-3 collapse layer. With
// p = <-w, x>, every neuron reads sigma(b_k - p), so the output is a function
// of p alone:
//   h0 = sigma(s + c_pos - p), h1 = sigma(s - p), h2 = sigma(s - c_neg - p)
//   g  = h0 (-w) + h1 (c_pos/c_neg + 1) w + h2 (-(c_pos / 2 c_neg)) w
// Collecting the coefficient of (-w) on each of the four linear pieces gives
// the closed forms below.
Vec collapse_oracle(const Vec& w, double s, double cp, double cn, double p) {
    double coeff; // output = coeff * (-w)
    if (p >= s + cp)
        coeff = 0.0;
    else if (p >= s)
        coeff = s + cp - p;
    else if (p >= s - cn)
        coeff = cp * (1.0 - (s - p) / cn);
    else
        coeff = -(cp / (2.0 * cn)) * (s - cn - p);
    Vec g(w.size());
    for (std::size_t c = 0; c < w.size(); ++c) g[c] = coeff * -w[c];
    return g;
}

} // namespace

TEST_SUITE("builder_softmax") {

TEST_CASE("calibrate_tau: inert attention returns 1 without probing") {
    TransformerBlock blk;
    blk.ff = FeedForwardLayer::identity(2);
    blk.sa = SelfAttentionLayer::identity(2, AttentionKind::Softmax); // A = 0
    const std::vector<Sequence> states = {seq({{1.0, 0.0}, {0.0, 1.0}})};
    int calls = 0;
    const MarginFn margin = [&calls](const std::vector<Sequence>&) {
        ++calls;
        return -1.0; // would reject every temperature
    };
    CHECK(calibrate_tau(blk, states, margin) == 1.0);
    CHECK(calls == 0);
}

TEST_CASE("calibrate_tau: hardmax attention violates the contract") {
    TransformerBlock blk;
    blk.ff = FeedForwardLayer::identity(2);
    blk.sa = SelfAttentionLayer::identity(2, AttentionKind::Hardmax);
    const std::vector<Sequence> states = {seq({{1.0, 0.0}, {0.0, 1.0}})};
    const MarginFn margin = [](const std::vector<Sequence>&) { return 1.0; };
    CHECK_THROWS_AS((void)calibrate_tau(blk, states, margin), ContractError);
}

TEST_CASE("calibrate_tau: returns the largest passing temperature of the halving sweep") {
    // rho = 0, V = A = I on {(4,0),(1,0)}: both hardmax clusters are {0}, so
    // the hardmax image of every token is (4,0). The softmax version drags
    // token 1 toward the mean; the pull shrinks monotonically with tau.
    TransformerBlock blk;
    blk.ff = FeedForwardLayer::identity(2);
    blk.sa.d = 2;
    blk.sa.kind = AttentionKind::Softmax;
    blk.sa.rho = 0.0;
    blk.sa.V = Matrix::identity(2);
    blk.sa.A = Matrix::identity(2);
    const std::vector<Sequence> states = {seq({{4.0, 0.0}, {1.0, 0.0}})};
    const Vec image = {4.0, 0.0};
    const MarginFn margin = [&image](const std::vector<Sequence>& post) {
        double worst = 0.0;
        for (const Sequence& s : post)
            for (const Vec& t : s.tokens) worst = std::max(worst, dist(t, image));
        return 0.05 - worst;
    };
    const double tau = calibrate_tau(blk, states, margin);
    CHECK(tau > 0.0);
    CHECK(tau < 1.0); // tau = 1 leaves token 1 about 0.14 from the image

    TransformerBlock probe = blk;
    probe.sa.tau = tau;
    CHECK(margin(apply_one(probe, states)) >= 0.0);
    probe.sa.tau = 2.0 * tau; // the sweep tried and rejected this one
    CHECK(margin(apply_one(probe, states)) < 0.0);
}

TEST_CASE("calibrate_tau: an unsatisfiable predicate exhausts the halvings") {
    TransformerBlock blk;
    blk.ff = FeedForwardLayer::identity(2);
    blk.sa.d = 2;
    blk.sa.kind = AttentionKind::Softmax;
    blk.sa.rho = 0.0;
    blk.sa.V = Matrix::identity(2);
    blk.sa.A = Matrix::identity(2);
    const std::vector<Sequence> states = {seq({{4.0, 0.0}, {1.0, 0.0}})};
    const MarginFn margin = [](const std::vector<Sequence>&) { return -0.25; };
    try {
        (void)calibrate_tau(blk, states, margin);
        FAIL("expected CalibrationError");
    } catch (const CalibrationError& e) {
        const std::string what = e.what();
        CHECK(what.find("60 halvings") != std::string::npos);
        CHECK(what.find("best residual margin") != std::string::npos);
    }
}

TEST_CASE("collapse_ff: assembly shape and bias layout") {
    const double inv = -1.0 / std::sqrt(2.0);
    const Vec w = {inv, inv};
    const FeedForwardLayer ff = collapse_ff(w, 3.0, 1.0, 0.5);
    CHECK(ff.d == 2);
    CHECK(ff.dp == 3);
    CHECK(ff.eta == 0.0);
    REQUIRE(ff.b.size() == 3);
    CHECK(ff.b[0] == 4.0);  // s + c_pos
    CHECK(ff.b[1] == 3.0);  // s
    CHECK(ff.b[2] == 2.5);  // s - c_neg
}

TEST_CASE("collapse_ff: the four linear pieces match the closed form") {
    const double inv = -1.0 / std::sqrt(2.0);
    const Vec w = {inv, inv};
    const Vec perp = {-inv, inv}; // unit vector orthogonal to w
    const double s = 3.0, cp = 1.0, cn = 0.5;
    const FeedForwardLayer ff = collapse_ff(w, s, cp, cn);

    // Region breakpoints plus interior probes of all four pieces.
    const std::vector<double> ps = {5.0, 4.0, 3.6, 3.0, 2.8, 2.5, 1.0, -2.0};
    // The output must depend on x only through p: offsets orthogonal to w
    // cannot change any neuron.
    const std::vector<double> ts = {0.0, 1.75, -3.0};
    for (double p : ps)
        for (double t : ts) {
            Vec x(2);
            for (std::size_t c = 0; c < 2; ++c) x[c] = p * -w[c] + t * perp[c];
            const Vec got = ff_apply(ff, x);
            const Vec want = collapse_oracle(w, s, cp, cn, p);
            for (std::size_t c = 0; c < 2; ++c)
                CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-12).scale(1.0));
            // Strictly past the top breakpoint every neuron is inactive and
            // the zero is exact; on the breakpoint itself the rounding of
            // <w, x> may leave a subnormal-scale activation either way.
            if (p > s + cp + 1e-9)
                for (double c : got) CHECK(c == 0.0);
        }
}

TEST_CASE("collapse_ff: farthest ball hits the origin, parked leaders stay negative") {
    const double inv = -1.0 / std::sqrt(2.0);
    const Vec w = {inv, inv};
    const double s = 6.0, cp = 2.0, cn = 1.0;
    const FeedForwardLayer ff = collapse_ff(w, s, cp, cn);
    const auto at = [&](double p) {
        Vec x(2);
        for (std::size_t c = 0; c < 2; ++c) x[c] = p * -w[c];
        return x;
    };
    const auto p_of = [&](const Vec& x) { return -(w[0] * x[0] + w[1] * x[1]); };

    // Ball strictly beyond s + c_pos: collapses exactly.
    for (double p : {10.2, 9.9, 8.1})
        for (double c : ff_apply(ff, at(p))) CHECK(c == 0.0);

    // Balls inside [s, s + c_pos]: reflected to distinct positive positions.
    const Vec b1 = ff_apply(ff, at(6.5));
    const Vec b2 = ff_apply(ff, at(7.0));
    CHECK(p_of(b1) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(p_of(b2) == doctest::Approx(1.0).epsilon(1e-12));
    for (double c : b1) CHECK(c > 0.0); // positive orthant: along -w
    CHECK(dist(b1, b2) > 0.1);

    // Leader parked at p = -2 < s - c_neg: slides deeper into the negative
    // orthant, projection -(c_pos / 2 c_neg) * (s - c_neg - p) = -7.
    const Vec parked = ff_apply(ff, at(-2.0));
    CHECK(p_of(parked) == doctest::Approx(-7.0).epsilon(1e-12));
    for (double c : parked) CHECK(c < 0.0);
}

TEST_CASE("two sequences with outputs of size one and two stay within twelve blocks") {
    Dataset ds;
    ds.d = 2;
    ds.pairs.push_back({seq({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}), seq({{5.0, 5.0}})});
    ds.pairs.push_back(
        {seq({{3.0, 3.0}, {4.0, 3.0}, {3.0, 4.0}}), seq({{-1.0, 2.0}, {2.0, -1.0}})});
    const auto [T, rep, plan] = build_softmax(ds);
    CHECK(rep.L <= 12); // 2*(1+2) + 3*2
    check_report(ds, T, rep);
    check_plan(ds, T, rep, plan);
}

TEST_CASE("single sequence: the fused collapse is the only calibrated block") {
    Rng rng(7);
    const Dataset ds = random_dataset(rng, 2, {4}, {2});
    const auto [T, rep, plan] = build_softmax(ds);
    check_report(ds, T, rep);
    check_plan(ds, T, rep, plan);
    std::size_t calibrated = 0;
    for (const TransformerBlock& b : T.blocks)
        if (!inert(b.sa)) {
            ++calibrated;
            CHECK(b.sa.tau == plan.tau_min);
        }
    CHECK(calibrated == 1);
    // With one calibrated block, running it at tau_min changes nothing, so
    // the global re-check cannot fail.
    CHECK(plan.tau_min_global_ok);
}

TEST_CASE("collapse snapshot: exact multiplicities and an exact-zero ball") {
    Rng rng(23);
    const Dataset ds = random_dataset(rng, 3, {5, 4, 6}, {3, 2, 4});
    const auto [T, rep, plan] = build_softmax(ds);
    check_report(ds, T, rep);
    check_plan(ds, T, rep, plan);

    const std::vector<Sequence>& collapsed = rep.intermediate_states[2];
    bool any_zero = false;
    for (std::size_t j = 0; j < collapsed.size(); ++j) {
        // Count tokens distinct under exact equality: the ReLU collapse makes
        // merged tokens identical bit for bit, not merely close.
        std::vector<Vec> distinct;
        for (const Vec& t : collapsed[j].tokens) {
            if (std::find(distinct.begin(), distinct.end(), t) == distinct.end())
                distinct.push_back(t);
            bool zero = true;
            for (double c : t) zero = zero && c == 0.0;
            any_zero = any_zero || zero;
        }
        CHECK(distinct.size() == ds.pairs[j].output.size());
    }
    // The last collapsed sequence lands on the exact origin and nothing moves
    // it afterwards (a trailing rescale multiplies by a power of two).
    CHECK(any_zero);
}

TEST_CASE("plan feasibility holds on the coordinates the network produces") {
    Rng rng(91);
    const Dataset ds = random_dataset(rng, 3, {5, 4, 3}, {2, 2, 1});
    const auto [T, rep, plan] = build_softmax(ds);
    check_report(ds, T, rep);
    check_plan(ds, T, rep, plan);

    const std::size_t n_sep = rep.steps[0].blocks;
    const std::size_t n_lead = rep.steps[1].blocks;
    REQUIRE(n_lead >= 1);
    REQUIRE(n_sep + n_lead <= T.blocks.size());

    // Replay the network up to the finished leader placement. The last leader
    // block carries the calibrated collapse attention, so stop before its SA.
    std::vector<Sequence> placed = inputs_of(ds);
    for (std::size_t k = 0; k + 1 < n_sep + n_lead; ++k)
        placed = apply_one(T.blocks[k], placed);
    for (Sequence& s : placed) s = ff_apply(T.blocks[n_sep + n_lead - 1].ff, s);

    // Hardmax collapse of the placement: leaders are exact fixed points and
    // every follower lands exactly on its sequence's apex, so the distinct
    // images are the placed leader coordinates, bit for bit.
    SelfAttentionLayer col;
    col.d = ds.d;
    col.kind = AttentionKind::Hardmax;
    col.rho = 0.0;
    col.V = Matrix::identity(ds.d);
    col.A = Matrix::identity(ds.d);
    std::vector<Sequence> images;
    std::vector<Vec> leaders;
    for (const Sequence& s : placed) {
        images.push_back(sa_apply(col, s));
        for (const Vec& t : images.back().tokens)
            if (std::find(leaders.begin(), leaders.end(), t) == leaders.end())
                leaders.push_back(t);
    }
    std::size_t sum_m = 0;
    for (const SeqPair& p : ds.pairs) sum_m += p.output.size();
    CHECK(leaders.size() == sum_m);

    const auto p_of = [&](const Vec& x) {
        double p = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) p -= plan.w[c] * x[c];
        return p;
    };

    // Projection separation: distinct placed leaders keep their projections
    // onto the collapse line at least 2*delta apart.
    for (std::size_t a = 0; a < leaders.size(); ++a)
        for (std::size_t b = a + 1; b < leaders.size(); ++b)
            CHECK(std::abs(p_of(leaders[a]) - p_of(leaders[b])) >= 2.0 * plan.delta);

    // Sphere radius against the smallest normalized projection gap of the
    // negative-orthant leaders.
    std::vector<Vec> negs;
    for (const Vec& q : leaders) {
        bool neg = true;
        for (double c : q) neg = neg && c < 0.0;
        if (neg) negs.push_back(q);
    }
    REQUIRE(negs.size() == 2); // one non-apex leader for each of the first two sequences
    double zeta = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < negs.size(); ++a)
        for (std::size_t b = a + 1; b < negs.size(); ++b) {
            const double na = dist(negs[a], Vec(negs[a].size(), 0.0));
            const double nb = dist(negs[b], Vec(negs[b].size(), 0.0));
            double g = 0.0;
            for (std::size_t c = 0; c < negs[a].size(); ++c)
                g -= plan.w[c] * (negs[a][c] / na - negs[b][c] / nb);
            zeta = std::min(zeta, std::abs(g));
        }
    CHECK(plan.R > 2.0 * plan.delta / zeta);

    // Substep-1 containment, the predicate the fused temperature was
    // calibrated against: every token within delta/2 of its hardmax image.
    const std::vector<Sequence>& post1 = rep.intermediate_states[1];
    const TransformerBlock& fused = T.blocks[n_sep + n_lead - 1];
    for (std::size_t j = 0; j < placed.size(); ++j)
        REQUIRE(post1[j].tokens == sa_apply(fused.sa, placed[j]).tokens);
    double worst = 0.0;
    for (std::size_t j = 0; j < post1.size(); ++j)
        for (std::size_t i = 0; i < post1[j].size(); ++i)
            worst = std::max(worst, dist(post1[j][i], images[j][i]));
    CHECK(worst <= 0.5 * plan.delta);

    // Diagnostic only: whether doubling the fused temperature would break
    // containment. The theorem needs some passing tau, not a boundary.
    SelfAttentionLayer doubled = fused.sa;
    doubled.tau = 2.0 * fused.sa.tau;
    double worst2 = 0.0;
    for (std::size_t j = 0; j < placed.size(); ++j) {
        const Sequence img = sa_apply(doubled, placed[j]);
        for (std::size_t i = 0; i < img.size(); ++i)
            worst2 = std::max(worst2, dist(img[i], images[j][i]));
    }
    CAPTURE(worst2);
    CAPTURE(0.5 * plan.delta);
}

TEST_CASE("end to end: random datasets across dimensions and sequence counts") {
    std::uint64_t seed = 1200;
    for (int d : {2, 3, 5}) {
        for (std::size_t N : {std::size_t{1}, std::size_t{2}, std::size_t{4}}) {
            Rng rng(seed++);
            std::vector<std::size_t> n, m;
            for (std::size_t j = 0; j < N; ++j) {
                n.push_back(2 + rng.below(5));
                m.push_back(1 + rng.below(n.back()));
            }
            const Dataset ds = random_dataset(rng, d, n, m);
            CAPTURE(d);
            CAPTURE(N);
            const auto [T, rep, plan] = build_softmax(ds);
            check_report(ds, T, rep);
            check_plan(ds, T, rep, plan);
        }
    }
}

TEST_CASE("invalid datasets are rejected before any block is built") {
    Dataset dup_token;
    dup_token.d = 2;
    dup_token.pairs.push_back({seq({{1.0, 0.0}, {1.0, 0.0}}), seq({{0.0, 1.0}})});
    CHECK_THROWS_AS((void)build_softmax(dup_token), ContractError);

    Dataset dup_inputs;
    dup_inputs.d = 2;
    dup_inputs.pairs.push_back({seq({{1.0, 0.0}, {0.0, 1.0}}), seq({{2.0, 2.0}})});
    dup_inputs.pairs.push_back({seq({{0.0, 1.0}, {1.0, 0.0}}), seq({{3.0, 3.0}})});
    CHECK_THROWS_AS((void)build_softmax(dup_inputs), ContractError);

    Dataset flat;
    flat.d = 1;
    flat.pairs.push_back({seq({{1.0}}), seq({{2.0}})});
    CHECK_THROWS_AS((void)build_softmax(flat), ContractError);
}

TEST_CASE("end to end: construction is deterministic") {
    Rng rng(50);
    const Dataset ds = random_dataset(rng, 3, {3, 2}, {2, 2});
    const auto [T1, rep1, plan1] = build_softmax(ds);
    const auto [T2, rep2, plan2] = build_softmax(ds);
    REQUIRE(T1.blocks.size() == T2.blocks.size());
    CHECK(rep1.L == rep2.L);
    CHECK(rep1.P == rep2.P);
    for (std::size_t b = 0; b < T1.blocks.size(); ++b) {
        CHECK(T1.blocks[b].ff.w == T2.blocks[b].ff.w);
        CHECK(T1.blocks[b].ff.u == T2.blocks[b].ff.u);
        CHECK(T1.blocks[b].ff.b == T2.blocks[b].ff.b);
        CHECK(T1.blocks[b].ff.eta == T2.blocks[b].ff.eta);
        CHECK(T1.blocks[b].sa.rho == T2.blocks[b].sa.rho);
        CHECK(T1.blocks[b].sa.tau == T2.blocks[b].sa.tau);
    }
    CHECK(plan1.delta == plan2.delta);
    CHECK(plan1.w == plan2.w);
    CHECK(plan1.R == plan2.R);
    CHECK(plan1.taus == plan2.taus);
    CHECK(plan1.tau_min == plan2.tau_min);
    CHECK(plan1.tau_min_global_ok == plan2.tau_min_global_ok);
    REQUIRE(plan1.iterations.size() == plan2.iterations.size());
    for (std::size_t k = 0; k < plan1.iterations.size(); ++k) {
        CHECK(plan1.iterations[k].s == plan2.iterations[k].s);
        CHECK(plan1.iterations[k].c_pos == plan2.iterations[k].c_pos);
        CHECK(plan1.iterations[k].c_neg == plan2.iterations[k].c_neg);
    }
}

} // TEST_SUITE
