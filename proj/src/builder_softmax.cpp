#include "iforge/builder_softmax.hpp"

#include "builder_detail.hpp"
#include "iforge/core.hpp"
#include "iforge/error.hpp"
#include "iforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace iforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool attention_inert(const SelfAttentionLayer& sa) {
    return sa.A.kind == Matrix::Kind::ScaledIdentity && sa.A.scale == 0.0;
}

double proj(const Vec& w, const Vec& x) {
    return -kernels::dot(w.data(), x.data(), x.size());
}

// Collapse direction plus the derived containment radius. All quantities are
// measured on the actually placed leader coordinates, not on the targets.
struct ProjectionChoice {
    Vec w;
    double delta = 0.0;
    double zeta = kInf;    // min normalized projection gap over negative-leader pairs
    double min_gap = kInf; // min projection gap over all leader pairs
};

ProjectionChoice choose_projection(const std::vector<Sequence>& placed,
                                   const PlacementPlan& plan) {
    const std::size_t d = placed[0].dim();
    std::vector<Vec> leaders;
    std::vector<Vec> negatives;
    for (std::size_t j = 0; j < placed.size(); ++j) {
        leaders.push_back(placed[j][plan.leaders[j][0]]);
        for (std::size_t k = 1; k < plan.leaders[j].size(); ++k) {
            leaders.push_back(placed[j][plan.leaders[j][k]]);
            negatives.push_back(placed[j][plan.leaders[j][k]]);
        }
    }

    // Every candidate that clears the hard floors is scored by zeta; the
    // winner maximizes the worst negative-pair gap. That matters because the
    // collapse maps every parked token onto the line spanned by w: the
    // smallest projection gap on that line bounds how exactly the later
    // layers can move one token while fixing its neighbours, and a tilted w
    // sees the placement directions linearly where the untilted one is
    // blind to first order.
    ProjectionChoice best;
    bool have = false;
    for (int cand = 0; cand < 64; ++cand) {
        Vec raw(d, 1.0);
        raw[0] += static_cast<double>(cand) / 10.0;
        const double nrm = std::sqrt(kernels::dot(raw.data(), raw.data(), raw.size()));
        ProjectionChoice pc;
        pc.w.resize(d);
        for (std::size_t c = 0; c < d; ++c) pc.w[c] = -raw[c] / nrm;

        std::vector<double> ps;
        ps.reserve(leaders.size());
        for (const Vec& x : leaders) ps.push_back(proj(pc.w, x));
        for (std::size_t a = 0; a < ps.size(); ++a)
            for (std::size_t b = a + 1; b < ps.size(); ++b)
                pc.min_gap = std::min(pc.min_gap, std::abs(ps[a] - ps[b]));
        if (pc.min_gap < 1e-6) continue;

        for (std::size_t a = 0; a < negatives.size(); ++a)
            for (std::size_t b = a + 1; b < negatives.size(); ++b) {
                const double na =
                    std::sqrt(kernels::dot(negatives[a].data(), negatives[a].data(), d));
                const double nb =
                    std::sqrt(kernels::dot(negatives[b].data(), negatives[b].data(), d));
                double g = 0.0;
                for (std::size_t c = 0; c < d; ++c)
                    g += pc.w[c] * (negatives[a][c] / na - negatives[b][c] / nb);
                pc.zeta = std::min(pc.zeta, std::abs(g));
            }
        if (pc.zeta < 1e-8) continue;

        pc.delta = std::isfinite(pc.min_gap) ? std::min(1.0, pc.min_gap / 20.0) : 1.0;
        if (!have || pc.zeta > best.zeta) {
            best = pc;
            have = true;
        }
    }
    if (have) return best;
    throw ConstructionError("no collapse direction separates the leader placement");
}

// Separation finalizer: converts an accepted hardmax candidate to softmax
// attention and calibrates its temperature so every geometric margin stays at
// least half its hardmax value (with the same 1e-9 floors and degeneration
// guard the hardmax acceptance uses). A candidate whose calibration fails is
// rejected and the search moves on.
std::optional<bdetail::CaseBlockResult> softmax_finalize(const std::vector<Sequence>& pre,
                                                         std::size_t t, bool goal_free_token,
                                                         bdetail::CaseBlockResult&& hard,
                                                         std::string& diag) {
    const bdetail::SepMargins hm = bdetail::measure_separation_margins(hard.post, t,
                                                                       goal_free_token);
    TransformerBlock blk = std::move(hard.block);
    blk.sa.kind = AttentionKind::Softmax;

    const MarginFn margin = [&pre, t, goal_free_token, &hm](const std::vector<Sequence>& post) {
        const bdetail::SepMargins sm = bdetail::measure_separation_margins(post, t,
                                                                           goal_free_token);
        double m = sm.goal - std::max(0.5 * hm.goal, 1e-9);
        if (std::isfinite(hm.cross_old))
            m = std::min(m, sm.cross_old - std::max(0.5 * hm.cross_old, 1e-9));
        if (std::isfinite(hm.within)) m = std::min(m, sm.within - 0.5 * hm.within);
        std::string why;
        if (!bdetail::accept_post_state(pre, post, t, goal_free_token, why))
            m = std::min(m, -1.0);
        return m;
    };

    try {
        blk.sa.tau = calibrate_tau(blk, pre, margin);
    } catch (const CalibrationError& e) {
        diag = e.what();
        return std::nullopt;
    }
    return bdetail::CaseBlockResult{blk, bdetail::apply_block(blk, pre)};
}

} // namespace

double calibrate_tau(const TransformerBlock& block, const std::vector<Sequence>& states,
                     const MarginFn& margin) {
    if (block.sa.kind != AttentionKind::Softmax)
        throw ContractError("calibrate_tau: block attention is not softmax");
    if (attention_inert(block.sa))
        return 1.0; // scores are constant, so the weights do not depend on tau

    TransformerBlock cand = block;
    double best_margin = -kInf;
    double best_tau = 1.0;
    double tau = 1.0;
    for (int halvings = 0; halvings <= 60; ++halvings) {
        cand.sa.tau = tau;
        const double m = margin(bdetail::apply_block(cand, states));
        if (m >= 0.0) return tau;
        if (m > best_margin) {
            best_margin = m;
            best_tau = tau;
        }
        tau *= 0.5;
    }
    std::ostringstream os;
    os << "temperature calibration failed after 60 halvings; best residual margin "
       << best_margin << " at tau = " << best_tau;
    throw CalibrationError(os.str());
}

FeedForwardLayer collapse_ff(const Vec& w, double s, double c_pos, double c_neg) {
    const int d = static_cast<int>(w.size());
    FeedForwardLayer ff;
    ff.d = d;
    ff.dp = 3;
    ff.eta = 0.0;
    ff.w.resize(3 * static_cast<std::size_t>(d));
    ff.u.resize(3 * static_cast<std::size_t>(d));
    ff.b = {s + c_pos, s, s - c_neg};
    // Neuron k reads sigma(<w, x> + b_k) = sigma(b_k - p); with eta = 0 every
    // token above s + c_pos leaves all neurons inactive and lands exactly on
    // the origin.
    for (int c = 0; c < d; ++c) {
        const std::size_t sc = static_cast<std::size_t>(c);
        ff.w[0 * d + sc] = -w[sc];
        ff.w[1 * d + sc] = (c_pos / c_neg + 1.0) * w[sc];
        ff.w[2 * d + sc] = -(c_pos / (2.0 * c_neg)) * w[sc];
        ff.u[0 * d + sc] = w[sc];
        ff.u[1 * d + sc] = w[sc];
        ff.u[2 * d + sc] = w[sc];
    }
    return ff;
}

std::tuple<Transformer, ConstructionReport, SoftmaxPlan> build_softmax(const Dataset& ds) {
    const ValidationResult vr = validate_dataset(ds);
    if (!vr.ok)
        throw ContractError("build_softmax: invalid dataset: " + vr.clause + "; " + vr.detail);
    if (ds.d < 2) throw ContractError("build_softmax: requires dimension >= 2");

    const int d = ds.d;
    const std::size_t N = ds.size();
    std::vector<std::size_t> m;
    std::vector<Sequence> outs;
    std::size_t sum_m = 0;
    for (const SeqPair& p : ds.pairs) {
        m.push_back(p.output.size());
        outs.push_back(p.output);
        sum_m += p.output.size();
    }

    // Separation with per-block temperature calibration.
    SeparationResult sep = bdetail::run_separation(ds, softmax_finalize, AttentionKind::Softmax);

    // Leader selection is attention-free; converting the kind changes nothing
    // numerically, but keeps the finished network softmax-only.
    LeaderSelectionResult lead = [&] {
        try {
            return build_leader_selection(sep.states, m);
        } catch (const ConstructionError& e) {
            throw ConstructionError(std::string("leader selection: ") + e.what());
        }
    }();
    for (TransformerBlock& b : lead.blocks) b.sa.kind = AttentionKind::Softmax;
    std::vector<Sequence> placed = sep.states;
    for (const TransformerBlock& b : lead.blocks) placed = bdetail::apply_block(b, placed);

    const ProjectionChoice pc = choose_projection(placed, lead.plan);
    double R = kInf;
    for (double r : lead.plan.radius) R = std::min(R, r);

    // Feasibility of the chosen direction, from the final coordinates: every
    // negative-leader pair keeps projection gap >= 2*delta, and the sphere
    // radius dominates 2*delta/zeta.
    if (std::isfinite(pc.min_gap) && pc.min_gap < 2.0 * pc.delta)
        throw ConstructionError("collapse direction feasibility failed: projection gaps");
    if (std::isfinite(pc.zeta) && !(R > 2.0 * pc.delta / pc.zeta))
        throw ConstructionError(
            "collapse direction feasibility failed: sphere radius too small for zeta");

    // Collapse substep 1: the hardmax collapse block fixes the reference
    // images M0 (and checks the placement preconditions); its softmax
    // counterpart is calibrated until every token stays within delta/2 of M0,
    // then fused into the last leader block so the attention costs no block.
    TransformerBlock col_hard = build_collapse(placed, lead.plan);
    const std::vector<Sequence> M0 = bdetail::apply_block(col_hard, placed);

    TransformerBlock sub1;
    sub1.ff = FeedForwardLayer::identity(d);
    sub1.sa = col_hard.sa;
    sub1.sa.kind = AttentionKind::Softmax;
    const double half_delta = 0.5 * pc.delta;
    const MarginFn contain = [&M0, half_delta](const std::vector<Sequence>& post) {
        double worst = 0.0;
        for (std::size_t j = 0; j < post.size(); ++j)
            for (std::size_t i = 0; i < post[j].size(); ++i)
                worst = std::max(worst, bdetail::dist(post[j][i], M0[j][i]));
        return half_delta - worst;
    };
    sub1.sa.tau = calibrate_tau(sub1, placed, contain);
    lead.blocks.back().sa = sub1.sa;
    const std::vector<Sequence> post_sub1 = bdetail::apply_block(sub1, placed);

    // Collapse substep 2: one width-3 FF per sequence, always collapsing the
    // ball farthest along -w. Constants are measured from the live tokens.
    std::vector<std::vector<bool>> is_neg(N);
    for (std::size_t j = 0; j < N; ++j) {
        is_neg[j].assign(post_sub1[j].size(), false);
        for (std::size_t k = 1; k < lead.plan.leaders[j].size(); ++k)
            is_neg[j][lead.plan.leaders[j][k]] = true;
    }
    const auto parked = [&](std::size_t j, std::size_t i, const std::vector<bool>& done) {
        return done[j] || is_neg[j][i];
    };

    std::vector<Sequence> states = post_sub1;
    std::vector<bool> done(N, false);
    std::vector<TransformerBlock> collapse_blocks;
    std::vector<CollapseIteration> iterations;

    // Shared reserve out of the 2N - 1 block budget: separation already used
    // part of it; elevators, the rescale, and the interpolation detours split
    // what is left.
    std::size_t slack = (2 * N - 1) - sep.blocks.size();

    // Reference gap: a quarter of the closest leader-band spacing along w.
    // Reflections and unit-slope relocations preserve band gaps, so the value
    // stays meaningful through the whole sweep.
    double g_ref = kInf;
    {
        std::vector<double> bands;
        for (std::size_t j = 0; j < N; ++j)
            bands.push_back(proj(pc.w, placed[j][lead.plan.leaders[j][0]]));
        std::sort(bands.begin(), bands.end());
        for (std::size_t j = 0; j + 1 < bands.size(); ++j)
            g_ref = std::min(g_ref, bands[j + 1] - bands[j]);
        g_ref = std::isfinite(g_ref) ? 0.25 * g_ref : 0.0;
    }

    struct SweepView {
        std::size_t tgt = 0;
        double tgt_lo = kInf, tgt_hi = -kInf;
        bool have_others = false;
        double others_lo = kInf, others_hi = -kInf;
        double parked_max = -kInf;
    };
    const auto measure = [&](std::size_t iter) {
        SweepView v;
        v.tgt = N;
        for (std::size_t j = 0; j < N; ++j) {
            if (done[j]) continue;
            double lo = kInf, hi = -kInf;
            for (std::size_t i = 0; i < states[j].size(); ++i) {
                if (is_neg[j][i]) continue;
                const double p = proj(pc.w, states[j][i]);
                lo = std::min(lo, p);
                hi = std::max(hi, p);
            }
            if (v.tgt == N || hi > v.tgt_hi) {
                v.tgt = j;
                v.tgt_lo = lo;
                v.tgt_hi = hi;
            }
        }
        for (std::size_t j = 0; j < N; ++j) {
            if (done[j] || j == v.tgt) continue;
            v.have_others = true;
            for (std::size_t i = 0; i < states[j].size(); ++i) {
                if (is_neg[j][i]) continue;
                const double p = proj(pc.w, states[j][i]);
                v.others_lo = std::min(v.others_lo, p);
                v.others_hi = std::max(v.others_hi, p);
            }
        }
        for (std::size_t j = 0; j < N; ++j)
            for (std::size_t i = 0; i < states[j].size(); ++i)
                if (parked(j, i, done)) {
                    const double p = proj(pc.w, states[j][i]);
                    if (p > 0.0) {
                        std::ostringstream os;
                        os << "collapse iteration " << iter << ": parked token crossed zero (p = "
                           << p << ")";
                        throw ConstructionError(os.str());
                    }
                    v.parked_max = std::max(v.parked_max, p);
                }
        if (v.have_others && !(v.tgt_lo > v.others_hi)) {
            std::ostringstream os;
            os << "collapse iteration " << iter << ": farthest ball does not clear the others ("
               << v.tgt_lo << " <= " << v.others_hi << ")";
            throw ConstructionError(os.str());
        }
        return v;
    };

    for (std::size_t iter = 0; iter < N; ++iter) {
        SweepView v = measure(iter);

        // Elevation: each reflection drops the surviving bands near zero,
        // which would squeeze s, force the relocation slope above one, and
        // park collapsed balls ever closer together. Lifting every live band
        // by E restores two properties: c_pos <= s - parked_max (so the
        // relocation runs at exactly unit slope and preserves parked gaps)
        // and a relocation shift of at least g_ref (so consecutive collapsed
        // balls end up at least g_ref apart). The lift is a two-neuron ramp
        // that plateaus at E before the lowest band; parked tokens sit at or
        // below zero where both neurons are inactive, leaving them untouched
        // bit for bit.
        double E = 0.0;
        double ramp_hi = 0.0;
        if (v.have_others) {
            const double T0 = 0.5 * (v.others_hi + v.tgt_lo);
            E = std::max(E, (T0 - 1.8 * v.others_lo + v.parked_max) / 0.8);
            if (v.parked_max == 0.0)
                E = std::max(E, (g_ref + 0.5 * T0 - 1.35 * v.others_lo) / 0.85);
            ramp_hi = v.others_lo;
        } else {
            if (v.parked_max == 0.0) E = std::max(E, 8.0 * g_ref - v.tgt_lo);
            ramp_hi = v.tgt_lo;
        }
        if (E > 0.0 && slack > 0) {
            const double b0 = ramp_hi / 3.0;
            const double b1 = 2.0 * ramp_hi / 3.0;
            FeedForwardLayer ff;
            ff.d = d;
            ff.dp = 2;
            ff.eta = 1.0;
            ff.w.resize(2 * static_cast<std::size_t>(d));
            ff.u.resize(2 * static_cast<std::size_t>(d));
            ff.b = {-b0, -b1};
            const double c = E / (b1 - b0);
            for (int cc = 0; cc < d; ++cc) {
                const std::size_t sc = static_cast<std::size_t>(cc);
                ff.u[0 * d + sc] = -pc.w[sc];
                ff.u[1 * d + sc] = -pc.w[sc];
                ff.w[0 * d + sc] = -c * pc.w[sc];
                ff.w[1 * d + sc] = c * pc.w[sc];
            }
            TransformerBlock blk{std::move(ff),
                                 SelfAttentionLayer::identity(d, AttentionKind::Softmax)};
            states = bdetail::apply_block(blk, states);
            collapse_blocks.push_back(std::move(blk));
            --slack;
            v = measure(iter);
        }

        double s = 0.0, cp = 0.0;
        if (v.have_others) {
            const double T = 0.5 * (v.others_hi + v.tgt_lo);
            s = 0.9 * std::min(v.others_lo, T);
            cp = T - s;
        } else {
            s = 0.25 * v.tgt_lo;
            cp = 0.25 * v.tgt_lo;
        }
        // c_neg = c_pos/2 makes the parked branch an exact shift (slope 1),
        // which preserves every parked gap; when the tent cannot reach that
        // wide (collapsed balls sit exactly at zero, capping c_neg at s), the
        // cap gives the smallest feasible slope instead.
        const double cn = 0.5 * std::min(cp, s - v.parked_max);
        if (!(s > 0.0) || !(cp > 0.0) || !(cn > 0.0)) {
            std::ostringstream os;
            os << "collapse iteration " << iter << ": degenerate constants s = " << s
               << ", c_pos = " << cp << ", c_neg = " << cn;
            throw ConstructionError(os.str());
        }
        const std::size_t tgt = v.tgt;

        TransformerBlock blk{collapse_ff(pc.w, s, cp, cn),
                             SelfAttentionLayer::identity(d, AttentionKind::Softmax)};
        states = bdetail::apply_block(blk, states);
        collapse_blocks.push_back(std::move(blk));
        iterations.push_back(CollapseIteration{s, cp, cn});
        done[tgt] = true;

        // The collapsed ball must land exactly on the origin, token for token.
        for (std::size_t i = 0; i < states[tgt].size(); ++i) {
            if (is_neg[tgt][i]) continue;
            for (double c : states[tgt][i])
                if (std::abs(c) > 1e-12) {
                    std::ostringstream os;
                    os << "collapse iteration " << iter << ": ball of sequence " << tgt
                       << " missed the origin by " << std::abs(c);
                    throw ConstructionError(os.str());
                }
        }

        // Everything that is not one same-sequence ball must stay distinct.
        for (std::size_t j = 0; j < N; ++j)
            for (std::size_t i = 0; i < states[j].size(); ++i)
                for (std::size_t j2 = j; j2 < N; ++j2)
                    for (std::size_t i2 = (j2 == j ? i + 1 : 0); i2 < states[j2].size(); ++i2) {
                        if (j == j2 && !is_neg[j][i] && !is_neg[j][i2]) continue;
                        if (bdetail::dist(states[j][i], states[j2][i2]) < 1e-9) {
                            std::ostringstream os;
                            os << "collapse iteration " << iter << ": tokens (" << j << "," << i
                               << ") and (" << j2 << "," << i2 << ") collide";
                            throw ConstructionError(os.str());
                        }
                    }
    }

    for (std::size_t j = 0; j < N; ++j)
        if (bdetail::distinct_count(states[j], 0.0) != m[j]) {
            std::ostringstream os;
            os << "collapse left sequence " << j << " with "
               << bdetail::distinct_count(states[j], 0.0) << " distinct tokens, expected " << m[j];
            throw ConstructionError(os.str());
        }

    // The collapse sweeps park tokens far along -w; at larger N the spread can
    // reach 1e3-1e4 times the data scale, where the interpolation hats can no
    // longer hit their targets exactly. One width-0 layer with a power-of-two
    // eta rescales every token bitwise-exactly (preserving equalities, signs,
    // and distinctness) back to O(1). It is funded by the unused share of the
    // 2N - 1 budget and skipped when the tokens are already moderate.
    const double spread = bdetail::max_abs_coord(states);
    if (spread > 64.0 && slack > 0) {
        int e = 0;
        std::frexp(spread, &e); // spread = f * 2^e with f in [0.5, 1)
        FeedForwardLayer ff = FeedForwardLayer::identity(d);
        ff.eta = std::ldexp(1.0, 1 - e); // spread * eta lands in [1, 2)
        TransformerBlock blk{ff, SelfAttentionLayer::identity(d, AttentionKind::Softmax)};
        states = bdetail::apply_block(blk, states);
        collapse_blocks.push_back(std::move(blk));
        --slack;
    }

    // Interpolation (attention-free); the detour reserve is what separation
    // and the rescale left unused out of the 2N - 1 block budget. On failure,
    // report the post-collapse geometry that bounds how exactly tokens can be
    // moved: the tightest cross-cluster pair and the overall spread.
    InterpolationResult interp = [&] {
        try {
            return build_interpolation(states, outs, slack);
        } catch (const ConstructionError& e) {
            double tight = kInf;
            std::size_t tj = 0, ti = 0, tj2 = 0, ti2 = 0;
            for (std::size_t j = 0; j < N; ++j)
                for (std::size_t i = 0; i < states[j].size(); ++i)
                    for (std::size_t j2 = j; j2 < N; ++j2)
                        for (std::size_t i2 = (j2 == j ? i + 1 : 0); i2 < states[j2].size();
                             ++i2) {
                            const double g = bdetail::dist(states[j][i], states[j2][i2]);
                            if (g > 0.0 && g < tight) {
                                tight = g;
                                tj = j; ti = i; tj2 = j2; ti2 = i2;
                            }
                        }
            std::ostringstream os;
            os << e.what() << " [post-collapse spread " << bdetail::max_abs_coord(states)
               << ", tightest distinct pair " << tight << " between (" << tj << "," << ti
               << ") p=" << proj(pc.w, states[tj][ti]) << " and (" << tj2 << "," << ti2
               << ") p=" << proj(pc.w, states[tj2][ti2]) << "]";
            throw ConstructionError(os.str());
        }
    }();
    for (TransformerBlock& b : interp.blocks) b.sa.kind = AttentionKind::Softmax;

    Transformer T;
    T.d = d;
    for (const TransformerBlock& b : sep.blocks) T.blocks.push_back(b);
    for (const TransformerBlock& b : lead.blocks) T.blocks.push_back(b);
    for (const TransformerBlock& b : collapse_blocks) T.blocks.push_back(b);
    for (const TransformerBlock& b : interp.blocks) T.blocks.push_back(b);

    ConstructionReport rep;
    rep.steps.push_back(bdetail::step_entry("separation", sep.blocks));
    rep.steps.push_back(bdetail::step_entry("leader_selection", lead.blocks));
    rep.steps.push_back(bdetail::step_entry("collapse", collapse_blocks));
    rep.steps.push_back(bdetail::step_entry("interpolation", interp.blocks));
    rep.L = T.blocks.size();
    rep.bound_L = 2 * sum_m + 3 * N;
    rep.P = param_count(T);
    rep.bound_P_coeff =
        static_cast<double>(rep.P) / (static_cast<double>(d) * static_cast<double>(sum_m));
    rep.intermediate_states = {sep.states, post_sub1, states, interp.states};

    if (rep.L > rep.bound_L) {
        std::ostringstream os;
        os << "block budget exceeded: " << rep.L << " > " << rep.bound_L;
        throw ConstructionError(os.str());
    }
    for (const auto& snapshot : rep.intermediate_states)
        for (std::size_t j = 0; j < N; ++j)
            if (snapshot[j].size() != ds.pairs[j].input.size())
                throw ConstructionError("intermediate state changed a sequence length");

    SoftmaxPlan plan;
    plan.delta = pc.delta;
    plan.w = pc.w;
    plan.R = R;
    plan.iterations = iterations;
    for (const TransformerBlock& b : T.blocks) {
        plan.taus.push_back(b.sa.tau);
        if (!attention_inert(b.sa)) plan.tau_min = std::min(plan.tau_min, b.sa.tau);
    }

    // Re-check the finished network with the single smallest temperature
    // everywhere; keep the per-layer temperatures either way and record the
    // outcome.
    {
        Transformer uniform = T;
        for (TransformerBlock& b : uniform.blocks)
            if (!attention_inert(b.sa)) b.sa.tau = plan.tau_min;
        bool ok = true;
        for (std::size_t j = 0; j < N && ok; ++j)
            ok = hausdorff_distance(transformer_apply(uniform, ds.pairs[j].input), outs[j]) <=
                 1e-9;
        plan.tau_min_global_ok = ok;
        plan.note = ok ? "single temperature tau_min reproduces the dataset end to end"
                       : "single temperature tau_min failed the end-to-end re-check; "
                         "per-layer temperatures retained";
    }

    std::ostringstream per;
    double worst = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        const double h = hausdorff_distance(transformer_apply(T, ds.pairs[j].input), outs[j]);
        worst = std::max(worst, h);
        per << (j ? ", " : "") << "sequence " << j << ": " << h;
    }
    if (worst > 1e-9)
        throw ConstructionError("final verification failed; per-sequence distances: " + per.str());

    return {std::move(T), std::move(rep), std::move(plan)};
}

} // namespace iforge
