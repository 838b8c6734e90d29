#pragma once

// Internals shared by the hardmax and softmax construction pipelines. The
// separation machinery lives here: candidate blocks are built with hardmax
// attention and verified on the actual evaluated states; a finalize hook lets
// the softmax pipeline swap the attention kind and calibrate a temperature
// before a candidate is committed.

#include "iforge/builder_hardmax.hpp"
#include "iforge/core.hpp"
#include "iforge/error.hpp"
#include "iforge/geometry.hpp"
#include "iforge/kernels.hpp"
#include "iforge/model.hpp"
#include "iforge/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace iforge::bdetail {

inline double dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return std::sqrt(s);
}

inline std::vector<Sequence> apply_block(const TransformerBlock& blk,
                                         const std::vector<Sequence>& states) {
    std::vector<Sequence> out;
    out.reserve(states.size());
    for (const Sequence& s : states) out.push_back(sa_apply(blk.sa, ff_apply(blk.ff, s)));
    return out;
}

// Width-1 FF adding the constant vector u to every token: sigma(0*x + 1) = 1.
inline FeedForwardLayer const_shift_ff(int d, const Vec& u) {
    FeedForwardLayer ff;
    ff.d = d;
    ff.dp = 1;
    ff.eta = 1.0;
    ff.w = u;
    ff.u.assign(static_cast<std::size_t>(d), 0.0);
    ff.b = {1.0};
    return ff;
}

inline double max_abs_coord(const std::vector<Sequence>& states) {
    double m = 0.0;
    for (const Sequence& s : states)
        for (const Vec& x : s.tokens)
            for (double c : x) m = std::max(m, std::abs(c));
    return m;
}

// Two tokens are treated as the same point when this close; exact input
// coincidences survive constant shifts bit-for-bit, so the tolerance only
// needs to absorb noise well below any meaningful data scale.
inline double coincide_tol(const std::vector<Sequence>& states) {
    return 1e-12 * (1.0 + max_abs_coord(states));
}

// Min over tokens of sequences [0, count) of pairwise distance, within and
// across sequences. +inf when there are fewer than two tokens.
inline double min_pairwise_all(const std::vector<Sequence>& states, std::size_t count) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < count; ++j)
        for (std::size_t i = 0; i < states[j].size(); ++i) {
            for (std::size_t i2 = i + 1; i2 < states[j].size(); ++i2)
                best = std::min(best, dist(states[j][i], states[j][i2]));
            for (std::size_t j2 = j + 1; j2 < count; ++j2)
                for (std::size_t i2 = 0; i2 < states[j2].size(); ++i2)
                    best = std::min(best, dist(states[j][i], states[j2][i2]));
        }
    return best;
}

inline double min_dist_to_olds(const std::vector<Sequence>& states, std::size_t t, const Vec& x) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < t; ++j)
        for (const Vec& y : states[j].tokens) best = std::min(best, dist(x, y));
    return best;
}

inline double min_cross_to_olds(const std::vector<Sequence>& states, std::size_t t) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& x : states[t].tokens) best = std::min(best, min_dist_to_olds(states, t, x));
    return best;
}

// Point strictly dominating every current token in every coordinate.
inline Vec dominating_point(const std::vector<Sequence>& states, double pad) {
    Vec y(states[0].dim(), -std::numeric_limits<double>::infinity());
    for (const Sequence& s : states)
        for (const Vec& x : s.tokens)
            for (std::size_t c = 0; c < y.size(); ++c) y[c] = std::max(y[c], x[c]);
    for (double& c : y) c += pad;
    return y;
}

// Union of all tokens with exact duplicates removed; copies of one point are
// a single constraint for the hat construction and move together.
inline std::vector<Vec> dedup_union(const std::vector<Sequence>& states) {
    std::vector<Vec> pts;
    for (const Sequence& s : states)
        for (const Vec& x : s.tokens)
            if (std::find(pts.begin(), pts.end(), x) == pts.end()) pts.push_back(x);
    return pts;
}

inline std::size_t locate(const std::vector<Vec>& pts, const Vec& x) {
    const auto it = std::find(pts.begin(), pts.end(), x);
    if (it == pts.end()) throw ConstructionError("internal: token missing from union");
    return static_cast<std::size_t>(it - pts.begin());
}

// Deterministic scan 1/2, 1/3, 2/5, 3/7, 4/9, ... scaled so every candidate
// respects the displacement cap: alpha_k = 2 * alpha_max * m_k <= alpha_max.
inline std::vector<double> alpha_candidates(double alpha_max, std::size_t cap = 64) {
    std::vector<double> out;
    out.push_back(alpha_max); // 2 * (1/2) * alpha_max
    for (std::size_t k = 1; out.size() < cap; ++k)
        out.push_back(2.0 * alpha_max * (static_cast<double>(k) / (2.0 * k + 1.0)));
    return out;
}

// Geometric margins of a separation state. `t` is the sequence being
// separated; sequences [0, t) are the previously separated ones. Components
// are +inf when the corresponding set of pairs is empty.
struct SepMargins {
    double cross_old = std::numeric_limits<double>::infinity(); // old-old cross distance
    double within = std::numeric_limits<double>::infinity();    // any-sequence internal distance
    double goal = std::numeric_limits<double>::infinity();      // clearance of the new sequence
};

inline SepMargins measure_separation_margins(const std::vector<Sequence>& post, std::size_t t,
                                             bool goal_free_token) {
    SepMargins m;
    for (std::size_t j = 0; j < t; ++j)
        for (std::size_t j2 = j + 1; j2 < t; ++j2)
            for (const Vec& x : post[j].tokens)
                for (const Vec& y : post[j2].tokens) m.cross_old = std::min(m.cross_old, dist(x, y));
    for (const Sequence& s : post)
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t i2 = i + 1; i2 < s.size(); ++i2)
                m.within = std::min(m.within, dist(s[i], s[i2]));
    if (goal_free_token) {
        double best = -std::numeric_limits<double>::infinity();
        for (const Vec& x : post[t].tokens) best = std::max(best, min_dist_to_olds(post, t, x));
        m.goal = best;
    } else {
        m.goal = min_cross_to_olds(post, t);
    }
    return m;
}

// Sequences not yet processed ride along; a block that drives two distinct
// sequences into near-equality is rejected, since no later token-wise map
// could undo that.
inline bool degeneration_guard_ok(const std::vector<Sequence>& pre,
                                  const std::vector<Sequence>& post, std::size_t t,
                                  double margin = 1e-9) {
    for (std::size_t p = 0; p < post.size(); ++p)
        for (std::size_t q = std::max(p + 1, t); q < post.size(); ++q)
            if (hausdorff_distance(pre[p], pre[q]) > margin &&
                hausdorff_distance(post[p], post[q]) <= margin)
                return false;
    return true;
}

// Acceptance of one candidate separation block's post-state.
inline bool accept_post_state(const std::vector<Sequence>& pre, const std::vector<Sequence>& post,
                              std::size_t t, bool goal_free_token, std::string& diag) {
    const double margin = 1e-9;

    // Previously separated sequences must stay pairwise clear.
    for (std::size_t j = 0; j < t; ++j)
        for (std::size_t j2 = j + 1; j2 < t; ++j2)
            for (const Vec& x : post[j].tokens)
                for (const Vec& y : post[j2].tokens)
                    if (dist(x, y) < margin) {
                        diag = "separated pair regressed";
                        return false;
                    }

    // Tokens within any sequence must remain distinct (the contraction is
    // injective in exact arithmetic; rounding could still merge neighbours).
    for (std::size_t j = 0; j < post.size(); ++j)
        for (std::size_t i = 0; i < post[j].size(); ++i)
            for (std::size_t i2 = i + 1; i2 < post[j].size(); ++i2)
                if (post[j][i] == post[j][i2]) {
                    diag = "within-sequence merge";
                    return false;
                }

    if (goal_free_token) {
        bool any = false;
        for (const Vec& x : post[t].tokens)
            if (min_dist_to_olds(post, t, x) >= margin) {
                any = true;
                break;
            }
        if (!any) {
            diag = "no token of the new sequence came clear";
            return false;
        }
    } else {
        for (std::size_t j = 0; j < t; ++j)
            for (std::size_t i2 = 0; i2 < post[j].size(); ++i2)
                for (std::size_t i = 0; i < post[t].size(); ++i)
                    if (dist(post[t][i], post[j][i2]) < margin) {
                        std::ostringstream os;
                        os << "collision between token " << i << " of sequence " << t
                           << " and token " << i2 << " of sequence " << j;
                        diag = os.str();
                        return false;
                    }
    }

    if (!degeneration_guard_ok(pre, post, t, margin)) {
        diag = "pending pair degenerated toward equality";
        return false;
    }
    return true;
}

struct CaseBlockResult {
    TransformerBlock block;
    std::vector<Sequence> post;
};

// Post-processes a verified hardmax candidate block before it is committed.
// The hardmax pipeline keeps the block as-is; the softmax pipeline converts
// the attention kind and calibrates a temperature, rejecting the candidate
// when calibration fails. On success the returned post-state must be the one
// produced by the finalized block.
using FinalizeBlock = std::function<std::optional<CaseBlockResult>(
    const std::vector<Sequence>& pre, std::size_t t, bool goal_free_token, CaseBlockResult&& hard,
    std::string& diag)>;

inline std::optional<CaseBlockResult> finalize_keep(const std::vector<Sequence>&, std::size_t,
                                                    bool, CaseBlockResult&& hard, std::string&) {
    return std::move(hard);
}

// One Case-1/Case-2 block: distinguished token `is_` of sequence `js` becomes
// the global attention winner; every sequence contracts toward its own
// winner. Returns the hardmax block and the evaluated post-state, or nullopt.
inline std::optional<CaseBlockResult> try_case_block(const std::vector<Sequence>& states,
                                                     std::size_t t, std::size_t js,
                                                     std::size_t is_, bool goal_free_token,
                                                     std::string& diag) {
    const int d = static_cast<int>(states[0].dim());
    try {
        bool with_hat = false;
        FeedForwardLayer hat;
        std::vector<Sequence> staged = states;
        if (!is_extreme(states[js], is_).extreme) {
            // Relocate the distinguished token to a strictly dominating point
            // so it becomes an extreme point of its sequence.
            with_hat = true;
            const Vec y = dominating_point(states, 1.0);
            const std::vector<Vec> uni = dedup_union(states);
            hat = hat_ff(uni, locate(uni, states[js][is_]), y);
            for (Sequence& s : staged) s = ff_apply(hat, s);
        }

        const LeaderSelection sel = choose_leader_ff(staged, js, is_);

        FeedForwardLayer ff;
        if (with_hat) {
            // Stack hat neurons before the shift neuron: the shift input is
            // constant, so the parallel stack equals the composition exactly.
            ff.d = d;
            ff.dp = hat.dp + sel.ff.dp;
            ff.eta = 1.0;
            ff.w = hat.w;
            ff.w.insert(ff.w.end(), sel.ff.w.begin(), sel.ff.w.end());
            ff.u = hat.u;
            ff.u.insert(ff.u.end(), sel.ff.u.begin(), sel.ff.u.end());
            ff.b = hat.b;
            ff.b.insert(ff.b.end(), sel.ff.b.begin(), sel.ff.b.end());
        } else {
            ff = sel.ff;
        }

        // Cap the contraction so previously separated tokens move by at most
        // a quarter of the current half-gap.
        std::vector<Sequence> shifted;
        shifted.reserve(states.size());
        for (const Sequence& s : states) shifted.push_back(ff_apply(ff, s));
        const double delta1 = 0.5 * min_pairwise_all(shifted, t);
        double dmax = 0.0;
        for (std::size_t j = 0; j < t; ++j)
            for (const Vec& x : shifted[j].tokens)
                dmax = std::max(dmax, dist(x, shifted[j][sel.leaders[j]]));
        double alpha_max = 0.5;
        if (dmax > 0.0 && std::isfinite(delta1))
            alpha_max = std::min(0.5, delta1 / (4.0 * dmax));

        for (double alpha : alpha_candidates(alpha_max)) {
            if (!(alpha > 0.0)) continue;
            TransformerBlock blk;
            blk.ff = ff;
            blk.sa.d = d;
            blk.sa.kind = AttentionKind::Hardmax;
            blk.sa.rho = 1.0 - alpha;
            blk.sa.V = Matrix::scaled_identity(d, alpha);
            blk.sa.A = Matrix::rank_one_sym(sel.v, 1.0);
            std::vector<Sequence> post = apply_block(blk, states);
            if (accept_post_state(states, post, t, goal_free_token, diag))
                return CaseBlockResult{std::move(blk), std::move(post)};
        }
        if (diag.empty()) diag = "alpha scan exhausted";
    } catch (const std::exception& e) {
        diag = e.what();
    }
    return std::nullopt;
}

// Separates sequence t from sequences [0, t) with one or two blocks.
inline void separate_one(std::vector<Sequence>& states, std::size_t t,
                         std::vector<TransformerBlock>& blocks, const FinalizeBlock& finalize) {
    const double ctol = coincide_tol(states);
    std::string diag;

    // Direct path: some token of t is clear of every already-separated token.
    std::vector<std::size_t> direct;
    for (std::size_t i = 0; i < states[t].size(); ++i)
        if (min_dist_to_olds(states, t, states[t][i]) > ctol) direct.push_back(i);
    for (std::size_t i : direct) {
        auto r = try_case_block(states, t, t, i, false, diag);
        if (!r) continue;
        if (auto f = finalize(states, t, false, std::move(*r), diag)) {
            blocks.push_back(std::move(f->block));
            states = std::move(f->post);
            return;
        }
    }
    if (!direct.empty()) {
        std::ostringstream os;
        os << "separation of sequence " << t << " failed: " << diag;
        throw ConstructionError(os.str());
    }

    // Every token of t sits on an already-separated token. Emit one block
    // that frees at least one token of t, then finish with the direct path.
    std::vector<std::pair<std::size_t, std::size_t>> relocation;
    for (std::size_t j = 0; j < t; ++j) {
        bool shares = false;
        for (const Vec& x : states[j].tokens) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec& y : states[t].tokens) best = std::min(best, dist(x, y));
            if (best <= ctol) shares = true;
        }
        if (!shares) continue;
        for (std::size_t i = 0; i < states[j].size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec& y : states[t].tokens) best = std::min(best, dist(states[j][i], y));
            if (best > ctol) relocation.emplace_back(j, i);
        }
    }
    for (std::size_t i = 0; i < states[t].size(); ++i) relocation.emplace_back(t, i);

    for (const auto& [js, is_] : relocation) {
        auto r1 = try_case_block(states, t, js, is_, true, diag);
        if (!r1) continue;
        auto f1 = finalize(states, t, true, std::move(*r1), diag);
        if (!f1) continue;
        std::vector<std::size_t> freed;
        for (std::size_t i = 0; i < f1->post[t].size(); ++i)
            if (min_dist_to_olds(f1->post, t, f1->post[t][i]) >= 1e-9) freed.push_back(i);
        for (std::size_t i : freed) {
            auto r2 = try_case_block(f1->post, t, t, i, false, diag);
            if (!r2) continue;
            if (auto f2 = finalize(f1->post, t, false, std::move(*r2), diag)) {
                blocks.push_back(std::move(f1->block));
                blocks.push_back(std::move(f2->block));
                states = std::move(f2->post);
                return;
            }
        }
    }
    std::ostringstream os;
    os << "separation of overlapped sequence " << t << " failed: " << diag;
    throw ConstructionError(os.str());
}

// Shared separation driver: global shift, then per-sequence separation with
// the skip fast path. `identity_kind` is the attention kind stamped on the
// attention-free shift block (its computed value is kind-independent).
inline SeparationResult run_separation(const Dataset& ds, const FinalizeBlock& finalize,
                                       AttentionKind identity_kind) {
    const ValidationResult vr = validate_dataset(ds);
    if (!vr.ok)
        throw ContractError("build_separation: invalid dataset: " + vr.clause + "; " + vr.detail);
    const int d = ds.d;

    SeparationResult res;
    std::vector<Sequence> states;
    states.reserve(ds.size());
    for (const SeqPair& p : ds.pairs) states.push_back(p.input);
    const std::size_t N = states.size();

    // Global shift pushing every coordinate to at least 1: all tokens nonzero.
    const Vec w0(static_cast<std::size_t>(d), 1.0 + max_abs_coord(states));
    TransformerBlock shift{const_shift_ff(d, w0), SelfAttentionLayer::identity(d, identity_kind)};
    states = apply_block(shift, states);
    res.blocks.push_back(std::move(shift));
    for (const Sequence& s : states)
        for (const Vec& x : s.tokens)
            if (kernels::dot(x.data(), x.data(), x.size()) == 0.0)
                throw ConstructionError("build_separation: zero token survived the global shift");

    for (std::size_t t = 1; t < N; ++t) {
        if (min_cross_to_olds(states, t) >= 1e-9) continue; // already clear of the others
        separate_one(states, t, res.blocks, finalize);
    }

    res.states = std::move(states);
    const double min_pair = min_pairwise_all(res.states, N);
    res.delta1 = std::isfinite(min_pair) ? 0.5 * min_pair : 1.0;
    return res;
}

inline std::size_t distinct_count(const Sequence& s, double tol) {
    std::vector<const Vec*> reps;
    for (const Vec& x : s.tokens) {
        bool fresh = true;
        for (const Vec* r : reps)
            if (dist(x, *r) <= tol) {
                fresh = false;
                break;
            }
        if (fresh) reps.push_back(&x);
    }
    return reps.size();
}

inline StepLedgerEntry step_entry(const std::string& name,
                                  const std::vector<TransformerBlock>& blocks) {
    StepLedgerEntry e;
    e.step = name;
    e.blocks = blocks.size();
    for (const TransformerBlock& b : blocks) e.ff_widths.push_back(b.ff.dp);
    return e;
}

} // namespace iforge::bdetail
