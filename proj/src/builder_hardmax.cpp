#include "iforge/builder_hardmax.hpp"

#include "builder_detail.hpp"
#include "iforge/core.hpp"
#include "iforge/dynamics.hpp"
#include "iforge/error.hpp"
#include "iforge/geometry.hpp"
#include "iforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace iforge {

using namespace bdetail;

SeparationResult build_separation(const Dataset& ds) {
    return run_separation(ds, finalize_keep, AttentionKind::Hardmax);
}

LeaderSelectionResult build_leader_selection(const std::vector<Sequence>& in_states,
                                             const std::vector<std::size_t>& out_lengths) {
    if (in_states.empty() || out_lengths.size() != in_states.size())
        throw ContractError("build_leader_selection: states/output-length mismatch");
    const int d = static_cast<int>(in_states[0].dim());
    const std::size_t N = in_states.size();
    for (std::size_t j = 0; j < N; ++j)
        if (out_lengths[j] < 1 || out_lengths[j] > in_states[j].size())
            throw ContractError("build_leader_selection: output length out of range");
    for (std::size_t j = 0; j < N; ++j)
        for (std::size_t j2 = j + 1; j2 < N; ++j2)
            for (const Vec& x : in_states[j].tokens)
                for (const Vec& y : in_states[j2].tokens)
                    if (dist(x, y) < 0.9e-9)
                        throw ContractError("build_leader_selection: states are not disjoint");

    LeaderSelectionResult res;
    std::vector<Sequence> states = in_states;

    // Shift everything into a hypercube in the positive orthant.
    double minc = std::numeric_limits<double>::infinity();
    for (const Sequence& s : states)
        for (const Vec& x : s.tokens)
            for (double c : x) minc = std::min(minc, c);
    const Vec u(static_cast<std::size_t>(d), 1.0 + std::abs(minc));
    TransformerBlock shift{const_shift_ff(d, u), SelfAttentionLayer::identity(d)};
    states = apply_block(shift, states);
    res.blocks.push_back(std::move(shift));

    res.plan.shift = u;
    double a1 = std::numeric_limits<double>::infinity(), a2 = 0.0;
    for (const Sequence& s : states)
        for (const Vec& x : s.tokens)
            for (double c : x) {
                a1 = std::min(a1, c);
                a2 = std::max(a2, c);
            }
    res.plan.a1 = a1;
    res.plan.a2 = a2;

    // Non-apex leaders get globally distinct sphere directions so that any
    // projection-based post-processing can tell every leader pair apart.
    std::size_t total_negatives = 0;
    for (std::size_t m : out_lengths) total_negatives += m - 1;
    std::size_t neg_counter = 0;

    res.plan.leaders.resize(N);
    res.plan.targets.resize(N);
    for (std::size_t j = 0; j < N; ++j) {
        const std::size_t m = out_lengths[j];
        // Apex coordinate doubles as this sequence's sphere radius; spacing 3
        // keeps apexes of different sequences and the box well apart.
        const double R = a2 + 3.0 * static_cast<double>(j + 1);
        res.plan.radius.push_back(R);

        std::vector<Vec> targets;
        targets.emplace_back(static_cast<std::size_t>(d), R);
        for (std::size_t k = 1; k < m; ++k) {
            Vec dir(static_cast<std::size_t>(d), 1.0);
            ++neg_counter;
            const double tau = static_cast<double>(neg_counter) /
                               (2.0 * static_cast<double>(total_negatives + 1));
            dir[0] += tau;
            dir[1] -= tau;
            const double nd = std::sqrt(kernels::dot(dir.data(), dir.data(), dir.size()));
            Vec q(dir.size());
            for (std::size_t c = 0; c < q.size(); ++c) q[c] = -R * dir[c] / nd;
            targets.push_back(std::move(q));
        }

        for (std::size_t k = 0; k < m; ++k) {
            res.plan.leaders[j].push_back(k);
            const Vec& target = targets[k];
            for (std::size_t j2 = 0; j2 < N; ++j2)
                for (std::size_t i2 = 0; i2 < states[j2].size(); ++i2) {
                    if (j2 == j && i2 == k) continue;
                    if (dist(states[j2][i2], target) < 1e-9) {
                        std::ostringstream os;
                        os << "leader placement collision: target for token " << k
                           << " of sequence " << j << " hits token " << i2 << " of sequence "
                           << j2;
                        throw ConstructionError(os.str());
                    }
                }
            const std::vector<Vec> uni = dedup_union(states);
            FeedForwardLayer hat = hat_ff(uni, locate(uni, states[j][k]), target);
            TransformerBlock blk{std::move(hat), SelfAttentionLayer::identity(d)};
            states = apply_block(blk, states);
            res.blocks.push_back(std::move(blk));
        }
        res.plan.targets[j] = std::move(targets);
    }

    res.states = std::move(states);
    return res;
}

TransformerBlock build_collapse(const std::vector<Sequence>& placed, const PlacementPlan& plan) {
    if (placed.empty() || plan.leaders.size() != placed.size() ||
        plan.radius.size() != placed.size())
        throw ContractError("build_collapse: placement plan does not match states");
    for (std::size_t j = 0; j < placed.size(); ++j) {
        try {
            predict_partial_equilibrium(placed[j], plan.leaders[j], plan.radius[j]);
        } catch (const HypothesisError& e) {
            std::ostringstream os;
            os << "collapse precondition failed for sequence " << j << ": " << e.what();
            throw ConstructionError(os.str());
        }
    }

    const int d = static_cast<int>(placed[0].dim());
    TransformerBlock blk;
    blk.ff = FeedForwardLayer::identity(d);
    blk.sa.d = d;
    blk.sa.kind = AttentionKind::Hardmax;
    blk.sa.rho = 0.0;
    blk.sa.V = Matrix::identity(d);
    blk.sa.A = Matrix::identity(d);

    for (std::size_t j = 0; j < placed.size(); ++j) {
        const Sequence out = sa_apply(blk.sa, ff_apply(blk.ff, placed[j]));
        if (distinct_count(out, 1e-12) != plan.leaders[j].size()) {
            std::ostringstream os;
            os << "collapse left sequence " << j << " with " << distinct_count(out, 1e-12)
               << " distinct tokens, expected " << plan.leaders[j].size();
            throw ConstructionError(os.str());
        }
    }
    return blk;
}

InterpolationResult build_interpolation(const std::vector<Sequence>& collapsed,
                                        const std::vector<Sequence>& outputs,
                                        std::size_t detour_slack) {
    if (collapsed.empty() || outputs.size() != collapsed.size())
        throw ContractError("build_interpolation: states/outputs mismatch");
    const int d = static_cast<int>(collapsed[0].dim());

    struct Move {
        std::size_t j = 0;
        std::vector<std::size_t> idxs; // token indices sharing one exact position
        Vec target;
        bool finished = false;
    };
    std::vector<Move> moves;
    // token (j, i) -> index into `moves`
    std::vector<std::vector<std::size_t>> owner(collapsed.size());

    for (std::size_t j = 0; j < collapsed.size(); ++j) {
        owner[j].assign(collapsed[j].size(), 0);
        std::vector<Move> groups;
        for (std::size_t i = 0; i < collapsed[j].size(); ++i) {
            bool placed = false;
            for (Move& g : groups)
                if (collapsed[j][g.idxs[0]] == collapsed[j][i]) {
                    g.idxs.push_back(i);
                    placed = true;
                    break;
                }
            if (!placed) groups.push_back(Move{j, {i}, {}, false});
        }
        if (groups.size() != outputs[j].size()) {
            std::ostringstream os;
            os << "interpolation input for sequence " << j << " has " << groups.size()
               << " distinct tokens, expected " << outputs[j].size();
            throw ContractError(os.str());
        }
        std::sort(groups.begin(), groups.end(), [&](const Move& a, const Move& b) {
            return collapsed[j][a.idxs[0]] < collapsed[j][b.idxs[0]];
        });
        std::vector<Vec> outs = outputs[j].tokens;
        std::sort(outs.begin(), outs.end());
        for (std::size_t k = 0; k < groups.size(); ++k) {
            groups[k].target = outs[k];
            for (std::size_t i : groups[k].idxs) owner[j][i] = moves.size() + k;
        }
        moves.insert(moves.end(), groups.begin(), groups.end());
    }

    InterpolationResult res;
    std::vector<Sequence> states = collapsed;

    const auto emit_move = [&](std::size_t mi, const Vec& target) {
        const Move& mv = moves[mi];
        const std::vector<Vec> uni = dedup_union(states);
        FeedForwardLayer hat = hat_ff(uni, locate(uni, states[mv.j][mv.idxs[0]]), target);
        TransformerBlock blk{std::move(hat), SelfAttentionLayer::identity(d)};
        states = apply_block(blk, states);
        res.blocks.push_back(std::move(blk));
    };
    const auto blocked_by_unfinished = [&](std::size_t mi) {
        const Move& mv = moves[mi];
        for (std::size_t j2 = 0; j2 < states.size(); ++j2)
            for (std::size_t i2 = 0; i2 < states[j2].size(); ++i2) {
                const std::size_t other = owner[j2][i2];
                if (other == mi || moves[other].finished) continue;
                if (dist(states[j2][i2], mv.target) <= 1e-9) return true;
            }
        return false;
    };

    std::vector<std::size_t> deferred;
    for (std::size_t mi = 0; mi < moves.size(); ++mi) {
        if (blocked_by_unfinished(mi)) {
            // Route through a fresh dominating point; the final hop happens
            // after every primary move has vacated the target.
            if (res.detours == detour_slack)
                throw ConstructionError(
                    "interpolation detour reserve exhausted while avoiding a transient collision");
            ++res.detours;
            emit_move(mi, dominating_point(states, 2.0));
            deferred.push_back(mi);
        } else {
            emit_move(mi, moves[mi].target);
            moves[mi].finished = true;
        }
    }
    for (std::size_t mi : deferred) {
        emit_move(mi, moves[mi].target);
        moves[mi].finished = true;
    }

    res.states = std::move(states);
    return res;
}

std::pair<Transformer, ConstructionReport> build_hardmax(const Dataset& ds) {
    const ValidationResult vr = validate_dataset(ds);
    if (!vr.ok)
        throw ContractError("build_hardmax: invalid dataset: " + vr.clause + "; " + vr.detail);
    if (ds.d < 2) throw ContractError("build_hardmax: requires dimension >= 2");

    const std::size_t N = ds.size();
    std::vector<std::size_t> m;
    std::vector<Sequence> outs;
    std::size_t sum_m = 0;
    for (const SeqPair& p : ds.pairs) {
        m.push_back(p.output.size());
        outs.push_back(p.output);
        sum_m += p.output.size();
    }

    SeparationResult sep = build_separation(ds);
    LeaderSelectionResult lead = build_leader_selection(sep.states, m);
    TransformerBlock col = build_collapse(lead.states, lead.plan);
    const std::vector<Sequence> collapsed = apply_block(col, lead.states);

    const std::size_t sep_budget = 1 + 2 * (N - 1);
    const std::size_t slack = sep_budget - sep.blocks.size();
    InterpolationResult interp = build_interpolation(collapsed, outs, slack);

    Transformer T;
    T.d = ds.d;
    for (const TransformerBlock& b : sep.blocks) T.blocks.push_back(b);
    for (const TransformerBlock& b : lead.blocks) T.blocks.push_back(b);
    T.blocks.push_back(col);
    for (const TransformerBlock& b : interp.blocks) T.blocks.push_back(b);

    ConstructionReport rep;
    rep.steps.push_back(step_entry("separation", sep.blocks));
    rep.steps.push_back(step_entry("leader_selection", lead.blocks));
    rep.steps.push_back(step_entry("collapse", {col}));
    rep.steps.push_back(step_entry("interpolation", interp.blocks));
    rep.L = T.blocks.size();
    rep.bound_L = 2 * sum_m + 2 * N + 1;
    rep.P = param_count(T);
    rep.bound_P_coeff = static_cast<double>(rep.P) /
                        (static_cast<double>(ds.d) * static_cast<double>(sum_m));
    rep.intermediate_states = {sep.states, lead.states, collapsed, interp.states};

    if (rep.L > rep.bound_L) {
        std::ostringstream os;
        os << "block budget exceeded: " << rep.L << " > " << rep.bound_L;
        throw ConstructionError(os.str());
    }
    for (const auto& snapshot : rep.intermediate_states)
        for (std::size_t j = 0; j < N; ++j)
            if (snapshot[j].size() != ds.pairs[j].input.size())
                throw ConstructionError("intermediate state changed a sequence length");

    std::ostringstream per;
    double worst = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        const double h = hausdorff_distance(transformer_apply(T, ds.pairs[j].input), outs[j]);
        worst = std::max(worst, h);
        per << (j ? ", " : "") << "sequence " << j << ": " << h;
    }
    if (worst > 1e-9)
        throw ConstructionError("final verification failed; per-sequence distances: " + per.str());

    return {std::move(T), std::move(rep)};
}

} // namespace iforge
