#include "iforge/gen.hpp"

#include "iforge/core.hpp"
#include "iforge/error.hpp"
#include "iforge/kernels.hpp"
#include "iforge/rng.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace iforge {

namespace {

constexpr double kMinGap = 1e-6;      // within-sequence token separation
constexpr int kTokenAttempts = 10000; // draws per token before giving up
constexpr int kDatasetAttempts = 100; // full redraws before giving up

// One token at least kMinGap away from everything already in `s`.
Vec draw_token(Rng& rng, int d, const Sequence& s) {
    for (int attempt = 0; attempt < kTokenAttempts; ++attempt) {
        Vec x = rng.normal_vec(d);
        bool clear = true;
        for (const Vec& t : s.tokens) {
            if (std::sqrt(kernels::sqdist(x.data(), t.data(), x.size())) < kMinGap) {
                clear = false;
                break;
            }
        }
        if (clear) return x;
    }
    throw ConstructionError("gen_dataset: token rejection cap reached");
}

Sequence draw_sequence(Rng& rng, int d, std::size_t n) {
    Sequence s;
    for (std::size_t i = 0; i < n; ++i) s.tokens.push_back(draw_token(rng, d, s));
    return s;
}

} // namespace

Dataset gen_dataset(const GenConfig& cfg) {
    if (cfg.d < 2) throw ContractError("gen_dataset: d must be >= 2");
    if (cfg.N < 1) throw ContractError("gen_dataset: N must be >= 1");
    if (cfg.n_max < 1) throw ContractError("gen_dataset: n_max must be >= 1");
    if (cfg.m_policy == MPolicy::Fixed && (cfg.m_fixed < 1 || cfg.m_fixed > cfg.n_max))
        throw ContractError("gen_dataset: fixed m must be in 1..n_max");

    Rng rng(cfg.seed);
    for (int attempt = 0; attempt < kDatasetAttempts; ++attempt) {
        Dataset ds;
        ds.d = cfg.d;
        for (std::size_t j = 0; j < cfg.N; ++j) {
            // With a fixed m, draw n in m..n_max so m <= n always holds.
            const std::size_t n_lo = cfg.m_policy == MPolicy::Fixed ? cfg.m_fixed : 1;
            const std::size_t n = n_lo + rng.below(cfg.n_max - n_lo + 1);
            const std::size_t m =
                cfg.m_policy == MPolicy::Fixed ? cfg.m_fixed : 1 + rng.below(n);
            SeqPair p;
            p.input = draw_sequence(rng, cfg.d, n);
            p.output = draw_sequence(rng, cfg.d, m);
            ds.pairs.push_back(std::move(p));
        }
        if (validate_dataset(ds).ok) return ds;
    }
    throw ConstructionError("gen_dataset: dataset rejection cap reached");
}

} // namespace iforge
