#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace iforge {

using Vec = std::vector<double>;

// Finite list of tokens in R^d. Token order is meaningful for evaluation
// (attention indexes by position) but equality of sequences is set equality.
struct Sequence {
    std::vector<Vec> tokens;

    Sequence() = default;
    explicit Sequence(std::vector<Vec> t) : tokens(std::move(t)) {}

    std::size_t size() const { return tokens.size(); }
    std::size_t dim() const { return tokens.empty() ? 0 : tokens.front().size(); }
    Vec& operator[](std::size_t i) { return tokens[i]; }
    const Vec& operator[](std::size_t i) const { return tokens[i]; }
};

struct SeqPair {
    Sequence input;
    Sequence output;
};

struct Dataset {
    int d = 0;
    std::vector<SeqPair> pairs;

    std::size_t size() const { return pairs.size(); }
    // Total number of distinct output tokens, summed over pairs.
    std::size_t total_output_tokens() const {
        std::size_t s = 0;
        for (const auto& p : pairs) s += p.output.size();
        return s;
    }
};

struct ValidationResult {
    bool ok = true;
    std::string clause;  // first violated requirement, empty when ok
    std::string detail;  // indices and values for diagnostics
};

} // namespace iforge
