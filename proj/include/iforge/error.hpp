#pragma once

#include <stdexcept>
#include <string>

namespace iforge {

// Malformed arguments: dimension mismatches, invalid parameters.
struct ContractError : std::invalid_argument {
    explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Lemma-style preconditions that were checked numerically and failed.
struct HypothesisError : std::runtime_error {
    explicit HypothesisError(const std::string& what) : std::runtime_error(what) {}
};

// A construction step could not produce a verified block (scan exhausted,
// placement collision, block budget exceeded, ...).
struct ConstructionError : std::runtime_error {
    explicit ConstructionError(const std::string& what) : std::runtime_error(what) {}
};

// Temperature calibration failed within its halving budget.
struct CalibrationError : std::runtime_error {
    explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

// The training loop left the region of useful objectives (divergence or a
// non-finite probe).
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// A serialized artifact does not match its schema; the message names the
// offending field.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace iforge
