#pragma once

#include "iforge/builder_hardmax.hpp"
#include "iforge/builder_softmax.hpp"
#include "iforge/dynamics.hpp"
#include "iforge/types.hpp"

#include <string>

namespace iforge {

// JSON text for the on-disk artifacts. All writers emit 2-space-indented
// documents with keys in insertion order and floats in their shortest
// round-trip form, so identical inputs produce identical bytes. All readers
// throw ParseError with a field path (or the parser's line/column) on any
// schema violation. Finite doubles survive a write/read cycle bit-exactly.
//
// Dataset      {"d": d, "pairs": [{"input": [[...]*d, ...],
//                                  "output": [[...]*d, ...]}, ...]}
// Transformer  {"d": d, "blocks": [{"ff": {"eta", "W", "U", "b"},
//                                   "sa": {"rho", "V", "A", "kind"}}, ...]}
//   where W holds dp columns of length d, U holds dp rows of length d,
//   matrices are tagged {"dense": rows} | {"scaled_identity": s} |
//   {"rank_one": {"v": [...], "sign": +-1}}, and kind is "hardmax" or
//   {"softmax": {"tau": t}}.
// Sequence     {"d": d, "tokens": [[...]*d, ...]}
// DynamicsConfig {"d": d, "gamma": g, "A": tagged}

std::string dataset_to_json(const Dataset& ds);
// Also runs validate_dataset; a structurally valid file holding an invalid
// dataset is rejected with the violated clause in the message.
Dataset dataset_from_json(const std::string& text);

std::string transformer_to_json(const Transformer& t);
Transformer transformer_from_json(const std::string& text);

std::string sequence_to_json(const Sequence& s);
Sequence sequence_from_json(const std::string& text);

std::string dynamics_config_to_json(const DynamicsConfig& cfg, int d);
DynamicsConfig dynamics_config_from_json(const std::string& text);

// Write-only construction artifact: the step ledger, block/parameter counts
// and bounds, and (for softmax builds) the plan alongside.
std::string report_to_json(const ConstructionReport& rep,
                           const SoftmaxPlan* plan = nullptr);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

} // namespace iforge
