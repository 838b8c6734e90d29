#include "iforge/serialize.hpp"

#include "iforge/core.hpp"
#include "iforge/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace iforge {

namespace {

// Insertion-ordered keys keep the emitted documents readable and the bytes
// reproducible.
using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ParseError(path + ": " + what);
}

Json parse_text(const std::string& text, const char* doc) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string(doc) + ": " + e.what());
    }
}

const Json& member(const Json& j, const std::string& path, const char* key) {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(path, std::string("missing field \"") + key + "\"");
    return *it;
}

double get_finite(const Json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) fail(path, "expected a finite number");
    return x;
}

int get_int(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

Vec get_vec(const Json& j, const std::string& path, int want_len) {
    if (!j.is_array()) fail(path, "expected an array");
    if (want_len >= 0 && j.size() != static_cast<std::size_t>(want_len)) {
        std::ostringstream os;
        os << "expected " << want_len << " coordinates, found " << j.size();
        fail(path, os.str());
    }
    Vec out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(get_finite(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Json tokens_to_json(const Sequence& s) {
    Json arr = Json::array();
    for (const Vec& t : s.tokens) arr.push_back(t);
    return arr;
}

Sequence tokens_from_json(const Json& j, const std::string& path, int d) {
    if (!j.is_array()) fail(path, "expected an array of tokens");
    Sequence s;
    for (std::size_t i = 0; i < j.size(); ++i)
        s.tokens.push_back(get_vec(j[i], path + "[" + std::to_string(i) + "]", d));
    return s;
}

Json matrix_to_json(const Matrix& m) {
    Json j;
    switch (m.kind) {
    case Matrix::Kind::ScaledIdentity:
        j["scaled_identity"] = m.scale;
        break;
    case Matrix::Kind::RankOneSym:
        j["rank_one"] = Json{{"v", m.v}, {"sign", m.sign}};
        break;
    case Matrix::Kind::Dense: {
        Json rows = Json::array();
        for (int r = 0; r < m.d; ++r) {
            Vec row(m.dense.begin() + static_cast<std::size_t>(r) * m.d,
                    m.dense.begin() + static_cast<std::size_t>(r + 1) * m.d);
            rows.push_back(row);
        }
        j["dense"] = std::move(rows);
        break;
    }
    }
    return j;
}

Matrix matrix_from_json(const Json& j, const std::string& path, int d) {
    if (!j.is_object() || j.size() != 1)
        fail(path, "expected exactly one of \"dense\", \"scaled_identity\", \"rank_one\"");
    if (j.contains("scaled_identity"))
        return Matrix::scaled_identity(d, get_finite(j["scaled_identity"],
                                                     path + ".scaled_identity"));
    if (j.contains("rank_one")) {
        const Json& ro = j["rank_one"];
        const Vec v = get_vec(member(ro, path + ".rank_one", "v"),
                              path + ".rank_one.v", d);
        const double sign =
            get_finite(member(ro, path + ".rank_one", "sign"), path + ".rank_one.sign");
        if (sign != 1.0 && sign != -1.0) fail(path + ".rank_one.sign", "expected +1 or -1");
        return Matrix::rank_one_sym(v, sign);
    }
    if (j.contains("dense")) {
        const Json& rows = j["dense"];
        if (!rows.is_array() || rows.size() != static_cast<std::size_t>(d))
            fail(path + ".dense", "expected " + std::to_string(d) + " rows");
        std::vector<double> dense;
        dense.reserve(static_cast<std::size_t>(d) * d);
        for (int r = 0; r < d; ++r) {
            const Vec row = get_vec(rows[static_cast<std::size_t>(r)],
                                    path + ".dense[" + std::to_string(r) + "]", d);
            dense.insert(dense.end(), row.begin(), row.end());
        }
        return Matrix::from_dense(d, dense);
    }
    fail(path, "unknown matrix tag");
}

} // namespace

std::string dataset_to_json(const Dataset& ds) {
    Json j;
    j["d"] = ds.d;
    Json pairs = Json::array();
    for (const SeqPair& p : ds.pairs) {
        Json jp;
        jp["input"] = tokens_to_json(p.input);
        jp["output"] = tokens_to_json(p.output);
        pairs.push_back(std::move(jp));
    }
    j["pairs"] = std::move(pairs);
    return j.dump(2) + "\n";
}

Dataset dataset_from_json(const std::string& text) {
    const Json j = parse_text(text, "dataset");
    Dataset ds;
    ds.d = get_int(member(j, "dataset", "d"), "dataset.d");
    const Json& pairs = member(j, "dataset", "pairs");
    if (!pairs.is_array()) fail("dataset.pairs", "expected an array");
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const std::string path = "dataset.pairs[" + std::to_string(k) + "]";
        SeqPair p;
        p.input = tokens_from_json(member(pairs[k], path, "input"), path + ".input", ds.d);
        p.output = tokens_from_json(member(pairs[k], path, "output"), path + ".output", ds.d);
        ds.pairs.push_back(std::move(p));
    }
    const ValidationResult v = validate_dataset(ds);
    if (!v.ok) fail("dataset", v.clause + " (" + v.detail + ")");
    return ds;
}

std::string transformer_to_json(const Transformer& t) {
    Json j;
    j["d"] = t.d;
    Json blocks = Json::array();
    for (const TransformerBlock& blk : t.blocks) {
        Json jf;
        jf["eta"] = blk.ff.eta;
        Json wcols = Json::array();
        Json urows = Json::array();
        for (int k = 0; k < blk.ff.dp; ++k) {
            const double* wc = blk.ff.w_col(k);
            const double* ur = blk.ff.u_row(k);
            wcols.push_back(Vec(wc, wc + blk.ff.d));
            urows.push_back(Vec(ur, ur + blk.ff.d));
        }
        jf["W"] = std::move(wcols);
        jf["U"] = std::move(urows);
        jf["b"] = blk.ff.b;

        Json js;
        js["rho"] = blk.sa.rho;
        js["V"] = matrix_to_json(blk.sa.V);
        js["A"] = matrix_to_json(blk.sa.A);
        if (blk.sa.kind == AttentionKind::Hardmax)
            js["kind"] = "hardmax";
        else
            js["kind"] = Json{{"softmax", Json{{"tau", blk.sa.tau}}}};

        blocks.push_back(Json{{"ff", std::move(jf)}, {"sa", std::move(js)}});
    }
    j["blocks"] = std::move(blocks);
    return j.dump(2) + "\n";
}

Transformer transformer_from_json(const std::string& text) {
    const Json j = parse_text(text, "transformer");
    Transformer t;
    t.d = get_int(member(j, "transformer", "d"), "transformer.d");
    if (t.d < 1) fail("transformer.d", "expected d >= 1");
    const Json& blocks = member(j, "transformer", "blocks");
    if (!blocks.is_array()) fail("transformer.blocks", "expected an array");
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const std::string path = "transformer.blocks[" + std::to_string(k) + "]";
        const Json& jf = member(blocks[k], path, "ff");
        const Json& js = member(blocks[k], path, "sa");

        FeedForwardLayer ff;
        ff.d = t.d;
        ff.eta = get_finite(member(jf, path + ".ff", "eta"), path + ".ff.eta");
        const Json& wcols = member(jf, path + ".ff", "W");
        const Json& urows = member(jf, path + ".ff", "U");
        if (!wcols.is_array()) fail(path + ".ff.W", "expected an array of columns");
        if (!urows.is_array() || urows.size() != wcols.size())
            fail(path + ".ff.U", "expected as many rows as W has columns");
        ff.dp = static_cast<int>(wcols.size());
        for (int c = 0; c < ff.dp; ++c) {
            const Vec wc = get_vec(wcols[static_cast<std::size_t>(c)],
                                   path + ".ff.W[" + std::to_string(c) + "]", t.d);
            const Vec ur = get_vec(urows[static_cast<std::size_t>(c)],
                                   path + ".ff.U[" + std::to_string(c) + "]", t.d);
            ff.w.insert(ff.w.end(), wc.begin(), wc.end());
            ff.u.insert(ff.u.end(), ur.begin(), ur.end());
        }
        ff.b = get_vec(member(jf, path + ".ff", "b"), path + ".ff.b", ff.dp);

        SelfAttentionLayer sa;
        sa.d = t.d;
        sa.rho = get_finite(member(js, path + ".sa", "rho"), path + ".sa.rho");
        sa.V = matrix_from_json(member(js, path + ".sa", "V"), path + ".sa.V", t.d);
        sa.A = matrix_from_json(member(js, path + ".sa", "A"), path + ".sa.A", t.d);
        const Json& kind = member(js, path + ".sa", "kind");
        if (kind.is_string() && kind.get<std::string>() == "hardmax") {
            sa.kind = AttentionKind::Hardmax;
            sa.tau = 1.0;
        } else if (kind.is_object() && kind.contains("softmax")) {
            sa.kind = AttentionKind::Softmax;
            sa.tau = get_finite(member(kind["softmax"], path + ".sa.kind.softmax", "tau"),
                                path + ".sa.kind.softmax.tau");
            if (sa.tau <= 0.0) fail(path + ".sa.kind.softmax.tau", "expected tau > 0");
        } else {
            fail(path + ".sa.kind", "expected \"hardmax\" or {\"softmax\": {\"tau\": ...}}");
        }

        t.blocks.push_back(TransformerBlock{std::move(ff), std::move(sa)});
    }
    return t;
}

std::string sequence_to_json(const Sequence& s) {
    Json j;
    j["d"] = static_cast<int>(s.dim());
    j["tokens"] = tokens_to_json(s);
    return j.dump(2) + "\n";
}

Sequence sequence_from_json(const std::string& text) {
    const Json j = parse_text(text, "sequence");
    const int d = get_int(member(j, "sequence", "d"), "sequence.d");
    if (d < 1) fail("sequence.d", "expected d >= 1");
    Sequence s = tokens_from_json(member(j, "sequence", "tokens"), "sequence.tokens", d);
    if (s.tokens.empty()) fail("sequence.tokens", "expected at least one token");
    return s;
}

std::string dynamics_config_to_json(const DynamicsConfig& cfg, int d) {
    Json j;
    j["d"] = d;
    j["gamma"] = cfg.gamma;
    j["A"] = matrix_to_json(cfg.A);
    return j.dump(2) + "\n";
}

DynamicsConfig dynamics_config_from_json(const std::string& text) {
    const Json j = parse_text(text, "dynamics");
    const int d = get_int(member(j, "dynamics", "d"), "dynamics.d");
    if (d < 1) fail("dynamics.d", "expected d >= 1");
    DynamicsConfig cfg;
    cfg.gamma = get_finite(member(j, "dynamics", "gamma"), "dynamics.gamma");
    if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) fail("dynamics.gamma", "expected gamma in (0, 1]");
    cfg.A = matrix_from_json(member(j, "dynamics", "A"), "dynamics.A", d);
    return cfg;
}

std::string report_to_json(const ConstructionReport& rep, const SoftmaxPlan* plan) {
    Json j;
    Json steps = Json::array();
    for (const StepLedgerEntry& e : rep.steps) {
        Json je;
        je["step"] = e.step;
        je["blocks"] = e.blocks;
        je["ff_widths"] = e.ff_widths;
        steps.push_back(std::move(je));
    }
    j["steps"] = std::move(steps);
    j["L"] = rep.L;
    j["P"] = rep.P;
    j["bound_L"] = rep.bound_L;
    j["bound_P_coeff"] = rep.bound_P_coeff;
    if (plan != nullptr) {
        Json jp;
        jp["delta"] = plan->delta;
        jp["w"] = plan->w;
        jp["R"] = plan->R;
        jp["taus"] = plan->taus;
        Json its = Json::array();
        for (const CollapseIteration& it : plan->iterations)
            its.push_back(Json{{"s", it.s}, {"c_pos", it.c_pos}, {"c_neg", it.c_neg}});
        jp["iterations"] = std::move(its);
        jp["tau_min"] = plan->tau_min;
        jp["tau_min_global_ok"] = plan->tau_min_global_ok;
        jp["note"] = plan->note;
        j["softmax_plan"] = std::move(jp);
    }
    return j.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file for reading: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) throw ParseError("read failed: " + path);
    return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open file for writing: " + path);
    out << text;
    out.flush();
    if (!out) throw ParseError("write failed: " + path);
}

} // namespace iforge
