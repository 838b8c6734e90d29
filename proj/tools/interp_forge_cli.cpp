// interp-forge: build, verify, and probe exact sequence-to-sequence
// transformer interpolants from the command line.

#include "iforge/builder_hardmax.hpp"
#include "iforge/builder_softmax.hpp"
#include "iforge/core.hpp"
#include "iforge/dynamics.hpp"
#include "iforge/error.hpp"
#include "iforge/gen.hpp"
#include "iforge/serialize.hpp"
#include "iforge/training.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace iforge;

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitInputError = 2;

std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------- gen-dataset

struct GenArgs {
    std::uint64_t seed = 0;
    int d = 2;
    std::size_t N = 1;
    std::size_t n_max = 4;
    std::string m_policy = "uniform";
    std::size_t m_fixed = 1;
    std::string out;
};

int run_gen(const GenArgs& a) {
    GenConfig cfg;
    cfg.seed = a.seed;
    cfg.d = a.d;
    cfg.N = a.N;
    cfg.n_max = a.n_max;
    cfg.m_policy = a.m_policy == "fixed" ? MPolicy::Fixed : MPolicy::Uniform;
    cfg.m_fixed = a.m_fixed;
    const Dataset ds = gen_dataset(cfg);
    write_text_file(a.out, dataset_to_json(ds));
    std::printf("wrote %s: d=%d N=%zu\n", a.out.c_str(), ds.d, ds.size());
    return kExitOk;
}

// ------------------------------------------------------------------ construct

struct ConstructArgs {
    std::string mode;
    std::string in;
    std::string out;
    std::string report;
};

int run_construct(const ConstructArgs& a) {
    const Dataset ds = dataset_from_json(read_text_file(a.in));
    Transformer model;
    ConstructionReport report;
    std::string report_text;
    if (a.mode == "hardmax") {
        auto [m, r] = build_hardmax(ds);
        model = std::move(m);
        report = std::move(r);
        report_text = report_to_json(report);
    } else {
        auto [m, r, plan] = build_softmax(ds);
        model = std::move(m);
        report = std::move(r);
        report_text = report_to_json(report, &plan);
    }

    // The builders verify before returning; re-check here so the exit code
    // never outruns the artifact actually written.
    double worst = 0.0;
    for (const SeqPair& p : ds.pairs)
        worst = std::max(worst, hausdorff_distance(transformer_apply(model, p.input), p.output));

    write_text_file(a.out, transformer_to_json(model));
    if (!a.report.empty()) write_text_file(a.report, report_text);
    std::printf("blocks: %zu (bound %zu)\nparams: %zu\nmax hausdorff: %s\n", report.L,
                report.bound_L, report.P, fmt17(worst).c_str());
    if (!(worst <= 1e-9)) {
        std::fprintf(stderr, "error: final verification failed (max hausdorff %s > 1e-9)\n",
                     fmt17(worst).c_str());
        return kExitRunFailure;
    }
    return kExitOk;
}

// --------------------------------------------------------------------- verify

struct VerifyArgs {
    std::string model;
    std::string in;
    double tol = 1e-9;
};

int run_verify(const VerifyArgs& a) {
    const Transformer model = transformer_from_json(read_text_file(a.model));
    const Dataset ds = dataset_from_json(read_text_file(a.in));
    bool all_ok = true;
    for (std::size_t j = 0; j < ds.pairs.size(); ++j) {
        const double dist =
            hausdorff_distance(transformer_apply(model, ds.pairs[j].input), ds.pairs[j].output);
        const bool ok = dist <= a.tol;
        all_ok = all_ok && ok;
        std::printf("pair %zu: hausdorff %s %s\n", j, fmt17(dist).c_str(),
                    ok ? "pass" : "FAIL");
    }
    std::printf("%s\n", all_ok ? "verified" : "verification failed");
    return all_ok ? kExitOk : kExitRunFailure;
}

// ------------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config;
    std::string x0;
    std::size_t steps = 0;
    std::string out;
};

bool cluster_is(const Sequence& X, const Matrix& A, std::size_t i, std::size_t only) {
    const std::vector<std::size_t> c = hardmax_cluster(X, A, i);
    return c.size() == 1 && c[0] == only;
}

// Best-effort hypothesis detection; returns the classification label and
// fills `prediction` when one of the covered regimes matches.
std::string classify(const Sequence& X0, const DynamicsConfig& cfg, Sequence& prediction) {
    const std::size_t n = X0.size();
    if (cfg.A.kind == Matrix::Kind::RankOneSym) {
        try {
            prediction = predict_rank1_equilibrium(X0, cfg.A.v);
            return "rank-one clustering";
        } catch (const HypothesisError&) {
            return "unclassified";
        }
    }
    if (cfg.A.kind != Matrix::Kind::ScaledIdentity || cfg.A.scale <= 0.0) return "unclassified";

    bool all_self = true;
    for (std::size_t i = 0; i < n && all_self; ++i) all_self = cluster_is(X0, cfg.A, i, i);
    if (all_self) {
        prediction = X0; // every token is its own leader: an exact fixed point
        return "no clustering";
    }

    for (std::size_t M = 0; M < n; ++M) {
        bool all_to_M = true;
        for (std::size_t i = 0; i < n && all_to_M; ++i) all_to_M = cluster_is(X0, cfg.A, i, M);
        if (all_to_M) {
            prediction.tokens.assign(n, X0[M]);
            return "full clustering";
        }
    }

    // Partial clustering: the self-fixed tokens are the leaders; the apex is
    // the leader with all-equal positive coordinates.
    std::vector<std::size_t> leaders;
    for (std::size_t i = 0; i < n; ++i)
        if (cluster_is(X0, cfg.A, i, i)) leaders.push_back(i);
    for (std::size_t k = 0; k < leaders.size(); ++k) {
        const Vec& t = X0[leaders[k]];
        bool diagonal = t[0] > 0.0;
        for (double c : t) diagonal = diagonal && std::abs(c - t[0]) <= 1e-9 * (1.0 + std::abs(t[0]));
        if (!diagonal) continue;
        std::swap(leaders[0], leaders[k]);
        try {
            prediction = predict_partial_equilibrium(X0, leaders, t[0]);
            return "partial clustering";
        } catch (const HypothesisError&) {
            break;
        }
    }
    return "unclassified";
}

int run_simulate(const SimulateArgs& a) {
    const DynamicsConfig cfg = dynamics_config_from_json(read_text_file(a.config));
    const Sequence X0 = sequence_from_json(read_text_file(a.x0));

    Sequence prediction;
    const std::string label = classify(X0, cfg, prediction);
    const Trajectory traj = simulate(X0, cfg, a.steps);
    if (!a.out.empty()) write_text_file(a.out, trajectory_csv(traj));

    std::printf("classification: %s\n", label.c_str());
    std::printf("steps: %zu\nconverged: %s\n", traj.steps_taken, traj.converged ? "yes" : "no");
    if (label != "unclassified") {
        const Sequence& last = traj.iterates.back();
        double dev = 0.0;
        for (std::size_t i = 0; i < last.size(); ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < last[i].size(); ++c) {
                const double diff = last[i][c] - prediction[i][c];
                s += diff * diff;
            }
            dev = std::max(dev, std::sqrt(s));
        }
        std::printf("max deviation: %s\n", fmt17(dev).c_str());
    }
    return kExitOk;
}

// ----------------------------------------------------------------- train-demo

struct TrainArgs {
    std::uint64_t seed = 0;
    std::size_t N = 3;
    std::size_t n = 8;
    int d = 4;
    double epsilon = 1e-3;
    std::size_t steps = 5000;
    double step_size = 0.02;
    std::string out;
    std::vector<double> sweep;
};

int run_train(const TrainArgs& a) {
    const Synthetic syn = make_synthetic(a.seed, a.N, a.n, a.d);

    if (!a.sweep.empty()) {
        std::string csv = "epsilon,min_loss\n";
        std::vector<double> lx, ly;
        for (double eps : a.sweep) {
            TrainingConfig cfg;
            cfg.epsilon = eps;
            cfg.steps = a.steps;
            cfg.step_size = a.step_size;
            cfg.seed = 1;
            const TrainingRun run = train(syn.arch, cfg, syn.data, syn.theta_exact);
            double min_loss = std::numeric_limits<double>::infinity();
            for (double v : run.loss) min_loss = std::min(min_loss, v);
            csv += fmt17(eps) + "," + fmt17(min_loss) + "\n";
            std::printf("epsilon %s: min_loss %s crossed_at %s\n", fmt17(eps).c_str(),
                        fmt17(min_loss).c_str(),
                        run.crossed_at ? std::to_string(*run.crossed_at).c_str() : "none");
            lx.push_back(std::log(eps));
            ly.push_back(std::log(min_loss));
        }
        if (lx.size() >= 2) {
            double mx = 0.0, my = 0.0;
            for (std::size_t i = 0; i < lx.size(); ++i) { mx += lx[i]; my += ly[i]; }
            mx /= static_cast<double>(lx.size());
            my /= static_cast<double>(ly.size());
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < lx.size(); ++i) {
                num += (lx[i] - mx) * (ly[i] - my);
                den += (lx[i] - mx) * (lx[i] - mx);
            }
            std::printf("log-log slope: %s\n", fmt17(num / den).c_str());
        }
        if (!a.out.empty()) write_text_file(a.out, csv);
        return kExitOk;
    }

    TrainingConfig cfg;
    cfg.epsilon = a.epsilon;
    cfg.steps = a.steps;
    cfg.step_size = a.step_size;
    cfg.seed = 1;
    const TrainingRun run = train(syn.arch, cfg, syn.data, syn.theta_exact);
    if (!a.out.empty()) write_text_file(a.out, training_run_csv(run));
    std::printf("threshold: %s\n", fmt17(run.threshold).c_str());
    if (run.crossed_at)
        std::printf("crossed_at: %zu\n", *run.crossed_at);
    else
        std::printf("crossed_at: none\n");
    std::printf("label: %s\n", run.label.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"interp-forge: exact transformer interpolants for finite "
                 "sequence-to-sequence datasets"};
    app.require_subcommand(1);

    GenArgs ga;
    CLI::App* gen = app.add_subcommand("gen-dataset", "Generate a seeded random dataset");
    gen->add_option("--seed", ga.seed, "RNG seed")->capture_default_str();
    gen->add_option("--d", ga.d, "token dimension (>= 2)")->required();
    gen->add_option("--N", ga.N, "number of sequence pairs")->required();
    gen->add_option("--n-max", ga.n_max, "max input tokens per sequence")->required();
    gen->add_option("--m-policy", ga.m_policy, "output-size policy")
        ->check(CLI::IsMember({"fixed", "uniform"}))
        ->capture_default_str();
    gen->add_option("--m-fixed", ga.m_fixed, "output size when --m-policy fixed")
        ->capture_default_str();
    gen->add_option("--out", ga.out, "output dataset path")->required();

    ConstructArgs ca;
    CLI::App* con = app.add_subcommand("construct", "Build an interpolating transformer");
    con->add_option("--mode", ca.mode, "attention flavor")
        ->check(CLI::IsMember({"hardmax", "softmax"}))
        ->required();
    con->add_option("--in", ca.in, "dataset path")->required();
    con->add_option("--out", ca.out, "model output path")->required();
    con->add_option("--report", ca.report, "construction report output path");

    VerifyArgs va;
    CLI::App* ver = app.add_subcommand("verify", "Check a model against a dataset");
    ver->add_option("--model", va.model, "model path")->required();
    ver->add_option("--in", va.in, "dataset path")->required();
    ver->add_option("--tol", va.tol, "per-pair hausdorff tolerance")->capture_default_str();

    SimulateArgs sa;
    CLI::App* sim = app.add_subcommand("simulate", "Run the hardmax token dynamics");
    sim->add_option("--config", sa.config, "dynamics config path")->required();
    sim->add_option("--x0", sa.x0, "initial sequence path")->required();
    sim->add_option("--steps", sa.steps, "max steps (0 = automatic)")->capture_default_str();
    sim->add_option("--out", sa.out, "trajectory CSV output path");

    TrainArgs ta;
    CLI::App* tr = app.add_subcommand("train-demo", "Regularized training demo");
    tr->add_option("--seed", ta.seed, "dataset seed")->capture_default_str();
    tr->add_option("--N", ta.N, "sequence pairs")->capture_default_str();
    tr->add_option("--n", ta.n, "input tokens per pair")->capture_default_str();
    tr->add_option("--d", ta.d, "token dimension (>= 2)")->capture_default_str();
    tr->add_option("--epsilon", ta.epsilon, "regularization weight (> 0)")
        ->capture_default_str();
    tr->add_option("--steps", ta.steps, "gradient steps")->capture_default_str();
    tr->add_option("--step-size", ta.step_size, "gradient step size")->capture_default_str();
    tr->add_option("--out", ta.out, "run CSV output path");
    tr->add_option("--epsilon-sweep", ta.sweep, "comma-separated epsilon list")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInputError;
    }

    try {
        if (gen->parsed()) {
            if (ga.d < 2) {
                std::fprintf(stderr, "input error: --d must be >= 2\n");
                return kExitInputError;
            }
            return run_gen(ga);
        }
        if (con->parsed()) return run_construct(ca);
        if (ver->parsed()) return run_verify(va);
        if (sim->parsed()) return run_simulate(sa);
        if (tr->parsed()) {
            if (ta.d < 2) {
                std::fprintf(stderr, "input error: --d must be >= 2\n");
                return kExitInputError;
            }
            if (ta.sweep.empty() && !(ta.epsilon > 0.0)) {
                std::fprintf(stderr, "input error: --epsilon must be > 0\n");
                return kExitInputError;
            }
            for (double eps : ta.sweep)
                if (!(eps > 0.0)) {
                    std::fprintf(stderr, "input error: --epsilon-sweep values must be > 0\n");
                    return kExitInputError;
                }
            return run_train(ta);
        }
    } catch (const ParseError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitInputError;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitInputError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRunFailure;
    }
    return kExitInputError; // unreachable: require_subcommand(1)
}
