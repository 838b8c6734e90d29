#pragma once

#include "iforge/model.hpp"
#include "iforge/types.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace iforge {

// The regularized-training demo acts on one fixed architecture: a single
// block, softmax attention at temperature 1, dense V and A, FF width dp.
// Trainable scalars are flattened in the fixed order
//   [eta, W (column-major), U (row-major), b, rho, V (row-major), A (row-major)].
struct TrainArch {
    int d = 0;
    int dp = 0;

    std::size_t theta_dim() const {
        const std::size_t dd = static_cast<std::size_t>(d);
        const std::size_t pp = static_cast<std::size_t>(dp);
        return 1 + dd * pp + pp * dd + pp + 1 + dd * dd + dd * dd;
    }
};

// Bijection between the flattened parameter vector and the one-block model.
Transformer theta_to_model(const TrainArch& arch, const Vec& theta);
Vec model_to_theta(const TrainArch& arch, const Transformer& model);

// f(X, {y}) = max over tokens x of ||x - y||^2: the squared Hausdorff
// distance to a singleton. The output must have exactly one token.
double loss_f(const Sequence& X, const Sequence& y_singleton);

// kappa(theta) = ||theta||^2 in the flattened parameter space.
double kappa(const Vec& theta);

// F_eps(theta) = (1/N) sum_j f(T_theta(X^j), Y^j) + eps * kappa(theta).
// Every output of `ds` must be a singleton; eps must be positive.
double objective(const TrainArch& arch, const Vec& theta, const Dataset& ds, double epsilon);

enum class GradMode { Analytic, FiniteDifference };

// Gradient of the objective. Finite differences are central with
// per-coordinate step h * (1 + |theta_i|), coordinates evaluated in parallel
// under the process thread budget; a non-finite probe raises TrainingError.
// The analytic mode backpropagates through the argmax token of each sequence
// (the pointwise max is differentiable wherever the argmax is unique) and
// takes the zero branch at exact ReLU kinks.
Vec gradient(const TrainArch& arch, const Vec& theta, const Dataset& ds, double epsilon,
             GradMode mode = GradMode::Analytic, double h = 1e-5);

struct Synthetic {
    TrainArch arch;
    Vec theta_exact;
    Dataset data;
    double kappa_exact = 0.0;
};

// Plants a collapsing one-block model (rho = 0, A = 0: softmax weights are
// uniform, so every token maps to the same image point) with a generic FF in
// front, on seeded standard-normal inputs. Each input sequence is labeled
// with its planted single-point image, so theta_exact attains data fit
// exactly 0 by construction.
Synthetic make_synthetic(std::uint64_t seed, std::size_t N, std::size_t n, int d);

struct TrainingConfig {
    double epsilon = 1e-3;
    std::size_t steps = 5000;
    double step_size = 0.02;
    std::uint64_t seed = 0;
    GradMode grad_mode = GradMode::Analytic;
    double fd_h = 1e-5;
    // Starting point; empty selects a seeded random initialization.
    std::optional<Vec> init;
};

struct TrainingRun {
    std::vector<double> loss;       // F_eps(theta_k) for k = 0..steps
    std::vector<double> data_fit;   // mean data-fit term at theta_k
    std::vector<double> kappa_hist; // kappa(theta_k)
    double threshold = 0.0;         // eps * kappa(theta_exact)
    // First k with loss[k] <= threshold. Reaching the threshold certifies the
    // run found a value no worse than the known upper bound on the global
    // minimum; a run that never reaches it has provably not found a global
    // minimizer.
    std::optional<std::size_t> crossed_at;
    std::string label; // "crossed-global-bound" or "local-or-insufficient"
};

// Gradient descent with momentum 0.9 from cfg.init (or a seeded random
// start). Histories cover every visited iterate; TrainingError when the
// objective exceeds 1e12 or turns non-finite.
TrainingRun train(const TrainArch& arch, const TrainingConfig& cfg, const Dataset& ds,
                  const Vec& theta_exact);

// CSV export: header step,F_eps,data_fit,kappa; floats printed with %.17g.
std::string training_run_csv(const TrainingRun& run);

} // namespace iforge
