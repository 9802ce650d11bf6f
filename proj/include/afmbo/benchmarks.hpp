#pragma once

// Ground-truth problems: the one-dimensional two-bump toy solved by
// quadrature, a seeded random-Fourier stand-in for the superconductor
// property surface, and ingestion of the real superconductivity table.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afmbo/autofocus.hpp"
#include "afmbo/core.hpp"
#include "afmbo/oracles.hpp"
#include "afmbo/search_models.hpp"

namespace afmbo {

// ---------------------------------------------------------------------------
// Toy problem

inline constexpr double kToyDomainLo = 0.0;
inline constexpr double kToyDomainHi = 10.0;
inline constexpr double kToyTrainMean = 3.0;

/// pdf N(5, 1) + pdf N(7, 0.25), variances as given.
double toy_ground_truth(double x);

/// Which oracle's max_x mu(x) defines the goal set S when scoring.
enum class ToyScoring {
    InitialOracle,   // shared by both arms
    OwnFinalOracle,  // the oracle behind each arm's final search model
};

struct ToyProblemConfig {
    double sigma0 = 2.0;
    double sigma_eps = 0.0;
    int n_train = 50;
    int grid_nodes = 2001;
    int iterations = 100;
    ToyScoring scoring = ToyScoring::InitialOracle;
    KernelRidgeParams oracle;

    void validate() const;
};

struct ToyIteration {
    int iteration = 0;
    double gamma = 0.0;
    double oracle_noise_variance = 0.0;
    std::optional<WeightDiagnostics> diagnostics;  // autofocused arm only
};

struct ToyResult {
    Grid1DModel final_model;
    /// E over the final search model of P(y >= threshold | x) under the ground truth.
    double objective = 0.0;
    double threshold = 0.0;
    std::vector<ToyIteration> iterations;
    std::string termination = "completed";
};

/// Test hook: replaces the trained oracle with a noiseless mean function.
using ToyOracleOverride = std::function<double(double)>;

/// Draws the training set from `rng` and runs CbAS on the grid for
/// config.iterations steps, with the t-th percentile of the oracle mean over
/// the grid as threshold at step t.
ToyResult run_toy_cbas(const ToyProblemConfig& config, bool autofocus, RngStream rng,
                       const ToyOracleOverride& oracle_override = {});

/// Same with a fixed training set, so AF and non-AF arms can share it.
ToyResult run_toy_cbas(const ToyProblemConfig& config, bool autofocus, const LabeledDataset& data,
                       const ToyOracleOverride& oracle_override = {});

LabeledDataset toy_training_data(const ToyProblemConfig& config, RngStream& rng);

/// E_p[P(y >= threshold | x)] with y ~ N(f(x), sigma_eps^2) by the model's quadrature.
double toy_objective(const Grid1DModel& model, double threshold, double sigma_eps);

// ---------------------------------------------------------------------------
// Synthetic high-dimensional problem

/// E[y|x] = scale * sum_k a_k cos(omega_k . x + b_k) + offset.
class GroundTruthModel {
public:
    GroundTruthModel(Matrix omega, Vector amplitudes, Vector phases, double scale, double offset,
                     double label_noise_sd);

    Eigen::Index dimension() const { return omega_.cols(); }
    double expectation(const Vector& x) const;
    Vector expectation_rows(const Matrix& points) const;
    /// expectation + N(0, label_noise_sd^2) per row.
    Vector sample_labels(const Matrix& points, RngStream& rng) const;
    double label_noise_sd() const { return noise_sd_; }
    double scale() const { return scale_; }
    double offset() const { return offset_; }

    nlohmann::json to_json() const;

private:
    Matrix omega_;  // K x d
    Vector amplitudes_;
    Vector phases_;
    double scale_;
    double offset_;
    double noise_sd_;
};

struct SyntheticHighDimConfig {
    int dimension = 16;
    int features = 64;
    double length_scale = 4.0;
    double output_max = 140.0;
    int probe_count = 100000;
    double percentile = 80.0;
    int n_train = 2000;
    double label_noise_sd = 1.0;

    void validate() const;
};

nlohmann::json to_json(const SyntheticHighDimConfig& c);
/// Rejects unknown keys; missing keys keep their defaults.
SyntheticHighDimConfig synthetic_config_from_json(const nlohmann::json& j);

/// Seeded random Fourier function, rescaled affinely so its range over
/// probe_count standard-normal probes is [0, output_max].
GroundTruthModel synthetic_ground_truth(const SyntheticHighDimConfig& config, RngStream rng);

struct TrainingProblem {
    MultivariateGaussianModel training_model;
    LabeledDataset data;
};

/// Fits p0 by MLE to the part of a 2 n_train standard-normal cloud whose
/// expectation is at or below the configured percentile, then draws and
/// labels n_train points from p0.
TrainingProblem build_training_distribution(const GroundTruthModel& gt, const SyntheticHighDimConfig& config,
                                            RngStream rng);

// ---------------------------------------------------------------------------

inline constexpr int kSuperconductivityColumns = 82;

/// Header row, then 81 numeric features and the critical temperature per
/// row. Features are standardized.
LabeledDataset ingest_superconductivity_csv(const std::string& path);

}  // namespace afmbo
