#pragma once

// Estimation-of-distribution algorithms over multivariate normal search
// models, with optional oracle autofocusing after every search-model update.

#include <optional>
#include <string>
#include <vector>

#include "afmbo/autofocus.hpp"
#include "afmbo/core.hpp"
#include "afmbo/oracles.hpp"
#include "afmbo/search_models.hpp"

namespace afmbo {

enum class EdaMethod { CbAS, DbAS, RWR, FB, CEM_PI, CMA_ES };

std::string to_string(EdaMethod m);
/// Case-insensitive.
EdaMethod parse_method(const std::string& name);

struct EdaConfig {
    EdaMethod method = EdaMethod::CbAS;
    int iterations = 50;
    int samples_per_iter = 2000;
    double percentile = 90.0;
    double rwr_gamma = 0.01;
    double cmaes_step_size = 0.01;
    /// Blend of the weighted scatter toward the previous diagonal.
    double shrinkage = 0.0;
    /// Disabled means a fixed oracle.
    std::optional<AutofocusConfig> autofocus;

    void validate() const;
};

struct IterationRecord {
    int iteration = 0;
    std::uint64_t sample_seed = 0;
    std::uint64_t sample_stream = 0;
    Matrix samples;
    /// Oracle used to weight this iteration's samples.
    Vector oracle_means;
    Vector oracle_variances;
    /// Oracle in force at the end of the iteration (after any retraining).
    Vector eval_means;
    /// Weights handed to the refit, up to a positive constant.
    Vector eda_weights;
    double gamma = std::numeric_limits<double>::quiet_NaN();
    MultivariateGaussianModel search_model;
    std::optional<WeightDiagnostics> diagnostics;
    double training_ess = std::numeric_limits<double>::quiet_NaN();
    bool retrained = false;
    std::string event;
};

struct Trajectory {
    EdaMethod method = EdaMethod::CbAS;
    bool autofocus = false;
    /// Training distribution p0 (the iteration-0 search model).
    MultivariateGaussianModel initial_model;
    /// Distribution iteration 1 samples from; differs from p0 only for CMA-ES.
    MultivariateGaussianModel first_sampling_model;
    std::uint64_t initial_oracle_hash = 0;
    std::vector<IterationRecord> records;
    std::string termination = "completed";
    OraclePtr final_oracle;

    /// Hash over samples, oracle predictions, EDA weights, thresholds and
    /// search-model parameters; diagnostics are excluded.
    std::uint64_t search_hash() const;
    /// Model the samples of iteration t (1-based) were drawn from.
    const MultivariateGaussianModel& sampling_model(int iteration) const;
};

// ---------------------------------------------------------------------------
// Method-specific weights

/// max(previous, Q-th percentile of the oracle means).
double anneal_threshold(double previous_gamma, const Vector& oracle_means, double q);

/// log of (p0 / p_theta) * P(y >= gamma).
Vector cbas_log_weights(const Vector& log_p0, const Vector& log_ptheta, const Vector& means, const Vector& variances,
                        double gamma);
WeightVector cbas_weights(const Matrix& samples, const Oracle& oracle, const MultivariateGaussianModel& training_model,
                          const MultivariateGaussianModel& search_model_prev, double gamma);

WeightVector dbas_weights(const Vector& means, const Vector& variances, double gamma);
WeightVector dbas_weights(const Matrix& samples, const Oracle& oracle, double gamma);

/// softmax(gamma * means).
WeightVector rwr_weights(const Vector& means, double gamma);

struct FbSelection {
    Matrix refit_set;  // also the next pool
    Vector refit_means;
    Eigen::Index new_selected = 0;
};

/// New samples strictly above the Q-th percentile of their oracle means
/// join the pool; the refit set is the top `capacity` of that union by
/// current-oracle mean.
FbSelection fb_update(const Matrix& pool, const Matrix& new_samples, const Vector& new_means, const Oracle& oracle,
                      double q, Eigen::Index capacity);

struct CemPiSelection {
    WeightVector weights;
    double gamma;
    bool fallback = false;
};

/// Indicator of P(y >= y_max) >= gamma_t with gamma_t annealed by max.
/// If nothing clears the annealed threshold the iteration's own percentile
/// is used instead.
CemPiSelection cempi_weights(const Vector& pi, double previous_gamma, double q);
Vector probability_of_improvement(const Vector& means, const Vector& variances, double y_max);

// ---------------------------------------------------------------------------
// CMA-ES

struct CmaesState {
    Vector mean;
    double sigma = 0.01;
    Matrix cov;
    Vector path_sigma;
    Vector path_cov;
    long generation = 0;
    std::string event;

    static CmaesState initial(const Vector& mean, double sigma);
    MultivariateGaussianModel model() const;
};

/// One rank-based update maximizing `fitness` over `samples`, which must be
/// drawn from state.model(). Default constants for the dimension and
/// population size.
CmaesState cmaes_step(const CmaesState& state, const Matrix& samples, const Vector& fitness);

// ---------------------------------------------------------------------------

/// Runs the configured EDA. `oracle` must already be trained on `data` with
/// equal weights and `training_model` fit to its features. Iteration t
/// samples from `rng.substream(t)`.
Trajectory run_eda(const EdaConfig& config, const LabeledDataset& data, const OraclePtr& oracle,
                   const MultivariateGaussianModel& training_model, const RngStream& rng);

}  // namespace afmbo
