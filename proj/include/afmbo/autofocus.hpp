#pragma once

// Importance weighting of the training data toward the current search
// model, its variance controls and diagnostics, and the oracle retraining
// step.

#include <optional>

#include "afmbo/core.hpp"
#include "afmbo/oracles.hpp"
#include "afmbo/search_models.hpp"

namespace afmbo {

struct AutofocusConfig {
    double flatten_alpha = 1.0;
    bool self_normalize = false;
    /// Retrain only when the ESS of the training weights reaches this; 0 disables the gate.
    double min_effective_sample_size = 0.0;
    /// Extension: cap on raw importance weights. Off unless set.
    std::optional<double> weight_clip;

    void validate() const;
};

struct WeightDiagnostics {
    double effective_sample_size = 0.0;
    double renyi2_plugin = 0.0;
    double max_weight_share = 0.0;
};

/// log_search - log_training elementwise, clipped at log(clip) when set.
Vector importance_log_weights(const Vector& log_search, const Vector& log_training,
                              std::optional<double> clip = std::nullopt);

/// exp(log_search - log_training) elementwise, clipped when `clip` is set.
WeightVector importance_weights(const Vector& log_search, const Vector& log_training,
                                std::optional<double> clip = std::nullopt);
WeightVector importance_weights(const MultivariateGaussianModel& search_model,
                                const MultivariateGaussianModel& training_model, const Matrix& points,
                                std::optional<double> clip = std::nullopt);

WeightVector flatten_weights(const WeightVector& w, double alpha);
/// n * w / sum(w).
WeightVector self_normalize(const WeightVector& w);
double effective_sample_size(const WeightVector& w);
/// (1/n) sum w_i^2 of raw density ratios.
double renyi2_plugin(const WeightVector& w);
double max_weight_share(const WeightVector& w);
WeightDiagnostics diagnose(const WeightVector& raw);
/// Diagnostics from log ratios; stays finite when the ratios under- or overflow.
WeightDiagnostics diagnose_log(const Vector& log_raw);

/// Confidence half-width L * sqrt(d2 / (n * delta)) on an importance-sampled
/// loss bounded by L.
double chebyshev_loss_bound(double loss_bound, double delta, double n, double d2);

/// Variance of p0(x|S)/p0(x) under p0: 1/P0(S) - 1.
double cbas_weight_variance(double p0_of_s);
/// n * P0(S).
double cbas_population_ess(double n, double p0_of_s);

/// Flattening followed by optional self-normalization.
WeightVector training_weights(const WeightVector& raw, const AutofocusConfig& config);
/// Same from log ratios. Self-normalization happens in the log domain.
WeightVector training_weights_from_log(const Vector& log_raw, const AutofocusConfig& config);

struct AutofocusResult {
    OraclePtr oracle;
    WeightDiagnostics diagnostics;        // from raw weights
    double training_ess = 0.0;            // of the weights actually used
    bool retrained = false;
};

/// Reweights the training data toward `search_model`, gates on ESS and
/// retrains. Returns the input oracle untouched when the gate is closed.
AutofocusResult autofocus_step(const OraclePtr& oracle, const LabeledDataset& data,
                               const MultivariateGaussianModel& search_model,
                               const MultivariateGaussianModel& training_model, const AutofocusConfig& config);

/// Same step with precomputed log density ratios (for non-parametric
/// search models). Clipping, if configured, must already be applied.
AutofocusResult autofocus_step(const OraclePtr& oracle, const LabeledDataset& data, const Vector& log_raw,
                               const AutofocusConfig& config);

}  // namespace afmbo
