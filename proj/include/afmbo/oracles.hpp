#pragma once

// Probabilistic regression oracles p(y|x) = N(mu(x), sigma^2(x)) with
// weighted maximum-likelihood (re)training.

#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "afmbo/core.hpp"

namespace afmbo {

class Oracle;
using OraclePtr = std::shared_ptr<const Oracle>;

/// Fitted oracles are immutable. `retrain` produces a new oracle from the
/// same training recipe (hyperparameters and seeds) with new weights, so a
/// retrain with unit weights reproduces the original fit bit for bit.
class Oracle {
public:
    virtual ~Oracle() = default;

    virtual Eigen::Index dimension() const = 0;
    virtual GaussianPrediction predict(const Vector& x) const = 0;
    /// Row-wise predictions for an m x d matrix.
    virtual void predict_rows(const Matrix& points, Vector& means, Vector& variances) const;
    virtual OraclePtr retrain(const LabeledDataset& data, const WeightVector& weights) const = 0;
    virtual nlohmann::json to_json() const = 0;

    /// Hash of the serialized parameters.
    std::uint64_t parameter_hash() const;
};

// ---------------------------------------------------------------------------
// Kernel ridge regression with an RBF kernel

struct KernelRidgeParams {
    double ridge = 1.0;                 // lambda
    double length_scale_inverse = 1.0;  // RBF gamma in exp(-gamma |x - x'|^2)
    int cv_folds = 4;
    std::uint64_t fold_seed = 0;
};

class KernelRidgeOracle final : public Oracle {
public:
    KernelRidgeOracle(Matrix support_points, Vector dual_coefficients, KernelRidgeParams params,
                      double noise_variance);

    /// Weighted mean fit followed by importance-weighted CV for the noise
    /// variance, folds drawn from `params.fold_seed`.
    static std::shared_ptr<const KernelRidgeOracle> train(const LabeledDataset& data, const WeightVector& weights,
                                                          const KernelRidgeParams& params);

    Eigen::Index dimension() const override { return support_.cols(); }
    GaussianPrediction predict(const Vector& x) const override;
    void predict_rows(const Matrix& points, Vector& means, Vector& variances) const override;
    OraclePtr retrain(const LabeledDataset& data, const WeightVector& weights) const override;
    nlohmann::json to_json() const override;

    double predict_mean(const Vector& x) const;
    const Matrix& support_points() const { return support_; }
    const Vector& dual_coefficients() const { return dual_; }
    double noise_variance() const { return noise_variance_; }
    const KernelRidgeParams& params() const { return params_; }

private:
    Matrix support_;
    Vector dual_;
    KernelRidgeParams params_;
    double noise_variance_;
};

/// Minimizes sum_i w_i (f(x_i) - y_i)^2 + ridge |f|^2 in the RBF space.
/// Weights are rescaled to mean one; points with rescaled weight <= 1e-12
/// are dropped. Noise variance of the returned oracle is `noise_variance`.
KernelRidgeOracle krr_fit_weighted(const LabeledDataset& data, const WeightVector& weights, double ridge,
                                   double length_scale_inverse, double noise_variance = 1.0);

/// Weighted squared CV error / total weight over `folds` contiguous blocks
/// of a seeded shuffle, floored at 1e-8.
double krr_noise_variance_iwcv(const LabeledDataset& data, const WeightVector& weights, int folds, double ridge,
                               double length_scale_inverse, RngStream& rng);

// ---------------------------------------------------------------------------
// Ensemble of mean/variance networks

struct MlpConfig {
    std::vector<int> hidden{64, 64, 16};
    int ensemble_size = 3;
    double learning_rate = 5e-4;
    int batch_size = 64;
    int max_epochs = 200;
    int patience = 10;
    double validation_fraction = 0.1;
};

nlohmann::json to_json(const MlpConfig& c);
MlpConfig mlp_config_from_json(const nlohmann::json& j);

/// Fully connected network with elu hidden units and two linear outputs
/// (mean, raw variance). Variance is softplus(raw) + 1e-6.
class MlpNetwork {
public:
    MlpNetwork() = default;
    MlpNetwork(Eigen::Index inputs, const std::vector<int>& hidden);

    void glorot_init(RngStream& rng);

    /// Column-major batch: `x` is d x B. Returns 2 x B of (mean, variance).
    Matrix predict(const Matrix& x) const;

    /// Mean over the batch of w_i * [0.5 log s2_i + (y_i - m_i)^2 / (2 s2_i)].
    double weighted_nll(const Matrix& x, const Vector& y, const Vector& w) const;
    /// Same loss; accumulates its gradient into `grad` (same shape, zeroed here).
    double weighted_nll_gradient(const Matrix& x, const Vector& y, const Vector& w, MlpNetwork& grad) const;

    Eigen::Index parameter_count() const;
    Vector parameters() const;
    void set_parameters(const Vector& p);

    const std::vector<Matrix>& weights() const { return w_; }
    const std::vector<Vector>& biases() const { return b_; }
    std::vector<Matrix>& weights() { return w_; }
    std::vector<Vector>& biases() { return b_; }

    nlohmann::json to_json() const;
    static MlpNetwork from_json(const nlohmann::json& j);

private:
    std::vector<Matrix> w_;  // layer l maps size(l) -> size(l+1); shape out x in
    std::vector<Vector> b_;
};

class MlpEnsembleOracle final : public Oracle {
public:
    /// Trains `config.ensemble_size` members with seeds derived from `seed`.
    /// Labels are standardized internally with their unweighted mean and sd.
    static std::shared_ptr<const MlpEnsembleOracle> train(const LabeledDataset& data, const WeightVector& weights,
                                                          const MlpConfig& config, std::uint64_t seed);

    MlpEnsembleOracle(std::vector<MlpNetwork> members, double label_mean, double label_scale, MlpConfig config,
                      std::uint64_t seed);

    Eigen::Index dimension() const override;
    GaussianPrediction predict(const Vector& x) const override;
    void predict_rows(const Matrix& points, Vector& means, Vector& variances) const override;
    OraclePtr retrain(const LabeledDataset& data, const WeightVector& weights) const override;
    nlohmann::json to_json() const override;

    const std::vector<MlpNetwork>& members() const { return members_; }
    /// Per-member predictions in label units, m x E each.
    void member_predictions(const Matrix& points, Matrix& means, Matrix& variances) const;

private:
    std::vector<MlpNetwork> members_;
    double label_mean_;
    double label_scale_;
    MlpConfig config_;
    std::uint64_t seed_;
};

/// One member trained by Adam on the weighted NLL with early stopping on
/// the weighted validation NLL. Exposed for testing.
MlpNetwork train_member(const Matrix& features, const Vector& labels, const Vector& weights,
                        const MlpConfig& config, RngStream rng, int member_index);

/// Moment-matched mixture of member normals.
GaussianPrediction combine_ensemble(std::span<const GaussianPrediction> members);

}  // namespace afmbo
