#pragma once

// Parametric distributions over the design space: a full-covariance normal
// for the high-dimensional runs and a normalized density on a 1-D grid.

#include <optional>

#include <nlohmann/json.hpp>

#include "afmbo/core.hpp"

namespace afmbo {

class MultivariateGaussianModel {
public:
    /// Standard normal in one dimension.
    MultivariateGaussianModel() : MultivariateGaussianModel(Vector::Zero(1), Matrix::Identity(1, 1)) {}
    /// Factorizes `covariance`; if the factorization fails, retries once
    /// with 1e-6 * trace / d added to the diagonal.
    MultivariateGaussianModel(Vector mean, Matrix covariance);

    /// Weighted maximum likelihood. `shrinkage` blends the weighted scatter
    /// toward diag(previous covariance) when `previous` is given, otherwise
    /// toward (trace / d) * I. Weights are normalized internally.
    static MultivariateGaussianModel fit_weighted(const Matrix& data, const WeightVector& weights,
                                                  double shrinkage = 0.0,
                                                  const MultivariateGaussianModel* previous = nullptr);

    Eigen::Index dimension() const { return mean_.size(); }
    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return covariance_; }
    /// Lower Cholesky factor L with covariance = L L^T.
    const Matrix& cholesky() const { return chol_; }

    double log_density(const Vector& x) const;
    /// Row-wise log density of an m x d matrix.
    Vector log_density_rows(const Matrix& points) const;

    /// m i.i.d. rows mean + L z.
    Matrix sample(Eigen::Index m, RngStream& rng) const;

    nlohmann::json to_json() const;
    static MultivariateGaussianModel from_json(const nlohmann::json& j);
    std::uint64_t hash() const;

private:
    Vector mean_;
    Matrix covariance_;
    Matrix chol_;
    double log_norm_ = 0.0;  // -0.5 * (d log 2pi + log det)
};

/// Density on a strictly increasing grid, stored as log values that
/// integrate to one under the trapezoid rule.
class Grid1DModel {
public:
    static Grid1DModel from_unnormalized(Vector grid, Vector log_values);

    const Vector& grid() const { return grid_; }
    const Vector& log_density() const { return log_density_; }
    Vector density() const { return log_density_.array().exp(); }
    /// Trapezoid rule weights for this grid.
    const Vector& quadrature_weights() const { return trapezoid_; }

    /// Trapezoid integral of density * values.
    double expectation(const Vector& values_on_grid) const;
    /// Grid node of maximum density (first one on ties).
    double mode() const;

    nlohmann::json to_json() const;

private:
    Vector grid_;
    Vector log_density_;
    Vector trapezoid_;
};

Vector trapezoid_weights(const Vector& grid);
Vector linspace(double lo, double hi, Eigen::Index nodes);

}  // namespace afmbo
