#include "afmbo/search_models.hpp"

#include <cmath>
#include <numbers>

namespace afmbo {

namespace {

double jitter_for(const Matrix& cov)
{
    return 1e-6 * cov.trace() / static_cast<double>(cov.rows());
}

}  // namespace

MultivariateGaussianModel::MultivariateGaussianModel(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance))
{
    const auto d = mean_.size();
    if (d < 1 || covariance_.rows() != d || covariance_.cols() != d)
        throw InvalidArgument("mean and covariance dimensions disagree");
    if (!mean_.allFinite() || !covariance_.allFinite())
        throw InvalidArgument("model parameters must be finite");
    const double scale = std::max(1.0, covariance_.cwiseAbs().maxCoeff());
    if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw InvalidArgument("covariance is not symmetric");

    Eigen::LLT<Matrix> llt(covariance_);
    if (llt.info() != Eigen::Success) {
        const double jitter = jitter_for(covariance_);
        if (!(jitter > 0.0))
            throw InvalidArgument("covariance is not positive definite");
        covariance_.diagonal().array() += jitter;
        llt.compute(covariance_);
        if (llt.info() != Eigen::Success)
            throw InvalidArgument("covariance is not positive definite after jitter");
    }
    chol_ = llt.matrixL();
    const double log_det = 2.0 * chol_.diagonal().array().log().sum();
    log_norm_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det);
}

MultivariateGaussianModel MultivariateGaussianModel::fit_weighted(const Matrix& data, const WeightVector& weights,
                                                                  double shrinkage,
                                                                  const MultivariateGaussianModel* previous)
{
    const auto n = data.rows();
    const auto d = data.cols();
    if (d < 1)
        throw InvalidArgument("data must have at least one column");
    if (weights.size() != n)
        throw InvalidArgument("one weight per data row is required");
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0))
        throw InvalidArgument("shrinkage must lie in [0, 1]");
    if (previous != nullptr && previous->dimension() != d)
        throw InvalidArgument("previous model dimension mismatch");

    // Dividing by the largest weight makes constant rescalings exact.
    const Vector w = weights.values() / weights.values().maxCoeff();
    const double total = w.sum();
    const double ess = total * total / w.squaredNorm();
    if ((w.array() > 0.0).count() < 2)
        throw DegenerateFit("fewer than two points carry weight", ess);

    const Vector mean = (data.transpose() * w) / total;
    const Matrix centered = data.rowwise() - mean.transpose();
    Matrix cov = centered.transpose() * (w.asDiagonal() * centered) / total;
    cov = 0.5 * (cov + cov.transpose());

    if (shrinkage > 0.0) {
        Matrix target = Matrix::Zero(d, d);
        if (previous != nullptr)
            target.diagonal() = previous->covariance().diagonal();
        else
            target.diagonal().setConstant(cov.trace() / static_cast<double>(d));
        cov = (1.0 - shrinkage) * cov + shrinkage * target;
    }

    const double jitter = jitter_for(cov);
    if (!(jitter > 0.0) || !std::isfinite(jitter))
        throw DegenerateFit("weighted covariance has zero trace", ess);
    cov.diagonal().array() += jitter;

    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
        throw DegenerateFit("weighted covariance is not positive definite", ess);
    return MultivariateGaussianModel(mean, std::move(cov));
}

double MultivariateGaussianModel::log_density(const Vector& x) const
{
    if (x.size() != dimension())
        throw InvalidArgument("log_density: dimension mismatch");
    const Vector v = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return log_norm_ - 0.5 * v.squaredNorm();
}

Vector MultivariateGaussianModel::log_density_rows(const Matrix& points) const
{
    if (points.cols() != dimension())
        throw InvalidArgument("log_density_rows: dimension mismatch");
    Matrix centered = (points.rowwise() - mean_.transpose()).transpose();
    chol_.triangularView<Eigen::Lower>().solveInPlace(centered);
    return (log_norm_ - 0.5 * centered.colwise().squaredNorm().array()).transpose();
}

Matrix MultivariateGaussianModel::sample(Eigen::Index m, RngStream& rng) const
{
    if (m < 1)
        throw InvalidArgument("sample count must be positive");
    const auto d = dimension();
    Matrix z(m, d);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            z(i, j) = rng.normal();
    Matrix x = z * chol_.transpose();
    x.rowwise() += mean_.transpose();
    return x;
}

nlohmann::json MultivariateGaussianModel::to_json() const
{
    nlohmann::json j;
    j["mean"] = std::vector<double>(mean_.data(), mean_.data() + mean_.size());
    std::vector<double> cov;
    cov.reserve(static_cast<std::size_t>(covariance_.size()));
    for (Eigen::Index r = 0; r < covariance_.rows(); ++r)
        for (Eigen::Index c = 0; c < covariance_.cols(); ++c)
            cov.push_back(covariance_(r, c));
    j["covariance"] = cov;
    return j;
}

MultivariateGaussianModel MultivariateGaussianModel::from_json(const nlohmann::json& j)
{
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto cov = j.at("covariance").get<std::vector<double>>();
    const auto d = static_cast<Eigen::Index>(mean.size());
    if (static_cast<Eigen::Index>(cov.size()) != d * d)
        throw FormatError("covariance must hold d*d entries in row-major order");
    Matrix c(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index k = 0; k < d; ++k)
            c(r, k) = cov[static_cast<std::size_t>(r * d + k)];
    return MultivariateGaussianModel(Eigen::Map<const Vector>(mean.data(), d), c);
}

std::uint64_t MultivariateGaussianModel::hash() const
{
    auto h = hash_doubles({mean_.data(), static_cast<std::size_t>(mean_.size())});
    return hash_doubles({covariance_.data(), static_cast<std::size_t>(covariance_.size())}, h);
}

// ---------------------------------------------------------------------------

Vector trapezoid_weights(const Vector& grid)
{
    const auto g = grid.size();
    Vector t = Vector::Zero(g);
    for (Eigen::Index i = 0; i + 1 < g; ++i) {
        const double h = 0.5 * (grid[i + 1] - grid[i]);
        t[i] += h;
        t[i + 1] += h;
    }
    return t;
}

Vector linspace(double lo, double hi, Eigen::Index nodes)
{
    if (nodes < 2 || !(hi > lo))
        throw InvalidArgument("linspace needs hi > lo and at least two nodes");
    Vector g(nodes);
    const double step = (hi - lo) / static_cast<double>(nodes - 1);
    for (Eigen::Index i = 0; i < nodes; ++i)
        g[i] = lo + step * static_cast<double>(i);
    g[nodes - 1] = hi;
    return g;
}

Grid1DModel Grid1DModel::from_unnormalized(Vector grid, Vector log_values)
{
    if (grid.size() < 64)
        throw InvalidArgument("grid needs at least 64 nodes");
    if (log_values.size() != grid.size())
        throw InvalidArgument("one log value per grid node is required");
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i]) || (i > 0 && !(grid[i] > grid[i - 1])))
            throw InvalidArgument("grid must be finite and strictly increasing");
        if (std::isnan(log_values[i]) || log_values[i] == kInf)
            throw InvalidArgument("log values must be finite or -inf");
    }

    Grid1DModel model;
    model.trapezoid_ = trapezoid_weights(grid);
    const Vector terms = log_values.array() + model.trapezoid_.array().log();
    const double log_z = log_sum_exp(terms);
    if (log_z == -kInf)
        throw EmptyDistribution("density is zero on every grid node");
    model.grid_ = std::move(grid);
    model.log_density_ = log_values.array() - log_z;
    return model;
}

double Grid1DModel::expectation(const Vector& values_on_grid) const
{
    if (values_on_grid.size() != grid_.size())
        throw InvalidArgument("values must be aligned with the grid");
    double s = 0.0;
    for (Eigen::Index i = 0; i < grid_.size(); ++i) {
        if (log_density_[i] == -kInf)
            continue;
        s += trapezoid_[i] * std::exp(log_density_[i]) * values_on_grid[i];
    }
    return s;
}

double Grid1DModel::mode() const
{
    Eigen::Index best = 0;
    log_density_.maxCoeff(&best);
    return grid_[best];
}

nlohmann::json Grid1DModel::to_json() const
{
    nlohmann::json j;
    j["grid"] = std::vector<double>(grid_.data(), grid_.data() + grid_.size());
    std::vector<double> ld(log_density_.data(), log_density_.data() + log_density_.size());
    // JSON has no -inf; null marks an empty node.
    nlohmann::json arr = nlohmann::json::array();
    for (double v : ld)
        arr.push_back(v == -kInf ? nlohmann::json(nullptr) : nlohmann::json(v));
    j["log_density"] = arr;
    return j;
}

}  // namespace afmbo
