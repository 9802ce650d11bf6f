#include "afmbo/benchmarks.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace afmbo {

namespace {

double normal_pdf(double x, double mean, double variance)
{
    const double z = x - mean;
    return std::exp(-0.5 * z * z / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

/// log P(y >= threshold) for y ~ N(mean, variance), with variance 0 as a point mass.
double log_exceedance(double threshold, double mean, double variance)
{
    if (variance == 0.0)
        return mean >= threshold ? 0.0 : -kInf;
    return log_normal_survival(threshold, {mean, variance});
}

}  // namespace

double toy_ground_truth(double x) { return normal_pdf(x, 5.0, 1.0) + normal_pdf(x, 7.0, 0.25); }

void ToyProblemConfig::validate() const
{
    if (!(sigma0 > 0.0))
        throw InvalidArgument("sigma0 must be positive");
    if (!(sigma_eps >= 0.0) || !std::isfinite(sigma_eps))
        throw InvalidArgument("sigma_eps must be nonnegative");
    if (n_train < 4)
        throw InvalidArgument("n_train must be at least 4");
    if (grid_nodes < 64)
        throw InvalidArgument("grid_nodes must be at least 64");
    if (iterations < 1 || iterations > 100)
        throw InvalidArgument("iterations must lie in [1, 100]");
}

LabeledDataset toy_training_data(const ToyProblemConfig& config, RngStream& rng)
{
    config.validate();
    Matrix x(config.n_train, 1);
    Vector y(config.n_train);
    for (int i = 0; i < config.n_train; ++i)
        x(i, 0) = kToyTrainMean + config.sigma0 * rng.normal();
    for (int i = 0; i < config.n_train; ++i)
        y[i] = toy_ground_truth(x(i, 0)) + config.sigma_eps * rng.normal();
    return {std::move(x), std::move(y)};
}

double toy_objective(const Grid1DModel& model, double threshold, double sigma_eps)
{
    const Vector& g = model.grid();
    Vector p(g.size());
    const double var = sigma_eps * sigma_eps;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        p[i] = std::exp(log_exceedance(threshold, toy_ground_truth(g[i]), var));
    return model.expectation(p);
}

ToyResult run_toy_cbas(const ToyProblemConfig& config, bool autofocus, RngStream rng,
                       const ToyOracleOverride& oracle_override)
{
    const LabeledDataset data = toy_training_data(config, rng);
    return run_toy_cbas(config, autofocus, data, oracle_override);
}

ToyResult run_toy_cbas(const ToyProblemConfig& config, bool autofocus, const LabeledDataset& data,
                       const ToyOracleOverride& oracle_override)
{
    config.validate();
    if (data.dimension() != 1)
        throw InvalidArgument("toy data must be one-dimensional");

    const Vector grid = linspace(kToyDomainLo, kToyDomainHi, config.grid_nodes);
    const Matrix grid_points = grid;
    const double var0 = config.sigma0 * config.sigma0;
    Vector log_p0(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        log_p0[i] = normal_log_pdf(grid[i], kToyTrainMean, var0);
    const Vector log_trap = trapezoid_weights(grid).array().log();

    OraclePtr oracle;
    if (!oracle_override)
        oracle = KernelRidgeOracle::train(data, WeightVector::ones(data.size()), config.oracle);

    // Mean and variance of the current oracle at arbitrary points.
    auto predict = [&](const Matrix& pts, Vector& mean, Vector& var) {
        if (oracle_override) {
            mean.resize(pts.rows());
            for (Eigen::Index i = 0; i < pts.rows(); ++i)
                mean[i] = oracle_override(pts(i, 0));
            var = Vector::Zero(pts.rows());
        } else {
            oracle->predict_rows(pts, mean, var);
        }
    };

    Vector mean, var;
    predict(grid_points, mean, var);
    const double initial_max = mean.maxCoeff();

    ToyResult result;
    AutofocusConfig af;  // alpha 1, no gating
    for (int t = 1; t <= config.iterations; ++t) {
        if (t > 1)
            predict(grid_points, mean, var);
        ToyIteration it;
        it.iteration = t;
        it.gamma = percentile(mean, static_cast<double>(t));
        it.oracle_noise_variance = var.size() > 0 ? var[0] : 0.0;

        Vector log_values(grid.size());
        for (Eigen::Index i = 0; i < grid.size(); ++i)
            log_values[i] = log_exceedance(it.gamma, mean[i], var[i]) + log_p0[i];
        try {
            result.final_model = Grid1DModel::from_unnormalized(grid, log_values);
        } catch (const EmptyDistribution& e) {
            result.termination = "iteration " + std::to_string(t) + ": " + e.what();
            break;
        }

        // Retraining after the last step would not affect the result.
        if (autofocus && !oracle_override && t < config.iterations) {
            const double log_z = log_sum_exp(Vector(log_values + log_trap));
            Vector data_mean, data_var;
            oracle->predict_rows(data.features(), data_mean, data_var);
            Vector log_w(data.size());
            for (Eigen::Index i = 0; i < data.size(); ++i) {
                const double x = data.features()(i, 0);
                log_w[i] = (x < kToyDomainLo || x > kToyDomainHi)
                               ? -kInf
                               : log_exceedance(it.gamma, data_mean[i], data_var[i]) - log_z;
            }
            try {
                auto step = autofocus_step(oracle, data, log_w, af);
                it.diagnostics = step.diagnostics;
                oracle = step.oracle;
            } catch (const std::exception& e) {
                result.iterations.push_back(it);
                result.termination = "iteration " + std::to_string(t) + ": oracle fit failed: " + e.what();
                break;
            }
        }
        result.iterations.push_back(it);
    }

    // `mean` holds the last oracle used, which is the final one since no
    // retraining follows the last step.
    result.threshold = config.scoring == ToyScoring::InitialOracle ? initial_max : mean.maxCoeff();
    result.objective = toy_objective(result.final_model, result.threshold, config.sigma_eps);
    return result;
}

// ---------------------------------------------------------------------------

GroundTruthModel::GroundTruthModel(Matrix omega, Vector amplitudes, Vector phases, double scale, double offset,
                                   double label_noise_sd)
    : omega_(std::move(omega)), amplitudes_(std::move(amplitudes)), phases_(std::move(phases)), scale_(scale),
      offset_(offset), noise_sd_(label_noise_sd)
{
    if (omega_.rows() < 1 || omega_.cols() < 1)
        throw InvalidArgument("ground truth needs at least one feature and one dimension");
    if (amplitudes_.size() != omega_.rows() || phases_.size() != omega_.rows())
        throw InvalidArgument("one amplitude and phase per frequency is required");
    if (!std::isfinite(scale_) || !std::isfinite(offset_))
        throw InvalidArgument("scale and offset must be finite");
    if (!(noise_sd_ >= 0.0) || !std::isfinite(noise_sd_))
        throw InvalidArgument("label noise sd must be nonnegative");
}

double GroundTruthModel::expectation(const Vector& x) const
{
    if (x.size() != dimension())
        throw InvalidArgument("design dimension mismatch");
    const Vector arg = omega_ * x + phases_;
    return scale_ * amplitudes_.dot(arg.array().cos().matrix()) + offset_;
}

Vector GroundTruthModel::expectation_rows(const Matrix& points) const
{
    if (points.cols() != dimension())
        throw InvalidArgument("design dimension mismatch");
    const Matrix arg = (points * omega_.transpose()).rowwise() + phases_.transpose();
    return (scale_ * (arg.array().cos().matrix() * amplitudes_)).array() + offset_;
}

Vector GroundTruthModel::sample_labels(const Matrix& points, RngStream& rng) const
{
    Vector y = expectation_rows(points);
    if (noise_sd_ > 0.0)
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y[i] += noise_sd_ * rng.normal();
    return y;
}

nlohmann::json GroundTruthModel::to_json() const
{
    nlohmann::json j;
    j["features"] = omega_.rows();
    j["dimension"] = omega_.cols();
    j["scale"] = scale_;
    j["offset"] = offset_;
    j["label_noise_sd"] = noise_sd_;
    const Vector flat = Eigen::Map<const Vector>(Matrix(omega_.transpose()).data(), omega_.size());
    j["omega"] = std::vector<double>(flat.data(), flat.data() + flat.size());
    j["amplitudes"] = std::vector<double>(amplitudes_.data(), amplitudes_.data() + amplitudes_.size());
    j["phases"] = std::vector<double>(phases_.data(), phases_.data() + phases_.size());
    return j;
}

void SyntheticHighDimConfig::validate() const
{
    if (dimension < 2)
        throw InvalidArgument("dimension must be at least 2");
    if (features < 8)
        throw InvalidArgument("features must be at least 8");
    if (!(length_scale > 0.0))
        throw InvalidArgument("length_scale must be positive");
    if (!(output_max > 0.0))
        throw InvalidArgument("output_max must be positive");
    if (probe_count < 2)
        throw InvalidArgument("probe_count must be at least 2");
    if (!(percentile > 0.0 && percentile <= 100.0))
        throw InvalidArgument("percentile must lie in (0, 100]");
    if (n_train < 2)
        throw InvalidArgument("n_train must be at least 2");
    if (!(label_noise_sd >= 0.0))
        throw InvalidArgument("label_noise_sd must be nonnegative");
}

nlohmann::json to_json(const SyntheticHighDimConfig& c)
{
    return {{"dimension", c.dimension},       {"features", c.features},   {"length_scale", c.length_scale},
            {"output_max", c.output_max},     {"probe_count", c.probe_count}, {"percentile", c.percentile},
            {"n_train", c.n_train},           {"label_noise_sd", c.label_noise_sd}};
}

SyntheticHighDimConfig synthetic_config_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw InvalidArgument("problem config must be an object");
    SyntheticHighDimConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "dimension") c.dimension = value.get<int>();
        else if (key == "features") c.features = value.get<int>();
        else if (key == "length_scale") c.length_scale = value.get<double>();
        else if (key == "output_max") c.output_max = value.get<double>();
        else if (key == "probe_count") c.probe_count = value.get<int>();
        else if (key == "percentile") c.percentile = value.get<double>();
        else if (key == "n_train") c.n_train = value.get<int>();
        else if (key == "label_noise_sd") c.label_noise_sd = value.get<double>();
        else throw InvalidArgument("unknown problem key: " + key);
    }
    c.validate();
    return c;
}

GroundTruthModel synthetic_ground_truth(const SyntheticHighDimConfig& config, RngStream rng)
{
    config.validate();
    const int k = config.features;
    const int d = config.dimension;
    Matrix omega(k, d);
    Vector a(k), b(k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < d; ++j)
            omega(i, j) = rng.normal() / config.length_scale;
    for (int i = 0; i < k; ++i)
        a[i] = rng.normal();
    for (int i = 0; i < k; ++i)
        b[i] = 2.0 * std::numbers::pi * rng.uniform();

    const GroundTruthModel raw(omega, a, b, 1.0, 0.0, 0.0);
    RngStream probe_rng = rng.substream(1);
    Matrix probes(config.probe_count, d);
    for (Eigen::Index i = 0; i < probes.rows(); ++i)
        for (int j = 0; j < d; ++j)
            probes(i, j) = probe_rng.normal();
    const Vector v = raw.expectation_rows(probes);
    const double lo = v.minCoeff();
    const double hi = v.maxCoeff();
    if (!(hi > lo))
        throw FitError("random Fourier function is constant over the probes");
    const double scale = config.output_max / (hi - lo);
    return {std::move(omega), std::move(a), std::move(b), scale, -lo * scale, config.label_noise_sd};
}

TrainingProblem build_training_distribution(const GroundTruthModel& gt, const SyntheticHighDimConfig& config,
                                            RngStream rng)
{
    config.validate();
    if (gt.dimension() != config.dimension)
        throw InvalidArgument("ground truth and config dimensions differ");
    const Eigen::Index d = config.dimension;
    const Eigen::Index cloud_n = 2 * static_cast<Eigen::Index>(config.n_train);

    RngStream cloud_rng = rng.substream(1);
    Matrix cloud(cloud_n, d);
    for (Eigen::Index i = 0; i < cloud_n; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            cloud(i, j) = cloud_rng.normal();
    const Vector e = gt.expectation_rows(cloud);
    const double cut = percentile(e, config.percentile);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < cloud_n; ++i)
        if (e[i] <= cut)
            keep.push_back(i);
    if (static_cast<Eigen::Index>(keep.size()) < d + 1)
        throw FitError("too few retained points to fit the training distribution");
    Matrix retained(static_cast<Eigen::Index>(keep.size()), d);
    for (std::size_t r = 0; r < keep.size(); ++r)
        retained.row(static_cast<Eigen::Index>(r)) = cloud.row(keep[r]);
    auto p0 = MultivariateGaussianModel::fit_weighted(retained, WeightVector::ones(retained.rows()));

    RngStream draw_rng = rng.substream(2);
    Matrix x = p0.sample(config.n_train, draw_rng);
    RngStream label_rng = rng.substream(3);
    Vector y = gt.sample_labels(x, label_rng);
    return {std::move(p0), LabeledDataset(std::move(x), std::move(y))};
}

// ---------------------------------------------------------------------------

LabeledDataset ingest_superconductivity_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw FormatError(path + ": missing header row");

    std::vector<double> values;
    Eigen::Index rows = 0;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        int cols = 0;
        while (std::getline(ss, cell, ',')) {
            ++cols;
            const char* begin = cell.c_str();
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            while (end && (*end == ' ' || *end == '\t'))
                ++end;
            if (end == begin || *end != '\0' || !std::isfinite(v))
                throw FormatError(path + ": row " + std::to_string(rows + 1) + " (line " + std::to_string(line_no) +
                                  "), column " + std::to_string(cols) + ": non-numeric value '" + cell + "'");
            values.push_back(v);
        }
        if (!line.empty() && line.back() == ',')
            throw FormatError(path + ": row " + std::to_string(rows + 1) + " (line " + std::to_string(line_no) +
                              ") ends with an empty value");
        if (cols != kSuperconductivityColumns)
            throw FormatError(path + ": row " + std::to_string(rows + 1) + " (line " + std::to_string(line_no) +
                              ") has " + std::to_string(cols) + " columns, expected " +
                              std::to_string(kSuperconductivityColumns));
        ++rows;
    }
    if (in.bad())
        throw IoError("read error on " + path);
    if (rows == 0)
        throw FormatError(path + ": no data rows");

    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> table(
        values.data(), rows, kSuperconductivityColumns);
    const Matrix features = table.leftCols(kSuperconductivityColumns - 1);
    Vector labels = table.col(kSuperconductivityColumns - 1);
    return {FeatureStandardizer::fit(features).apply(features), std::move(labels)};
}

}  // namespace afmbo
