#include "afmbo/eda.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace afmbo {

std::string to_string(EdaMethod m)
{
    switch (m) {
    case EdaMethod::CbAS: return "CbAS";
    case EdaMethod::DbAS: return "DbAS";
    case EdaMethod::RWR: return "RWR";
    case EdaMethod::FB: return "FB";
    case EdaMethod::CEM_PI: return "CEM-PI";
    case EdaMethod::CMA_ES: return "CMA-ES";
    }
    return "unknown";
}

EdaMethod parse_method(const std::string& name)
{
    for (auto m : {EdaMethod::CbAS, EdaMethod::DbAS, EdaMethod::RWR, EdaMethod::FB, EdaMethod::CEM_PI,
                   EdaMethod::CMA_ES})
        if (std::ranges::equal(to_string(m), name, [](char a, char b) { return std::tolower(a) == std::tolower(b); }))
            return m;
    throw InvalidArgument("unknown EDA method: " + name);
}

void EdaConfig::validate() const
{
    if (iterations < 1)
        throw InvalidArgument("iterations must be at least 1");
    if (samples_per_iter < 2)
        throw InvalidArgument("samples_per_iter must be at least 2");
    if (!(percentile > 0.0 && percentile < 100.0))
        throw InvalidArgument("percentile must lie in (0, 100)");
    if (!(rwr_gamma > 0.0))
        throw InvalidArgument("rwr_gamma must be positive");
    if (!(cmaes_step_size > 0.0))
        throw InvalidArgument("cmaes_step_size must be positive");
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0))
        throw InvalidArgument("shrinkage must lie in [0, 1]");
    if (autofocus)
        autofocus->validate();
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t hash_vector(const Vector& v, std::uint64_t h)
{
    return hash_doubles({v.data(), static_cast<std::size_t>(v.size())}, h);
}

std::uint64_t hash_matrix(const Matrix& m, std::uint64_t h)
{
    return hash_doubles({m.data(), static_cast<std::size_t>(m.size())}, h);
}

/// exp(log_w - max) so the largest weight is one.
WeightVector shifted_exp(const Vector& log_w)
{
    const double top = log_w.maxCoeff();
    if (top == -kInf || std::isnan(top))
        throw InvalidArgument("all EDA weights are zero");
    return WeightVector((log_w.array() - top).exp().matrix());
}

}  // namespace

std::uint64_t Trajectory::search_hash() const
{
    std::uint64_t h = initial_model.hash();
    h = fnv1a(&initial_oracle_hash, sizeof initial_oracle_hash, h);
    for (const auto& r : records) {
        h = hash_matrix(r.samples, h);
        h = hash_vector(r.oracle_means, h);
        h = hash_vector(r.oracle_variances, h);
        h = hash_vector(r.eval_means, h);
        h = hash_vector(r.eda_weights, h);
        h = hash_doubles({&r.gamma, 1}, h);
        h = hash_vector(r.search_model.mean(), h);
        h = hash_matrix(r.search_model.covariance(), h);
    }
    return h;
}

const MultivariateGaussianModel& Trajectory::sampling_model(int iteration) const
{
    if (iteration < 1 || iteration > static_cast<int>(records.size()))
        throw InvalidArgument("iteration out of range");
    if (iteration == 1)
        return first_sampling_model;
    return records[static_cast<std::size_t>(iteration - 2)].search_model;
}

// ---------------------------------------------------------------------------

double anneal_threshold(double previous_gamma, const Vector& oracle_means, double q)
{
    return std::max(previous_gamma, percentile(oracle_means, q));
}

Vector cbas_log_weights(const Vector& log_p0, const Vector& log_ptheta, const Vector& means, const Vector& variances,
                        double gamma)
{
    const auto m = means.size();
    if (log_p0.size() != m || log_ptheta.size() != m || variances.size() != m)
        throw InvalidArgument("CbAS inputs differ in length");
    Vector lw(m);
    for (Eigen::Index i = 0; i < m; ++i)
        lw[i] = log_p0[i] - log_ptheta[i] + log_normal_survival(gamma, {means[i], variances[i]});
    return lw;
}

WeightVector cbas_weights(const Matrix& samples, const Oracle& oracle, const MultivariateGaussianModel& training_model,
                          const MultivariateGaussianModel& search_model_prev, double gamma)
{
    Vector means, vars;
    oracle.predict_rows(samples, means, vars);
    const Vector lp0 = training_model.log_density_rows(samples);
    const Vector lpt = search_model_prev.log_density_rows(samples);
    Vector v(samples.rows());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = std::exp(lp0[i] - lpt[i]) * normal_survival(gamma, {means[i], vars[i]});
    return WeightVector(std::move(v));
}

WeightVector dbas_weights(const Vector& means, const Vector& variances, double gamma)
{
    if (means.size() != variances.size())
        throw InvalidArgument("means and variances differ in length");
    Vector v(means.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = normal_survival(gamma, {means[i], variances[i]});
    return WeightVector(std::move(v));
}

WeightVector dbas_weights(const Matrix& samples, const Oracle& oracle, double gamma)
{
    Vector means, vars;
    oracle.predict_rows(samples, means, vars);
    return dbas_weights(means, vars, gamma);
}

WeightVector rwr_weights(const Vector& means, double gamma)
{
    if (!(gamma > 0.0))
        throw InvalidArgument("RWR gamma must be positive");
    const Vector scaled = gamma * means;
    const double lse = log_sum_exp(scaled);
    return WeightVector((scaled.array() - lse).exp().matrix());
}

FbSelection fb_update(const Matrix& pool, const Matrix& new_samples, const Vector& new_means, const Oracle& oracle,
                      double q, Eigen::Index capacity)
{
    if (new_samples.rows() != new_means.size())
        throw InvalidArgument("one oracle mean per new sample is required");
    if (pool.rows() > 0 && pool.cols() != new_samples.cols())
        throw InvalidArgument("pool dimension mismatch");
    if (capacity < 1)
        throw InvalidArgument("pool capacity must be positive");

    const double threshold = percentile(new_means, q);
    Vector pool_means, pool_vars;
    if (pool.rows() > 0)
        oracle.predict_rows(pool, pool_means, pool_vars);

    // Candidates: pool rows first, then the selected new rows.
    std::vector<std::pair<const Matrix*, Eigen::Index>> rows;
    std::vector<double> means;
    for (Eigen::Index i = 0; i < pool.rows(); ++i) {
        rows.emplace_back(&pool, i);
        means.push_back(pool_means[i]);
    }
    FbSelection out;
    for (Eigen::Index i = 0; i < new_samples.rows(); ++i) {
        if (new_means[i] > threshold) {
            rows.emplace_back(&new_samples, i);
            means.push_back(new_means[i]);
            ++out.new_selected;
        }
    }
    if (rows.empty())
        throw InvalidState("feedback selection is empty");

    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(capacity)));
    std::sort(order.begin(), order.end());

    out.refit_set.resize(static_cast<Eigen::Index>(order.size()), new_samples.cols());
    out.refit_means.resize(static_cast<Eigen::Index>(order.size()));
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& [src, row] = rows[order[k]];
        out.refit_set.row(static_cast<Eigen::Index>(k)) = src->row(row);
        out.refit_means[static_cast<Eigen::Index>(k)] = means[order[k]];
    }
    return out;
}

Vector probability_of_improvement(const Vector& means, const Vector& variances, double y_max)
{
    Vector pi(means.size());
    for (Eigen::Index i = 0; i < pi.size(); ++i)
        pi[i] = normal_survival(y_max, {means[i], variances[i]});
    return pi;
}

CemPiSelection cempi_weights(const Vector& pi, double previous_gamma, double q)
{
    const double q_t = percentile(pi, q);
    const double gamma = std::max(previous_gamma, q_t);
    Vector v = (pi.array() >= gamma).cast<double>();
    bool fallback = false;
    if (!(v.sum() > 0.0)) {
        v = (pi.array() >= q_t).cast<double>();
        fallback = true;
    }
    return {WeightVector(std::move(v)), gamma, fallback};
}

// ---------------------------------------------------------------------------

CmaesState CmaesState::initial(const Vector& mean, double sigma)
{
    if (!(sigma > 0.0))
        throw InvalidArgument("CMA-ES step size must be positive");
    CmaesState s;
    const auto d = mean.size();
    s.mean = mean;
    s.sigma = sigma;
    s.cov = Matrix::Identity(d, d);
    s.path_sigma = Vector::Zero(d);
    s.path_cov = Vector::Zero(d);
    return s;
}

MultivariateGaussianModel CmaesState::model() const { return {mean, sigma * sigma * cov}; }

CmaesState cmaes_step(const CmaesState& state, const Matrix& samples, const Vector& fitness)
{
    const auto lambda = samples.rows();
    const auto d = samples.cols();
    if (lambda < 2 || fitness.size() != lambda)
        throw InvalidArgument("CMA-ES needs at least two samples with one fitness each");
    if (d != state.mean.size())
        throw InvalidArgument("CMA-ES sample dimension mismatch");

    const auto mu = lambda / 2;
    Vector rank_w(lambda);
    rank_w.setZero();
    for (Eigen::Index i = 0; i < mu; ++i)
        rank_w[i] = std::log(static_cast<double>(mu) + 0.5) - std::log(static_cast<double>(i + 1));
    rank_w /= rank_w.sum();
    const double mueff = 1.0 / rank_w.head(mu).squaredNorm();

    const double n = static_cast<double>(d);
    const double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
    const double cs = (mueff + 2.0) / (n + mueff + 5.0);
    const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
    const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) * (n + 2.0) + mueff));
    const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs;
    const double chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    CmaesState next = state;
    next.event.clear();
    ++next.generation;

    // Rank by fitness, descending; tied samples share the mean of their slots' weights.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(lambda));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return fitness[a] > fitness[b] || (fitness[a] == fitness[b] && a < b);
    });
    Vector w(lambda);
    for (std::size_t start = 0; start < order.size();) {
        std::size_t end = start + 1;
        while (end < order.size() && fitness[order[end]] == fitness[order[start]])
            ++end;
        const double share = rank_w.segment(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)).mean();
        for (std::size_t k = start; k < end; ++k)
            w[order[k]] = share;
        start = end;
    }
    const bool no_signal = fitness.maxCoeff() == fitness.minCoeff();

    Eigen::SelfAdjointEigenSolver<Matrix> eig(state.cov);
    Matrix inv_sqrt = eig.eigenvectors() * eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse().asDiagonal() *
                      eig.eigenvectors().transpose();

    const Matrix steps = ((samples.rowwise() - state.mean.transpose()) / state.sigma).transpose();  // d x lambda
    const Vector step_w = no_signal ? Vector(Vector::Zero(d)) : Vector(steps * w);

    next.mean = state.mean + state.sigma * step_w;
    next.path_sigma = (1.0 - cs) * state.path_sigma + std::sqrt(cs * (2.0 - cs) * mueff) * (inv_sqrt * step_w);
    const double ps_norm = next.path_sigma.norm();
    const double hsig_den = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * static_cast<double>(next.generation)));
    const bool hsig = ps_norm / hsig_den / chi_n < 1.4 + 2.0 / (n + 1.0);
    next.path_cov = (1.0 - cc) * state.path_cov;
    if (hsig)
        next.path_cov += std::sqrt(cc * (2.0 - cc) * mueff) * step_w;

    if (!no_signal) {
        const Matrix rank_mu = steps * w.asDiagonal() * steps.transpose();
        const double decay = 1.0 - c1 - cmu + (hsig ? 0.0 : c1 * cc * (2.0 - cc));
        next.cov = decay * state.cov + c1 * next.path_cov * next.path_cov.transpose() + cmu * rank_mu;
        next.cov = 0.5 * (next.cov + next.cov.transpose());
    }
    next.sigma = state.sigma * std::exp((cs / damps) * (ps_norm / chi_n - 1.0));

    Eigen::LLT<Matrix> check(next.cov);
    if (!next.cov.allFinite() || check.info() != Eigen::Success) {
        next.cov = Matrix::Identity(d, d);
        next.path_cov.setZero();
        next.event = "cmaes covariance reset";
    }
    return next;
}

// ---------------------------------------------------------------------------

Trajectory run_eda(const EdaConfig& config, const LabeledDataset& data, const OraclePtr& oracle,
                   const MultivariateGaussianModel& training_model, const RngStream& rng)
{
    config.validate();
    if (!oracle)
        throw InvalidArgument("run_eda needs an oracle");
    if (training_model.dimension() != data.dimension() || oracle->dimension() != data.dimension())
        throw InvalidArgument("oracle, training model and data dimensions disagree");

    const Eigen::Index m = config.samples_per_iter;
    const double y_max = data.labels().maxCoeff();
    const bool cma = config.method == EdaMethod::CMA_ES;

    Trajectory traj;
    traj.method = config.method;
    traj.autofocus = config.autofocus.has_value();
    traj.initial_model = training_model;
    traj.initial_oracle_hash = oracle->parameter_hash();

    CmaesState cma_state;
    if (cma)
        cma_state = CmaesState::initial(training_model.mean(), config.cmaes_step_size);
    traj.first_sampling_model = cma ? cma_state.model() : training_model;

    MultivariateGaussianModel current = traj.first_sampling_model;
    OraclePtr active = oracle;
    double gamma = -kInf;
    Matrix pool(0, data.dimension());

    for (int t = 1; t <= config.iterations; ++t) {
        IterationRecord rec;
        rec.iteration = t;
        RngStream sampler = rng.substream(static_cast<std::uint64_t>(t));
        rec.sample_seed = sampler.seed();
        rec.sample_stream = sampler.stream();
        rec.samples = current.sample(m, sampler);
        active->predict_rows(rec.samples, rec.oracle_means, rec.oracle_variances);

        std::optional<MultivariateGaussianModel> next;
        try {
            switch (config.method) {
            case EdaMethod::CbAS: {
                gamma = anneal_threshold(gamma, rec.oracle_means, config.percentile);
                const Vector lw = cbas_log_weights(training_model.log_density_rows(rec.samples),
                                                   current.log_density_rows(rec.samples), rec.oracle_means,
                                                   rec.oracle_variances, gamma);
                const auto v = shifted_exp(lw);
                rec.eda_weights = v.values();
                next = MultivariateGaussianModel::fit_weighted(rec.samples, v, config.shrinkage, &current);
                break;
            }
            case EdaMethod::DbAS: {
                gamma = anneal_threshold(gamma, rec.oracle_means, config.percentile);
                Vector lw(m);
                for (Eigen::Index i = 0; i < m; ++i)
                    lw[i] = log_normal_survival(gamma, {rec.oracle_means[i], rec.oracle_variances[i]});
                const auto v = shifted_exp(lw);
                rec.eda_weights = v.values();
                next = MultivariateGaussianModel::fit_weighted(rec.samples, v, config.shrinkage, &current);
                break;
            }
            case EdaMethod::RWR: {
                const auto v = rwr_weights(rec.oracle_means, config.rwr_gamma);
                rec.eda_weights = v.values();
                next = MultivariateGaussianModel::fit_weighted(rec.samples, v, config.shrinkage, &current);
                break;
            }
            case EdaMethod::FB: {
                auto sel = fb_update(pool, rec.samples, rec.oracle_means, *active, config.percentile, m);
                gamma = percentile(rec.oracle_means, config.percentile);
                pool = sel.refit_set;
                rec.eda_weights = Vector::Ones(pool.rows());
                next = MultivariateGaussianModel::fit_weighted(pool, WeightVector::ones(pool.rows()),
                                                               config.shrinkage, &current);
                break;
            }
            case EdaMethod::CEM_PI: {
                const Vector pi = probability_of_improvement(rec.oracle_means, rec.oracle_variances, y_max);
                auto sel = cempi_weights(pi, gamma, config.percentile);
                gamma = sel.gamma;
                if (sel.fallback)
                    rec.event = "cem-pi selection fell back to the iteration percentile";
                rec.eda_weights = sel.weights.values();
                next = MultivariateGaussianModel::fit_weighted(rec.samples, sel.weights, config.shrinkage, &current);
                break;
            }
            case EdaMethod::CMA_ES: {
                // log PI ranks identically to PI and does not underflow to ties.
                Vector fitness(m);
                for (Eigen::Index i = 0; i < m; ++i)
                    fitness[i] = log_normal_survival(y_max, {rec.oracle_means[i], rec.oracle_variances[i]});
                cma_state = cmaes_step(cma_state, rec.samples, fitness);
                rec.event = cma_state.event;
                rec.eda_weights = fitness;
                next = cma_state.model();
                break;
            }
            }
        } catch (const DegenerateFit& e) {
            traj.termination = "iteration " + std::to_string(t) + ": " + e.what() +
                               " (ess " + std::to_string(e.effective_sample_size()) + ")";
            break;
        }
        rec.gamma = (config.method == EdaMethod::RWR || cma) ? std::numeric_limits<double>::quiet_NaN() : gamma;
        rec.search_model = *next;

        rec.eval_means = rec.oracle_means;
        if (config.autofocus) {
            try {
                auto step = autofocus_step(active, data, *next, training_model, *config.autofocus);
                rec.diagnostics = step.diagnostics;
                rec.training_ess = step.training_ess;
                rec.retrained = step.retrained;
                if (step.retrained) {
                    active = step.oracle;
                    Vector unused;
                    active->predict_rows(rec.samples, rec.eval_means, unused);
                }
            } catch (const FitError& e) {
                traj.termination = "iteration " + std::to_string(t) + ": oracle fit failed: " + e.what();
                break;
            } catch (const TrainingError& e) {
                traj.termination = "iteration " + std::to_string(t) + ": oracle training failed: " + e.what();
                break;
            }
        }
        current = *next;
        traj.records.push_back(std::move(rec));
    }
    traj.final_oracle = active;
    return traj;
}

}  // namespace afmbo
