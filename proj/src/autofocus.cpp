#include "afmbo/autofocus.hpp"

#include <cmath>

namespace afmbo {

void AutofocusConfig::validate() const
{
    if (!(flatten_alpha >= 0.0 && flatten_alpha <= 1.0))
        throw InvalidArgument("flatten_alpha must lie in [0, 1]");
    if (!(min_effective_sample_size >= 0.0))
        throw InvalidArgument("min_effective_sample_size must be nonnegative");
    if (weight_clip && !(*weight_clip > 0.0))
        throw InvalidArgument("weight_clip must be positive");
}

Vector importance_log_weights(const Vector& log_search, const Vector& log_training, std::optional<double> clip)
{
    if (log_search.size() != log_training.size())
        throw InvalidArgument("log-density vectors differ in length");
    if (clip && !(*clip > 0.0))
        throw InvalidArgument("weight clip must be positive");
    Vector lw(log_search.size());
    for (Eigen::Index i = 0; i < lw.size(); ++i) {
        if (log_training[i] == -kInf || std::isnan(log_training[i]) || log_training[i] == kInf)
            throw InvalidState("training point has no support under the training distribution");
        if (std::isnan(log_search[i]) || log_search[i] == kInf)
            throw InvalidArgument("search log-density must be finite or -inf");
        lw[i] = log_search[i] - log_training[i];
        if (clip)
            lw[i] = std::min(lw[i], std::log(*clip));
    }
    return lw;
}

WeightVector importance_weights(const Vector& log_search, const Vector& log_training, std::optional<double> clip)
{
    const Vector lw = importance_log_weights(log_search, log_training, clip);
    Vector w(lw.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
        w[i] = clip ? std::min(std::exp(lw[i]), *clip) : std::exp(lw[i]);
    return WeightVector(std::move(w));
}

WeightVector importance_weights(const MultivariateGaussianModel& search_model,
                                const MultivariateGaussianModel& training_model, const Matrix& points,
                                std::optional<double> clip)
{
    return importance_weights(search_model.log_density_rows(points), training_model.log_density_rows(points), clip);
}

WeightVector flatten_weights(const WeightVector& w, double alpha)
{
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw InvalidArgument("flattening exponent must lie in [0, 1]");
    if (alpha == 1.0)
        return w;
    if (alpha == 0.0)
        return WeightVector::ones(w.size());
    return WeightVector(w.values().array().pow(alpha).matrix());
}

WeightVector self_normalize(const WeightVector& w)
{
    const double s = w.sum();
    if (!(s > 0.0))
        throw InvalidArgument("cannot self-normalize zero weights");
    return WeightVector(w.values() * (static_cast<double>(w.size()) / s));
}

double effective_sample_size(const WeightVector& w)
{
    // Scale by the max first so the result is exactly scale invariant for
    // power-of-two factors and cannot overflow.
    const Vector r = w.values() / w.values().maxCoeff();
    const double s = r.sum();
    return s * s / r.squaredNorm();
}

double renyi2_plugin(const WeightVector& w) { return w.values().squaredNorm() / static_cast<double>(w.size()); }

double max_weight_share(const WeightVector& w) { return w.values().maxCoeff() / w.sum(); }

WeightDiagnostics diagnose(const WeightVector& raw)
{
    return {effective_sample_size(raw), renyi2_plugin(raw), max_weight_share(raw)};
}

WeightDiagnostics diagnose_log(const Vector& log_raw)
{
    if (log_raw.size() == 0)
        throw InvalidArgument("no weights to diagnose");
    const double top = log_raw.maxCoeff();
    if (top == -kInf || std::isnan(top))
        throw InvalidArgument("all importance weights are zero");
    const Vector r = (log_raw.array() - top).exp();
    const double s = r.sum();
    WeightDiagnostics d;
    d.effective_sample_size = s * s / r.squaredNorm();
    d.max_weight_share = 1.0 / s;
    d.renyi2_plugin = std::exp(log_sum_exp(Vector(2.0 * log_raw)) - std::log(static_cast<double>(log_raw.size())));
    return d;
}

double chebyshev_loss_bound(double loss_bound, double delta, double n, double d2)
{
    if (!(loss_bound > 0.0))
        throw InvalidArgument("loss bound must be positive");
    if (!(delta > 0.0 && delta <= 1.0))
        throw InvalidArgument("delta must lie in (0, 1]");
    if (!(n >= 1.0))
        throw InvalidArgument("sample count must be at least one");
    if (!(d2 >= 0.0))
        throw InvalidArgument("Renyi divergence must be nonnegative");
    return loss_bound * std::sqrt(d2 / (n * delta));
}

double cbas_weight_variance(double p0_of_s)
{
    if (!(p0_of_s > 0.0 && p0_of_s <= 1.0))
        throw InvalidArgument("P0(S) must lie in (0, 1]");
    return 1.0 / p0_of_s - 1.0;
}

double cbas_population_ess(double n, double p0_of_s)
{
    if (!(p0_of_s > 0.0 && p0_of_s <= 1.0))
        throw InvalidArgument("P0(S) must lie in (0, 1]");
    return n * p0_of_s;
}

WeightVector training_weights(const WeightVector& raw, const AutofocusConfig& config)
{
    config.validate();
    WeightVector w = flatten_weights(raw, config.flatten_alpha);
    if (config.self_normalize)
        w = self_normalize(w);
    return w;
}

WeightVector training_weights_from_log(const Vector& log_raw, const AutofocusConfig& config)
{
    config.validate();
    const auto n = log_raw.size();
    if (config.flatten_alpha == 0.0)
        return WeightVector::ones(n);
    const Vector la = config.flatten_alpha == 1.0 ? log_raw : Vector(config.flatten_alpha * log_raw);
    if (config.self_normalize) {
        const double shift = log_sum_exp(la) - std::log(static_cast<double>(n));
        if (shift == -kInf)
            throw FitError("all importance weights are zero");
        return WeightVector((la.array() - shift).exp().matrix());
    }
    Vector w = la.array().exp();
    if (!w.allFinite() || !(w.maxCoeff() > 0.0))
        throw FitError("importance weights under- or overflow without self-normalization");
    return WeightVector(std::move(w));
}

AutofocusResult autofocus_step(const OraclePtr& oracle, const LabeledDataset& data, const Vector& log_raw,
                               const AutofocusConfig& config)
{
    if (log_raw.size() != data.size())
        throw InvalidArgument("one importance weight per training point is required");
    AutofocusResult result;
    result.diagnostics = diagnose_log(log_raw);
    const WeightVector used = training_weights_from_log(log_raw, config);
    result.training_ess = effective_sample_size(used);
    if (result.training_ess >= config.min_effective_sample_size) {
        result.oracle = oracle->retrain(data, used);
        result.retrained = true;
    } else {
        result.oracle = oracle;
    }
    return result;
}

AutofocusResult autofocus_step(const OraclePtr& oracle, const LabeledDataset& data,
                               const MultivariateGaussianModel& search_model,
                               const MultivariateGaussianModel& training_model, const AutofocusConfig& config)
{
    config.validate();
    const Vector log_raw = importance_log_weights(search_model.log_density_rows(data.features()),
                                                  training_model.log_density_rows(data.features()),
                                                  config.weight_clip);
    return autofocus_step(oracle, data, log_raw, config);
}

}  // namespace afmbo
