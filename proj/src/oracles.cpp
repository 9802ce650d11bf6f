#include "afmbo/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace afmbo {

void Oracle::predict_rows(const Matrix& points, Vector& means, Vector& variances) const
{
    means.resize(points.rows());
    variances.resize(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const auto p = predict(points.row(i).transpose());
        means[i] = p.mean;
        variances[i] = p.variance;
    }
}

std::uint64_t Oracle::parameter_hash() const
{
    const std::string s = to_json().dump();
    return fnv1a(s.data(), s.size());
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kDropThreshold = 1e-12;

/// Rescales to mean one, dividing by the max first so huge weights cannot overflow the sum.
Vector mean_one(const Vector& w)
{
    const double top = w.maxCoeff();
    if (!(top > 0.0) || !std::isfinite(top))
        throw FitError("weights must be finite with a positive entry");
    const Vector r = w / top;
    return r * (static_cast<double>(w.size()) / r.sum());
}

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma)
{
    const Vector an = a.rowwise().squaredNorm();
    const Vector bn = b.rowwise().squaredNorm();
    Matrix k = -2.0 * a * b.transpose();
    k.colwise() += an;
    k.rowwise() += bn.transpose();
    return (-gamma * k.array().max(0.0)).exp().matrix();
}

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> to_row_major(const Matrix& m)
{
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            out.push_back(m(r, c));
    return out;
}

Matrix from_row_major(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols)
{
    if (static_cast<Eigen::Index>(v.size()) != rows * cols)
        throw FormatError("matrix entry count does not match its shape");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
    return m;
}

}  // namespace

KernelRidgeOracle::KernelRidgeOracle(Matrix support_points, Vector dual_coefficients, KernelRidgeParams params,
                                     double noise_variance)
    : support_(std::move(support_points)), dual_(std::move(dual_coefficients)), params_(params),
      noise_variance_(noise_variance)
{
    if (support_.rows() != dual_.size())
        throw InvalidArgument("one dual coefficient per support point is required");
    if (!(noise_variance_ > 0.0) || !std::isfinite(noise_variance_))
        throw InvalidArgument("noise variance must be positive");
    if (!(params_.ridge > 0.0) || !(params_.length_scale_inverse > 0.0))
        throw InvalidArgument("ridge and kernel gamma must be positive");
}

KernelRidgeOracle krr_fit_weighted(const LabeledDataset& data, const WeightVector& weights, double ridge,
                                   double length_scale_inverse, double noise_variance)
{
    if (!(ridge > 0.0))
        throw InvalidArgument("ridge must be positive");
    if (!(length_scale_inverse > 0.0))
        throw InvalidArgument("kernel gamma must be positive");
    const auto n = data.size();
    if (weights.size() != n)
        throw InvalidArgument("one weight per training point is required");

    const Vector w = mean_one(weights.values());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i)
        if (w[i] > kDropThreshold)
            keep.push_back(i);
    if (keep.size() < 2)
        throw FitError("kernel ridge fit needs at least two weighted points");

    const auto k = static_cast<Eigen::Index>(keep.size());
    Matrix x(k, data.dimension());
    Vector y(k);
    Vector inv_w(k);
    for (Eigen::Index r = 0; r < k; ++r) {
        const auto i = keep[static_cast<std::size_t>(r)];
        x.row(r) = data.features().row(i);
        y[r] = data.labels()[i];
        inv_w[r] = 1.0 / w[i];
    }

    Matrix system = rbf_kernel(x, x, length_scale_inverse);
    system.diagonal() += ridge * inv_w;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success)
        throw FitError("kernel ridge system is singular");
    const Vector alpha = llt.solve(y);
    const double rel = (system * alpha - y).norm() / std::max(1.0, y.norm());
    if (!alpha.allFinite() || rel > 1e-6)
        throw FitError("kernel ridge solve is numerically singular");

    KernelRidgeParams params;
    params.ridge = ridge;
    params.length_scale_inverse = length_scale_inverse;
    return KernelRidgeOracle(std::move(x), alpha, params, noise_variance);
}

double krr_noise_variance_iwcv(const LabeledDataset& data, const WeightVector& raw_weights, int folds, double ridge,
                               double length_scale_inverse, RngStream& rng)
{
    const auto n = data.size();
    if (folds < 2)
        throw InvalidArgument("cross-validation needs at least two folds");
    if (n < folds)
        throw InvalidArgument("fewer points than folds");
    if (raw_weights.size() != n)
        throw InvalidArgument("one weight per training point is required");

    const auto order = rng.permutation(n);
    const WeightVector weights(mean_one(raw_weights.values()));
    const Eigen::Index base = n / folds;
    const Eigen::Index extra = n % folds;

    double sse = 0.0;
    Eigen::Index start = 0;
    for (int f = 0; f < folds; ++f) {
        const Eigen::Index len = base + (f < extra ? 1 : 0);
        std::vector<Eigen::Index> train_rows;
        std::vector<Eigen::Index> test_rows(order.begin() + start, order.begin() + start + len);
        train_rows.insert(train_rows.end(), order.begin(), order.begin() + start);
        train_rows.insert(train_rows.end(), order.begin() + start + len, order.end());
        start += len;

        Vector train_w(static_cast<Eigen::Index>(train_rows.size()));
        for (std::size_t r = 0; r < train_rows.size(); ++r)
            train_w[static_cast<Eigen::Index>(r)] = weights[train_rows[r]];
        if (!(train_w.maxCoeff() > 0.0))
            throw FitError("a cross-validation training split carries no weight");

        const auto model = krr_fit_weighted(data.subset(train_rows), WeightVector(train_w), ridge,
                                            length_scale_inverse);
        for (const auto i : test_rows) {
            if (weights[i] == 0.0)
                continue;
            const double r = model.predict_mean(data.features().row(i).transpose()) - data.labels()[i];
            sse += weights[i] * r * r;
        }
    }
    return std::max(sse / weights.sum(), 1e-8);
}

std::shared_ptr<const KernelRidgeOracle> KernelRidgeOracle::train(const LabeledDataset& data,
                                                                  const WeightVector& weights,
                                                                  const KernelRidgeParams& params)
{
    RngStream folds(params.fold_seed, 0x6b7272);
    const double noise = krr_noise_variance_iwcv(data, weights, params.cv_folds, params.ridge,
                                                 params.length_scale_inverse, folds);
    auto fit = krr_fit_weighted(data, weights, params.ridge, params.length_scale_inverse, noise);
    return std::make_shared<const KernelRidgeOracle>(fit.support_, fit.dual_, params, noise);
}

double KernelRidgeOracle::predict_mean(const Vector& x) const
{
    if (x.size() != dimension())
        throw InvalidArgument("oracle input dimension mismatch");
    const Vector k = rbf_kernel(x.transpose(), support_, params_.length_scale_inverse).row(0).transpose();
    return k.dot(dual_);
}

GaussianPrediction KernelRidgeOracle::predict(const Vector& x) const
{
    return {predict_mean(x), noise_variance_};
}

void KernelRidgeOracle::predict_rows(const Matrix& points, Vector& means, Vector& variances) const
{
    if (points.cols() != dimension())
        throw InvalidArgument("oracle input dimension mismatch");
    means = rbf_kernel(points, support_, params_.length_scale_inverse) * dual_;
    variances = Vector::Constant(points.rows(), noise_variance_);
}

OraclePtr KernelRidgeOracle::retrain(const LabeledDataset& data, const WeightVector& weights) const
{
    return train(data, weights, params_);
}

nlohmann::json KernelRidgeOracle::to_json() const
{
    nlohmann::json j;
    j["kind"] = "kernel_ridge";
    j["ridge"] = params_.ridge;
    j["length_scale_inverse"] = params_.length_scale_inverse;
    j["cv_folds"] = params_.cv_folds;
    j["fold_seed"] = params_.fold_seed;
    j["noise_variance"] = noise_variance_;
    j["support_rows"] = support_.rows();
    j["support_points"] = to_row_major(support_);
    j["dual_coefficients"] = to_vec(dual_);
    return j;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const MlpConfig& c)
{
    return {{"hidden_layers", c.hidden},     {"ensemble_size", c.ensemble_size}, {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},    {"max_epochs", c.max_epochs},       {"patience", c.patience},
            {"validation_fraction", c.validation_fraction}};
}

MlpConfig mlp_config_from_json(const nlohmann::json& j)
{
    MlpConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "hidden_layers")
            c.hidden = value.get<std::vector<int>>();
        else if (key == "ensemble_size")
            c.ensemble_size = value.get<int>();
        else if (key == "learning_rate")
            c.learning_rate = value.get<double>();
        else if (key == "batch_size")
            c.batch_size = value.get<int>();
        else if (key == "max_epochs")
            c.max_epochs = value.get<int>();
        else if (key == "patience")
            c.patience = value.get<int>();
        else if (key == "validation_fraction")
            c.validation_fraction = value.get<double>();
        else
            throw InvalidArgument("unknown oracle key: " + key);
    }
    if (c.ensemble_size < 1 || c.batch_size < 1 || c.max_epochs < 1 || c.patience < 1 || !(c.learning_rate > 0.0))
        throw InvalidArgument("oracle training settings must be positive");
    if (!(c.validation_fraction > 0.0 && c.validation_fraction <= 0.5))
        throw InvalidArgument("validation_fraction must lie in (0, 0.5]");
    for (int h : c.hidden)
        if (h < 1)
            throw InvalidArgument("hidden layer sizes must be positive");
    return c;
}

namespace {

constexpr double kVarianceFloor = 1e-6;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix elu(const Matrix& z) { return z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); }); }
Matrix elu_derivative(const Matrix& z) { return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); }); }

}  // namespace

MlpNetwork::MlpNetwork(Eigen::Index inputs, const std::vector<int>& hidden)
{
    Eigen::Index prev = inputs;
    for (int h : hidden) {
        w_.emplace_back(Matrix::Zero(h, prev));
        b_.emplace_back(Vector::Zero(h));
        prev = h;
    }
    w_.emplace_back(Matrix::Zero(2, prev));
    b_.emplace_back(Vector::Zero(2));
}

void MlpNetwork::glorot_init(RngStream& rng)
{
    for (std::size_t l = 0; l < w_.size(); ++l) {
        auto& w = w_[l];
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = limit * (2.0 * rng.uniform() - 1.0);
        b_[l].setZero();
    }
}

Matrix MlpNetwork::predict(const Matrix& x) const
{
    Matrix h = x;
    const std::size_t last = w_.size() - 1;
    for (std::size_t l = 0; l < last; ++l) {
        Matrix z = w_[l] * h;
        z.colwise() += b_[l];
        h = elu(z);
    }
    Matrix out = w_[last] * h;
    out.colwise() += b_[last];
    for (Eigen::Index i = 0; i < out.cols(); ++i)
        out(1, i) = softplus(out(1, i)) + kVarianceFloor;
    return out;
}

double MlpNetwork::weighted_nll(const Matrix& x, const Vector& y, const Vector& w) const
{
    const Matrix out = predict(x);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        const double r = y[i] - out(0, i);
        loss += w[i] * (0.5 * std::log(out(1, i)) + r * r / (2.0 * out(1, i)));
    }
    return loss / static_cast<double>(x.cols());
}

double MlpNetwork::weighted_nll_gradient(const Matrix& x, const Vector& y, const Vector& w, MlpNetwork& grad) const
{
    const std::size_t layers = w_.size();
    const std::size_t last = layers - 1;
    const auto batch = x.cols();
    const double inv_b = 1.0 / static_cast<double>(batch);

    if (grad.w_.size() != layers) {
        grad.w_.resize(layers);
        grad.b_.resize(layers);
    }

    std::vector<Matrix> inputs(layers);  // activation entering layer l
    std::vector<Matrix> pre(last);       // hidden pre-activations
    inputs[0] = x;
    for (std::size_t l = 0; l < last; ++l) {
        pre[l] = w_[l] * inputs[l];
        pre[l].colwise() += b_[l];
        inputs[l + 1] = elu(pre[l]);
    }
    Matrix out = w_[last] * inputs[last];
    out.colwise() += b_[last];

    Matrix delta(2, batch);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
        const double s2 = softplus(out(1, i)) + kVarianceFloor;
        const double r = y[i] - out(0, i);
        loss += w[i] * (0.5 * std::log(s2) + r * r / (2.0 * s2));
        const double d_mean = -r / s2;
        const double d_var = 0.5 / s2 - r * r / (2.0 * s2 * s2);
        delta(0, i) = w[i] * inv_b * d_mean;
        delta(1, i) = w[i] * inv_b * d_var * sigmoid(out(1, i));
    }

    for (std::size_t l = layers; l-- > 0;) {
        grad.w_[l].noalias() = delta * inputs[l].transpose();
        grad.b_[l] = delta.rowwise().sum();
        if (l == 0)
            break;
        Matrix back = w_[l].transpose() * delta;
        delta = back.cwiseProduct(elu_derivative(pre[l - 1]));
    }
    return loss * inv_b;
}

Eigen::Index MlpNetwork::parameter_count() const
{
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < w_.size(); ++l)
        n += w_[l].size() + b_[l].size();
    return n;
}

Vector MlpNetwork::parameters() const
{
    Vector p(parameter_count());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        p.segment(k, w_[l].size()) = Eigen::Map<const Vector>(w_[l].data(), w_[l].size());
        k += w_[l].size();
        p.segment(k, b_[l].size()) = b_[l];
        k += b_[l].size();
    }
    return p;
}

void MlpNetwork::set_parameters(const Vector& p)
{
    if (p.size() != parameter_count())
        throw InvalidArgument("parameter vector has the wrong length");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        Eigen::Map<Vector>(w_[l].data(), w_[l].size()) = p.segment(k, w_[l].size());
        k += w_[l].size();
        b_[l] = p.segment(k, b_[l].size());
        k += b_[l].size();
    }
}

nlohmann::json MlpNetwork::to_json() const
{
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < w_.size(); ++l) {
        layers.push_back({{"rows", w_[l].rows()},
                          {"cols", w_[l].cols()},
                          {"weights", to_row_major(w_[l])},
                          {"bias", to_vec(b_[l])}});
    }
    return layers;
}

MlpNetwork MlpNetwork::from_json(const nlohmann::json& j)
{
    MlpNetwork net;
    for (const auto& layer : j) {
        const auto rows = layer.at("rows").get<Eigen::Index>();
        const auto cols = layer.at("cols").get<Eigen::Index>();
        net.w_.push_back(from_row_major(layer.at("weights").get<std::vector<double>>(), rows, cols));
        const auto bias = layer.at("bias").get<std::vector<double>>();
        net.b_.emplace_back(Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size())));
    }
    return net;
}

// ---------------------------------------------------------------------------

namespace {

struct Adam {
    double lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
    long step = 0;
    Vector m, v;

    explicit Adam(double learning_rate, Eigen::Index n) : lr(learning_rate), m(Vector::Zero(n)), v(Vector::Zero(n)) {}

    void update(Vector& params, const Vector& grad)
    {
        ++step;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
};

Matrix gather_columns(const Matrix& xt, const std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end)
{
    Matrix out(xt.rows(), static_cast<Eigen::Index>(end - begin));
    for (std::size_t k = begin; k < end; ++k)
        out.col(static_cast<Eigen::Index>(k - begin)) = xt.col(idx[k]);
    return out;
}

Vector gather(const Vector& v, const std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end)
{
    Vector out(static_cast<Eigen::Index>(end - begin));
    for (std::size_t k = begin; k < end; ++k)
        out[static_cast<Eigen::Index>(k - begin)] = v[idx[k]];
    return out;
}

}  // namespace

MlpNetwork train_member(const Matrix& features, const Vector& labels, const Vector& weights,
                        const MlpConfig& config, RngStream rng, int member_index)
{
    const auto n = features.rows();
    const Matrix xt = features.transpose();

    auto order = rng.permutation(n);
    auto n_val = static_cast<Eigen::Index>(std::lround(config.validation_fraction * static_cast<double>(n)));
    n_val = std::clamp<Eigen::Index>(n_val, 1, n - 1);
    std::vector<Eigen::Index> val(order.begin(), order.begin() + n_val);
    std::vector<Eigen::Index> train(order.begin() + n_val, order.end());

    const Matrix x_val = gather_columns(xt, val, 0, val.size());
    const Vector y_val = gather(labels, val, 0, val.size());
    Vector w_val = gather(weights, val, 0, val.size());
    // With no validation weight the unweighted likelihood is monitored.
    if (!(w_val.maxCoeff() > 0.0))
        w_val.setOnes();
    w_val /= w_val.maxCoeff();
    const double val_norm = static_cast<double>(w_val.size()) / w_val.sum();

    MlpNetwork net(features.cols(), config.hidden);
    net.glorot_init(rng);
    MlpNetwork grad;
    Vector params = net.parameters();
    Adam adam(config.learning_rate, params.size());

    Vector best = params;
    double best_loss = kInf;
    int stale = 0;
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        // Shuffle the training split.
        for (std::size_t i = train.size() - 1; i > 0; --i)
            std::swap(train[i], train[rng.uniform_index(i + 1)]);

        for (std::size_t start = 0; start < train.size(); start += batch) {
            const std::size_t end = std::min(train.size(), start + batch);
            const Matrix xb = gather_columns(xt, train, start, end);
            const Vector yb = gather(labels, train, start, end);
            const Vector wb = gather(weights, train, start, end);
            const double loss = net.weighted_nll_gradient(xb, yb, wb, grad);
            if (!std::isfinite(loss))
                throw TrainingError("non-finite training loss in ensemble member " + std::to_string(member_index) +
                                    " at epoch " + std::to_string(epoch));
            adam.update(params, grad.parameters());
            net.set_parameters(params);
        }

        const double val_loss = net.weighted_nll(x_val, y_val, w_val) * val_norm;
        if (!std::isfinite(val_loss))
            throw TrainingError("non-finite validation loss in ensemble member " + std::to_string(member_index) +
                                " at epoch " + std::to_string(epoch));
        if (val_loss < best_loss) {
            best_loss = val_loss;
            best = params;
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }
    net.set_parameters(best);
    return net;
}

GaussianPrediction combine_ensemble(std::span<const GaussianPrediction> members)
{
    if (members.empty())
        throw InvalidArgument("empty ensemble");
    const double e = static_cast<double>(members.size());
    double mean = 0.0;
    for (const auto& m : members)
        mean += m.mean;
    mean /= e;
    // mean of (var_k + mu_k^2) - mean^2, written in centered form
    double var = 0.0;
    for (const auto& m : members) {
        const double d = m.mean - mean;
        var += m.variance + d * d;
    }
    var /= e;
    return {mean, std::max(var, kVarianceFloor)};
}

std::shared_ptr<const MlpEnsembleOracle> MlpEnsembleOracle::train(const LabeledDataset& data,
                                                                  const WeightVector& weights,
                                                                  const MlpConfig& config, std::uint64_t seed)
{
    const auto n = data.size();
    if (n < 50)
        throw InvalidArgument("ensemble training needs at least 50 points");
    if (weights.size() != n)
        throw InvalidArgument("one weight per training point is required");
    if (!(config.validation_fraction > 0.0 && config.validation_fraction <= 0.5))
        throw InvalidArgument("validation_fraction must lie in (0, 0.5]");

    const double label_mean = data.labels().mean();
    double label_scale = std::sqrt((data.labels().array() - label_mean).square().mean());
    if (!(label_scale > 0.0))
        label_scale = 1.0;
    const Vector y = (data.labels().array() - label_mean) / label_scale;
    const Vector w = mean_one(weights.values());

    std::vector<MlpNetwork> members;
    const RngStream root(seed, 0x6d6c70);
    for (int k = 0; k < config.ensemble_size; ++k)
        members.push_back(train_member(data.features(), y, w, config,
                                       root.substream(static_cast<std::uint64_t>(k)), k));
    return std::make_shared<const MlpEnsembleOracle>(std::move(members), label_mean, label_scale, config, seed);
}

MlpEnsembleOracle::MlpEnsembleOracle(std::vector<MlpNetwork> members, double label_mean, double label_scale,
                                     MlpConfig config, std::uint64_t seed)
    : members_(std::move(members)), label_mean_(label_mean), label_scale_(label_scale), config_(std::move(config)),
      seed_(seed)
{
    if (members_.empty())
        throw InvalidArgument("ensemble needs at least one member");
}

Eigen::Index MlpEnsembleOracle::dimension() const { return members_.front().weights().front().cols(); }

void MlpEnsembleOracle::member_predictions(const Matrix& points, Matrix& means, Matrix& variances) const
{
    if (points.cols() != dimension())
        throw InvalidArgument("oracle input dimension mismatch");
    const Matrix xt = points.transpose();
    const auto e = static_cast<Eigen::Index>(members_.size());
    means.resize(points.rows(), e);
    variances.resize(points.rows(), e);
    for (Eigen::Index k = 0; k < e; ++k) {
        const Matrix out = members_[static_cast<std::size_t>(k)].predict(xt);
        means.col(k) = (label_mean_ + label_scale_ * out.row(0).array()).transpose();
        variances.col(k) = (label_scale_ * label_scale_ * out.row(1).array()).transpose();
    }
}

void MlpEnsembleOracle::predict_rows(const Matrix& points, Vector& means, Vector& variances) const
{
    Matrix mm, vv;
    member_predictions(points, mm, vv);
    means.resize(points.rows());
    variances.resize(points.rows());
    std::vector<GaussianPrediction> preds(members_.size());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (std::size_t k = 0; k < members_.size(); ++k)
            preds[k] = {mm(i, static_cast<Eigen::Index>(k)), vv(i, static_cast<Eigen::Index>(k))};
        const auto p = combine_ensemble(preds);
        means[i] = p.mean;
        variances[i] = p.variance;
    }
}

GaussianPrediction MlpEnsembleOracle::predict(const Vector& x) const
{
    Vector m, v;
    predict_rows(x.transpose(), m, v);
    return {m[0], v[0]};
}

OraclePtr MlpEnsembleOracle::retrain(const LabeledDataset& data, const WeightVector& weights) const
{
    return train(data, weights, config_, seed_);
}

nlohmann::json MlpEnsembleOracle::to_json() const
{
    nlohmann::json j;
    j["kind"] = "mlp_ensemble";
    j["config"] = afmbo::to_json(config_);
    j["seed"] = seed_;
    j["label_mean"] = label_mean_;
    j["label_scale"] = label_scale_;
    j["members"] = nlohmann::json::array();
    for (const auto& m : members_)
        j["members"].push_back(m.to_json());
    return j;
}

}  // namespace afmbo
