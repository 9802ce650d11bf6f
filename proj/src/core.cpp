#include "afmbo/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

namespace afmbo {

namespace {

void require_finite(const Matrix& m, const char* what)
{
    if (!m.allFinite())
        throw InvalidArgument(std::string(what) + " contains non-finite entries");
}

}  // namespace

// ---------------------------------------------------------------------------

LabeledDataset::LabeledDataset(Matrix features, Vector labels)
    : features_(std::move(features)), labels_(std::move(labels))
{
    if (features_.rows() < 1 || features_.cols() < 1)
        throw InvalidArgument("dataset needs at least one row and one feature");
    if (features_.rows() != labels_.size())
        throw InvalidArgument("features and labels differ in row count");
    require_finite(features_, "features");
    require_finite(labels_, "labels");
}

LabeledDataset LabeledDataset::subset(std::span<const Eigen::Index> rows) const
{
    Matrix x(static_cast<Eigen::Index>(rows.size()), dimension());
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto r = rows[k];
        if (r < 0 || r >= size())
            throw InvalidArgument("subset row out of range");
        x.row(static_cast<Eigen::Index>(k)) = features_.row(r);
        y[static_cast<Eigen::Index>(k)] = labels_[r];
    }
    return LabeledDataset(std::move(x), std::move(y));
}

double GaussianPrediction::sd() const { return std::sqrt(variance); }

void GaussianPrediction::validate() const
{
    if (!std::isfinite(mean))
        throw InvalidArgument("prediction mean is not finite");
    if (!(variance > 0.0) || !std::isfinite(variance))
        throw InvalidArgument("prediction variance must be positive and finite");
}

ThresholdConstraint::ThresholdConstraint(double t) : threshold(t)
{
    if (std::isnan(t) || t == kInf)
        throw InvalidArgument("threshold must be finite or -inf");
}

WeightVector::WeightVector(Vector w) : w_(std::move(w))
{
    if (w_.size() == 0)
        throw InvalidArgument("weight vector is empty");
    bool any_positive = false;
    for (Eigen::Index i = 0; i < w_.size(); ++i) {
        const double v = w_[i];
        if (!std::isfinite(v) || v < 0.0)
            throw InvalidArgument("weights must be finite and nonnegative");
        any_positive = any_positive || v > 0.0;
    }
    if (!any_positive)
        throw InvalidArgument("all weights are zero");
}

WeightVector WeightVector::ones(Eigen::Index n) { return WeightVector(Vector::Ones(n)); }

// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(splitmix64(splitmix64(seed) ^ splitmix64(~stream)))
{
}

RngStream RngStream::substream(std::uint64_t id) const
{
    return RngStream(seed_, splitmix64(stream_ * 0x100000001b3ULL + splitmix64(id)));
}

double RngStream::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n)
{
    if (n == 0)
        throw InvalidArgument("uniform_index needs n > 0");
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

std::vector<Eigen::Index> RngStream::permutation(Eigen::Index n)
{
    std::vector<Eigen::Index> p(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        p[static_cast<std::size_t>(i)] = i;
    for (Eigen::Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(uniform_index(static_cast<std::uint64_t>(i + 1)));
        std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
}

// ---------------------------------------------------------------------------

namespace {

double standardized_threshold(double threshold, const GaussianPrediction& pred)
{
    if (std::isnan(threshold) || threshold == kInf)
        throw InvalidArgument("survival threshold must be finite or -inf");
    pred.validate();
    return (threshold - pred.mean) / pred.sd();
}

}  // namespace

double normal_survival(double threshold, const GaussianPrediction& pred)
{
    if (threshold == -kInf) {
        pred.validate();
        return 1.0;
    }
    const double z = standardized_threshold(threshold, pred);
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

double log_normal_survival(double threshold, const GaussianPrediction& pred)
{
    if (threshold == -kInf) {
        pred.validate();
        return 0.0;
    }
    const double z = standardized_threshold(threshold, pred);
    if (z < 30.0)
        return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
    // Mills-ratio asymptotic series; erfc underflows beyond z ~ 37.
    const double r = 1.0 / (z * z);
    const double series = 1.0 - r + 3.0 * r * r - 15.0 * r * r * r + 105.0 * r * r * r * r;
    return -0.5 * z * z - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double normal_log_pdf(double x, double mean, double variance)
{
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double normal_kl(const GaussianPrediction& p, const GaussianPrediction& q)
{
    p.validate();
    q.validate();
    const double d = p.mean - q.mean;
    return 0.5 * (std::log(q.variance / p.variance) + (p.variance + d * d) / q.variance - 1.0);
}

double percentile(std::span<const double> values, double q)
{
    if (values.empty())
        throw InvalidArgument("percentile of an empty set");
    if (!(q >= 0.0 && q <= 100.0))
        throw InvalidArgument("percentile level must lie in [0, 100]");
    std::vector<double> sorted(values.begin(), values.end());
    for (double v : sorted)
        if (!std::isfinite(v))
            throw InvalidArgument("percentile input must be finite");
    std::sort(sorted.begin(), sorted.end());
    const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0)
        return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double percentile(const Vector& values, double q)
{
    return percentile(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())), q);
}

double log_sum_exp(std::span<const double> values)
{
    if (values.empty())
        throw InvalidArgument("log_sum_exp of an empty set");
    const double m = *std::max_element(values.begin(), values.end());
    if (m == -kInf)
        return -kInf;
    if (values.size() == 1)
        return m;
    double s = 0.0;
    for (double v : values)
        s += std::exp(v - m);
    return m + std::log(s);
}

double log_sum_exp(const Vector& values)
{
    return log_sum_exp(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

// ---------------------------------------------------------------------------

FeatureStandardizer FeatureStandardizer::fit(const Matrix& features)
{
    if (features.rows() < 1)
        throw InvalidArgument("cannot standardize an empty matrix");
    FeatureStandardizer s;
    s.mean_ = features.colwise().mean().transpose();
    const Matrix centered = features.rowwise() - s.mean_.transpose();
    s.scale_ = (centered.array().square().colwise().sum() / static_cast<double>(features.rows())).sqrt().transpose();
    // Constant columns are centered only.
    for (Eigen::Index j = 0; j < s.scale_.size(); ++j)
        if (!(s.scale_[j] > 0.0))
            s.scale_[j] = 1.0;
    return s;
}

Matrix FeatureStandardizer::apply(const Matrix& features) const
{
    if (features.cols() != mean_.size())
        throw InvalidArgument("standardizer dimension mismatch");
    return ((features.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array()).matrix();
}

// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_doubles(std::span<const double> values, std::uint64_t h)
{
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h = fnv1a(&bits, sizeof bits, h);
    }
    return h;
}

std::string hex64(std::uint64_t h)
{
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

}  // namespace afmbo
