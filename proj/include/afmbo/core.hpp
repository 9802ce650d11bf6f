#pragma once

// Shared domain types, seeded randomness and numerically careful primitives.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace afmbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidState : std::logic_error {
    using std::logic_error::logic_error;
};

/// Weighted maximum-likelihood fit of a search model collapsed.
class DegenerateFit : public std::runtime_error {
public:
    DegenerateFit(const std::string& what, double effective_sample_size)
        : std::runtime_error(what), ess_(effective_sample_size) {}
    double effective_sample_size() const { return ess_; }

private:
    double ess_;
};

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyDistribution : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Domain types

/// Fixed training set: one feature row per labeled point.
class LabeledDataset {
public:
    /// Empty placeholder with no rows.
    LabeledDataset() = default;
    LabeledDataset(Matrix features, Vector labels);

    const Matrix& features() const { return features_; }
    const Vector& labels() const { return labels_; }
    Eigen::Index size() const { return features_.rows(); }
    Eigen::Index dimension() const { return features_.cols(); }

    /// Rows selected by index, in the given order.
    LabeledDataset subset(std::span<const Eigen::Index> rows) const;

private:
    Matrix features_;
    Vector labels_;
};

/// Predictive normal N(mean, variance) of a probabilistic oracle.
struct GaussianPrediction {
    double mean = 0.0;
    double variance = 1.0;

    double sd() const;
    void validate() const;
};

/// The constraint set S = {y : y >= threshold}; -inf is the fully relaxed set.
struct ThresholdConstraint {
    double threshold = -kInf;
    explicit ThresholdConstraint(double t);
};

/// Nonnegative finite weights with at least one positive entry.
class WeightVector {
public:
    explicit WeightVector(Vector w);
    static WeightVector ones(Eigen::Index n);

    const Vector& values() const { return w_; }
    Eigen::Index size() const { return w_.size(); }
    double operator[](Eigen::Index i) const { return w_[i]; }
    double sum() const { return w_.sum(); }

private:
    Vector w_;
};

/// Seeded pseudo-random stream. The engine is the exactly specified
/// mt19937_64; the distributions are implemented here so that draw
/// sequences do not depend on the standard library in use.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Independent child stream; a pure function of (seed, stream, id).
    RngStream substream(std::uint64_t id) const;

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Standard normal (Marsaglia polar method).
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);
    /// Fisher-Yates permutation of 0..n-1.
    std::vector<Eigen::Index> permutation(Eigen::Index n);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// ---------------------------------------------------------------------------
// Primitives

/// P(Y >= threshold) for Y ~ N(pred.mean, pred.variance).
double normal_survival(double threshold, const GaussianPrediction& pred);
/// log P(Y >= threshold), accurate far into the upper tail.
double log_normal_survival(double threshold, const GaussianPrediction& pred);

double normal_log_pdf(double x, double mean, double variance);

/// KL(N(p) || N(q)) in closed form.
double normal_kl(const GaussianPrediction& p, const GaussianPrediction& q);

/// Linear-interpolation percentile, q in [0, 100].
double percentile(std::span<const double> values, double q);
double percentile(const Vector& values, double q);

double log_sum_exp(std::span<const double> values);
double log_sum_exp(const Vector& values);

/// Per-feature zero-mean / unit-variance transform with stored statistics.
class FeatureStandardizer {
public:
    static FeatureStandardizer fit(const Matrix& features);
    Matrix apply(const Matrix& features) const;

    const Vector& mean() const { return mean_; }
    const Vector& scale() const { return scale_; }

private:
    Vector mean_;
    Vector scale_;
};

/// 64-bit FNV-1a over raw bytes; used for artifact hashes.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_doubles(std::span<const double> values, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t h);

}  // namespace afmbo
