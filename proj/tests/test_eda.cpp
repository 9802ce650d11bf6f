#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "afmbo/benchmarks.hpp"
#include "afmbo/eda.hpp"
#include "reference.hpp"

using namespace afmbo;

namespace {

// Noiseless mean function with a fixed predictive variance.
class FunctionOracle final : public Oracle {
public:
    FunctionOracle(Eigen::Index d, std::function<double(const Vector&)> f, double var)
        : d_(d), f_(std::move(f)), var_(var) {}
    Eigen::Index dimension() const override { return d_; }
    GaussianPrediction predict(const Vector& x) const override { return {f_(x), var_}; }
    OraclePtr retrain(const LabeledDataset&, const WeightVector&) const override
    {
        return std::make_shared<FunctionOracle>(*this);
    }
    nlohmann::json to_json() const override { return {{"kind", "function"}, {"variance", var_}}; }

private:
    Eigen::Index d_;
    std::function<double(const Vector&)> f_;
    double var_;
};

Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (const double x : v)
        out[i++] = x;
    return out;
}

Vector permute(const Vector& v, const std::vector<Eigen::Index>& p)
{
    Vector out(v.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = v[p[i]];
    return out;
}

struct Quadratic {
    Vector center;
    double top;
    double operator()(const Vector& x) const { return top - (x - center).squaredNorm(); }
};

LabeledDataset sample_problem(const MultivariateGaussianModel& p0, const Quadratic& f, Eigen::Index n, RngStream& rng)
{
    const Matrix x = p0.sample(n, rng);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i)
        y[i] = f(x.row(i).transpose()) + 0.1 * rng.normal();
    return {x, y};
}

}  // namespace

TEST_CASE("threshold annealing")
{
    CHECK(anneal_threshold(-kInf, vec({0.0, 10.0}), 50.0) == 5.0);
    CHECK(anneal_threshold(7.0, vec({5.0, 5.0}), 50.0) == 7.0);
    CHECK(anneal_threshold(7.0, vec({9.0, 9.0}), 50.0) == 9.0);
}

TEST_CASE("CbAS weights factor into a density ratio and a survival probability")
{
    RngStream rng(1, 0);
    const MultivariateGaussianModel p0(Vector::Zero(3), Matrix::Identity(3, 3));
    const Matrix a = ref::random_matrix(3, 3, rng, 0.3);
    const MultivariateGaussianModel prev(ref::random_matrix(3, 1, rng, 0.5), a * a.transpose() + Matrix::Identity(3, 3));
    const FunctionOracle oracle(3, [](const Vector& x) { return x.sum(); }, 0.5);
    const Matrix x = prev.sample(50, rng);
    const double gamma = 0.4;

    const auto v = cbas_weights(x, oracle, p0, prev, gamma);
    for (Eigen::Index i = 0; i < 50; ++i) {
        const Vector xi = x.row(i).transpose();
        const double ratio = std::exp(p0.log_density(xi) - prev.log_density(xi));
        const double expected = ratio * ref::survival(gamma, xi.sum(), 0.5);
        CHECK(std::abs(v[i] - expected) <= 1e-12 * expected);
    }

    const auto same = cbas_weights(x, oracle, p0, p0, gamma);
    for (Eigen::Index i = 0; i < 50; ++i)
        CHECK(same[i] == doctest::Approx(ref::survival(gamma, x.row(i).sum(), 0.5)).epsilon(1e-13));

    const auto open = cbas_weights(x, oracle, p0, prev, -kInf);
    for (Eigen::Index i = 0; i < 50; ++i) {
        const Vector xi = x.row(i).transpose();
        CHECK(open[i] == doctest::Approx(std::exp(p0.log_density(xi) - prev.log_density(xi))).epsilon(1e-13));
    }
}

TEST_CASE("DbAS weights")
{
    const Vector means = vec({1.0, -2.0, 3.5});
    const Vector vars = vec({0.25, 1.0, 4.0});
    CHECK(dbas_weights(means, vars, -kInf).values() == Vector::Ones(3));
    CHECK(dbas_weights(vec({1.5}), vec({2.0}), 1.5)[0] == 0.5);
    CHECK(std::abs(dbas_weights(vec({1.0}), vec({4.0}), 1.0 + 2.0 * 2.0)[0] - 0.0227501319481792) < 1e-6);
    CHECK(std::abs(dbas_weights(vec({1.0}), vec({4.0}), 5.0)[0] - ref::survival(5.0, 1.0, 4.0)) < 1e-15);
}

TEST_CASE("RWR weights")
{
    const auto u = rwr_weights(Vector::Constant(8, 3.3), 0.01);
    for (Eigen::Index i = 0; i < 8; ++i)
        CHECK(u[i] == doctest::Approx(0.125).epsilon(1e-15));
    const auto two = rwr_weights(vec({0.0, std::log(3.0) / 0.01}), 0.01);
    CHECK(two[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(two[1] == doctest::Approx(0.75).epsilon(1e-14));
    RngStream rng(2, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto w = rwr_weights(ref::random_matrix(30, 1, rng, 500.0), 0.01);
        CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(rwr_weights(vec({1.0, 2.0}), 0.0), InvalidArgument);
}

TEST_CASE("feedback selection")
{
    const FunctionOracle oracle(1, [](const Vector& x) { return x[0]; }, 1.0);

    SUBCASE("first iteration keeps the samples above the percentile")
    {
        const Matrix fresh = linspace(0.0, 9.0, 10);
        const auto sel = fb_update(Matrix(0, 1), fresh, fresh.col(0), oracle, 90.0, 10);
        CHECK(sel.refit_set.rows() == 1);
        CHECK(sel.refit_set(0, 0) == 9.0);
        CHECK(sel.new_selected == 1);
    }
    SUBCASE("new samples worse than the whole pool leave it unchanged")
    {
        const Matrix pool = linspace(10.0, 19.0, 10);
        const Matrix fresh = linspace(0.0, 9.0, 10);
        const auto sel = fb_update(pool, fresh, fresh.col(0), oracle, 50.0, 10);
        CHECK(sel.refit_set == pool);
    }
    SUBCASE("mixed case against a brute-force sort")
    {
        RngStream rng(3, 0);
        for (int trial = 0; trial < 50; ++trial) {
            const Matrix pool = ref::random_matrix(12, 1, rng);
            const Matrix fresh = ref::random_matrix(12, 1, rng);
            const auto sel = fb_update(pool, fresh, fresh.col(0), oracle, 75.0, 12);
            const double thr = ref::percentile(std::vector<double>(fresh.data(), fresh.data() + 12), 75.0);
            std::vector<double> cand(pool.data(), pool.data() + 12);
            for (Eigen::Index i = 0; i < 12; ++i)
                if (fresh(i, 0) > thr)
                    cand.push_back(fresh(i, 0));
            std::sort(cand.rbegin(), cand.rend());
            cand.resize(12);
            std::vector<double> got(sel.refit_set.data(), sel.refit_set.data() + sel.refit_set.rows());
            std::sort(got.rbegin(), got.rend());
            CHECK(got == cand);
        }
    }
}

TEST_CASE("CEM-PI selection")
{
    const auto all = cempi_weights(Vector::Constant(20, 0.3), -kInf, 90.0);
    CHECK(all.weights.sum() == 20.0);

    RngStream rng(4, 0);
    for (int trial = 0; trial < 20; ++trial) {
        Vector pi(100);
        for (Eigen::Index i = 0; i < 100; ++i)
            pi[i] = rng.uniform();
        const auto sel = cempi_weights(pi, -kInf, 90.0);
        CHECK(sel.weights.sum() >= 10.0);
        CHECK(sel.weights.sum() <= 11.0);
        CHECK_FALSE(sel.fallback);
    }

    const Vector pi = probability_of_improvement(Vector::Constant(30, 1e3), Vector::Ones(30), 0.0);
    CHECK(cempi_weights(pi, -kInf, 90.0).weights.sum() == 30.0);

    const auto fb = cempi_weights(vec({0.1, 0.2, 0.3}), 0.9, 50.0);
    CHECK(fb.fallback);
    CHECK(fb.gamma == 0.9);
    CHECK(fb.weights.sum() >= 1.0);
}

TEST_CASE("weight transforms are permutation invariant")
{
    RngStream rng(5, 0);
    const Vector means = ref::random_matrix(25, 1, rng, 3.0);
    Vector vars(25);
    for (Eigen::Index i = 0; i < 25; ++i)
        vars[i] = 0.5 + rng.uniform();
    const auto p = rng.permutation(25);

    CHECK(permute(dbas_weights(means, vars, 1.0).values(), p) ==
          dbas_weights(permute(means, p), permute(vars, p), 1.0).values());
    const Vector r1 = permute(rwr_weights(means, 0.01).values(), p);
    const Vector r2 = rwr_weights(permute(means, p), 0.01).values();
    CHECK((r1 - r2).cwiseAbs().maxCoeff() < 1e-15);
    const Vector pi = probability_of_improvement(means, vars, 1.0);
    CHECK(permute(cempi_weights(pi, -kInf, 80.0).weights.values(), p) ==
          cempi_weights(permute(pi, p), -kInf, 80.0).weights.values());
    const Vector lp0 = ref::random_matrix(25, 1, rng), lpt = ref::random_matrix(25, 1, rng);
    CHECK(permute(cbas_log_weights(lp0, lpt, means, vars, 0.5), p) ==
          cbas_log_weights(permute(lp0, p), permute(lpt, p), permute(means, p), permute(vars, p), 0.5));
}

TEST_CASE("CMA-ES converges on a quadratic in five dimensions")
{
    int converged = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngStream rng(seed, 0);
        const Vector c = ref::random_matrix(5, 1, rng);
        auto state = CmaesState::initial(Vector::Zero(5), 0.01);
        for (int it = 0; it < 500 && (state.mean - c).norm() >= 1e-2; ++it) {
            RngStream s = rng.substream(static_cast<std::uint64_t>(it));
            const Matrix x = state.model().sample(12, s);
            Vector f(12);
            for (Eigen::Index i = 0; i < 12; ++i)
                f[i] = -(x.row(i).transpose() - c).squaredNorm();
            state = cmaes_step(state, x, f);
        }
        converged += (state.mean - c).norm() < 1e-2;
    }
    CHECK(converged == 10);
}

TEST_CASE("CMA-ES with flat fitness keeps the mean and still adapts the step size")
{
    auto state = CmaesState::initial(Vector::Constant(3, 0.5), 0.2);
    RngStream rng(6, 0);
    const Matrix x = state.model().sample(10, rng);
    const auto next = cmaes_step(state, x, Vector::Constant(10, -1.0));
    CHECK(next.mean == state.mean);
    CHECK(next.generation == state.generation + 1);
    CHECK(next.sigma != state.sigma);
}

TEST_CASE("CMA-ES update ignores sample order")
{
    auto state = CmaesState::initial(Vector::Zero(4), 0.5);
    RngStream rng(7, 0);
    const Matrix x = state.model().sample(10, rng);
    Vector f(10);
    for (Eigen::Index i = 0; i < 10; ++i)
        f[i] = -x.row(i).squaredNorm() + x(i, 0);
    const auto p = rng.permutation(10);
    Matrix xp(10, 4);
    for (Eigen::Index i = 0; i < 10; ++i)
        xp.row(i) = x.row(p[static_cast<std::size_t>(i)]);
    const auto a = cmaes_step(state, x, f);
    const auto b = cmaes_step(state, xp, permute(f, p));
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((a.cov - b.cov).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(a.sigma == doctest::Approx(b.sigma).epsilon(1e-15));
}

TEST_CASE("run_eda: equal weights refit to the sample MLE")
{
    const auto oracle = std::make_shared<FunctionOracle>(2, [](const Vector&) { return 1.0; }, 1.0);
    const MultivariateGaussianModel p0(Vector::Zero(2), Matrix::Identity(2, 2));
    RngStream rng(8, 0);
    const LabeledDataset data(p0.sample(10, rng), Vector::Ones(10));
    EdaConfig cfg;
    cfg.method = EdaMethod::DbAS;
    cfg.iterations = 1;
    cfg.samples_per_iter = 300;
    const auto traj = run_eda(cfg, data, oracle, p0, RngStream(8, 1));
    REQUIRE(traj.records.size() == 1);
    const auto& rec = traj.records[0];
    CHECK((rec.eda_weights.array() == rec.eda_weights[0]).all());
    Vector mean;
    Matrix cov;
    ref::mvn_fit(rec.samples, Vector::Ones(300), mean, cov);
    CHECK((rec.search_model.mean() - mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((rec.search_model.covariance() - cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("run_eda: alpha zero matches the fixed oracle and the fixed oracle is untouched")
{
    const MultivariateGaussianModel p0(Vector::Zero(2), Matrix::Identity(2, 2));
    const Quadratic f{vec({1.0, 0.5}), 10.0};
    RngStream rng(9, 0);
    const auto data = sample_problem(p0, f, 60, rng);
    const auto oracle = KernelRidgeOracle::train(data, WeightVector::ones(60), {});
    const auto hash = oracle->parameter_hash();

    for (const auto method : {EdaMethod::CbAS, EdaMethod::DbAS, EdaMethod::RWR, EdaMethod::FB, EdaMethod::CEM_PI,
                              EdaMethod::CMA_ES}) {
        CAPTURE(to_string(method));
        EdaConfig cfg;
        cfg.method = method;
        cfg.iterations = 5;
        cfg.samples_per_iter = 100;
        if (method == EdaMethod::FB)
            cfg.percentile = 50.0;
        const auto fixed = run_eda(cfg, data, oracle, p0, RngStream(9, 1));
        CHECK(fixed.final_oracle == oracle);
        CHECK(oracle->parameter_hash() == hash);

        cfg.autofocus = AutofocusConfig{.flatten_alpha = 0.0, .self_normalize = true,
                                        .min_effective_sample_size = 0.0, .weight_clip = std::nullopt};
        const auto af0 = run_eda(cfg, data, oracle, p0, RngStream(9, 1));
        CHECK(af0.records.size() == fixed.records.size());
        CHECK(af0.search_hash() == fixed.search_hash());

        cfg.autofocus->flatten_alpha = 1.0;
        const auto af1 = run_eda(cfg, data, oracle, p0, RngStream(9, 1));
        if (!af1.records.empty() && af1.records[0].retrained)
            CHECK(af1.search_hash() != fixed.search_hash());
    }
}

TEST_CASE("run_eda: thresholds never decrease")
{
    const MultivariateGaussianModel p0(Vector::Zero(2), Matrix::Identity(2, 2));
    const Quadratic f{vec({1.0, -1.0}), 10.0};
    RngStream rng(10, 0);
    const auto data = sample_problem(p0, f, 60, rng);
    const auto oracle = KernelRidgeOracle::train(data, WeightVector::ones(60), {});
    for (const auto method : {EdaMethod::CbAS, EdaMethod::DbAS, EdaMethod::CEM_PI}) {
        EdaConfig cfg;
        cfg.method = method;
        cfg.iterations = 15;
        cfg.samples_per_iter = 100;
        cfg.autofocus = AutofocusConfig{};
        const auto traj = run_eda(cfg, data, oracle, p0, RngStream(10, 1));
        for (std::size_t t = 1; t < traj.records.size(); ++t)
            CHECK(traj.records[t].gamma >= traj.records[t - 1].gamma);
    }
}

TEST_CASE("run_eda: sampling stream is recorded and reproducible")
{
    const MultivariateGaussianModel p0(Vector::Zero(2), Matrix::Identity(2, 2));
    const Quadratic f{vec({0.5, 0.5}), 5.0};
    RngStream rng(11, 0);
    const auto data = sample_problem(p0, f, 50, rng);
    const auto oracle = KernelRidgeOracle::train(data, WeightVector::ones(50), {});
    EdaConfig cfg;
    cfg.iterations = 4;
    cfg.samples_per_iter = 80;
    const auto a = run_eda(cfg, data, oracle, p0, RngStream(11, 1));
    const auto b = run_eda(cfg, data, oracle, p0, RngStream(11, 1));
    CHECK(a.search_hash() == b.search_hash());
    for (std::size_t t = 0; t < a.records.size(); ++t) {
        RngStream s(a.records[t].sample_seed, a.records[t].sample_stream);
        CHECK(a.sampling_model(static_cast<int>(t) + 1).sample(80, s) == a.records[t].samples);
    }
}

TEST_CASE("CbAS on a 2-D quadratic improves on the training distribution")
{
    // Ground-truth optimum located by grid search.
    const Quadratic f{vec({1.2, 0.8}), 10.0};
    Vector best = Vector::Zero(2);
    double best_val = -kInf;
    for (double a = -3.0; a <= 3.0; a += 0.01)
        for (double b = -3.0; b <= 3.0; b += 0.01) {
            const Vector x = vec({a, b});
            if (f(x) > best_val) {
                best_val = f(x);
                best = x;
            }
        }

    const MultivariateGaussianModel p0(Vector::Zero(2), Matrix::Identity(2, 2));
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngStream rng(seed, 0);
        const auto data = sample_problem(p0, f, 100, rng);
        const auto oracle = KernelRidgeOracle::train(data, WeightVector::ones(100), {});
        EdaConfig cfg;
        cfg.iterations = 50;
        cfg.samples_per_iter = 200;
        const auto traj = run_eda(cfg, data, oracle, p0, RngStream(seed, 1));
        REQUIRE_FALSE(traj.records.empty());
        const Vector final_mean = traj.records.back().search_model.mean();
        improved += (final_mean - best).norm() < (p0.mean() - best).norm() && f(final_mean) > f(p0.mean());
    }
    CHECK(improved >= 9);
}

TEST_CASE("DbAS with the ground truth as oracle concentrates at the toy optimum")
{
    const Vector grid = linspace(kToyDomainLo, kToyDomainHi, 2001);
    Vector means(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        means[i] = toy_ground_truth(grid[i]);
    Eigen::Index arg = 0;
    const double top = means.maxCoeff(&arg);
    const auto w = dbas_weights(means, Vector::Constant(grid.size(), 1e-8), top);
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        if (w[i] > 1e-3)
            CHECK(std::abs(grid[i] - grid[arg]) <= 0.05);
    CHECK(w[arg] == 0.5);
}

TEST_CASE("method names round trip")
{
    for (const auto m : {EdaMethod::CbAS, EdaMethod::DbAS, EdaMethod::RWR, EdaMethod::FB, EdaMethod::CEM_PI,
                         EdaMethod::CMA_ES})
        CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("cbas2"), InvalidArgument);
    EdaConfig bad;
    bad.samples_per_iter = 1;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
