#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "afmbo/benchmarks.hpp"
#include "reference.hpp"

using namespace afmbo;

namespace {

double pdf(double x, double mean, double var)
{
    return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

std::filesystem::path write_temp(const std::string& name, const std::string& body)
{
    const auto path = std::filesystem::temp_directory_path() / ("afmbo_test_" + name);
    std::ofstream(path) << body;
    return path;
}

std::string csv_row(double first, int columns, const std::string& override_cell = "", int override_at = -1)
{
    std::string row;
    for (int c = 0; c < columns; ++c) {
        if (c > 0)
            row += ',';
        row += c == override_at ? override_cell : std::to_string(first + c);
    }
    return row + "\n";
}

std::string csv_header(int columns)
{
    std::string h;
    for (int c = 0; c < columns; ++c)
        h += (c > 0 ? ",c" : "c") + std::to_string(c);
    return h + "\n";
}

}  // namespace

TEST_CASE("toy ground truth closed-form values")
{
    CHECK(std::abs(toy_ground_truth(5.0) - (0.3989422804014327 + 0.7978845608028654 * std::exp(-8.0))) < 1e-6);
    CHECK(std::abs(toy_ground_truth(7.0) - 0.851876) < 1e-6);
    for (double x = 0.0; x <= 10.0; x += 0.37)
        CHECK(std::abs(toy_ground_truth(x) - (pdf(x, 5.0, 1.0) + pdf(x, 7.0, 0.25))) < 1e-15);
}

TEST_CASE("toy grid argmax sits within one grid step of the true maximizer")
{
    const Vector grid = linspace(kToyDomainLo, kToyDomainHi, 2001);
    Eigen::Index arg = 0;
    double top = -kInf;
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        if (toy_ground_truth(grid[i]) > top) {
            top = toy_ground_truth(grid[i]);
            arg = i;
        }
    const double exact = ref::toy_argmax();
    const double step = grid[1] - grid[0];
    CHECK(std::abs(grid[arg] - exact) <= step);
    // The left bump pulls the maximizer below 7 by several grid steps.
    CHECK(std::abs(exact - 6.9642) < 1e-4);
}

TEST_CASE("toy objective: noiseless indicator and quadrature convergence")
{
    const Vector grid = linspace(kToyDomainLo, kToyDomainHi, 2001);
    Vector lv(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        lv[i] = std::log(pdf(grid[i], 6.0, 1.0));
    const auto model = Grid1DModel::from_unnormalized(grid, lv);

    const double thr = 0.5;
    const double obj = toy_objective(model, thr, 0.0);
    CHECK(obj >= 0.0);
    CHECK(obj <= 1.0);
    const Vector tw = trapezoid_weights(grid);
    double expected = 0.0;
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        expected += toy_ground_truth(grid[i]) >= thr ? tw[i] * model.density()[i] : 0.0;
    CHECK(obj == doctest::Approx(expected).epsilon(1e-12));

    const Vector fine = linspace(kToyDomainLo, kToyDomainHi, 4001);
    Vector lf(fine.size());
    for (Eigen::Index i = 0; i < fine.size(); ++i)
        lf[i] = std::log(pdf(fine[i], 6.0, 1.0));
    const auto model_fine = Grid1DModel::from_unnormalized(fine, lf);
    for (const double sd : {0.13, 0.25, 0.38})
        CHECK(std::abs(toy_objective(model, thr, sd) - toy_objective(model_fine, thr, sd)) < 1e-4);
}

TEST_CASE("toy run: basic contracts")
{
    ToyProblemConfig cfg;
    cfg.iterations = 20;
    cfg.sigma_eps = 0.0;
    const auto a = run_toy_cbas(cfg, false, RngStream(1, 0));
    const auto b = run_toy_cbas(cfg, false, RngStream(1, 0));
    CHECK(a.termination == "completed");
    CHECK(a.iterations.size() == 20);
    CHECK(a.objective == b.objective);
    CHECK(a.objective >= 0.0);
    CHECK(a.objective <= 1.0);
    for (std::size_t t = 1; t < a.iterations.size(); ++t)
        CHECK(a.iterations[t].gamma >= a.iterations[t - 1].gamma);

    const auto af = run_toy_cbas(cfg, true, RngStream(1, 0));
    CHECK(af.iterations[0].diagnostics.has_value());
    CHECK_FALSE(a.iterations[0].diagnostics.has_value());
    CHECK(af.threshold == a.threshold);  // shared initial-oracle threshold

    ToyProblemConfig own = cfg;
    own.scoring = ToyScoring::OwnFinalOracle;
    CHECK(run_toy_cbas(own, false, RngStream(1, 0)).threshold == a.threshold);

    ToyProblemConfig bad;
    bad.grid_nodes = 10;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("toy training data follows the training distribution")
{
    ToyProblemConfig cfg;
    cfg.n_train = 20000;
    cfg.sigma0 = 2.0;
    cfg.sigma_eps = 0.0;
    RngStream rng(2, 0);
    const auto data = toy_training_data(cfg, rng);
    CHECK(std::abs(data.features().col(0).mean() - kToyTrainMean) < 0.05);
    for (Eigen::Index i = 0; i < 100; ++i)
        CHECK(data.labels()[i] == toy_ground_truth(data.features()(i, 0)));
}

TEST_CASE("toy run with the ground truth as oracle peaks at the true maximizer")
{
    ToyProblemConfig cfg;
    const auto r = run_toy_cbas(cfg, false, RngStream(3, 0), [](double x) { return toy_ground_truth(x); });
    CHECK(r.termination == "completed");
    CHECK(std::abs(r.final_model.mode() - ref::toy_argmax()) <= 10.0 / 2000.0);
}

TEST_CASE("synthetic ground truth: determinism, single feature, probe range, smoothness")
{
    const SyntheticHighDimConfig cfg;
    const auto a = synthetic_ground_truth(cfg, RngStream(0, 1));
    const auto b = synthetic_ground_truth(cfg, RngStream(0, 1));
    RngStream probe_rng(99, 0);
    const Matrix probes = ref::random_matrix(100000, cfg.dimension, probe_rng);
    const Vector ea = a.expectation_rows(probes);
    CHECK(ea == b.expectation_rows(probes));
    CHECK(ea.minCoeff() >= -5.0);
    CHECK(ea.maxCoeff() <= 145.0);
    CHECK(ea.allFinite());

    const double h = 1e-5;
    for (Eigen::Index i = 0; i < 100; ++i) {
        const Vector x = probes.row(i).transpose();
        Vector g(cfg.dimension);
        for (Eigen::Index j = 0; j < cfg.dimension; ++j) {
            Vector up = x, down = x;
            up[j] += h;
            down[j] -= h;
            g[j] = (a.expectation(up) - a.expectation(down)) / (2.0 * h);
        }
        CHECK(g.allFinite());
        CHECK(g.norm() < 1e3);
    }

    Matrix omega(1, 3);
    omega << 0.3, -0.2, 0.5;
    const GroundTruthModel single(omega, Vector::Ones(1), Vector::Zero(1), 20.0, 7.0, 0.0);
    for (Eigen::Index i = 0; i < 50; ++i) {
        const Vector x = probes.row(i).head(3).transpose();
        CHECK(single.expectation(x) == doctest::Approx(20.0 * std::cos(omega.row(0).dot(x)) + 7.0).epsilon(1e-14));
    }
}

TEST_CASE("synthetic config json rejects unknown keys")
{
    const SyntheticHighDimConfig cfg;
    const auto back = synthetic_config_from_json(to_json(cfg));
    CHECK(back.dimension == cfg.dimension);
    CHECK(back.n_train == cfg.n_train);
    CHECK_THROWS_AS(synthetic_config_from_json(nlohmann::json{{"dimensions", 3}}), InvalidArgument);
}

TEST_CASE("training distribution construction")
{
    SyntheticHighDimConfig cfg;
    cfg.n_train = 2000;
    cfg.probe_count = 20000;
    const auto gt = synthetic_ground_truth(cfg, RngStream(4, 1));
    const auto prob = build_training_distribution(gt, cfg, RngStream(4, 10));
    CHECK(prob.data.size() == 2000);
    CHECK(prob.data.dimension() == cfg.dimension);

    // Rebuild the base cloud from the documented substream.
    RngStream cloud_rng = RngStream(4, 10).substream(1);
    Matrix cloud(4000, cfg.dimension);
    for (Eigen::Index i = 0; i < 4000; ++i)
        for (Eigen::Index j = 0; j < cfg.dimension; ++j)
            cloud(i, j) = cloud_rng.normal();
    const Vector e = gt.expectation_rows(cloud);
    const double cut = ref::percentile(std::vector<double>(e.data(), e.data() + e.size()), 80.0);
    double kept_sum = 0.0;
    int kept = 0;
    for (Eigen::Index i = 0; i < e.size(); ++i)
        if (e[i] <= cut) {
            kept_sum += e[i];
            ++kept;
        }
    CHECK(kept_sum / kept < e.mean());

    RngStream draw(5, 0);
    const Vector heads = gt.expectation_rows(prob.training_model.sample(100000, draw));
    CHECK(ref::percentile(std::vector<double>(heads.data(), heads.data() + heads.size()), 99.0) < e.maxCoeff());

    SyntheticHighDimConfig all = cfg;
    all.percentile = 100.0;
    const auto full = build_training_distribution(gt, all, RngStream(4, 10));
    Vector mean;
    Matrix cov;
    ref::mvn_fit(cloud, Vector::Ones(4000), mean, cov);
    CHECK((full.training_model.mean() - mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((full.training_model.covariance() - cov).cwiseAbs().maxCoeff() < 1e-10);

    SyntheticHighDimConfig quiet = cfg;
    quiet.label_noise_sd = 0.0;
    const auto gt0 = synthetic_ground_truth(quiet, RngStream(4, 1));
    const auto clean = build_training_distribution(gt0, quiet, RngStream(4, 10));
    CHECK(clean.data.labels() == gt0.expectation_rows(clean.data.features()));

    SyntheticHighDimConfig tiny = cfg;
    tiny.n_train = 20;
    tiny.percentile = 10.0;
    const auto gt_tiny = synthetic_ground_truth(tiny, RngStream(4, 1));
    CHECK_THROWS_AS(build_training_distribution(gt_tiny, tiny, RngStream(4, 10)), FitError);
}

TEST_CASE("superconductivity CSV ingestion")
{
    const std::string good = csv_header(82) + csv_row(1.0, 82) + csv_row(3.0, 82);
    const auto data = ingest_superconductivity_csv(write_temp("good.csv", good).string());
    CHECK(data.size() == 2);
    CHECK(data.dimension() == 81);
    CHECK(data.labels()[0] == 82.0);
    CHECK(data.labels()[1] == 84.0);
    CHECK(std::abs(data.features().col(0).mean()) < 1e-12);

    const std::string bad_cell = csv_header(82) + csv_row(1.0, 82) + csv_row(1.0, 82, "abc", 5);
    try {
        ingest_superconductivity_csv(write_temp("cell.csv", bad_cell).string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    const std::string short_row = csv_header(82) + csv_row(1.0, 80);
    try {
        ingest_superconductivity_csv(write_temp("short.csv", short_row).string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("82") != std::string::npos);
    }

    CHECK_THROWS_AS(ingest_superconductivity_csv("/nonexistent/afmbo/train.csv"), IoError);
}
