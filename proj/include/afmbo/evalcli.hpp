#pragma once

// Scoring of finished search trajectories against the ground truth, run
// configuration files, persisted artifacts and the command-line runner.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afmbo/benchmarks.hpp"
#include "afmbo/eda.hpp"

namespace afmbo {

struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EvalReport {
    double median_gt = 0.0;
    double max_gt = 0.0;
    double pci = 0.0;
    /// NaN when the best iteration's oracle means or ground truth are constant.
    double spearman_rho = 0.0;
    double rmse = 0.0;
    int best_iteration = 0;  // 1-based
    Eigen::Index selected = 0;
};

nlohmann::json to_json(const EvalReport& r);

/// Pearson correlation of average ranks.
double spearman(const Vector& a, const Vector& b);
/// Ranks 1..n with ties sharing their mean rank.
Vector average_ranks(const Vector& v);

/// Scoring from per-iteration oracle means and ground-truth expectations of
/// the same samples. The best iteration maximizes the q_eval percentile of
/// its oracle means, earliest on ties.
EvalReport evaluate_iterations(const std::vector<Vector>& oracle_means, const std::vector<Vector>& gt_values,
                               double train_max_label, double q_eval);

/// Uses each record's end-of-iteration oracle means.
EvalReport evaluate_run(const Trajectory& trajectory, const GroundTruthModel& gt, double train_max_label,
                        double q_eval = 80.0);

/// 100 x fraction of n draws from p0 whose expectation exceeds train_max_label.
double naive_baseline_pci(const MultivariateGaussianModel& training_model, const GroundTruthModel& gt, Eigen::Index n,
                          double train_max_label, RngStream rng);

// ---------------------------------------------------------------------------
// Configuration

enum class OracleKind { MlpEnsemble, KernelRidge };

struct RunConfig {
    SyntheticHighDimConfig problem;
    std::uint64_t problem_seed = 0;
    EdaConfig eda;
    /// Flattened with alpha 0.2 and self-normalized.
    AutofocusConfig autofocus{
        .flatten_alpha = 0.2, .self_normalize = true, .min_effective_sample_size = 0.0, .weight_clip = std::nullopt};
    OracleKind oracle = OracleKind::MlpEnsemble;
    MlpConfig mlp;
    KernelRidgeParams krr;
    std::vector<std::uint64_t> seeds{0};
    std::string output_dir = "out";
    double q_eval = 80.0;
    int baseline_samples = 100000;

    void validate() const;
};

/// Rejects unknown keys at every level.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
/// FNV-1a of the canonical dump of to_json(c) without output_dir and seeds.
std::uint64_t config_hash(const RunConfig& c);

struct ToySweepConfig {
    std::vector<double> sigma0{1.6, 1.8, 2.0, 2.2};
    std::vector<double> sigma_eps{0.0, 0.13, 0.25, 0.38};
    int trials = 50;
    ToyProblemConfig base;

    void validate() const;
};

ToySweepConfig toy_sweep_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Runs and artifacts

struct SeedArtifacts {
    std::uint64_t seed = 0;
    TrainingProblem problem;
    double train_max_label = 0.0;
    double baseline_pci = 0.0;
    Trajectory fixed;
    Trajectory autofocused;
    EvalReport fixed_report;
    EvalReport autofocused_report;
};

GroundTruthModel run_ground_truth(const RunConfig& c);
TrainingProblem run_training_problem(const RunConfig& c, const GroundTruthModel& gt, std::uint64_t seed);
/// Naive baseline of a seed: baseline_samples fresh draws from its p0.
double run_baseline_pci(const RunConfig& c, const GroundTruthModel& gt, const TrainingProblem& problem,
                        std::uint64_t seed);
/// Both arms of one seed sharing data, initial oracle and initial search model.
SeedArtifacts run_seed(const RunConfig& c, const GroundTruthModel& gt, std::uint64_t seed);

/// Runs fn(0..n-1) on up to `threads` workers; rethrows the first failure
/// by index after all jobs finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct ToyTrialResult {
    double sigma0 = 0.0;
    double sigma_eps = 0.0;
    int trial = 0;
    double objective_fixed = 0.0;
    double objective_autofocused = 0.0;
};

struct ToyCellSummary {
    double sigma0 = 0.0;
    double sigma_eps = 0.0;
    int trials = 0;
    double mean_improvement = 0.0;
    double std_error = 0.0;  // sample sd / sqrt(trials)
};

/// Both arms on one shared training set. `cell` indexes the (sigma0, sigma_eps) pair.
ToyTrialResult run_toy_trial(const ToyProblemConfig& config, std::uint64_t seed, std::size_t cell, int trial);
/// Cells in row-major order over (sigma0, sigma_eps), trials innermost.
std::vector<ToyTrialResult> run_toy_sweep(const ToySweepConfig& config, std::uint64_t seed, int threads);
std::vector<ToyCellSummary> summarize_toy_sweep(const std::vector<ToyTrialResult>& trials);

/// Per-iteration summary; q_oracle is the q_eval percentile of the end-of-iteration oracle means.
std::string trajectory_csv(const Trajectory& t, double q_eval);
nlohmann::json trajectory_json(const Trajectory& t, std::uint64_t seed);
/// Rebuilds the trajectory with samples regenerated from the stored
/// sampling models and stream ids.
Trajectory trajectory_from_json(const nlohmann::json& j, Eigen::Index samples_per_iter);
nlohmann::json report_json(const RunConfig& c, const SeedArtifacts& a);

std::string artifact_stem(const RunConfig& c, bool autofocus, std::uint64_t seed);
std::filesystem::path report_path(const RunConfig& c, std::uint64_t seed);

/// Returns the process exit code: 0 success, 1 usage or config error,
/// 2 runtime error.
int cli_main(int argc, const char* const* argv);

}  // namespace afmbo
