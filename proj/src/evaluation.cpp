#include "afmbo/evalcli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>

namespace afmbo {

nlohmann::json to_json(const EvalReport& r)
{
    nlohmann::json j;
    j["median_gt"] = r.median_gt;
    j["max_gt"] = r.max_gt;
    j["pci"] = r.pci;
    j["spearman_rho"] = std::isnan(r.spearman_rho) ? nlohmann::json(nullptr) : nlohmann::json(r.spearman_rho);
    j["rmse"] = r.rmse;
    j["best_iteration"] = r.best_iteration;
    j["selected"] = r.selected;
    return j;
}

Vector average_ranks(const Vector& v)
{
    const auto n = v.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
    Vector ranks(n);
    for (std::size_t start = 0; start < order.size();) {
        std::size_t end = start + 1;
        while (end < order.size() && v[order[end]] == v[order[start]])
            ++end;
        const double r = 0.5 * static_cast<double>(start + 1 + end);  // mean of start+1 .. end
        for (std::size_t k = start; k < end; ++k)
            ranks[order[k]] = r;
        start = end;
    }
    return ranks;
}

double spearman(const Vector& a, const Vector& b)
{
    if (a.size() != b.size() || a.size() < 2)
        throw InvalidArgument("spearman needs two vectors of equal length >= 2");
    if (!a.allFinite() || !b.allFinite())
        throw InvalidArgument("spearman inputs must be finite");
    const Vector ra = average_ranks(a);
    const Vector rb = average_ranks(b);
    const Vector ca = ra.array() - ra.mean();
    const Vector cb = rb.array() - rb.mean();
    const double va = ca.squaredNorm();
    const double vb = cb.squaredNorm();
    if (va == 0.0 || vb == 0.0)
        throw EvaluationError("rank correlation undefined: an input has zero rank variance");
    return std::clamp(ca.dot(cb) / std::sqrt(va * vb), -1.0, 1.0);
}

EvalReport evaluate_iterations(const std::vector<Vector>& oracle_means, const std::vector<Vector>& gt_values,
                               double train_max_label, double q_eval)
{
    if (oracle_means.empty())
        throw InvalidArgument("trajectory has no iterations");
    if (oracle_means.size() != gt_values.size())
        throw InvalidArgument("one ground-truth vector per iteration is required");
    if (!(q_eval >= 0.0 && q_eval <= 100.0))
        throw InvalidArgument("q_eval must lie in [0, 100]");

    std::size_t best = 0;
    double best_q = -kInf;
    for (std::size_t t = 0; t < oracle_means.size(); ++t) {
        if (oracle_means[t].size() < 2 || gt_values[t].size() != oracle_means[t].size())
            throw InvalidArgument("every iteration needs at least two samples with ground truth");
        const double q = percentile(oracle_means[t], q_eval);
        if (q > best_q) {
            best_q = q;
            best = t;
        }
    }

    const Vector& mu = oracle_means[best];
    const Vector& gt = gt_values[best];
    if (gt.hasNaN())
        throw EvaluationError("ground-truth expectation is NaN");

    EvalReport r;
    r.best_iteration = static_cast<int>(best) + 1;
    try {
        r.spearman_rho = spearman(mu, gt);
    } catch (const EvaluationError&) {
        r.spearman_rho = std::numeric_limits<double>::quiet_NaN();
    }
    r.rmse = std::sqrt((mu - gt).squaredNorm() / static_cast<double>(mu.size()));

    std::vector<double> selected;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        if (mu[i] >= best_q)
            selected.push_back(gt[i]);
    if (selected.empty())
        throw EvaluationError("empty selection");
    r.selected = static_cast<Eigen::Index>(selected.size());
    r.median_gt = percentile(std::span<const double>(selected), 50.0);
    r.max_gt = *std::max_element(selected.begin(), selected.end());
    const auto above = std::count_if(selected.begin(), selected.end(), [&](double g) { return g > train_max_label; });
    r.pci = 100.0 * static_cast<double>(above) / static_cast<double>(selected.size());
    return r;
}

EvalReport evaluate_run(const Trajectory& trajectory, const GroundTruthModel& gt, double train_max_label,
                        double q_eval)
{
    std::vector<Vector> means, truth;
    for (const auto& rec : trajectory.records) {
        means.push_back(rec.eval_means);
        truth.push_back(gt.expectation_rows(rec.samples));
    }
    return evaluate_iterations(means, truth, train_max_label, q_eval);
}

double naive_baseline_pci(const MultivariateGaussianModel& training_model, const GroundTruthModel& gt, Eigen::Index n,
                          double train_max_label, RngStream rng)
{
    if (n < 1)
        throw InvalidArgument("baseline needs at least one draw");
    Eigen::Index above = 0;
    // Chunked so memory stays bounded for large n.
    constexpr Eigen::Index chunk = 10000;
    for (Eigen::Index done = 0; done < n; done += chunk) {
        const Eigen::Index m = std::min(chunk, n - done);
        const Vector e = gt.expectation_rows(training_model.sample(m, rng));
        above += (e.array() > train_max_label).count();
    }
    return 100.0 * static_cast<double>(above) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

using Json = nlohmann::json;

template <class F>
void read_object(const Json& j, const std::string& what, F&& handle)
{
    if (!j.is_object())
        throw InvalidArgument(what + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        try {
            known = handle(key, value);
        } catch (const Json::exception& e) {
            throw InvalidArgument(what + "." + key + ": " + e.what());
        }
        if (!known)
            throw InvalidArgument("unknown " + what + " key: " + key);
    }
}

EdaConfig eda_from_json(const Json& j)
{
    EdaConfig c;
    read_object(j, "eda", [&](const std::string& k, const Json& v) {
        if (k == "method") c.method = parse_method(v.get<std::string>());
        else if (k == "iterations") c.iterations = v.get<int>();
        else if (k == "samples_per_iter") c.samples_per_iter = v.get<int>();
        else if (k == "percentile") c.percentile = v.get<double>();
        else if (k == "rwr_gamma") c.rwr_gamma = v.get<double>();
        else if (k == "cmaes_step_size") c.cmaes_step_size = v.get<double>();
        else if (k == "shrinkage") c.shrinkage = v.get<double>();
        else return false;
        return true;
    });
    return c;
}

AutofocusConfig autofocus_from_json(const Json& j)
{
    AutofocusConfig c = RunConfig{}.autofocus;
    read_object(j, "autofocus", [&](const std::string& k, const Json& v) {
        if (k == "flatten_alpha") c.flatten_alpha = v.get<double>();
        else if (k == "self_normalize") c.self_normalize = v.get<bool>();
        else if (k == "min_effective_sample_size") c.min_effective_sample_size = v.get<double>();
        else if (k == "weight_clip") {
            if (v.is_null()) c.weight_clip.reset();
            else c.weight_clip = v.get<double>();
        } else return false;
        return true;
    });
    return c;
}

KernelRidgeParams krr_from_json(const Json& j)
{
    KernelRidgeParams p;
    read_object(j, "krr", [&](const std::string& k, const Json& v) {
        if (k == "ridge") p.ridge = v.get<double>();
        else if (k == "length_scale_inverse") p.length_scale_inverse = v.get<double>();
        else if (k == "cv_folds") p.cv_folds = v.get<int>();
        else if (k == "fold_seed") p.fold_seed = v.get<std::uint64_t>();
        else return false;
        return true;
    });
    if (!(p.ridge > 0.0) || !(p.length_scale_inverse > 0.0) || p.cv_folds < 2)
        throw InvalidArgument("krr needs ridge > 0, length_scale_inverse > 0 and cv_folds >= 2");
    return p;
}

Json oracle_to_json(const RunConfig& c)
{
    Json j;
    j["kind"] = c.oracle == OracleKind::MlpEnsemble ? "mlp" : "krr";
    j["mlp"] = to_json(c.mlp);
    j["krr"] = {{"ridge", c.krr.ridge},
                {"length_scale_inverse", c.krr.length_scale_inverse},
                {"cv_folds", c.krr.cv_folds},
                {"fold_seed", c.krr.fold_seed}};
    return j;
}

}  // namespace

void RunConfig::validate() const
{
    problem.validate();
    eda.validate();
    autofocus.validate();
    if (seeds.empty())
        throw InvalidArgument("seeds must not be empty");
    auto sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw InvalidArgument("seeds must be distinct");
    if (!(q_eval > 0.0 && q_eval < 100.0))
        throw InvalidArgument("q_eval must lie in (0, 100)");
    if (baseline_samples < 1)
        throw InvalidArgument("baseline_samples must be positive");
    if (output_dir.empty())
        throw InvalidArgument("output_dir must not be empty");
}

RunConfig run_config_from_json(const Json& j)
{
    RunConfig c;
    read_object(j, "config", [&](const std::string& k, const Json& v) {
        if (k == "problem") c.problem = synthetic_config_from_json(v);
        else if (k == "problem_seed") c.problem_seed = v.get<std::uint64_t>();
        else if (k == "eda") c.eda = eda_from_json(v);
        else if (k == "autofocus") c.autofocus = autofocus_from_json(v);
        else if (k == "oracle") {
            read_object(v, "oracle", [&](const std::string& ok, const Json& ov) {
                if (ok == "kind") {
                    const auto kind = ov.get<std::string>();
                    if (kind == "mlp") c.oracle = OracleKind::MlpEnsemble;
                    else if (kind == "krr") c.oracle = OracleKind::KernelRidge;
                    else throw InvalidArgument("oracle.kind must be \"mlp\" or \"krr\"");
                } else if (ok == "mlp") c.mlp = mlp_config_from_json(ov);
                else if (ok == "krr") c.krr = krr_from_json(ov);
                else return false;
                return true;
            });
        } else if (k == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
        else if (k == "output_dir") c.output_dir = v.get<std::string>();
        else if (k == "q_eval") c.q_eval = v.get<double>();
        else if (k == "baseline_samples") c.baseline_samples = v.get<int>();
        else return false;
        return true;
    });
    c.validate();
    return c;
}

Json to_json(const RunConfig& c)
{
    Json j;
    j["problem"] = to_json(c.problem);
    j["problem_seed"] = c.problem_seed;
    j["eda"] = {{"method", to_string(c.eda.method)},
                {"iterations", c.eda.iterations},
                {"samples_per_iter", c.eda.samples_per_iter},
                {"percentile", c.eda.percentile},
                {"rwr_gamma", c.eda.rwr_gamma},
                {"cmaes_step_size", c.eda.cmaes_step_size},
                {"shrinkage", c.eda.shrinkage}};
    j["autofocus"] = {{"flatten_alpha", c.autofocus.flatten_alpha},
                      {"self_normalize", c.autofocus.self_normalize},
                      {"min_effective_sample_size", c.autofocus.min_effective_sample_size},
                      {"weight_clip", c.autofocus.weight_clip ? Json(*c.autofocus.weight_clip) : Json(nullptr)}};
    j["oracle"] = oracle_to_json(c);
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir;
    j["q_eval"] = c.q_eval;
    j["baseline_samples"] = c.baseline_samples;
    return j;
}

std::uint64_t config_hash(const RunConfig& c)
{
    Json j = to_json(c);
    j.erase("output_dir");
    j.erase("seeds");
    const std::string s = j.dump();
    return fnv1a(s.data(), s.size());
}

void ToySweepConfig::validate() const
{
    if (sigma0.empty() || sigma_eps.empty())
        throw InvalidArgument("toy sweep grid must not be empty");
    if (trials < 2)
        throw InvalidArgument("toy sweep needs at least two trials per cell");
    base.validate();
    for (double s : sigma0)
        if (!(s > 0.0))
            throw InvalidArgument("sigma0 values must be positive");
    for (double s : sigma_eps)
        if (!(s >= 0.0))
            throw InvalidArgument("sigma_eps values must be nonnegative");
}

ToySweepConfig toy_sweep_config_from_json(const Json& j)
{
    ToySweepConfig c;
    read_object(j, "toy", [&](const std::string& k, const Json& v) {
        if (k == "sigma0") c.sigma0 = v.get<std::vector<double>>();
        else if (k == "sigma_eps") c.sigma_eps = v.get<std::vector<double>>();
        else if (k == "trials") c.trials = v.get<int>();
        else if (k == "n_train") c.base.n_train = v.get<int>();
        else if (k == "grid_nodes") c.base.grid_nodes = v.get<int>();
        else if (k == "iterations") c.base.iterations = v.get<int>();
        else if (k == "scoring") {
            const auto s = v.get<std::string>();
            if (s == "own_final_oracle") c.base.scoring = ToyScoring::OwnFinalOracle;
            else if (s == "initial_oracle") c.base.scoring = ToyScoring::InitialOracle;
            else throw InvalidArgument("scoring must be \"own_final_oracle\" or \"initial_oracle\"");
        } else if (k == "krr") c.base.oracle = krr_from_json(v);
        else return false;
        return true;
    });
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

// Stream ids under each trial seed.
constexpr std::uint64_t kTrainingStream = 10;
constexpr std::uint64_t kOracleStream = 20;
constexpr std::uint64_t kSearchStream = 30;
constexpr std::uint64_t kBaselineStream = 40;
constexpr std::uint64_t kToyStreamBase = 0x746f7900;

OraclePtr train_initial_oracle(const RunConfig& c, const LabeledDataset& data, std::uint64_t seed)
{
    const std::uint64_t oracle_seed = splitmix64(seed ^ splitmix64(kOracleStream));
    const auto ones = WeightVector::ones(data.size());
    if (c.oracle == OracleKind::MlpEnsemble)
        return MlpEnsembleOracle::train(data, ones, c.mlp, oracle_seed);
    KernelRidgeParams p = c.krr;
    p.fold_seed ^= oracle_seed;
    return KernelRidgeOracle::train(data, ones, p);
}

}  // namespace

GroundTruthModel run_ground_truth(const RunConfig& c)
{
    return synthetic_ground_truth(c.problem, RngStream(c.problem_seed, 1));
}

TrainingProblem run_training_problem(const RunConfig& c, const GroundTruthModel& gt, std::uint64_t seed)
{
    return build_training_distribution(gt, c.problem, RngStream(seed, kTrainingStream));
}

double run_baseline_pci(const RunConfig& c, const GroundTruthModel& gt, const TrainingProblem& problem,
                        std::uint64_t seed)
{
    return naive_baseline_pci(problem.training_model, gt, c.baseline_samples, problem.data.labels().maxCoeff(),
                              RngStream(seed, kBaselineStream));
}

SeedArtifacts run_seed(const RunConfig& c, const GroundTruthModel& gt, std::uint64_t seed)
{
    c.validate();
    SeedArtifacts a;
    a.seed = seed;
    a.problem = run_training_problem(c, gt, seed);
    const LabeledDataset& data = a.problem.data;
    a.train_max_label = data.labels().maxCoeff();
    a.baseline_pci = run_baseline_pci(c, gt, a.problem, seed);

    const OraclePtr oracle = train_initial_oracle(c, data, seed);
    const RngStream search_rng(seed, kSearchStream);

    EdaConfig fixed = c.eda;
    fixed.autofocus.reset();
    a.fixed = run_eda(fixed, data, oracle, a.problem.training_model, search_rng);
    EdaConfig af = c.eda;
    af.autofocus = c.autofocus;
    a.autofocused = run_eda(af, data, oracle, a.problem.training_model, search_rng);

    a.fixed_report = evaluate_run(a.fixed, gt, a.train_max_label, c.q_eval);
    a.autofocused_report = evaluate_run(a.autofocused, gt, a.train_max_label, c.q_eval);
    return a;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn)
{
    std::vector<std::exception_ptr> errors(n);
    const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : static_cast<std::size_t>(threads), 1,
                                                        std::max<std::size_t>(n, 1));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(work);
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

ToyTrialResult run_toy_trial(const ToyProblemConfig& config, std::uint64_t seed, std::size_t cell, int trial)
{
    RngStream rng = RngStream(seed, kToyStreamBase + cell).substream(static_cast<std::uint64_t>(trial));
    const LabeledDataset data = toy_training_data(config, rng);
    ToyTrialResult r;
    r.sigma0 = config.sigma0;
    r.sigma_eps = config.sigma_eps;
    r.trial = trial;
    r.objective_fixed = run_toy_cbas(config, false, data).objective;
    r.objective_autofocused = run_toy_cbas(config, true, data).objective;
    return r;
}

std::vector<ToyTrialResult> run_toy_sweep(const ToySweepConfig& config, std::uint64_t seed, int threads)
{
    config.validate();
    const std::size_t cells = config.sigma0.size() * config.sigma_eps.size();
    const auto per_cell = static_cast<std::size_t>(config.trials);
    std::vector<ToyTrialResult> out(cells * per_cell);
    parallel_for(out.size(), threads, [&](std::size_t job) {
        const std::size_t cell = job / per_cell;
        ToyProblemConfig pc = config.base;
        pc.sigma0 = config.sigma0[cell / config.sigma_eps.size()];
        pc.sigma_eps = config.sigma_eps[cell % config.sigma_eps.size()];
        out[job] = run_toy_trial(pc, seed, cell, static_cast<int>(job % per_cell));
    });
    return out;
}

std::vector<ToyCellSummary> summarize_toy_sweep(const std::vector<ToyTrialResult>& trials)
{
    std::vector<ToyCellSummary> out;
    std::vector<std::vector<double>> diffs;
    for (const auto& t : trials) {
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const ToyCellSummary& s) { return s.sigma0 == t.sigma0 && s.sigma_eps == t.sigma_eps; });
        if (it == out.end()) {
            out.push_back({t.sigma0, t.sigma_eps, 0, 0.0, 0.0});
            diffs.emplace_back();
            it = out.end() - 1;
        }
        diffs[static_cast<std::size_t>(it - out.begin())].push_back(t.objective_autofocused - t.objective_fixed);
    }
    for (std::size_t c = 0; c < out.size(); ++c) {
        const auto& d = diffs[c];
        const double n = static_cast<double>(d.size());
        const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : d)
            ss += (v - mean) * (v - mean);
        out[c].trials = static_cast<int>(d.size());
        out[c].mean_improvement = mean;
        out[c].std_error = d.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace {

std::string fmt_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_from(const Json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string trajectory_csv(const Trajectory& t, double q_eval)
{
    std::string s = "iteration,gamma_t,ess,renyi2,max_weight_share,retrained,q_oracle,mean_p10,mean_p50,mean_p90,"
                    "mean_max,training_ess\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : t.records) {
        const auto& d = r.diagnostics;
        s += std::to_string(r.iteration) + "," + fmt_double(r.gamma) + "," +
             fmt_double(d ? d->effective_sample_size : nan) + "," + fmt_double(d ? d->renyi2_plugin : nan) + "," +
             fmt_double(d ? d->max_weight_share : nan) + "," + (r.retrained ? "1" : "0") + "," +
             fmt_double(percentile(r.eval_means, q_eval)) + "," + fmt_double(percentile(r.eval_means, 10.0)) + "," +
             fmt_double(percentile(r.eval_means, 50.0)) + "," + fmt_double(percentile(r.eval_means, 90.0)) + "," +
             fmt_double(r.eval_means.maxCoeff()) + "," + fmt_double(r.training_ess) + "\n";
    }
    return s;
}

Json trajectory_json(const Trajectory& t, std::uint64_t seed)
{
    Json j;
    j["schema_version"] = 1;
    j["method"] = to_string(t.method);
    j["autofocus"] = t.autofocus;
    j["seed"] = seed;
    j["termination"] = t.termination;
    j["initial_model"] = t.initial_model.to_json();
    j["first_sampling_model"] = t.first_sampling_model.to_json();
    j["initial_oracle_hash"] = hex64(t.initial_oracle_hash);
    j["search_hash"] = hex64(t.search_hash());
    Json its = Json::array();
    for (const auto& r : t.records) {
        Json it;
        it["iteration"] = r.iteration;
        it["sample_seed"] = r.sample_seed;
        it["sample_stream"] = r.sample_stream;
        it["gamma"] = number_or_null(r.gamma);
        it["retrained"] = r.retrained;
        it["training_ess"] = number_or_null(r.training_ess);
        if (r.diagnostics)
            it["diagnostics"] = {{"ess", r.diagnostics->effective_sample_size},
                                 {"renyi2", number_or_null(r.diagnostics->renyi2_plugin)},
                                 {"max_weight_share", r.diagnostics->max_weight_share}};
        if (!r.event.empty())
            it["event"] = r.event;
        it["search_model"] = r.search_model.to_json();
        it["eval_means"] = to_vec(r.eval_means);
        its.push_back(std::move(it));
    }
    j["iterations"] = std::move(its);
    j["final_oracle"] = t.final_oracle ? t.final_oracle->to_json() : Json(nullptr);
    return j;
}

Trajectory trajectory_from_json(const Json& j, Eigen::Index samples_per_iter)
{
    try {
        if (j.at("schema_version").get<int>() != 1)
            throw FormatError("unsupported trajectory schema version");
        Trajectory t;
        t.method = parse_method(j.at("method").get<std::string>());
        t.autofocus = j.at("autofocus").get<bool>();
        t.termination = j.at("termination").get<std::string>();
        t.initial_model = MultivariateGaussianModel::from_json(j.at("initial_model"));
        t.first_sampling_model = MultivariateGaussianModel::from_json(j.at("first_sampling_model"));
        t.initial_oracle_hash = std::stoull(j.at("initial_oracle_hash").get<std::string>(), nullptr, 16);
        for (const auto& it : j.at("iterations")) {
            IterationRecord r;
            r.iteration = it.at("iteration").get<int>();
            r.sample_seed = it.at("sample_seed").get<std::uint64_t>();
            r.sample_stream = it.at("sample_stream").get<std::uint64_t>();
            r.gamma = number_from(it.at("gamma"));
            r.retrained = it.at("retrained").get<bool>();
            r.training_ess = number_from(it.at("training_ess"));
            if (it.contains("diagnostics")) {
                const auto& d = it.at("diagnostics");
                r.diagnostics = WeightDiagnostics{d.at("ess").get<double>(), number_from(d.at("renyi2")),
                                                  d.at("max_weight_share").get<double>()};
            }
            if (it.contains("event"))
                r.event = it.at("event").get<std::string>();
            r.search_model = MultivariateGaussianModel::from_json(it.at("search_model"));
            const auto means = it.at("eval_means").get<std::vector<double>>();
            r.eval_means = Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
            t.records.push_back(std::move(r));
        }
        for (std::size_t k = 0; k < t.records.size(); ++k) {
            auto& r = t.records[k];
            RngStream rng(r.sample_seed, r.sample_stream);
            r.samples = t.sampling_model(static_cast<int>(k) + 1).sample(samples_per_iter, rng);
            if (r.samples.rows() != r.eval_means.size())
                throw FormatError("stored oracle means do not match samples_per_iter");
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed trajectory JSON: ") + e.what());
    }
}

Json report_json(const RunConfig& c, const SeedArtifacts& a)
{
    Json j;
    j["schema_version"] = 1;
    j["config_hash"] = hex64(config_hash(c));
    j["method"] = to_string(c.eda.method);
    j["seed"] = a.seed;
    j["problem_seed"] = c.problem_seed;
    j["q_eval"] = c.q_eval;
    j["train_max_label"] = a.train_max_label;
    j["naive_baseline_pci"] = a.baseline_pci;
    const auto& data = a.problem.data;
    auto h = hash_doubles({data.features().data(), static_cast<std::size_t>(data.features().size())});
    h = hash_doubles({data.labels().data(), static_cast<std::size_t>(data.labels().size())}, h);
    j["iteration0"] = {{"training_data_hash", hex64(h)},
                       {"training_model_hash", hex64(a.problem.training_model.hash())},
                       {"fixed_initial_model_hash", hex64(a.fixed.initial_model.hash())},
                       {"autofocused_initial_model_hash", hex64(a.autofocused.initial_model.hash())},
                       {"fixed_initial_oracle_hash", hex64(a.fixed.initial_oracle_hash)},
                       {"autofocused_initial_oracle_hash", hex64(a.autofocused.initial_oracle_hash)}};
    Json fixed = to_json(a.fixed_report);
    fixed["termination"] = a.fixed.termination;
    fixed["iterations"] = a.fixed.records.size();
    Json af = to_json(a.autofocused_report);
    af["termination"] = a.autofocused.termination;
    af["iterations"] = a.autofocused.records.size();
    j["arms"] = {{"fixed", std::move(fixed)}, {"autofocused", std::move(af)}};
    return j;
}

std::string artifact_stem(const RunConfig& c, bool autofocus, std::uint64_t seed)
{
    return to_string(c.eda.method) + (autofocus ? "_af_" : "_noaf_") + std::to_string(seed);
}

std::filesystem::path report_path(const RunConfig& c, std::uint64_t seed)
{
    return std::filesystem::path(c.output_dir) / (to_string(c.eda.method) + "_report_" + std::to_string(seed) + ".json");
}

}  // namespace afmbo
