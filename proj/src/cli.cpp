#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "afmbo/evalcli.hpp"

namespace afmbo {

namespace {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << content;
    if (!out)
        throw IoError("write failed for " + path.string());
}

Json read_json_config(const std::string& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 0;
};

RunConfig load_run_config(const Options& o)
{
    if (o.config.empty())
        throw ConfigError("--config is required");
    RunConfig c;
    try {
        c = run_config_from_json(read_json_config(o.config));
        if (o.seed)
            c.seeds = {*o.seed};
        if (!o.out.empty())
            c.output_dir = o.out;
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(o.config + ": " + e.what());
    }
    return c;
}

int thread_count(const Options& o)
{
    if (o.threads > 0)
        return o.threads;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string report_text(const RunConfig& c, const SeedArtifacts& a) { return report_json(c, a).dump(2) + "\n"; }

int cmd_run(const Options& o)
{
    const RunConfig c = load_run_config(o);
    std::filesystem::create_directories(c.output_dir);
    const GroundTruthModel gt = run_ground_truth(c);
    const std::filesystem::path dir(c.output_dir);
    std::vector<std::string> lines(c.seeds.size());
    parallel_for(c.seeds.size(), thread_count(o), [&](std::size_t i) {
        const std::uint64_t seed = c.seeds[i];
        const SeedArtifacts a = run_seed(c, gt, seed);
        for (bool af : {false, true}) {
            const Trajectory& t = af ? a.autofocused : a.fixed;
            const std::string stem = artifact_stem(c, af, seed);
            write_file(dir / (stem + ".csv"), trajectory_csv(t, c.q_eval));
            write_file(dir / (stem + ".json"), trajectory_json(t, seed).dump() + "\n");
        }
        write_file(report_path(c, seed), report_text(c, a));
        lines[i] = report_path(c, seed).string();
    });
    for (const auto& l : lines)
        std::cout << l << "\n";
    return 0;
}

int cmd_evaluate(const Options& o)
{
    const RunConfig c = load_run_config(o);
    const GroundTruthModel gt = run_ground_truth(c);
    const std::filesystem::path dir(c.output_dir);
    for (std::uint64_t seed : c.seeds) {
        SeedArtifacts a;
        a.seed = seed;
        a.problem = run_training_problem(c, gt, seed);
        a.train_max_label = a.problem.data.labels().maxCoeff();
        a.baseline_pci = run_baseline_pci(c, gt, a.problem, seed);
        for (bool af : {false, true}) {
            const auto path = dir / (artifact_stem(c, af, seed) + ".json");
            Json j;
            try {
                j = Json::parse(read_file(path));
            } catch (const Json::parse_error& e) {
                throw FormatError(path.string() + ": " + e.what());
            }
            Trajectory t = trajectory_from_json(j, c.eda.samples_per_iter);
            EvalReport r = evaluate_run(t, gt, a.train_max_label, c.q_eval);
            (af ? a.autofocused : a.fixed) = std::move(t);
            (af ? a.autofocused_report : a.fixed_report) = r;
        }
        std::cout << report_text(c, a);
    }
    return 0;
}

int cmd_compare(const Options& o)
{
    const RunConfig c = load_run_config(o);
    static const char* metrics[] = {"median_gt", "max_gt", "pci", "spearman_rho", "rmse"};
    Json per_seed = Json::object();
    Json mean_diff = Json::object();
    for (const char* m : metrics) {
        std::vector<double> diffs;
        for (std::uint64_t seed : c.seeds) {
            const Json r = Json::parse(read_file(report_path(c, seed)));
            const Json& af = r.at("arms").at("autofocused").at(m);
            const Json& fx = r.at("arms").at("fixed").at(m);
            diffs.push_back(af.is_null() || fx.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                         : af.get<double>() - fx.get<double>());
        }
        double sum = 0.0;
        for (double d : diffs)
            sum += d;
        const double mean = sum / static_cast<double>(diffs.size());
        Json arr = Json::array();
        for (double d : diffs)
            arr.push_back(std::isfinite(d) ? Json(d) : Json(nullptr));
        per_seed[m] = std::move(arr);
        mean_diff[m] = std::isfinite(mean) ? Json(mean) : Json(nullptr);
    }
    Json out;
    out["schema_version"] = 1;
    out["config_hash"] = hex64(config_hash(c));
    out["method"] = to_string(c.eda.method);
    out["seeds"] = c.seeds;
    out["difference"] = "autofocused - fixed";
    out["per_seed"] = std::move(per_seed);
    out["mean_diff"] = std::move(mean_diff);
    const std::string text = out.dump(2) + "\n";
    write_file(std::filesystem::path(c.output_dir) / (to_string(c.eda.method) + "_compare.json"), text);
    std::cout << text;
    return 0;
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int cmd_toy_sweep(const Options& o)
{
    ToySweepConfig c;
    if (!o.config.empty()) {
        try {
            c = toy_sweep_config_from_json(read_json_config(o.config));
        } catch (const InvalidArgument& e) {
            throw ConfigError(o.config + ": " + e.what());
        }
    }
    const std::filesystem::path dir(o.out.empty() ? "out" : o.out);
    std::filesystem::create_directories(dir);
    const auto trials = run_toy_sweep(c, o.seed.value_or(0), thread_count(o));

    std::string t = "sigma0,sigma_eps,trial,objective_noaf,objective_af,improvement\n";
    for (const auto& r : trials)
        t += fmt(r.sigma0) + "," + fmt(r.sigma_eps) + "," + std::to_string(r.trial) + "," + fmt(r.objective_fixed) +
             "," + fmt(r.objective_autofocused) + "," + fmt(r.objective_autofocused - r.objective_fixed) + "\n";
    write_file(dir / "toy_trials.csv", t);

    std::string s = "sigma0,sigma_eps,trials,mean_improvement,std_error\n";
    for (const auto& r : summarize_toy_sweep(trials))
        s += fmt(r.sigma0) + "," + fmt(r.sigma_eps) + "," + std::to_string(r.trials) + "," + fmt(r.mean_improvement) +
             "," + fmt(r.std_error) + "\n";
    write_file(dir / "toy_improvement.csv", s);
    std::cout << s;
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv)
{
    CLI::App app{"Autofocused model-based optimization experiments", "afmbo"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed_value = 0;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* cfg = sub->add_option("--config", o.config, "Configuration JSON");
        if (config_required)
            cfg->required();
        sub->add_option("--seed", seed_value, "Seed (overrides the configured seed list)");
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
    };
    auto* run = app.add_subcommand("run", "Run both arms for every seed and write artifacts");
    add_common(run, true);
    auto* evaluate = app.add_subcommand("evaluate", "Recompute reports from persisted trajectories");
    add_common(evaluate, true);
    auto* compare = app.add_subcommand("compare", "Paired mean differences across seeds");
    add_common(compare, true);
    auto* toy = app.add_subcommand("toy-sweep", "Paired toy trials over the (sigma0, sigma_eps) grid");
    add_common(toy, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 1;
    }

    for (auto* sub : {run, evaluate, compare, toy})
        if (sub->parsed() && sub->count("--seed") > 0)
            o.seed = seed_value;

    try {
        if (run->parsed())
            return cmd_run(o);
        if (evaluate->parsed())
            return cmd_evaluate(o);
        if (compare->parsed())
            return cmd_compare(o);
        return cmd_toy_sweep(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace afmbo
