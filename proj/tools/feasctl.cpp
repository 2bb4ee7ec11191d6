// feasctl: run iterations, diagnose operators, and benchmark CycP / BTM /
// CADRA on anchored-orthant feasibility problems.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include "feasibility/feasibility.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace feasibility;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    std::optional<std::size_t> max_iter;
    int verbosity = 0;
};

fs::path prepare_out_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (!fs::is_directory(p)) throw ConfigError("--out", "cannot create directory '" + dir + "'");
    return p;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

/// "5", "3..10" or "3-10".
std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
    auto parse = [&](const std::string& s) -> std::size_t {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(s, &used);
            if (used != s.size() || v == 0) throw std::invalid_argument(s);
            return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ConfigError("--m", "expected a positive integer or a range like 1..50, got '" + text + "'");
        }
    };
    for (const std::string sep : {"..", "-"}) {
        if (auto pos = text.find(sep); pos != std::string::npos) {
            const auto lo = parse(text.substr(0, pos));
            const auto hi = parse(text.substr(pos + sep.size()));
            if (lo > hi) throw ConfigError("--m", "empty range '" + text + "'");
            return {lo, hi};
        }
    }
    const auto v = parse(text);
    return {v, v};
}

int cmd_run(const CommonFlags& flags) {
    const auto j = load_json_file(flags.config_path);
    RunConfig cfg = run_config_from_json(j);
    if (flags.seed) cfg.schedule = cfg.schedule.with_seed(*flags.seed);
    if (flags.max_iter) cfg.max_iter = *flags.max_iter;
    if (flags.tol) {
        if (auto* s = std::get_if<ResidualBelow>(&cfg.stop)) s->tol = *flags.tol;
        if (auto* s = std::get_if<ProbeBelow>(&cfg.stop)) s->tol = *flags.tol;
    }
    const auto out = prepare_out_dir(flags.out_dir);
    RunTrace trace;
    try {
        trace = run(cfg);
    } catch (const InvalidArgument& e) {
        const std::string what = e.what();
        throw ConfigError(what.find("schedule") != std::string::npos ? "schedule" : "operators", what);
    }
    std::ostringstream csv;
    write_trace_csv(trace, csv);
    write_file(out / "trace.csv", csv.str());
    auto meta = trace_metadata(trace);
    meta["config"] = flags.config_path;
    write_file(out / "run_meta.json", meta.dump(2) + "\n");
    if (flags.verbosity > 0) {
        std::cerr << "stop: " << to_string(trace.stop_reason) << " after " << trace.iterations_used << " iterations\n";
    }
    return 0;
}

int cmd_diagnose(const CommonFlags& flags, std::optional<double> rho_flag, std::optional<std::size_t> samples_flag,
                 bool surrogate) {
    const auto j = load_json_file(flags.config_path);
    const auto& op_json = config_detail::require(j, "operator", "");
    const FixedPointMap map = operator_from_json(op_json, "operator");
    const double rho = rho_flag ? *rho_flag : j.value("rho", 1.0);
    const std::size_t samples = samples_flag ? *samples_flag : j.value("samples", std::size_t{10'000});
    const std::uint64_t seed = flags.seed ? *flags.seed : j.value("seed", std::uint64_t{0});
    if (!(rho > 0.0)) throw ConfigError("rho", "must be > 0");
    if (samples == 0) throw ConfigError("samples", "must be >= 1");

    json report;
    report["operator"] = map.label();
    report["rho"] = rho;
    report["samples"] = samples;
    report["seed"] = seed;
    for (const char* key : {"kappa_hat", "sigma", "alpha", "beta", "gamma", "mu_hat", "theta_hat"}) report[key] = nullptr;
    report["violations"] = json::array();

    std::optional<double> sigma;
    if (map.averagedness()) {
        sigma = sigma_of(map);
        report["sigma"] = *sigma;
    }
    if (map.fix_distance()) {
        const auto est = estimate_kappa(map, rho, samples, seed);
        report["kappa_hat"] = std::isfinite(est.kappa_hat) ? json(est.kappa_hat) : json("inf");
        report["kappa_regularity_violated"] = est.violated;
        if (sigma && std::isfinite(est.kappa_hat) && est.kappa_hat > 0.0) {
            const auto k = key_constants(est.kappa_hat, *sigma);
            report["alpha"] = k.alpha;
            report["beta"] = k.beta;
            report["gamma"] = k.gamma;
            const auto rep = verify_key_inequalities(map, *map.fix_distance(), k, rho, samples, seed + 1);
            report["violations"].push_back({{"inequality", "key1"}, {"max_violation", rep.key1}});
            report["violations"].push_back({{"inequality", "key2_lower"}, {"max_violation", rep.key2_lower}});
            report["violations"].push_back({{"inequality", "key2_upper"}, {"max_violation", rep.key2_upper}});
            report["violations"].push_back({{"inequality", "key3"}, {"max_violation", rep.key3}});
        }
    }
    if (sigma && map.fix_projection()) {
        double worst = 0.0;
        const auto xs = sample_ball(map.dimension(), rho, samples, seed + 2);
        const auto ws = sample_ball(map.dimension(), rho, samples, seed + 3);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            worst = std::max(worst, averaged_inequality_excess(map, *sigma, xs[i], (*map.fix_projection())(ws[i])));
        }
        report["violations"].push_back({{"inequality", "averaged"}, {"max_violation", worst}});
    }

    // set family: explicit, or the pair of a DR operator
    std::vector<SetDescriptor> family;
    if (j.contains("family")) {
        family = sets_from_json(j["family"], "family");
    } else if (op_json.value("op", "") == "dr") {
        family = {set_from_json(op_json["a"], "operator.a"), set_from_json(op_json["b"], "operator.b")};
    }
    if (!family.empty()) {
        IntersectionOracle oracle;
        try {
            oracle = intersection_oracle(family, surrogate);
        } catch (const InvalidArgument& e) {
            throw ConfigError("family", e.what());
        }
        try {
            const auto mu = estimate_family_mu(family, oracle.distance, rho, samples, seed + 4);
            report["mu_hat"] = mu.mu_hat;
        } catch (const InvalidArgument& e) {
            report["mu_note"] = e.what();
        }
        report["mu_surrogate"] = oracle.surrogate;
    }
    if (op_json.value("op", "") == "dr" && family.size() == 2) {
        Vector center;
        if (j.contains("center")) {
            center = config_detail::vector(j["center"], "center");
        } else {
            center = dykstra_projection(family, Vector::Zero(static_cast<Eigen::Index>(map.dimension())));
        }
        try {
            const auto tb = check_transversality_bound(family[0], family[1], center, rho, samples, seed + 5);
            report["theta_hat"] = tb.theta_hat;
            report["theta_source"] = "transversality";
        } catch (const InvalidArgument& e) {
            throw ConfigError("center", e.what());
        }
    } else if (map.fix_projection()) {
        const auto ang = check_angle_condition(map, rho, samples, seed + 5);
        report["theta_hat"] = ang.theta_hat;
        report["theta_source"] = "angle";
        report["angle_kappa_bound"] = std::isfinite(ang.kappa_bound) ? json(ang.kappa_bound) : json("inf");
    }

    const auto out = prepare_out_dir(flags.out_dir);
    const auto text = report.dump(2) + "\n";
    write_file(out / "diagnose.json", text);
    std::cout << text;
    return 0;
}

struct BenchFlags {
    std::string m_range;
    std::size_t seeds = 10;
    std::optional<std::size_t> starts;
    std::size_t jobs = 1;
    bool desk = false;
    std::optional<std::size_t> n;
    std::optional<std::size_t> k;
};

int cmd_bench(const CommonFlags& flags, const BenchFlags& b) {
    const std::size_t n = b.n ? *b.n : (b.desk ? 20 : 100);
    const std::size_t k = b.k ? *b.k : (b.desk ? 10 : 50);
    if (k > n) throw ConfigError("--k", "must not exceed --n");
    const auto [m_lo, m_hi] = parse_range(b.m_range.empty() ? (b.desk ? "3..10" : "1..50") : b.m_range);
    const std::size_t n_starts = b.starts ? *b.starts : (b.desk ? 5 : 10);
    if (b.seeds == 0) throw ConfigError("--seeds", "must be >= 1");
    if (n_starts == 0) throw ConfigError("--starts", "must be >= 1");
    const std::uint64_t base_seed = flags.seed ? *flags.seed : kDefaultBenchSeed;

    BenchOptions opt;
    opt.tol = flags.tol ? *flags.tol : 1e-3;
    opt.max_iter = flags.max_iter ? *flags.max_iter : (b.desk ? 50'000 : 250'000);
    opt.jobs = b.jobs;
    if (!(opt.tol > 0.0)) throw ConfigError("--tol", "must be > 0");

    const auto problems = problem_suite(n, k, m_lo, m_hi, b.seeds, base_seed);
    const auto starts = starting_points(n, n_starts, 100.0, base_seed);
    const std::vector<Algorithm> algos(all_algorithms.begin(), all_algorithms.end());
    const auto report = run_benchmark(problems, starts, algos, opt);

    const auto out = prepare_out_dir(flags.out_dir);
    std::ostringstream csv;
    write_bench_csv(report, csv);
    write_file(out / "bench.csv", csv.str());
    std::ostringstream md;
    write_bench_markdown(report, md);
    write_file(out / "bench.md", md.str());
    auto meta = bench_metadata(report, problems, base_seed);
    meta["m_range"] = {m_lo, m_hi};
    meta["starts_per_problem"] = n_starts;
    write_file(out / "bench_meta.json", meta.dump(2) + "\n");
    std::cout << md.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fixed-point feasibility solvers: run, diagnose, bench"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    CommonFlags diag_flags;
    CommonFlags bench_flags;
    auto add_common = [](CLI::App* sub, CommonFlags& flags) {
        sub->add_option("--out", flags.out_dir, "Output directory");
        sub->add_option("--seed", flags.seed, "Random seed override");
        sub->add_option("--tol", flags.tol, "Stopping tolerance override")->check(CLI::PositiveNumber);
        sub->add_option("--max-iter", flags.max_iter, "Iteration cap override")->check(CLI::PositiveNumber);
        sub->add_flag("-v,--verbose", flags.verbosity, "More logging");
    };

    auto* run_cmd = app.add_subcommand("run", "Iterate an operator pipeline and write a trace");
    run_cmd->add_option("--config", run_flags.config_path, "JSON run config")->required();
    add_common(run_cmd, run_flags);

    std::optional<double> rho;
    std::optional<std::size_t> samples;
    bool surrogate = false;
    auto* diag_cmd = app.add_subcommand("diagnose", "Estimate regularity constants of an operator");
    diag_cmd->add_option("--config", diag_flags.config_path, "JSON diagnose config")->required();
    diag_cmd->add_option("--rho", rho, "Sampling radius")->check(CLI::PositiveNumber);
    diag_cmd->add_option("--samples", samples, "Number of samples")->check(CLI::PositiveNumber);
    diag_cmd->add_flag("--surrogate", surrogate, "Allow an iterative intersection oracle for non-affine families");
    add_common(diag_cmd, diag_flags);

    BenchFlags bench;
    auto* bench_cmd = app.add_subcommand("bench", "Compare CycP, BTM and CADRA on generated problems");
    bench_cmd->add_option("--m", bench.m_range, "Range of wall counts, e.g. 1..50");
    bench_cmd->add_option("--seeds", bench.seeds, "Problems per value of m");
    bench_cmd->add_option("--starts", bench.starts, "Starting points per problem");
    bench_cmd->add_option("--jobs", bench.jobs, "Worker threads")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--n", bench.n, "Ambient dimension")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--k", bench.k, "Anchor orthant dimension");
    bench_cmd->add_flag("--desk", bench.desk, "Desk-scale preset: n=20, k=10, m=3..10, 5 seeds x 5 starts");
    add_common(bench_cmd, bench_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (bench.desk && bench.seeds == 10 && bench_cmd->count("--seeds") == 0) bench.seeds = 5;
        if (*run_cmd) return cmd_run(run_flags);
        if (*diag_cmd) return cmd_diagnose(diag_flags, rho, samples, surrogate);
        if (*bench_cmd) return cmd_bench(bench_flags, bench);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
