#pragma once

// Anchored-orthant feasibility experiments: find x in A n B_1 n ... n B_m
// with A = R^k_+ x {0} and hyperplanes B_i with positive normals, solved by
// cyclic projections, the Borwein-Tam method and the cyclically anchored
// DR algorithm; reported as medians and win shares per band of m.

#include "feasibility/engine.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <limits>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace feasibility {

struct GeneratorRanges {
    double solution_lo = 0.5;
    double solution_hi = 1.5;
    double normal_lo = 0.1;
    double normal_hi = 1.1;
};

inline constexpr GeneratorRanges default_generator_ranges{};

struct FeasibilityProblem {
    std::size_t n = 0;
    std::size_t k = 0;
    SetDescriptor anchor = OrthantFace{0, 0};
    std::vector<SetDescriptor> walls;
    Vector planted_solution;
    std::uint64_t seed = 0;

    std::size_t m() const noexcept { return walls.size(); }
};

/// Planted solution uniform on the first k coordinates (zero tail); each
/// wall normal uniform componentwise (strictly positive) with the offset
/// chosen so the wall passes through the planted solution.
inline FeasibilityProblem generate_problem(std::size_t n, std::size_t k, std::size_t m, std::uint64_t seed,
                                           const GeneratorRanges& ranges = default_generator_ranges) {
    if (m == 0) throw InvalidArgument("generate_problem: m must be >= 1");
    if (k > n || n == 0) throw InvalidArgument("generate_problem: requires 1 <= n and k <= n");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(ranges.solution_lo, ranges.solution_hi);
    std::uniform_real_distribution<double> normal(ranges.normal_lo, ranges.normal_hi);
    const auto ni = static_cast<Eigen::Index>(n);

    FeasibilityProblem p;
    p.n = n;
    p.k = k;
    p.seed = seed;
    p.anchor = OrthantFace{n, k};
    p.planted_solution = Vector::Zero(ni);
    for (std::size_t i = 0; i < k; ++i) p.planted_solution[static_cast<Eigen::Index>(i)] = coord(rng);
    p.walls.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        Vector a(ni);
        for (Eigen::Index i = 0; i < ni; ++i) a[i] = normal(rng);
        const double b = a.dot(p.planted_solution);
        p.walls.push_back(hyperplane(std::move(a), b));
    }
    return p;
}

inline constexpr std::uint64_t kDefaultBenchSeed = 2024;

/// `seeds` problems for each m in [m_lo, m_hi]; problem seed = base + 1000 m + s.
inline std::vector<FeasibilityProblem> problem_suite(std::size_t n, std::size_t k, std::size_t m_lo, std::size_t m_hi,
                                                     std::size_t seeds, std::uint64_t base_seed = kDefaultBenchSeed) {
    if (m_lo == 0 || m_hi < m_lo) throw InvalidArgument("problem_suite: requires 1 <= m_lo <= m_hi");
    std::vector<FeasibilityProblem> out;
    for (std::size_t m = m_lo; m <= m_hi; ++m) {
        for (std::size_t s = 0; s < seeds; ++s) out.push_back(generate_problem(n, k, m, base_seed + 1000 * m + s));
    }
    return out;
}

/// `count` points with uniform(0,1) coordinates rescaled to Euclidean norm `norm`.
inline std::vector<Vector> starting_points(std::size_t n, std::size_t count, double norm, std::uint64_t seed) {
    if (count == 0) throw InvalidArgument("starting_points: count must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Vector> out;
    out.reserve(count);
    while (out.size() < count) {
        Vector x(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = unif(rng);
        const double len = x.norm();
        if (len == 0.0) continue;
        out.emplace_back((norm / len) * x);
    }
    return out;
}

enum class Algorithm { cycp, btm, cadra };

inline constexpr std::array<Algorithm, 3> all_algorithms{Algorithm::cycp, Algorithm::btm, Algorithm::cadra};

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::cycp: return "CycP";
        case Algorithm::btm: return "BTM";
        case Algorithm::cadra: return "CADRA";
    }
    return "?";
}

/// Operators of one composed pass: CycP projects onto A, B_1, ..., B_m in
/// that order; BTM pairs consecutive sets of (A, B_1, ..., B_m) cyclically;
/// CADRA pairs the anchor A with each B_i.
inline std::vector<FixedPointMap> pass_operators(const FeasibilityProblem& p, Algorithm algo) {
    switch (algo) {
        case Algorithm::cycp: {
            std::vector<FixedPointMap> ops{projector(p.anchor)};
            for (const auto& w : p.walls) ops.push_back(projector(w));
            return ops;
        }
        case Algorithm::btm: {
            std::vector<SetDescriptor> sets{p.anchor};
            sets.insert(sets.end(), p.walls.begin(), p.walls.end());
            return btm_operators(sets);
        }
        case Algorithm::cadra: return cadra_operators(p.anchor, p.walls);
    }
    throw InvalidArgument("unknown algorithm");
}

inline const std::string kShadowGapProbe = "shadow_gap";

/// max_i d_{B_i}(P_A x): the stopping measure evaluated at the anchor shadow.
inline Probe shadow_gap_probe(const FeasibilityProblem& p) {
    return Probe{kShadowGapProbe, [anchor = p.anchor, walls = p.walls](const Vector& x) {
                     const Vector z = project(anchor, x);
                     double worst = 0.0;
                     for (const auto& w : walls) worst = std::max(worst, distance(w, z));
                     return worst;
                 }};
}

struct BenchOptions {
    double tol = 1e-3;
    std::size_t max_iter = 50'000;
    std::size_t jobs = 1;
};

struct CellResult {
    std::size_t m = 0;
    std::string group;
    std::uint64_t problem_seed = 0;
    std::size_t start_index = 0;
    Algorithm algorithm = Algorithm::cycp;
    std::size_t iterations = 0;  // composed passes
    bool converged = false;
    double fejer_violation = 0.0;  // against the planted solution
    double final_gap = 0.0;
};

struct GroupSummary {
    std::string label;
    std::size_t cells = 0;  // (problem, start) pairs
    std::map<Algorithm, std::optional<double>> median;
    std::map<Algorithm, double> win_percent;
    std::map<Algorithm, std::size_t> not_converged;
};

struct BenchReport {
    std::vector<CellResult> cells;
    std::vector<GroupSummary> groups;
    std::vector<Algorithm> algorithms;
    BenchOptions options;
};

/// Band of 10 containing m: "1-10", "11-20", ...
inline std::string band_label(std::size_t m) {
    const std::size_t lo = (m - 1) / 10 * 10 + 1;
    return std::to_string(lo) + "-" + std::to_string(lo + 9);
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline CellResult run_cell(const FeasibilityProblem& p, const Vector& start, std::size_t start_index, Algorithm algo,
                           const BenchOptions& opt) {
    RunConfig cfg;
    cfg.maps = pass_operators(p, algo);
    cfg.schedule = Cyclic{cfg.maps.size()};
    cfg.mode = IterationMode::composed_pass;
    cfg.start = start;
    cfg.max_iter = opt.max_iter;
    cfg.stop = ProbeBelow{kShadowGapProbe, opt.tol};
    cfg.probes = {shadow_gap_probe(p)};
    cfg.anchors = {p.planted_solution};
    cfg.keep_iterates = false;
    const auto trace = run_quasi_cyclic(cfg);

    CellResult cell;
    cell.m = p.m();
    cell.group = band_label(p.m());
    cell.problem_seed = p.seed;
    cell.start_index = start_index;
    cell.algorithm = algo;
    cell.iterations = trace.iterations_used;
    cell.converged = trace.stop_reason == StopReason::probe_below;
    cell.fejer_violation = trace.max_fejer_violation;
    cell.final_gap = trace.probe_values.front().back();
    return cell;
}

/// Runs every (problem, start, algorithm) cell and aggregates per band of m.
/// Cells that hit max_iter are excluded from medians and cannot win.
/// Ties on iteration count split the win evenly.
inline BenchReport run_benchmark(const std::vector<FeasibilityProblem>& problems, const std::vector<Vector>& starts,
                                 const std::vector<Algorithm>& algorithms, const BenchOptions& opt) {
    if (opt.max_iter == 0) throw InvalidArgument("run_benchmark: max_iter must be >= 1");
    if (!(opt.tol > 0.0)) throw InvalidArgument("run_benchmark: tol must be > 0");
    if (algorithms.empty()) throw InvalidArgument("run_benchmark: no algorithms");
    for (const auto& p : problems) {
        for (const auto& s : starts) require_same_dimension(s, p.planted_solution, "run_benchmark: start");
    }

    const std::size_t per_problem = starts.size() * algorithms.size();
    const std::size_t total = problems.size() * per_problem;
    BenchReport report;
    report.algorithms = algorithms;
    report.options = opt;
    report.cells.resize(total);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t idx = next++; idx < total; idx = next++) {
            const std::size_t pi = idx / per_problem;
            const std::size_t si = (idx % per_problem) / algorithms.size();
            const std::size_t ai = idx % algorithms.size();
            report.cells[idx] = run_cell(problems[pi], starts[si], si, algorithms[ai], opt);
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, total));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::map<std::size_t, GroupSummary> by_band;  // keyed by band start for ordering
    std::map<std::size_t, std::map<Algorithm, std::vector<double>>> iterations;
    for (std::size_t pi = 0; pi < problems.size(); ++pi) {
        const std::size_t band = (problems[pi].m() - 1) / 10;
        auto& g = by_band[band];
        g.label = band_label(problems[pi].m());
        for (auto a : algorithms) {
            g.win_percent.try_emplace(a, 0.0);
            g.not_converged.try_emplace(a, 0);
        }
        for (std::size_t si = 0; si < starts.size(); ++si) {
            ++g.cells;
            std::size_t best = std::numeric_limits<std::size_t>::max();
            for (std::size_t ai = 0; ai < algorithms.size(); ++ai) {
                const auto& c = report.cells[pi * per_problem + si * algorithms.size() + ai];
                if (c.converged) {
                    best = std::min(best, c.iterations);
                    iterations[band][c.algorithm].push_back(static_cast<double>(c.iterations));
                } else {
                    ++g.not_converged[c.algorithm];
                }
            }
            if (best == std::numeric_limits<std::size_t>::max()) continue;
            std::vector<Algorithm> winners;
            for (std::size_t ai = 0; ai < algorithms.size(); ++ai) {
                const auto& c = report.cells[pi * per_problem + si * algorithms.size() + ai];
                if (c.converged && c.iterations == best) winners.push_back(c.algorithm);
            }
            for (auto a : winners) g.win_percent[a] += 1.0 / static_cast<double>(winners.size());
        }
    }
    for (auto& [band, g] : by_band) {
        for (auto a : algorithms) {
            const auto& its = iterations[band][a];
            g.median[a] = its.empty() ? std::nullopt : std::optional<double>(median_of(its));
            g.win_percent[a] = g.cells == 0 ? 0.0 : 100.0 * g.win_percent[a] / static_cast<double>(g.cells);
        }
        report.groups.push_back(std::move(g));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Output

inline void write_bench_csv(const BenchReport& report, std::ostream& out) {
    out << "m,group,problem_seed,start_index,algorithm,iterations,converged\n";
    for (const auto& c : report.cells) {
        out << c.m << ',' << c.group << ',' << c.problem_seed << ',' << c.start_index << ',' << to_string(c.algorithm)
            << ',' << c.iterations << ',' << (c.converged ? "true" : "false") << '\n';
    }
}

namespace detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace detail

/// Markdown table: one row per band, iterations (median) and wins (%) per algorithm.
inline void write_bench_markdown(const BenchReport& report, std::ostream& out) {
    out << "| Range of m |";
    for (auto a : report.algorithms) out << ' ' << to_string(a) << " Iterations | " << to_string(a) << " Wins |";
    out << "\n|---:|";
    for (std::size_t i = 0; i < report.algorithms.size(); ++i) out << "---:|---:|";
    out << '\n';
    for (const auto& g : report.groups) {
        out << "| " << g.label << " |";
        for (auto a : report.algorithms) {
            const auto& med = g.median.at(a);
            out << ' ' << (med ? detail::fixed(*med, 1) : std::string("n/a"));
            if (g.not_converged.at(a) > 0) out << " (" << g.not_converged.at(a) << " not converged)";
            out << " | " << detail::fixed(g.win_percent.at(a), 0) << " |";
        }
        out << '\n';
    }
}

inline nlohmann::json bench_metadata(const BenchReport& report, const std::vector<FeasibilityProblem>& problems,
                                     std::uint64_t start_seed, const GeneratorRanges& ranges = default_generator_ranges) {
    nlohmann::json meta;
    meta["generator"] = {{"solution_coordinates", {ranges.solution_lo, ranges.solution_hi}},
                         {"wall_normal_coordinates", {ranges.normal_lo, ranges.normal_hi}},
                         {"starting_points", "uniform(0,1) coordinates rescaled to norm 100"}};
    meta["tol"] = report.options.tol;
    meta["max_iter"] = report.options.max_iter;
    meta["stopping_rule"] = "max_i d_{B_i}(P_A x_n) <= tol";
    meta["iteration_unit"] = "one composed pass over all operators";
    meta["cycp_order"] = "A, B_1, ..., B_m";
    meta["win_ties"] = "split evenly among tied algorithms";
    std::vector<std::uint64_t> seeds;
    for (const auto& p : problems) seeds.push_back(p.seed);
    meta["problem_seeds"] = seeds;
    meta["start_seed"] = start_seed;
    if (!problems.empty()) {
        meta["n"] = problems.front().n;
        meta["k"] = problems.front().k;
    }
    return meta;
}

}  // namespace feasibility
