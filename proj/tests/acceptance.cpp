#include "feasibility/feasibility.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>

using namespace feasibility;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Vector gaussian(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

std::vector<Schedule> drivers(std::size_t m, std::uint64_t seed) {
    std::vector<double> probs(m, 1.0 / static_cast<double>(m));
    return {Cyclic{m}, uniform_parallel(m), round_robin_pairs(m), RandomMap{m, seed, m + 1}, Bernoulli{probs, seed}};
}

Outcome two_lines_kappa() {
    Outcome out{true, ""};
    std::ostringstream d;
    for (double theta : {pi / 6, pi / 4, pi / 3, pi / 2}) {
        const auto t0 = Clock::now();
        const auto est = estimate_kappa(two_lines_fixture(theta), 3.0, 10'000, 11);
        const double secs = seconds_since(t0);
        const double want = 1.0 / std::sin(theta);
        const double rel = std::abs(est.kappa_hat - want) / want;
        out.pass = out.pass && rel <= 0.01 && secs < 1.0 && !est.violated;
        d << "theta=" << theta << " rel_err=" << rel << " t=" << secs << "s; ";
    }
    out.detail = d.str();
    return out;
}

Outcome thresholder_kappa() {
    Outcome out{true, ""};
    std::ostringstream d;
    const auto t = thresholder_fixture();
    const auto t0 = Clock::now();
    for (double rho : {0.5, 2.0, 10.0}) {
        const auto est = estimate_kappa(t, rho, 10'000, 12);
        const double want = std::max(rho, 1.0);
        const double rel = std::abs(est.kappa_hat - want) / want;
        out.pass = out.pass && rel <= 0.02;
        d << "rho=" << rho << " rel_err=" << rel << "; ";
    }
    const double secs = seconds_since(t0);
    out.pass = out.pass && secs < 1.0;
    d << "t=" << secs << "s";
    out.detail = d.str();
    return out;
}

SetDescriptor random_affine_through(std::mt19937_64& rng, const Vector& p, std::size_t k) {
    std::vector<Vector> span;
    for (std::size_t j = 0; j < k; ++j) span.push_back(gaussian(rng, p.size()));
    return AffineSubspace{p, orthonormalize(span)};
}

Outcome sigma_inequality() {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<std::size_t> dim_pick(1, 9);
    std::size_t violations = 0;
    std::size_t checked = 0;
    double worst = -kInfinity;
    for (int pair = 0; pair < 20; ++pair) {
        const Vector p = gaussian(rng, 10, 2.0);
        // every fourth pair uses hyperplanes
        SetDescriptor a = random_affine_through(rng, p, dim_pick(rng));
        SetDescriptor b = random_affine_through(rng, p, dim_pick(rng));
        if (pair % 4 == 3) {
            const Vector n1 = gaussian(rng, 10);
            const Vector n2 = gaussian(rng, 10);
            a = hyperplane(n1, n1.dot(p));
            b = hyperplane(n2, n2.dot(p));
        }
        const auto t = dr_operator_with_fix_oracle(a, b);
        const auto& fix = *t.fix_projection();
        for (int s = 0; s < 10'000; ++s) {
            const Vector x = gaussian(rng, 10, 3.0);
            const Vector z = fix(gaussian(rng, 10, 3.0));
            const double excess = averaged_inequality_excess(t, 1.0, x, z);
            worst = std::max(worst, excess);
            if (excess > 1e-8) ++violations;
            ++checked;
        }
    }
    std::ostringstream d;
    d << checked << " pairs, violations=" << violations << ", worst excess=" << worst;
    return {violations == 0, d.str()};
}

Outcome key_inequalities() {
    const auto t = two_lines_fixture(pi / 4);
    const auto est = estimate_kappa(t, 2.0, 10'000, 14);
    const auto rep = verify_key_inequalities(
        t, [](const Vector& x) { return x.norm(); }, key_constants(est.kappa_hat, 1.0), 2.0, 10'000, 15);
    std::ostringstream d;
    d << "kappa_hat=" << est.kappa_hat << " worst=" << rep.worst() << " samples=" << rep.samples;
    return {rep.worst() <= 1e-8 && rep.samples == 10'000, d.str()};
}

struct FixtureFamily {
    std::string name;
    std::vector<FixedPointMap> maps;
    Vector z;
    Vector start;
};

std::vector<FixtureFamily> fejer_families() {
    std::vector<FixtureFamily> out;
    out.push_back({"two_lines", {two_lines_fixture(pi / 6), two_lines_fixture(pi / 4), two_lines_fixture(pi / 3)},
                   Vector::Zero(2), Vector::Constant(2, 7.0)});
    out.push_back({"thresholder", {thresholder_fixture()}, Vector::Zero(1), Vector::Constant(1, 9.0)});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto dim = static_cast<Eigen::Index>(3 + seed % 8);
        const auto f = oracle::planted_family(seed, dim, 2 + seed % 5);
        out.push_back({"planted[" + std::to_string(seed) + "]", f.maps, f.z,
                       f.z + Vector::Constant(dim, 4.0 + static_cast<double>(seed))});
    }
    for (auto algo : {Algorithm::btm, Algorithm::cadra}) {
        const auto p = generate_problem(20, 10, 5, 31);
        out.push_back({std::string("bench_") + to_string(algo), pass_operators(p, algo), p.planted_solution,
                       starting_points(20, 1, 100.0, 32)[0]});
    }
    return out;
}

Outcome fejer_monotonicity() {
    double worst = 0.0;
    std::size_t runs = 0;
    bool schedules_valid = true;
    std::string worst_run = "-";
    std::uint64_t seed = 40;
    for (const auto& f : fejer_families()) {
        for (const auto& s : drivers(f.maps.size(), ++seed)) {
            if (!validate(s, 1000).passed()) schedules_valid = false;
            RunConfig cfg;
            cfg.maps = f.maps;
            cfg.schedule = s;
            cfg.start = f.start;
            cfg.max_iter = 1000;
            cfg.anchors = {f.z};
            cfg.keep_iterates = false;
            const auto t = run(cfg);
            ++runs;
            if (t.max_fejer_violation > worst || worst_run == "-") {
                worst = std::max(worst, t.max_fejer_violation);
                worst_run = f.name + "/" + s.name();
            }
        }
    }
    std::ostringstream d;
    d << runs << " runs x 1000 iterations, worst violation=" << worst << " (" << worst_run << ")";
    if (!schedules_valid) d << ", a schedule failed validation";
    return {worst <= 1e-9 && schedules_valid, d.str()};
}

Outcome linear_rate() {
    Outcome out{true, ""};
    std::ostringstream d;
    for (double theta : {pi / 6, pi / 3}) {
        RunConfig cfg;
        cfg.maps = {two_lines_fixture(theta)};
        cfg.start = Vector::Zero(2);
        cfg.start << 3.0, -4.0;
        cfg.max_iter = 60;
        const auto t = run(cfg);
        const auto est = estimate_rate(t, [](const Vector& x) { return x.norm(); });
        const auto env = check_linear_envelope(t, Vector::Zero(2), est.alpha, cfg.start.norm(), 0.0);
        const double err = std::abs(est.alpha - std::cos(theta));
        out.pass = out.pass && err <= 1e-6 && env.holds;
        d << "theta=" << theta << " |alpha-cos|=" << err << " envelope_ratio=" << env.worst_ratio << "; ";
    }
    out.detail = d.str();
    return out;
}

Outcome probabilistic_contraction() {
    std::mt19937_64 rng(70);
    const Vector a1 = gaussian(rng, 10).normalized();
    Vector u = gaussian(rng, 10);
    u = (u - u.dot(a1) * a1).normalized();
    const double angle = 0.3;
    const Vector a2 = std::cos(angle) * a1 + std::sin(angle) * u;
    const auto h1 = hyperplane(a1, 1.0);
    const auto h2 = hyperplane(a2, -0.5);
    const SetDescriptor zset = *affine_intersection({h1, h2});
    const std::size_t steps = 51;
    const std::size_t seeds = 200;
    std::vector<double> sum(steps, 0.0);
    std::size_t degenerate = 0;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        RunConfig cfg;
        cfg.maps = {projector(h1), projector(h2)};
        cfg.schedule = Bernoulli{{0.5, 0.5}, 1000 + seed};
        cfg.start = Vector::Constant(10, 3.0);
        cfg.max_iter = steps;
        const auto t = run(cfg);
        for (std::size_t n = 0; n < steps; ++n) {
            const double d0 = distance(zset, t.iterates[n]);
            const double d1 = distance(zset, t.iterates[n + 1]);
            if (!(d0 > 0.0)) {
                ++degenerate;
                continue;
            }
            sum[n] += (d1 * d1) / (d0 * d0);
        }
    }
    double worst = 0.0;
    std::size_t worst_n = 0;
    for (std::size_t n = 0; n < steps; ++n) {
        if (sum[n] / seeds > worst) {
            worst = sum[n] / seeds;
            worst_n = n;
        }
    }
    std::ostringstream d;
    d << "max mean ratio over n=0..50: " << worst << " at n=" << worst_n << ", angle=" << angle
      << ", zero-distance samples=" << degenerate;
    return {worst < 1.0 && degenerate == 0, d.str()};
}

struct BenchScale {
    std::size_t n, k, m_lo, m_hi, seeds, starts, max_iter;
    double time_limit;
};

Outcome bench_ordering(const BenchScale& sc) {
    const auto t0 = Clock::now();
    const auto problems = problem_suite(sc.n, sc.k, sc.m_lo, sc.m_hi, sc.seeds);
    const auto starts = starting_points(sc.n, sc.starts, 100.0, kDefaultBenchSeed);
    const std::vector<Algorithm> algos(all_algorithms.begin(), all_algorithms.end());
    BenchOptions opt;
    opt.tol = 1e-3;
    opt.max_iter = sc.max_iter;
    opt.jobs = std::max(1u, std::thread::hardware_concurrency());
    const auto report = run_benchmark(problems, starts, algos, opt);
    const double secs = seconds_since(t0);

    std::map<Algorithm, std::vector<double>> iters;
    std::map<Algorithm, std::size_t> misses;
    for (const auto& c : report.cells) {
        if (c.converged) {
            iters[c.algorithm].push_back(static_cast<double>(c.iterations));
        } else {
            ++misses[c.algorithm];
        }
    }
    std::map<Algorithm, double> med;
    for (auto a : algos) med[a] = iters[a].empty() ? kInfinity : median_of(iters[a]);
    const bool ordered = med[Algorithm::cadra] < med[Algorithm::cycp] && med[Algorithm::cadra] < med[Algorithm::btm];
    std::ostringstream d;
    d << "medians";
    for (auto a : algos) d << " " << to_string(a) << "=" << med[a] << " (" << misses[a] << " not converged)";
    d << ", t=" << secs << "s";
    return {ordered && secs < sc.time_limit, d.str()};
}

// distance from x to the line p + t dir by coarse-to-fine grid search over t
double grid_line_distance(const Eigen::Vector3d& x, const Eigen::Vector3d& p, const Eigen::Vector3d& dir) {
    double lo = -500.0;
    double hi = 500.0;
    double best_t = 0.0;
    for (int level = 0; level < 7; ++level) {
        double best = kInfinity;
        const int steps = 4000;
        for (int i = 0; i <= steps; ++i) {
            const double t = lo + (hi - lo) * i / steps;
            const double dist = (x - p - t * dir).norm();
            if (dist < best) {
                best = dist;
                best_t = t;
            }
        }
        const double span = (hi - lo) / steps * 2.0;
        lo = best_t - span;
        hi = best_t + span;
    }
    return (x - p - best_t * dir).norm();
}

Outcome dr_fix_distance_grid() {
    std::mt19937_64 rng(90);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    std::size_t mismatched_zeros = 0;
    std::size_t points = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Vector3d n1(g(rng), g(rng), g(rng));
        const Eigen::Vector3d n2(g(rng), g(rng), g(rng));
        const double b1 = g(rng);
        const double b2 = g(rng);
        const auto a = hyperplane(n1, b1);
        const auto b = hyperplane(n2, b2);
        const auto oracle_fn = dr_fix_distance(a, b);
        const auto t = dr_operator(a, b);
        const auto hull = SetDescriptor(affine_hull(a, b));

        const Eigen::Vector3d dir = n1.cross(n2).normalized();
        Eigen::Matrix<double, 2, 3> rows;
        rows.row(0) = n1.transpose();
        rows.row(1) = n2.transpose();
        const Eigen::Vector3d p = rows.transpose() * (rows * rows.transpose()).inverse() * Eigen::Vector2d(b1, b2);

        for (int i = 0; i < 10; ++i) {
            const Vector x = Eigen::Vector3d(5 * g(rng), 5 * g(rng), 5 * g(rng));
            const Vector px = project(hull, x);
            const double grid = grid_line_distance(Eigen::Vector3d(px), p, dir);
            worst = std::max(worst, std::abs(oracle_fn(x) - grid));
            ++points;
        }
        for (int i = 0; i < 20; ++i) {
            // half the points sit on the intersection line
            const Vector x = i % 2 == 0 ? Vector(p + 4.0 * g(rng) * dir)
                                        : Vector(Eigen::Vector3d(3 * g(rng), 3 * g(rng), 3 * g(rng)));
            if ((oracle_fn(x) <= 1e-9) != (t.residual(x) <= 1e-9)) ++mismatched_zeros;
        }
    }
    std::ostringstream d;
    d << points << " grid comparisons, worst |oracle-grid|=" << worst << ", zero mismatches=" << mismatched_zeros;
    return {worst <= 1e-6 && mismatched_zeros == 0, d.str()};
}

Outcome schedule_validation() {
    std::size_t mismatches = 0;
    std::size_t rejected = 0;
    const std::size_t tables = 100;
    for (std::uint64_t seed = 5000; seed < 5000 + tables; ++seed) {
        const auto t = oracle::adversarial_table(seed);
        const auto rep = validate(weight_table(t.rows, t.p, t.floor), t.rows.size());
        bool any = false;
        for (const auto& [name, step] : oracle::first_failures(t.rows, t.p, t.floor)) {
            const auto* c = rep.find(name);
            if (c == nullptr || c->first_violation != step || c->passed == step.has_value()) ++mismatches;
            any = any || step.has_value();
        }
        if (rep.passed() == any) ++mismatches;
        if (!rep.passed()) ++rejected;
    }
    std::ostringstream d;
    d << tables << " tables, rejected=" << rejected << ", first-failure mismatches=" << mismatches;
    return {mismatches == 0, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        const char* name;
        std::function<Outcome()> check;
    };
    if (argc > 1 && std::string_view(argv[1]) == "--full") {
        const auto o = bench_ordering({100, 50, 11, 30, 10, 10, 250'000, kInfinity});
        std::printf("%s full-scale benchmark ordering: %s\n", o.pass ? "PASS" : "FAIL", o.detail.c_str());
        return o.pass ? 0 : 1;
    }
    const std::vector<Criterion> criteria{
        {"two-lines regularity constant", two_lines_kappa},
        {"thresholder modulus", thresholder_kappa},
        {"averaged inequality for DR on affine pairs", sigma_inequality},
        {"key inequality triple", key_inequalities},
        {"Fejer monotonicity of every driver", fejer_monotonicity},
        {"linear rate of Picard iteration", linear_rate},
        {"probabilistic contraction under Bernoulli control", probabilistic_contraction},
        {"desk benchmark ordering", [] { return bench_ordering({20, 10, 3, 10, 5, 5, 50'000, 60.0}); }},
        {"DR fix-distance oracle against grid", dr_fix_distance_grid},
        {"schedule validation first failures", schedule_validation},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[i].check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %zu: %s [%.2fs] %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                    seconds_since(t0), o.detail.c_str());
        if (!o.pass) ++failures;
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
