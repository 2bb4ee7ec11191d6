#include "feasibility/bench.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace feasibility;

namespace {

std::string csv_of(const BenchReport& r) {
    std::ostringstream out;
    write_bench_csv(r, out);
    return out.str();
}

}  // namespace

TEST(Generator, Invariants) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = generate_problem(30, 12, 1 + seed % 7, seed);
        EXPECT_EQ(p.m(), 1 + seed % 7);
        EXPECT_NEAR(distance(p.anchor, p.planted_solution), 0.0, 0.0);
        for (Eigen::Index i = 0; i < 30; ++i) {
            if (i < 12) {
                EXPECT_GE(p.planted_solution[i], 0.5);
                EXPECT_LE(p.planted_solution[i], 1.5);
            } else {
                EXPECT_EQ(p.planted_solution[i], 0.0);
            }
        }
        for (const auto& w : p.walls) {
            const auto* h = w.get_if<Hyperplane>();
            ASSERT_NE(h, nullptr);
            EXPECT_GT(h->normal.minCoeff(), 0.0);
            EXPECT_NEAR(h->normal.dot(p.planted_solution), h->offset, 1e-12);
            EXPECT_LE(distance(w, p.planted_solution), 1e-12);
        }
    }
}

TEST(Generator, PerturbationInTailIsInfeasible) {
    const auto p = generate_problem(10, 5, 3, 4);
    Vector x = p.planted_solution;
    x[7] = 0.3;
    EXPECT_GT(distance(p.anchor, x), 0.0);
    double worst = 0.0;
    for (const auto& w : p.walls) worst = std::max(worst, distance(w, x));
    EXPECT_GT(worst, 0.0);
}

TEST(Generator, DeterministicAndValidated) {
    const auto a = generate_problem(8, 4, 3, 99);
    const auto b = generate_problem(8, 4, 3, 99);
    EXPECT_EQ(a.planted_solution, b.planted_solution);
    EXPECT_EQ(a.walls[2].get_if<Hyperplane>()->normal, b.walls[2].get_if<Hyperplane>()->normal);
    EXPECT_THROW(generate_problem(8, 9, 3, 1), InvalidArgument);
    EXPECT_THROW(generate_problem(8, 4, 0, 1), InvalidArgument);
}

TEST(StartingPoints, NormAndSign) {
    const auto pts = starting_points(100, 10, 100.0, 5);
    ASSERT_EQ(pts.size(), 10u);
    for (const auto& x : pts) {
        EXPECT_NEAR(x.norm(), 100.0, 1e-9);
        EXPECT_GE(x.minCoeff(), 0.0);
    }
    EXPECT_EQ(pts[3], starting_points(100, 10, 100.0, 5)[3]);
    EXPECT_THROW(starting_points(10, 0, 1.0, 1), InvalidArgument);
}

TEST(PassOperators, AllFixThePlantedSolution) {
    const auto p = generate_problem(12, 6, 5, 3);
    for (auto a : all_algorithms) {
        const auto ops = pass_operators(p, a);
        EXPECT_EQ(ops.size(), a == Algorithm::cadra ? 5u : 6u);
        for (const auto& t : ops) EXPECT_LE(t.residual(p.planted_solution), 1e-10) << to_string(a);
    }
}

TEST(RunCell, FeasibleStartStopsImmediately) {
    const auto p = generate_problem(10, 5, 1, 7);
    for (auto a : all_algorithms) {
        const auto c = run_cell(p, p.planted_solution, 0, a, BenchOptions{});
        EXPECT_TRUE(c.converged);
        EXPECT_LE(c.iterations, 1u);
    }
}

TEST(RunCell, StoppingRuleAndFejerOnConvergedCells) {
    const auto p = generate_problem(20, 10, 6, 11);
    const auto starts = starting_points(20, 3, 100.0, 2);
    const auto probe = shadow_gap_probe(p);
    for (auto a : all_algorithms) {
        for (std::size_t s = 0; s < starts.size(); ++s) {
            const auto c = run_cell(p, starts[s], s, a, BenchOptions{});
            ASSERT_TRUE(c.converged) << to_string(a);
            EXPECT_LE(c.final_gap, 1e-3);
            EXPECT_LE(c.fejer_violation, 1e-8);
            EXPECT_GE(c.iterations, 1u);
        }
    }
}

TEST(Report, MedianAndBands) {
    EXPECT_EQ(median_of({3, 1, 2}), 2.0);
    EXPECT_EQ(median_of({4, 1, 2, 3}), 2.5);
    EXPECT_EQ(band_label(1), "1-10");
    EXPECT_EQ(band_label(10), "1-10");
    EXPECT_EQ(band_label(11), "11-20");
    EXPECT_EQ(band_label(50), "41-50");
}

TEST(Report, GroupsWinsAndDeterminism) {
    std::vector<FeasibilityProblem> problems;
    for (std::size_t m : {3u, 9u, 12u}) {
        for (std::uint64_t s = 0; s < 2; ++s) problems.push_back(generate_problem(12, 6, m, 100 * m + s));
    }
    const auto starts = starting_points(12, 2, 100.0, 1);
    const std::vector<Algorithm> algos(all_algorithms.begin(), all_algorithms.end());
    BenchOptions opt;
    opt.max_iter = 20000;
    const auto r1 = run_benchmark(problems, starts, algos, opt);
    opt.jobs = 4;
    const auto r2 = run_benchmark(problems, starts, algos, opt);
    EXPECT_EQ(csv_of(r1), csv_of(r2));
    ASSERT_EQ(r1.groups.size(), 2u);
    EXPECT_EQ(r1.groups[0].label, "1-10");
    EXPECT_EQ(r1.groups[1].label, "11-20");
    EXPECT_EQ(r1.groups[0].cells, 8u);
    EXPECT_EQ(r1.groups[1].cells, 4u);
    for (const auto& g : r1.groups) {
        double total = 0.0;
        for (auto a : algos) total += g.win_percent.at(a);
        EXPECT_NEAR(total, 100.0, 1e-9);
    }
    EXPECT_EQ(r1.cells.size(), 6u * 2u * 3u);
}

TEST(Report, TiesSplitAndNonConvergedExcluded) {
    // one planted-feasible start: every algorithm stops at iteration 0
    const auto p = generate_problem(6, 3, 2, 1);
    const std::vector<Algorithm> algos(all_algorithms.begin(), all_algorithms.end());
    const auto tie = run_benchmark({p}, {p.planted_solution}, algos, BenchOptions{});
    for (auto a : algos) EXPECT_NEAR(tie.groups[0].win_percent.at(a), 100.0 / 3.0, 1e-9);

    BenchOptions tight;
    tight.max_iter = 1;
    tight.tol = 1e-12;
    const auto starts = starting_points(6, 1, 100.0, 3);
    const auto r = run_benchmark({p}, starts, algos, tight);
    for (auto a : algos) {
        EXPECT_EQ(r.groups[0].not_converged.at(a), 1u);
        EXPECT_FALSE(r.groups[0].median.at(a).has_value());
        EXPECT_EQ(r.groups[0].win_percent.at(a), 0.0);
    }
    std::ostringstream md;
    write_bench_markdown(r, md);
    EXPECT_NE(md.str().find("n/a (1 not converged)"), std::string::npos);
}

TEST(Report, CsvSchemaAndMetadata) {
    const auto p = generate_problem(6, 3, 2, 1);
    const auto r = run_benchmark({p}, starting_points(6, 1, 100.0, 3), {Algorithm::cadra}, BenchOptions{});
    const auto csv = csv_of(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "m,group,problem_seed,start_index,algorithm,iterations,converged");
    EXPECT_NE(csv.find("2,1-10,1,0,CADRA,"), std::string::npos);
    const auto meta = bench_metadata(r, {p}, 3);
    EXPECT_EQ(meta["tol"], 1e-3);
    EXPECT_EQ(meta["problem_seeds"][0], 1u);
    EXPECT_EQ(meta["cycp_order"], "A, B_1, ..., B_m");
    EXPECT_EQ(meta["generator"]["wall_normal_coordinates"][0], 0.1);
}

TEST(Report, Errors) {
    const auto p = generate_problem(6, 3, 2, 1);
    BenchOptions bad;
    bad.max_iter = 0;
    EXPECT_THROW(run_benchmark({p}, starting_points(6, 1, 1.0, 1), {Algorithm::btm}, bad), InvalidArgument);
    EXPECT_THROW(run_benchmark({p}, starting_points(7, 1, 1.0, 1), {Algorithm::btm}, BenchOptions{}), InvalidArgument);
}
