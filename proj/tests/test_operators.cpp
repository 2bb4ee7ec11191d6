#include "feasibility/operators.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace feasibility;
using std::numbers::pi;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 3.0) {
    std::normal_distribution<double> g(0.0, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

// projector matrix onto the line spanned by (cos t, sin t)
Eigen::Matrix2d line_projector(double t) {
    Eigen::Vector2d u(std::cos(t), std::sin(t));
    return u * u.transpose();
}

// P_B (2 P_A - I) + I - P_A for lines through the origin
Eigen::Matrix2d dr_matrix(double ta, double tb) {
    const Eigen::Matrix2d pa = line_projector(ta);
    const Eigen::Matrix2d pb = line_projector(tb);
    const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
    return pb * (2.0 * pa - id) + id - pa;
}

// hyperplanes through z with random normals
std::vector<SetDescriptor> planes_through(std::mt19937_64& rng, const Vector& z, std::size_t count) {
    std::vector<SetDescriptor> sets;
    for (std::size_t i = 0; i < count; ++i) {
        const Vector a = random_vector(rng, z.size(), 1.0);
        sets.push_back(hyperplane(a, a.dot(z)));
    }
    return sets;
}

}  // namespace

TEST(RelaxedProjector, Examples) {
    const auto origin = ball(vec({0}), 0.0);
    EXPECT_DOUBLE_EQ(relaxed_projector(origin, 0.5)(vec({2}))[0], 1.0);

    const auto h = hyperplane(vec({1, 0}), 0.0);
    const auto t = relaxed_projector(h, 1.5);
    const Vector x = vec({2, 0});
    EXPECT_TRUE(t(x).isApprox(vec({-1, 0})));
    EXPECT_NEAR(*t.fix_distance() ? (*t.fix_distance())(x) / t.residual(x) : 0.0, 1.0 / 1.5, 1e-15);
    EXPECT_DOUBLE_EQ(*t.averagedness(), 0.75);
}

TEST(RelaxedProjector, RelaxOneIsProjection) {
    std::mt19937_64 rng(1);
    const auto s = ball(vec({1, 1, 1}), 0.5);
    const auto t = relaxed_projector(s, 1.0);
    for (int i = 0; i < 20; ++i) {
        const Vector x = random_vector(rng, 3);
        EXPECT_TRUE(t(x).isApprox(project(s, x)));
    }
}

TEST(RelaxedProjector, RejectsOutOfRange) {
    const auto h = hyperplane(vec({1, 0}), 0.0);
    EXPECT_THROW(relaxed_projector(h, 0.0), InvalidArgument);
    EXPECT_THROW(relaxed_projector(h, 2.0), InvalidArgument);
    EXPECT_THROW(relaxed_projector(h, -1.0), InvalidArgument);
    const auto r = reflector(h);
    EXPECT_FALSE(r.averagedness().has_value());
    EXPECT_TRUE(r(vec({1, 1})).isApprox(vec({-1, 1})));
}

TEST(DrOperator, SameHyperplaneIsIdentity) {
    // For affine A, P_A R_A = P_A, so T = Id
    const auto a = hyperplane(vec({1, 0}), 0.0);
    const auto t = dr_operator(a, a);
    EXPECT_TRUE(t(vec({3, 4})).isApprox(vec({3, 4})));
}

TEST(DrOperator, SameHalfspaceIsProjection) {
    const auto a = halfspace(vec({1, 0}), 0.0);
    const auto t = dr_operator(a, a);
    EXPECT_TRUE(t(vec({3, 4})).isApprox(vec({0, 4})));
    EXPECT_TRUE(t(vec({-3, 4})).isApprox(vec({-3, 4})));
}

TEST(DrOperator, PerpendicularLines) {
    const auto t = dr_operator(line_through_origin(0.0), line_through_origin(pi / 2));
    EXPECT_LE(t(vec({1, 0})).norm(), 1e-15);
}

TEST(DrOperator, MatchesClosedFormAndMatrixEvaluation) {
    for (double theta : {pi / 6, pi / 4, pi / 3, 1.2}) {
        const auto t = dr_operator(line_through_origin(0.0), line_through_origin(theta));
        const auto fixture = two_lines_fixture(theta);
        const Eigen::Matrix2d m = dr_matrix(0.0, theta);
        std::mt19937_64 rng(7);
        for (int i = 0; i < 50; ++i) {
            const Vector x = random_vector(rng, 2);
            EXPECT_LE((t(x) - fixture(x)).norm(), 1e-12);
            EXPECT_LE((t(x) - Vector(m * x)).norm(), 1e-12);
        }
    }
    const Vector y = dr_operator(line_through_origin(0.0), line_through_origin(pi / 6))(vec({1, 0}));
    EXPECT_NEAR(y[0], 0.75, 1e-15);
    EXPECT_NEAR(y[1], std::sqrt(3.0) / 4.0, 1e-15);
}

TEST(DrOperator, DimensionMismatch) {
    EXPECT_THROW(dr_operator(hyperplane(vec({1, 0}), 0.0), hyperplane(vec({1, 0, 0}), 0.0)), InvalidArgument);
}

TEST(Compose, AppliesInOrder) {
    const auto px = projector(hyperplane(vec({0, 1}), 0.0));
    const auto py = projector(hyperplane(vec({1, 0}), 0.0));
    EXPECT_LE(compose({px, py})(vec({1, 1})).norm(), 1e-15);

    const auto shift = FixedPointMap(1, [](const Vector& x) -> Vector { return x.array() + 1.0; }, std::nullopt, "s");
    const auto twice = FixedPointMap(1, [](const Vector& x) -> Vector { return 2.0 * x; }, std::nullopt, "d");
    EXPECT_DOUBLE_EQ(compose({shift, twice})(vec({1}))[0], 4.0);
    EXPECT_DOUBLE_EQ(compose({twice, shift})(vec({1}))[0], 3.0);
}

TEST(Compose, Averagedness) {
    const auto p = projector(hyperplane(vec({1, 0}), 0.0));
    EXPECT_NEAR(*compose({p, p}).averagedness(), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(compose_averagedness(0.5, 0.5), 2.0 / 3.0, 1e-15);
    EXPECT_FALSE(compose({p, reflector(hyperplane(vec({1, 0}), 0.0))}).averagedness().has_value());
    EXPECT_THROW(compose({}), InvalidArgument);
}

TEST(ConvexCombination, Examples) {
    const auto px = projector(hyperplane(vec({0, 1}), 0.0));
    const auto py = projector(hyperplane(vec({1, 0}), 0.0));
    EXPECT_TRUE(convex_combination({px, py}, {0.5, 0.5})(vec({2, 2})).isApprox(vec({1, 1})));
    const auto single = convex_combination({px}, {1.0});
    EXPECT_TRUE(single(vec({3, 5})).isApprox(px(vec({3, 5}))));
    EXPECT_DOUBLE_EQ(*single.averagedness(), *px.averagedness());
    EXPECT_THROW(convex_combination({px, py}, {1.2, -0.2}), InvalidArgument);
    EXPECT_THROW(convex_combination({px, py}, {0.5, 0.4}), InvalidArgument);
    EXPECT_THROW(convex_combination({px, py}, {1.0}), InvalidArgument);
}

TEST(BtmChain, TwoLinesMatrixProduct) {
    for (double theta : {pi / 2, pi / 5, 1.0}) {
        const auto u = line_through_origin(0.0);
        const auto v = line_through_origin(theta);
        const auto chain = btm_chain({u, v});
        const Eigen::Matrix2d m = dr_matrix(theta, 0.0) * dr_matrix(0.0, theta);
        std::mt19937_64 rng(5);
        for (int i = 0; i < 20; ++i) {
            const Vector x = random_vector(rng, 2);
            EXPECT_LE((chain(x) - Vector(m * x)).norm(), 1e-12);
        }
    }
    EXPECT_THROW(btm_chain({line_through_origin(0.0)}), InvalidArgument);
}

TEST(BtmChain, FixesCommonPoints) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector z = random_vector(rng, 6);
        auto sets = planes_through(rng, z, 4);
        Vector lo = z.array() - 1.0;
        Vector hi = z.array() + 1.0;
        sets.push_back(Box{lo, hi});
        EXPECT_LE(btm_chain(sets).residual(z), 1e-10);
    }
}

TEST(CadraChain, SingleWallIsDr) {
    std::mt19937_64 rng(4);
    const auto a = SetDescriptor(OrthantFace{4, 2});
    const auto b = hyperplane(vec({1, 2, 3, 4}), 2.0);
    const auto chain = cadra_chain(a, {b});
    const auto dr = dr_operator(a, b);
    for (int i = 0; i < 20; ++i) {
        const Vector x = random_vector(rng, 4);
        EXPECT_EQ(chain(x), dr(x));
    }
    EXPECT_THROW(cadra_chain(a, {}), InvalidArgument);
}

TEST(CadraChain, PerpendicularAxes) {
    const auto chain = cadra_chain(line_through_origin(0.0), {line_through_origin(pi / 2)});
    EXPECT_LE(chain(vec({1, 0})).norm(), 1e-15);
}

TEST(CadraChain, AnchorEqualToWall) {
    const auto h = hyperplane(vec({1, 1}), 1.0);
    EXPECT_TRUE(cadra_chain(h, {h})(vec({3, 4})).isApprox(vec({3, 4})));
    const auto hs = halfspace(vec({1, 0}), 0.0);
    EXPECT_TRUE(cadra_chain(hs, {hs})(vec({3, 4})).isApprox(vec({0, 4})));
}

TEST(CadraChain, FixesCommonPoints) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        Vector z = Vector::Zero(8);
        for (int i = 0; i < 4; ++i) z[i] = 0.5 + std::abs(random_vector(rng, 1)[0]);
        const auto walls = planes_through(rng, z, 5);
        EXPECT_LE(cadra_chain(OrthantFace{8, 4}, walls).residual(z), 1e-10);
    }
}

TEST(Thresholder, Branches) {
    const auto t = thresholder_fixture();
    EXPECT_DOUBLE_EQ(t(vec({0.5}))[0], 0.0);
    EXPECT_DOUBLE_EQ(t(vec({2}))[0], 1.0);
    EXPECT_DOUBLE_EQ(t(vec({-3}))[0], -2.0);
    EXPECT_THROW(t(vec({1, 2})), InvalidArgument);
}

TEST(TwoLines, Examples) {
    EXPECT_EQ(two_lines_fixture(pi / 2)(vec({3, -7})), vec({0, 0}));
    const Vector y = two_lines_fixture(pi / 6)(vec({1, 0}));
    EXPECT_NEAR(y[0], 0.75, 1e-15);
    EXPECT_NEAR(y[1], std::sqrt(3.0) / 4.0, 1e-15);
    EXPECT_THROW(two_lines_fixture(0.0), InvalidArgument);
    EXPECT_THROW(two_lines_fixture(2.0), InvalidArgument);
}

TEST(TwoLines, FixDistanceToResidualRatio) {
    std::mt19937_64 rng(2);
    for (double theta : {pi / 7, pi / 4, 1.1, pi / 2}) {
        const auto t = two_lines_fixture(theta);
        for (int i = 0; i < 200; ++i) {
            const Vector x = random_vector(rng, 2);
            EXPECT_NEAR((*t.fix_distance())(x) / t.residual(x), 1.0 / std::sin(theta), 1e-9);
        }
    }
}

TEST(Properties, AveragedInequalityForEveryBuilder) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector z = random_vector(rng, 5);
        const auto planes = planes_through(rng, z, 3);
        const auto b = ball(z + random_vector(rng, 5, 0.1), 1.0);
        std::vector<FixedPointMap> maps = {
            relaxed_projector(planes[0], 0.3),
            relaxed_projector(b, 1.7),
            dr_operator(planes[0], b),
            compose({projector(planes[1]), relaxed_projector(planes[2], 1.4)}),
            convex_combination({projector(planes[0]), dr_operator(planes[1], planes[2])}, {0.25, 0.75}),
            btm_chain({planes[0], planes[1], b}),
            cadra_chain(b, planes),
        };
        for (const auto& t : maps) {
            ASSERT_TRUE(t.averagedness().has_value()) << t.label();
            const double a = *t.averagedness();
            const double sigma = (1.0 - a) / a;
            for (int i = 0; i < 200; ++i) {
                const Vector x = z + random_vector(rng, 5);
                const Vector tx = t(x);
                EXPECT_LE(sigma * (x - tx).squaredNorm(), (x - z).squaredNorm() - (tx - z).squaredNorm() + 1e-8)
                    << t.label();
            }
        }
    }
}

TEST(Properties, CompositionsAndCombinationsAreNonexpansive) {
    std::mt19937_64 rng(22);
    const auto h1 = hyperplane(random_vector(rng, 4), 1.0);
    const auto h2 = halfspace(random_vector(rng, 4), 0.5);
    const auto bl = ball(random_vector(rng, 4), 2.0);
    const auto c = compose({dr_operator(h1, bl), reflector(h2), projector(bl)});
    const auto k = convex_combination({reflector(h1), dr_operator(h2, bl), projector(h1)}, {0.2, 0.3, 0.5});
    for (int i = 0; i < 500; ++i) {
        const Vector x = random_vector(rng, 4);
        const Vector y = random_vector(rng, 4);
        EXPECT_LE((c(x) - c(y)).norm(), (x - y).norm() + 1e-9);
        EXPECT_LE((k(x) - k(y)).norm(), (x - y).norm() + 1e-9);
    }
}
