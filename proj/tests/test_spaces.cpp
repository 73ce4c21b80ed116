#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "desx/spaces.hpp"

using namespace desx;

namespace {

// Brute-force sup of f.x over the unit sphere of a planar norm by an angle sweep.
double sweep_dual_2d(const NormOracle& norm, const Vector& f, int steps = 200000) {
    double best = 0.0;
    for (int i = 0; i < steps; ++i) {
        const double t = std::numbers::pi * i / steps;
        Vector x(2);
        x << std::cos(t), std::sin(t);
        best = std::max(best, std::abs(f.dot(x)) / norm.eval(x));
    }
    return best;
}

std::vector<NormOracle> sample_norms() {
    Matrix hex(2, 3);
    hex << 1, 0.5, -0.5, 0, 0.9, 0.9;
    return {make_lp(3, 1.0),
            make_lp(3, 1.5),
            make_lp(3, 2.0),
            make_lp(3, 4.0),
            make_lp(3, kInf),
            make_polytope(Matrix(Matrix::Identity(3, 3))),
            make_direct_sum(3.0, make_polytope(hex), make_lp(1, 2.0)),
            make_custom(3, [](const Vector& x) { return lp_norm(x, 3.0) + 0.5 * std::abs(x[0]); }, "l3+|x1|")};
}

}  // namespace

TEST(MakeLp, EvaluatesClosedForms) {
    EXPECT_DOUBLE_EQ(make_lp(3, 2.0).eval(Vector::Map(std::vector<double>{1, 2, 2}.data(), 3)), 3.0);
    Vector a(2);
    a << 1, -1;
    EXPECT_DOUBLE_EQ(make_lp(2, 1.0).eval(a), 2.0);
    Vector b(2);
    b << 0.3, -0.7;
    EXPECT_DOUBLE_EQ(make_lp(2, kInf).eval(b), 0.7);
}

TEST(MakeLp, RejectsSmallExponent) {
    try {
        make_lp(2, 0.5);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_parameter);
    }
}

TEST(MakeLp, CapabilitiesFollowTheExponent) {
    EXPECT_TRUE(make_lp(3, 1.0).capabilities().extreme_points);
    EXPECT_TRUE(make_lp(3, kInf).capabilities().extreme_points);
    EXPECT_FALSE(make_lp(3, 3.0).capabilities().extreme_points);
    EXPECT_TRUE(make_lp(3, 3.0).capabilities().analytic_dual);
    EXPECT_TRUE(make_lp(3, 3.0).capabilities().analytic_violation);
}

TEST(MakePolytope, GaugeOfSymmetricHull) {
    Vector x(2);
    x << 1, 1;
    EXPECT_NEAR(make_polytope(Matrix(Matrix::Identity(2, 2))).eval(x), 2.0, 1e-12);
    Matrix v(2, 2);
    v << 1, 1, 1, -1;
    EXPECT_NEAR(make_polytope(v).eval(Vector::Unit(2, 0)), 1.0, 1e-12);
}

TEST(MakePolytope, NonSpanningVerticesAreDegenerate) {
    Matrix v(2, 1);
    v << 1, 0;
    try {
        make_polytope(v);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::degenerate_norm);
    }
}

TEST(MakeDirectSum, Examples) {
    Vector x(2);
    x << 1, 1;
    EXPECT_DOUBLE_EQ(make_direct_sum(1.0, make_lp(1, 1.0), make_lp(1, 1.0)).eval(x), 2.0);
    Vector y = Vector::Zero(3);
    y[0] = 1;
    EXPECT_DOUBLE_EQ(make_direct_sum(4.0, make_lp(1, kInf), make_lp(2, 2.0)).eval(y), 1.0);
}

TEST(MakeDirectSum, EuclideanSumOfLinesIsEuclidean) {
    const auto sum = make_direct_sum(2.0, make_lp(1, 2.0), make_lp(1, 2.0));
    const auto l2 = make_lp(2, 2.0);
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Vector x = gaussian_vector(2, rng);
        EXPECT_NEAR(sum.eval(x), l2.eval(x), 1e-12 * l2.eval(x));
    }
}

TEST(MakeDirectSum, RejectsSmallExponent) {
    EXPECT_THROW(make_direct_sum(0.9, make_lp(1, 2.0), make_lp(1, 2.0)), Error);
}

TEST(NormInvariants, PositivityHomogeneitySymmetryTriangle) {
    Rng rng(11);
    std::uniform_real_distribution<double> scale(-5.0, 5.0);
    for (const auto& n : sample_norms()) {
        EXPECT_EQ(n.eval(Vector::Zero(n.dim())), 0.0) << n.describe();
        for (int i = 0; i < 200; ++i) {
            const Vector x = gaussian_vector(n.dim(), rng);
            const Vector y = gaussian_vector(n.dim(), rng);
            const double t = scale(rng);
            const double nx = n.eval(x);
            EXPECT_GT(nx, 0.0);
            EXPECT_NEAR(n.eval(t * x), std::abs(t) * nx, 1e-12 * std::abs(t) * nx) << n.describe();
            EXPECT_EQ(n.eval(-x), nx) << n.describe();
            EXPECT_LE(n.eval(x + y), nx + n.eval(y) + 1e-10) << n.describe();
        }
    }
}

TEST(DualEval, Examples) {
    Vector f(2);
    f << 1, -1;
    EXPECT_DOUBLE_EQ(dual_eval(make_lp(2, 1.0), f).value, 1.0);
    Vector g(2);
    g << 1, 1;
    const auto l4 = make_lp(2, 4.0);
    EXPECT_NEAR(dual_eval(l4, g).value, std::pow(2.0, 0.75), 1e-14);
    EXPECT_NEAR(sweep_dual_2d(l4, g), std::pow(2.0, 0.75), 1e-9);
    for (const auto& n : sample_norms()) EXPECT_EQ(dual_eval(n, Vector::Zero(n.dim())).value, 0.0);
}

TEST(DualEval, MatchesAngleSweepOnPlanarNorms) {
    Matrix hex(2, 3);
    hex << 1, 0.5, -0.5, 0, 0.9, 0.9;
    const std::vector<NormOracle> norms{make_lp(2, 1.5), make_lp(2, 3.0),
                                        make_custom(2, [](const Vector& x) { return lp_norm(x, 3.0) + 0.5 * std::abs(x[0]); })};
    Rng rng(5);
    for (const auto& n : norms) {
        for (int i = 0; i < 5; ++i) {
            const Vector f = gaussian_vector(2, rng);
            const auto dv = dual_eval(n, f);
            EXPECT_NEAR(dv.value, sweep_dual_2d(n, f), 1e-6 * dv.value) << n.describe();
        }
    }
    // the sweep error is first order at a vertex, so polytopes use the vertex maximum
    for (int i = 0; i < 5; ++i) {
        const Vector f = gaussian_vector(2, rng);
        EXPECT_NEAR(dual_eval(make_polytope(hex), f).value, (f.transpose() * hex).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_TRUE(dual_eval(norms.back(), Vector::Ones(2)).heuristic);
    EXPECT_FALSE(dual_eval(norms.front(), Vector::Ones(2)).heuristic);
}

TEST(DualEval, PairingBoundOnSamples) {
    Rng rng(17);
    for (const auto& n : sample_norms()) {
        for (int i = 0; i < 1000; ++i) {
            const Vector f = gaussian_vector(n.dim(), rng);
            const Vector x = gaussian_vector(n.dim(), rng);
            const double bound = dual_eval(n, f).value * n.eval(x);
            EXPECT_LE(f.dot(x), bound + 1e-9 * std::max(1.0, bound)) << n.describe();
            if (i > 20 && n.family() == NormFamily::custom) break;  // the ascent is slow
        }
    }
}

TEST(SupportPoint, IsUnitAndAttainsTheDualValue) {
    Rng rng(23);
    for (const auto& n : sample_norms()) {
        const Vector g = gaussian_vector(n.dim(), rng);
        const auto s = support_point(n, g);
        EXPECT_NEAR(n.eval(s.point), 1.0, 1e-9) << n.describe();
        EXPECT_NEAR(g.dot(s.point), s.value, 1e-9 * s.value) << n.describe();
    }
}

TEST(Restrict, Examples) {
    const auto sub = restrict(make_lp(3, 2.0), Matrix(Matrix::Identity(3, 2)));
    Vector c(2);
    c << 3, 4;
    EXPECT_DOUBLE_EQ(sub.norm.eval(c), 5.0);

    Matrix b(2, 1);
    b << 1, 1;
    EXPECT_DOUBLE_EQ(restrict(make_lp(2, 1.0), b).norm.eval(Vector::Ones(1)), 2.0);

    Matrix dep(3, 2);
    dep << 1, 2, 0, 0, 0, 0;
    try {
        restrict(make_lp(3, 2.0), dep);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::degenerate_subspace);
    }
}

TEST(Restrict, PreservesValuesAndProjectsOrthogonally) {
    Rng rng(29);
    for (const auto& n : sample_norms()) {
        const Matrix b = gaussian_matrix(n.dim(), 2, rng);
        const auto sub = restrict(n, b);
        EXPECT_LE((sub.projector * sub.basis - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
        for (int i = 0; i < 20; ++i) {
            const Vector c = gaussian_vector(2, rng);
            EXPECT_EQ(sub.norm.eval(c), n.eval(b * c)) << n.describe();
            const Vector x = gaussian_vector(n.dim(), rng);
            const Vector r = x - b * sub.project(x);
            EXPECT_LE((b.transpose() * r).cwiseAbs().maxCoeff(), 1e-12 * x.norm());
        }
    }
}

TEST(Restrict, CoordinateSelectionOfLpIsLp) {
    Matrix b = Matrix::Zero(5, 2);
    b(3, 0) = -1.0;
    b(1, 1) = 1.0;
    const auto sub = restrict(make_lp(5, 3.0), b);
    EXPECT_EQ(sub.norm.family(), NormFamily::lp);
    Rng rng(31);
    for (int i = 0; i < 20; ++i) {
        const Vector c = gaussian_vector(2, rng);
        EXPECT_EQ(sub.norm.eval(c), make_lp(5, 3.0).eval(b * c));
    }
}

TEST(Direction, NormalizedToDualNormOne) {
    Rng rng(37);
    for (const auto& n : sample_norms()) {
        const auto d = make_direction(n, gaussian_vector(n.dim(), rng));
        EXPECT_NEAR(d.dual_norm, 1.0, 1e-9) << n.describe();
    }
    EXPECT_THROW(make_direction(make_lp(2, 2.0), Vector::Zero(2)), Error);
}

TEST(ExtremePoints, CubeAndCrossPolytope) {
    const auto cube = extreme_points(make_lp(3, kInf));
    ASSERT_TRUE(cube.has_value());
    EXPECT_EQ(cube->cols(), 4);
    EXPECT_EQ(cube->cwiseAbs().minCoeff(), 1.0);
    const auto cross = extreme_points(make_lp(3, 1.0));
    ASSERT_TRUE(cross.has_value());
    EXPECT_EQ(cross->cols(), 3);
    EXPECT_FALSE(extreme_points(make_lp(3, 3.0)).has_value());
}
