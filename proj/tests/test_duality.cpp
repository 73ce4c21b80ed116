#include <gtest/gtest.h>

#include <cmath>

#include "desx/duality.hpp"

using namespace desx;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

void expect_auerbach(const NormOracle& norm, const AuerbachBasis& b, double tol) {
    const Eigen::Index d = norm.dim();
    EXPECT_LE((b.functionals * b.vectors - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-10) << norm.describe();
    for (Eigen::Index i = 0; i < d; ++i) {
        EXPECT_NEAR(norm.eval(b.vectors.col(i)), 1.0, 1e-10) << norm.describe();
        EXPECT_NEAR(dual_eval(norm, Vector(b.functionals.row(i).transpose())).value, 1.0, tol) << norm.describe();
    }
    EXPECT_FALSE(b.approximate) << norm.describe();
}

}  // namespace

TEST(DualityMap, Examples) {
    const Vector x = vec2(1, 1);
    EXPECT_EQ(duality_map(make_lp(2, 2.0), x).functional, x);
    const auto j = duality_map(make_lp(2, 4.0), x).functional;
    EXPECT_NEAR(j[0], std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(j[1], std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(j.dot(x), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(lp_norm(j, 4.0 / 3.0), std::pow(2.0, 0.25), 1e-14);
    EXPECT_TRUE(duality_map(make_lp(3, 3.0), Vector::Zero(3)).functional.isZero(0.0));
}

TEST(DualityMap, DefiningIdentitiesOnSamples) {
    Rng rng(127);
    for (double p : {1.5, 3.0, 4.0}) {
        const auto norm = make_lp(4, p);
        for (int i = 0; i < 1000; ++i) {
            const Vector x = gaussian_vector(4, rng);
            const Vector j = duality_map(norm, x).functional;
            const double n = norm.eval(x);
            EXPECT_NEAR(j.dot(x), n * n, 1e-8 * std::max(1.0, n * n)) << p;
            EXPECT_NEAR(dual_eval(norm, j).value, n, 1e-8 * std::max(1.0, n)) << p;
        }
    }
}

TEST(DualityMap, PositivelyHomogeneous) {
    Rng rng(131);
    const auto norm = make_lp(3, 3.0);
    for (int i = 0; i < 50; ++i) {
        const Vector x = gaussian_vector(3, rng);
        const double t = 0.1 + 5.0 * std::abs(gaussian_vector(1, rng)[0]);
        EXPECT_LE((duality_map(norm, t * x).functional - t * duality_map(norm, x).functional).norm(),
                  1e-9 * std::max(1.0, t * x.norm()));
    }
}

TEST(DualityMap, FiniteDifferencesMatchTheClosedForm) {
    Rng rng(137);
    for (double p : {1.5, 3.0, 4.0}) {
        const auto custom = make_custom(3, [p](const Vector& x) { return lp_norm(x, p); });
        const auto closed = make_lp(3, p);
        for (int i = 0; i < 50; ++i) {
            const Vector x = gaussian_vector(3, rng);
            const auto numeric = duality_map(custom, x);
            EXPECT_TRUE(numeric.numeric);
            const Vector exact = duality_map(closed, x).functional;
            EXPECT_LE((numeric.functional - exact).norm(), 1e-5 * exact.norm()) << p;
        }
    }
}

TEST(DualityMap, NonSmoothNormsAreRejected) {
    for (double p : {1.0, kInf}) {
        try {
            duality_map(make_lp(2, p), vec2(1, 2));
            FAIL() << "expected an error";
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::non_smooth_norm);
        }
    }
    EXPECT_THROW(duality_map(make_polytope(Matrix(Matrix::Identity(2, 2))), vec2(1, 2)), Error);
    const auto kinked = make_custom(2, [](const Vector& x) { return lp_norm(x, 2.0) + std::abs(x[1]); });
    try {
        duality_map(kinked, vec2(1, 0));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::large_residual);
    }
}

TEST(AuerbachBasis, StandardBasisOfLpQualifies) {
    for (double p : {1.0, 1.5, 3.0, kInf}) {
        const auto norm = make_lp(3, p);
        expect_auerbach(norm, auerbach_from(norm, Matrix::Identity(3, 3)), 1e-12);
    }
}

TEST(AuerbachBasis, SquareHasDiagonalMaximizer) {
    const auto norm = make_lp(2, kInf);
    const auto b = auerbach_basis(norm);
    EXPECT_NEAR(b.quality, 2.0, 1e-9);
    expect_auerbach(norm, b, 1e-9);
    for (Eigen::Index i = 0; i < 2; ++i) EXPECT_NEAR(b.vectors.col(i).cwiseAbs().minCoeff(), 1.0, 1e-9);
    EXPECT_NEAR(b.functionals.cwiseAbs().maxCoeff(), 0.5, 1e-9);
}

TEST(AuerbachBasis, LineReturnsNormalizedVector) {
    const auto norm = make_lp(1, 3.0);
    const auto b = auerbach_basis(norm);
    EXPECT_NEAR(std::abs(b.vectors(0, 0)), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(b.functionals(0, 0)), 1.0, 1e-12);
}

TEST(AuerbachBasis, InvariantsHoldForComputedBases) {
    for (Eigen::Index d = 2; d <= 4; ++d)
        for (double p : {1.0, 1.5, 3.0, kInf}) expect_auerbach(make_lp(d, p), auerbach_basis(make_lp(d, p)), 1e-6);
}

TEST(AuerbachBasis, Deterministic) {
    const auto norm = make_lp(3, 3.0);
    EXPECT_EQ(auerbach_basis(norm).vectors, auerbach_basis(norm).vectors);
}

TEST(Forms, Examples) {
    const auto b = auerbach_from(make_lp(2, 4.0), Matrix::Identity(2, 2));
    for (Eigen::Index j = 0; j < 2; ++j) {
        const Vector e = Vector::Unit(2, j);
        EXPECT_EQ(form_g(b, e, e), 1.0);
    }
    EXPECT_NEAR(form_g(b, vec2(1, 1), vec2(1, 1)), 2.0, 1e-15);
    EXPECT_NEAR(form_B(b, vec2(1, 1), vec2(1, 1)), 2.0, 1e-15);
}

TEST(Forms, BilinearAndSymmetric) {
    const auto norm = make_lp(3, 3.0);
    const auto b = auerbach_basis(norm);
    Rng rng(139);
    for (int i = 0; i < 50; ++i) {
        const Vector x = gaussian_vector(3, rng);
        const Vector y = gaussian_vector(3, rng);
        const Vector z = gaussian_vector(3, rng);
        const double s = gaussian_vector(1, rng)[0];
        EXPECT_NEAR(form_g(b, x + s * z, y), form_g(b, x, y) + s * form_g(b, z, y), 1e-10);
        EXPECT_NEAR(form_g(b, x, y + s * z), form_g(b, x, y) + s * form_g(b, x, z), 1e-10);
        EXPECT_EQ(form_B(b, x, y), form_B(b, y, x));
    }
}

TEST(Forms, EuclideanStandardBasisGivesDotProduct) {
    const auto b = auerbach_from(make_lp(3, 2.0), Matrix::Identity(3, 3));
    Rng rng(149);
    const Vector x = gaussian_vector(3, rng);
    const Vector y = gaussian_vector(3, rng);
    EXPECT_NEAR(form_B(b, x, y), x.dot(y), 1e-14);
}

TEST(Defect, EuclideanDefectVanishes) {
    DefectSpec spec;
    spec.tuple_size = 3;
    const auto rep = near_convexity_defect(make_lp(4, 2.0), spec);
    EXPECT_LE(rep.defect_hat, 1e-10);
    EXPECT_EQ(rep.samples, 1000);
}

TEST(Defect, SingletonTupleHasNoDefect) {
    EXPECT_EQ(defect_ratio(make_lp(3, 4.0), {Vector(Vector::Ones(3))}), 0.0);
}

TEST(Defect, FourNormWitnessAtDiagonal) {
    const auto norm = make_lp(2, 4.0);
    const auto basis = auerbach_from(norm, Matrix::Identity(2, 2));
    DefectSpec spec;
    spec.count = 100;
    spec.basis = &basis;
    spec.points = {vec2(1, 1)};
    const auto rep = near_convexity_defect(norm, spec);
    EXPECT_GE(rep.defect_hat, std::abs(std::sqrt(2.0) - 2.0) / std::sqrt(2.0) - 1e-12);
}

TEST(Defect, ProofChainBoundsTheSandwichGap) {
    // |‖x‖² - B(x,x)| = |J(x)(x) - sum_i J(a_i e_i)(x)| <= ratio(a_i e_i) ‖x‖²
    Rng rng(151);
    for (double p : {1.5, 3.0, 4.0}) {
        const auto norm = make_lp(3, p);
        const auto basis = auerbach_basis(norm);
        for (int i = 0; i < 200; ++i) {
            const Vector x = gaussian_vector(3, rng);
            const double n2 = std::pow(norm.eval(x), 2);
            const double gap = std::abs(n2 - form_B(basis, x, x)) / n2;
            EXPECT_LE(gap, defect_ratio(norm, basis_tuple(basis, x)) + 1e-8) << p;
        }
    }
}

TEST(Sandwich, Examples) {
    const auto l2 = make_lp(3, 2.0);
    Rng rng(157);
    std::vector<Vector> samples;
    for (int i = 0; i < 100; ++i) samples.push_back(gaussian_vector(3, rng));
    EXPECT_TRUE(sandwich_check(l2, auerbach_from(l2, Matrix::Identity(3, 3)), 0.0, samples).passed);

    const auto l4 = make_lp(2, 4.0);
    const auto basis = auerbach_from(l4, Matrix::Identity(2, 2));
    std::vector<Vector> pts{vec2(1, 1), vec2(1, 0), vec2(0.3, -2)};
    const auto loose = sandwich_check(l4, basis, 0.5, pts);
    EXPECT_TRUE(loose.passed);
    EXPECT_NEAR(loose.worst_ratio, std::sqrt(2.0) - 1.0, 1e-12);
    const auto tight = sandwich_check(l4, basis, 0.2, {vec2(1, 1)});
    EXPECT_FALSE(tight.passed);
    ASSERT_EQ(tight.witnesses.size(), 1u);
    EXPECT_EQ(tight.witnesses.front(), vec2(1, 1));
}

TEST(Sandwich, RejectsConstantOutsideUnitInterval) {
    const auto l2 = make_lp(2, 2.0);
    const auto basis = auerbach_from(l2, Matrix::Identity(2, 2));
    EXPECT_THROW(sandwich_check(l2, basis, 1.0, {}), Error);
    EXPECT_THROW(sandwich_check(l2, basis, -0.1, {}), Error);
}
