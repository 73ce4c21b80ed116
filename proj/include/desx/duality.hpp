#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "desx/core.hpp"
#include "desx/mvee.hpp"
#include "desx/spaces.hpp"

namespace desx {

// ---------------------------------------------------------------------------
// duality map

struct DualityValue {
    Vector functional;
    bool numeric = false;  // central differences rather than a closed form
};

/// J(x) = ||x|| grad||x||, the norming functional with J(x)(x) = ||x||^2.
inline auto duality_map(const NormOracle& norm, const Vector& x) -> DualityValue {
    require_dim(x.size(), norm.dim(), "duality map");
    const auto& node = norm.node();
    if (const auto* lp = std::get_if<detail::LpData>(&node.data)) {
        const double p = lp->p;
        require(p != 1.0 && !std::isinf(p), ErrorCode::non_smooth_norm, "l_" + detail::format_p(p) + " is not smooth");
        if (x.isZero(0.0)) return {Vector::Zero(x.size()), false};
        if (p == 2.0) return {x, false};
        const double n = lp_norm(x, p);
        Vector j(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            // |x_i|^(p-1) ||x||^(2-p), scaled to keep the powers in range
            j[i] = sign_of(x[i]) * n * std::pow(std::abs(x[i]) / n, p - 1.0);
        }
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (x[i] == 0.0) j[i] = 0.0;
        return {j, false};
    }
    require(node.family != NormFamily::polytope, ErrorCode::non_smooth_norm, "polytope norms are not smooth");
    if (x.isZero(0.0)) return {Vector::Zero(x.size()), false};

    const double n = norm.eval(x);
    const double h = 1e-6 * x.norm();
    Vector grad(x.size());
    Vector y = x;
    double kink = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        y[i] = x[i] + h;
        const double fp = norm.eval(y);
        y[i] = x[i] - h;
        const double fm = norm.eval(y);
        y[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
        kink = std::max(kink, std::abs((fp - n) - (n - fm)) / h);
    }
    // one-sided slopes disagree at a corner; Euler's identity fails with them
    require(kink <= 1e-3 && std::abs(grad.dot(x) - n) <= 1e-6 * n, ErrorCode::large_residual,
            "norm is not differentiable at the given point");
    return {n * grad, true};
}

// ---------------------------------------------------------------------------
// Auerbach bases

struct AuerbachBasis {
    Matrix vectors;      // columns e_i, unit norm
    Matrix functionals;  // rows e_i*, biorthogonal to the vectors
    double quality = 0.0;  // |det| of the vector matrix
    Vector dual_norms;
    bool approximate = false;  // some functional misses dual norm one by more than 1e-6
    bool heuristic = false;
};

/// Completes unit vectors to a basis with biorthogonal functionals and checks the dual norms.
inline auto auerbach_from(const NormOracle& norm, const Matrix& vectors) -> AuerbachBasis {
    const Eigen::Index d = norm.dim();
    require(vectors.rows() == d && vectors.cols() == d, ErrorCode::dimension_mismatch,
            "basis must be square of the norm dimension");
    Eigen::FullPivLU<Matrix> lu(vectors);
    require(lu.isInvertible(), ErrorCode::singular_matrix, "basis vectors are dependent");
    AuerbachBasis out;
    out.vectors = vectors;
    for (Eigen::Index j = 0; j < d; ++j) out.vectors.col(j) /= norm.eval(out.vectors.col(j));
    out.functionals = out.vectors.inverse();
    out.quality = std::abs(out.vectors.determinant());
    out.dual_norms.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const auto dv = dual_eval(norm, out.functionals.row(i).transpose());
        out.dual_norms[i] = dv.value;
        out.heuristic = out.heuristic || dv.heuristic;
        if (std::abs(dv.value - 1.0) > 1e-6) out.approximate = true;
    }
    return out;
}

namespace detail {

/// Signs fixed so the largest entry of each column is positive, columns sorted
/// lexicographically on coordinates rounded to 1e-9.
inline auto canonical_basis(Matrix v) -> Matrix {
    const Eigen::Index d = v.cols();
    for (Eigen::Index j = 0; j < d; ++j) {
        Eigen::Index i = 0;
        v.col(j).cwiseAbs().maxCoeff(&i);
        if (v(i, j) < 0.0) v.col(j) = -v.col(j);
    }
    auto key = [](const Vector& c) {
        std::vector<long long> k;
        for (Eigen::Index i = 0; i < c.size(); ++i) k.push_back(std::llround(c[i] * 1e9));
        return k;
    };
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) order[static_cast<std::size_t>(j)] = j;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return key(v.col(a)) > key(v.col(b)); });
    Matrix out(v.rows(), d);
    for (Eigen::Index j = 0; j < d; ++j) out.col(j) = v.col(order[static_cast<std::size_t>(j)]);
    return out;
}

/// Lexicographic comparison of coordinates rounded to 1e-9, column by column.
inline auto lex_greater(const Matrix& a, const Matrix& b) -> bool {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            const auto x = std::llround(a(i, j) * 1e9);
            const auto y = std::llround(b(i, j) * 1e9);
            if (x != y) return x > y;
        }
    }
    return false;
}

}  // namespace detail

/// Maximizes |det| over d-tuples of unit vectors by coordinate ascent: det is
/// linear in each column, so the best replacement for column i is the support
/// point of its cofactor functional. Any coordinatewise maximum is Auerbach.
inline auto auerbach_basis(const NormOracle& norm, const SolverConfig& config = {}, int restarts = 8)
    -> AuerbachBasis {
    const Eigen::Index d = norm.dim();
    require(d >= 1, ErrorCode::invalid_parameter, "dimension must be positive");
    require(restarts >= 1, ErrorCode::invalid_parameter, "at least one start is needed");
    Rng rng(config.seed);
    Matrix best;
    double best_det = -1.0;
    bool heuristic = false;
    for (int r = 0; r < restarts; ++r) {
        Matrix v = r == 0 ? Matrix(Matrix::Identity(d, d)) : gaussian_matrix(d, d, rng);
        for (Eigen::Index j = 0; j < d; ++j) v.col(j) /= norm.eval(v.col(j));
        if (std::abs(v.determinant()) < 1e-12) continue;
        double det = std::abs(v.determinant());
        for (int sweep = 0; sweep < 10000; ++sweep) {
            const double before = det;
            for (Eigen::Index i = 0; i < d; ++i) {
                const Vector cof = v.determinant() * v.inverse().row(i).transpose();
                const auto s = support_point(norm, cof, config.violation_starts);
                heuristic = heuristic || s.heuristic;
                const Vector x = s.point / norm.eval(s.point);
                if (std::abs(cof.dot(x)) > std::abs(cof.dot(v.col(i)))) v.col(i) = x;
            }
            det = std::abs(v.determinant());
            if (det - before <= 1e-10 * before) break;
        }
        v = detail::canonical_basis(std::move(v));
        const bool tie = best_det > 0.0 && std::abs(det - best_det) <= 1e-9 * best_det;
        if ((!tie && det > best_det) || (tie && detail::lex_greater(v, best))) {
            best = v;
            best_det = std::max(best_det, det);
        }
    }
    require(best_det > 0.0, ErrorCode::degenerate_norm, "no nondegenerate start");
    auto out = auerbach_from(norm, best);
    out.heuristic = out.heuristic || heuristic;
    return out;
}

/// g(x, y) = sum_i a_i e_i*(x) where y = sum_i a_i e_i.
inline auto form_g(const AuerbachBasis& basis, const Vector& x, const Vector& y) -> double {
    require_dim(x.size(), basis.functionals.cols(), "form argument");
    require_dim(y.size(), basis.functionals.cols(), "form argument");
    const Vector a = basis.functionals * y;
    const Vector fx = basis.functionals * x;
    return a.dot(fx);
}

inline auto form_B(const AuerbachBasis& basis, const Vector& x, const Vector& y) -> double {
    return 0.5 * (form_g(basis, x, y) + form_g(basis, y, x));
}

// ---------------------------------------------------------------------------
// near-convexity defect

struct DefectSpec {
    int count = 1000;       // random tuples
    int tuple_size = 2;
    std::uint64_t seed = 0;
    const AuerbachBasis* basis = nullptr;  // adds the tuples (a_i e_i) of sampled x
    std::vector<Vector> points;            // extra x to decompose along the basis
};

struct DefectReport {
    int samples = 0;
    double defect_hat = 0.0;  // a lower bound for the best constant C
    std::vector<Vector> witness;
    bool numeric = false;
};

/// ||J(sum x_i) - sum J(x_i)||_* / ||sum x_i||; zero when the sum vanishes.
inline auto defect_ratio(const NormOracle& norm, const std::vector<Vector>& tuple) -> double {
    require(!tuple.empty(), ErrorCode::invalid_input, "empty tuple");
    Vector sum = Vector::Zero(norm.dim());
    Vector js = Vector::Zero(norm.dim());
    for (const auto& x : tuple) {
        sum += x;
        js += duality_map(norm, x).functional;
    }
    const double n = norm.eval(sum);
    if (n == 0.0) return 0.0;
    const Vector diff = duality_map(norm, sum).functional - js;
    return dual_eval(norm, diff).value / n;
}

/// The tuple (a_1 e_1, ..., a_n e_n) with x = sum a_i e_i.
inline auto basis_tuple(const AuerbachBasis& basis, const Vector& x) -> std::vector<Vector> {
    const Vector a = basis.functionals * x;
    std::vector<Vector> out;
    for (Eigen::Index i = 0; i < a.size(); ++i) out.push_back(a[i] * basis.vectors.col(i));
    return out;
}

inline auto near_convexity_defect(const NormOracle& norm, const DefectSpec& spec) -> DefectReport {
    require(spec.count >= 0 && spec.tuple_size >= 1, ErrorCode::invalid_parameter, "invalid sample plan");
    const Eigen::Index d = norm.dim();
    DefectReport rep;
    auto consider = [&](std::vector<Vector> tuple) {
        const double r = defect_ratio(norm, tuple);
        ++rep.samples;
        if (rep.witness.empty() || r > rep.defect_hat) {
            rep.defect_hat = r;
            rep.witness = std::move(tuple);
        }
    };
    Rng rng(spec.seed);
    for (int s = 0; s < spec.count; ++s) {
        std::vector<Vector> tuple;
        for (int i = 0; i < spec.tuple_size; ++i) tuple.push_back(gaussian_vector(d, rng));
        consider(std::move(tuple));
        if (spec.basis != nullptr) consider(basis_tuple(*spec.basis, gaussian_vector(d, rng)));
    }
    if (spec.basis != nullptr)
        for (const auto& x : spec.points) consider(basis_tuple(*spec.basis, x));
    rep.numeric = norm.family() != NormFamily::lp;
    return rep;
}

// ---------------------------------------------------------------------------
// sandwich

struct SandwichReport {
    double C = 0.0;
    bool passed = true;
    double worst_ratio = 0.0;  // max |‖x‖^2 - B(x,x)| / ‖x‖^2
    std::vector<Vector> witnesses;
};

/// Checks |‖x‖^2 - B(x,x)| <= C‖x‖^2 + 1e-9 on the samples.
inline auto sandwich_check(const NormOracle& norm, const AuerbachBasis& basis, double C,
                           const std::vector<Vector>& samples) -> SandwichReport {
    require(C >= 0.0 && C < 1.0, ErrorCode::invalid_parameter, "C must lie in [0, 1)");
    SandwichReport rep;
    rep.C = C;
    for (const auto& x : samples) {
        require_dim(x.size(), norm.dim(), "sandwich sample");
        const double n2 = std::pow(norm.eval(x), 2);
        const double gap = std::abs(n2 - form_B(basis, x, x));
        if (n2 > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, gap / n2);
        if (gap > C * n2 + 1e-9) {
            rep.passed = false;
            rep.witnesses.push_back(x);
        }
    }
    return rep;
}

}  // namespace desx
