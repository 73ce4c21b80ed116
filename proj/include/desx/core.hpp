#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace desx {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorCode {
    invalid_parameter,
    invalid_input,
    dimension_mismatch,
    degenerate_norm,
    degenerate_subspace,
    degenerate_input,
    singular_matrix,
    non_smooth_norm,
    large_residual,
    non_convergence,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_parameter: return "invalid-parameter";
        case ErrorCode::invalid_input: return "invalid-input";
        case ErrorCode::dimension_mismatch: return "dimension-mismatch";
        case ErrorCode::degenerate_norm: return "degenerate-norm";
        case ErrorCode::degenerate_subspace: return "degenerate-subspace";
        case ErrorCode::degenerate_input: return "degenerate-input";
        case ErrorCode::singular_matrix: return "singular-matrix";
        case ErrorCode::non_smooth_norm: return "non-smooth-norm";
        case ErrorCode::large_residual: return "large-residual";
        case ErrorCode::non_convergence: return "non-convergence";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    auto code() const noexcept -> ErrorCode { return code_; }

  private:
    ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) throw Error(code, what);
}

inline void require_dim(Eigen::Index got, Eigen::Index expected, const char* what) {
    if (got != expected) {
        throw Error(ErrorCode::dimension_mismatch, std::string(what) + ": expected dimension " +
                                                       std::to_string(expected) + ", got " +
                                                       std::to_string(got));
    }
}

/// Hölder conjugate exponent; 1 <-> inf.
inline auto conjugate_exponent(double p) -> double {
    if (p == 1.0) return kInf;
    if (std::isinf(p)) return 1.0;
    return p / (p - 1.0);
}

/// (a^p + b^p)^(1/p) for nonnegative a, b, with the max for p = inf.
inline auto combine_p(double a, double b, double p) -> double {
    if (std::isinf(p)) return std::max(a, b);
    const double m = std::max(a, b);
    if (m == 0.0) return 0.0;
    if (p == 1.0) return a + b;
    return m * std::pow(std::pow(a / m, p) + std::pow(b / m, p), 1.0 / p);
}

/// ell_p norm with scaling against overflow.
inline auto lp_norm(const Vector& x, double p) -> double {
    if (x.size() == 0) return 0.0;
    if (std::isinf(p)) return x.cwiseAbs().maxCoeff();
    if (p == 1.0) return x.cwiseAbs().sum();
    if (p == 2.0) return x.stableNorm();
    const double m = x.cwiseAbs().maxCoeff();
    if (m == 0.0) return 0.0;
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += std::pow(std::abs(x[i]) / m, p);
    return m * std::pow(s, 1.0 / p);
}

inline auto sign_of(double v) -> double { return v < 0.0 ? -1.0 : 1.0; }

inline auto gaussian_vector(Eigen::Index d, Rng& rng) -> Vector {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = normal(rng);
    return v;
}

inline auto gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) -> Matrix {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
inline auto random_orthogonal(Eigen::Index d, Rng& rng) -> Matrix {
    const Matrix g = gaussian_matrix(d, d, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < d; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

/// Random signed permutation matrix.
inline auto random_signed_permutation(Eigen::Index d, Rng& rng) -> Matrix {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::bernoulli_distribution coin(0.5);
    Matrix s = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) s(i, perm[static_cast<std::size_t>(i)]) = coin(rng) ? 1.0 : -1.0;
    return s;
}

inline auto symmetrized(const Matrix& a) -> Matrix { return 0.5 * (a + a.transpose()); }

/// Smallest singular value relative to the largest; 0 for an empty matrix.
inline auto relative_min_singular_value(const Matrix& m) -> double {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    if (s[0] == 0.0) return 0.0;
    return s[s.size() - 1] / s[0];
}

inline auto matrix_rank(const Matrix& m, double rel_tol = 1e-10) -> Eigen::Index {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    if (s[0] == 0.0) return 0;
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > rel_tol * s[0]) ++r;
    return r;
}

}  // namespace desx
