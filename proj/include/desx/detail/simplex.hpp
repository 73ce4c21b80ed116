#pragma once

#include "desx/core.hpp"

namespace desx::detail {

/// Dense tableau simplex for  max c'y  s.t.  G y <= b,  y >= 0,  with b >= 0
/// (the origin is feasible, so no phase one). Bland's rule prevents cycling.
/// Returns +inf when the objective is unbounded.
inline auto simplex_max(const Vector& c, const Matrix& g, const Vector& b) -> double {
    const Eigen::Index m = g.rows();
    const Eigen::Index n = g.cols();
    constexpr double tol = 1e-12;

    // columns: n structural, m slack, 1 rhs
    Matrix t = Matrix::Zero(m + 1, n + m + 1);
    t.topLeftCorner(m, n) = g;
    t.block(0, n, m, m).setIdentity();
    t.col(n + m).head(m) = b;
    t.row(m).head(n) = -c.transpose();

    std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

    const long max_pivots = 50 * (m + n) + 1000;
    for (long it = 0; it < max_pivots; ++it) {
        Eigen::Index enter = -1;
        for (Eigen::Index j = 0; j < n + m; ++j) {
            if (t(m, j) < -tol) {
                enter = j;
                break;
            }
        }
        if (enter < 0) return t(m, n + m);

        Eigen::Index leave = -1;
        double best = kInf;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double a = t(i, enter);
            if (a > tol) {
                const double ratio = t(i, n + m) / a;
                if (ratio < best - tol ||
                    (std::abs(ratio - best) <= tol && leave >= 0 &&
                     basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
                    best = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0) return kInf;

        t.row(leave) /= t(leave, enter);
        for (Eigen::Index i = 0; i <= m; ++i) {
            if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
        }
        basis[static_cast<std::size_t>(leave)] = enter;
    }
    throw Error(ErrorCode::non_convergence, "simplex pivot budget exhausted");
}

}  // namespace desx::detail
