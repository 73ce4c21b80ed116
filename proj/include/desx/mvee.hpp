#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "desx/core.hpp"
#include "desx/spaces.hpp"

namespace desx {

inline auto format_number(double v) -> std::string {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct SolverConfig {
    double eps = 1e-7;              // design certificate: kappa <= d (1 + eps)
    double containment_tol = 1e-6;  // cutting plane stops when max x'Ax <= 1 + tol on the body
    long max_iter = 200000;         // Frank-Wolfe iterations per design solve
    int violation_starts = 32;
    std::uint64_t seed = 0;
    int max_rounds = 400;  // cutting-plane rounds
    // Solves aim for this tighter level and settle for eps when the budget runs
    // out. The volume is flat to second order in A, so A is only accurate to
    // about sqrt(eps) unless the design is solved well past the certificate.
    double target_eps = 1e-11;

    auto design_target() const -> double { return std::min(eps, target_eps); }

    void validate() const {
        require(eps > 0.0 && containment_tol > 0.0, ErrorCode::invalid_parameter, "tolerances must be positive");
        require(max_iter > 0 && max_rounds > 0, ErrorCode::invalid_parameter, "iteration budgets must be positive");
        require(violation_starts >= 0, ErrorCode::invalid_parameter, "violation_starts must be nonnegative");
    }
};

/// Centered ellipsoid { x : x'Ax <= 1 }.
struct Ellipsoid {
    Matrix A;
    std::string basis_id = "standard";
    double eps_certificate = 0.0;

    auto dim() const -> Eigen::Index { return A.rows(); }
};

/// Weighted design over symmetric point pairs; the dual certificate of the MVEE.
struct DesignState {
    Matrix points;   // d x n, one representative per +-pair
    Vector weights;  // sums to one
    Matrix moment;   // sum_i w_i u_i u_i'
    Matrix A;        // ellipsoid matrix, feasible for every point
    double kappa = 0.0;
    double min_support_kappa = 0.0;
    long iterations = 0;
};

class NonConvergence : public Error {
  public:
    NonConvergence(const std::string& what, double kappa, double violation, Matrix last_iterate)
        : Error(ErrorCode::non_convergence, what),
          kappa_(kappa),
          violation_(violation),
          last_iterate_(std::move(last_iterate)) {}

    auto kappa() const -> double { return kappa_; }
    auto violation() const -> double { return violation_; }
    auto last_iterate() const -> const Matrix& { return last_iterate_; }

  private:
    double kappa_;
    double violation_;
    Matrix last_iterate_;
};

inline void validate(const Ellipsoid& e) {
    require(e.A.rows() == e.A.cols() && e.A.rows() >= 1, ErrorCode::invalid_input, "ellipsoid matrix must be square");
    const double scale = std::max(1.0, e.A.cwiseAbs().maxCoeff());
    require((e.A - e.A.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorCode::invalid_input,
            "ellipsoid matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(e.A, Eigen::EigenvaluesOnly);
    require(es.eigenvalues()[0] > 0.0, ErrorCode::invalid_input, "ellipsoid matrix is not positive definite");
}

namespace detail {

inline auto log_det_spd(const Matrix& m) -> double {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return -kInf;
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

inline auto inverse_spd(const Matrix& m) -> Matrix {
    Eigen::LDLT<Matrix> ldlt(m);
    return symmetrized(ldlt.solve(Matrix::Identity(m.rows(), m.cols())));
}

/// Primal-dual interior point method for the dual of the (weighted) design
/// problem
///     minimize  -log det A - nz log z   subject to  u_i'A u_i + t_i^2 z <= 1,
/// with the scalar z present only when nz > 0. Frank-Wolfe stalls on clustered
/// point sets long before the accuracy the cutting plane needs. Slacks and
/// multipliers are iterated as independent variables, so both keep full
/// relative precision near the optimum; the multipliers are the design
/// weights up to normalization.
struct InteriorResult {
    Matrix a;
    double z = 0.0;
    Vector w;
};

/// The start (a0, z0, w0) should be nearly stationary, as the ellipsoid and
/// scaled weights of a Frank-Wolfe design are; `gap0` estimates its duality
/// gap and sets the initial complementarity, so the warm start is kept.
inline auto interior_design(const Matrix& u, const Vector& t2, double nz, const Matrix& a0, double z0,
                            const Vector& w0, double gap0, double gap_target) -> InteriorResult {
    const Eigen::Index k = u.rows();
    const Eigen::Index count = u.cols();
    const Eigen::Index pa = k * (k + 1) / 2;
    const bool with_z = nz > 0.0;
    const Eigen::Index dim = pa + (with_z ? 1 : 0);
    const double r2 = std::sqrt(2.0);
    const double n_con = static_cast<double>(count);

    // orthonormal coordinates on symmetric matrices
    std::vector<std::pair<Eigen::Index, Eigen::Index>> idx;
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = r; c < k; ++c) idx.emplace_back(r, c);
    auto coord = [&](const Matrix& m, std::size_t i) {
        const auto [r, c] = idx[i];
        return r == c ? m(r, r) : r2 * m(r, c);
    };
    auto to_matrix = [&](const Vector& x) {
        Matrix m(k, k);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto [r, c] = idx[i];
            const double v = x[static_cast<Eigen::Index>(i)];
            if (r == c) {
                m(r, r) = v;
            } else {
                m(r, c) = v / r2;
                m(c, r) = v / r2;
            }
        }
        return m;
    };

    Matrix cmat(count, dim);
    for (Eigen::Index i = 0; i < count; ++i) {
        const Matrix uu = u.col(i) * u.col(i).transpose();
        for (std::size_t j = 0; j < idx.size(); ++j) cmat(i, static_cast<Eigen::Index>(j)) = coord(uu, j);
        if (with_z) cmat(i, pa) = t2[i];
    }

    // strictly feasible start on the approximate central path
    Vector x(dim);
    for (std::size_t j = 0; j < idx.size(); ++j) x[static_cast<Eigen::Index>(j)] = coord(a0, j);
    if (with_z) x[pa] = z0;
    gap0 = std::max(gap0, 10.0 * gap_target);
    const double shrink = (cmat * x).maxCoeff() * (1.0 + std::max(gap0 / n_con, 1e-14));
    x /= shrink;
    Vector s = Vector::Ones(count) - cmat * x;
    Vector w = shrink * w0 + (1e-2 * gap0 / n_con) * s.cwiseInverse();

    // gradient and Hessian of -log det A - nz log z
    auto objective = [&](const Vector& y, Vector& grad, Matrix* hess) {
        Eigen::LLT<Matrix> llt(to_matrix(y.head(pa)));
        if (llt.info() != Eigen::Success || (with_z && !(y[pa] > 0.0))) return false;
        const Matrix b = llt.solve(Matrix::Identity(k, k));
        grad.resize(dim);
        for (std::size_t j = 0; j < idx.size(); ++j) grad[static_cast<Eigen::Index>(j)] = -coord(b, j);
        if (with_z) grad[pa] = -nz / y[pa];
        if (hess != nullptr) {
            hess->setZero(dim, dim);
            for (std::size_t j = 0; j < idx.size(); ++j) {
                const auto [r, c] = idx[j];
                const Matrix e = r == c ? Matrix(b.col(r) * b.row(r))
                                        : Matrix((b.col(r) * b.row(c) + b.col(c) * b.row(r)) / r2);
                for (std::size_t i = 0; i < idx.size(); ++i)
                    (*hess)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = coord(e, i);
            }
            if (with_z) (*hess)(pa, pa) = nz / (y[pa] * y[pa]);
        }
        return true;
    };

    auto max_step = [](const Vector& v, const Vector& dv) {
        double a = 1.0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
        return a;
    };

    Vector grad;
    Matrix hess;
    // Rounding eventually stalls the dual residual while the complementarity
    // keeps shrinking, so the best iterate seen is kept.
    Vector best_x = x;
    Vector best_w = w;
    double best_merit = kInf;
    int since_best = 0;
    for (int iter = 0; iter < 300 && since_best < 8; ++iter) {
        objective(x, grad, &hess);
        const Vector rd = grad + cmat.transpose() * w;
        const Vector rp = cmat * x + s - Vector::Ones(count);
        const double mu = s.dot(w) / n_con;
        const double scale = 1.0 + grad.cwiseAbs().maxCoeff();
        const double dual_err = rd.cwiseAbs().maxCoeff() / scale;
        if (!std::isfinite(mu) || !std::isfinite(dual_err)) break;
        const double merit = std::max(dual_err, s.dot(w));
        if (merit < best_merit) {
            best_merit = merit;
            best_x = x;
            best_w = w;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (s.dot(w) <= gap_target && dual_err <= 1e-12) break;

        const Vector dscale = w.cwiseQuotient(s);
        const Matrix kkt = hess + cmat.transpose() * dscale.asDiagonal() * cmat;
        const Eigen::LDLT<Matrix> fact(kkt);
        // direction for a given complementarity target, including a corrector term
        // Solves  H dx + C'dw = -rd,  C dx + ds = -rp,  S dw + W ds = rc,  with
        // iterative refinement against the unreduced system, which the large
        // entries of W/S near the optimum otherwise leave inexact.
        auto direction = [&](const Vector& rc, Vector& dx, Vector& ds, Vector& dw) {
            auto reduced = [&](const Vector& e1, const Vector& e2, const Vector& e3, Vector& x1, Vector& x2,
                               Vector& x3) {
                const Vector rhs = -e1 - cmat.transpose() * s.cwiseInverse().cwiseProduct(e3 + w.cwiseProduct(e2));
                x1 = fact.solve(rhs);
                x2 = -e2 - cmat * x1;
                x3 = s.cwiseInverse().cwiseProduct(e3 - w.cwiseProduct(x2));
            };
            reduced(rd, rp, rc, dx, ds, dw);
            for (int pass = 0; pass < 2; ++pass) {
                const Vector e1 = hess * dx + cmat.transpose() * dw + rd;
                const Vector e2 = cmat * dx + ds + rp;
                const Vector e3 = s.cwiseProduct(dw) + w.cwiseProduct(ds) - rc;
                Vector c1, c2, c3;
                reduced(e1, e2, -e3, c1, c2, c3);
                dx += c1;
                ds += c2;
                dw += c3;
            }
        };

        // Mehrotra predictor-corrector
        Vector dx, ds, dw;
        direction(-s.cwiseProduct(w), dx, ds, dw);
        const double ap = max_step(s, ds);
        const double ad = max_step(w, dw);
        const double mu_aff = (s + ap * ds).dot(w + ad * dw) / n_con;
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
        const Vector rc = Vector::Constant(count, sigma * mu) - s.cwiseProduct(w) - ds.cwiseProduct(dw);
        direction(rc, dx, ds, dw);

        double step = 0.99 * std::min(max_step(s, ds), max_step(w, dw));
        step = std::min(1.0, step);
        Vector g2;
        int halvings = 0;
        while (!objective(x + step * dx, g2, nullptr) && halvings < 60) {
            step *= 0.5;
            ++halvings;
        }
        if (halvings == 60 || step <= 0.0) break;
        x += step * dx;
        s += step * ds;
        w += step * dw;
    }

    InteriorResult out;
    out.a = symmetrized(to_matrix(best_x.head(pa)));
    out.z = with_z ? best_x[pa] : 0.0;
    out.w = best_w;
    return out;
}

inline auto design_state(const Matrix& u, Vector lambda, long iterations, double support_floor) -> DesignState {
    lambda /= lambda.sum();
    DesignState state;
    state.points = u;
    state.moment = symmetrized(u * lambda.asDiagonal() * u.transpose());
    const Vector g = (u.array() * (inverse_spd(state.moment) * u).array()).colwise().sum().transpose();
    state.kappa = g.maxCoeff();
    // (d M)^{-1} scaled down by kappa / d so that every point lies inside
    state.A = inverse_spd(state.kappa * state.moment);
    double ms = kInf;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        if (lambda[i] > support_floor) ms = std::min(ms, g[i]);
    state.min_support_kappa = ms;
    state.weights = std::move(lambda);
    state.iterations = iterations;
    return state;
}

/// Frank-Wolfe with Wolfe-Atwood away steps on the centered D-optimal design
/// problem, warm started from the given weights, then finished by the interior
/// point method when the target lies below what Frank-Wolfe reaches quickly.
inline auto solve_design(const Matrix& u, Vector lambda, double target, double eps, long max_iter) -> DesignState {
    const Eigen::Index d = u.rows();
    const Eigen::Index n = u.cols();
    const double dd = static_cast<double>(d);
    const double coarse = std::max(target, 1e-5);
    Matrix minv;
    Vector g(n);

    auto refresh = [&] {
        lambda = lambda.cwiseMax(0.0);
        lambda /= lambda.sum();
        const Matrix m = symmetrized(u * lambda.asDiagonal() * u.transpose());
        minv = inverse_spd(m);
        g = (u.array() * (minv * u).array()).colwise().sum().transpose();
    };

    long it = 0;
    auto frank_wolfe = [&](double level) {
        const long budget = it + max_iter;
        refresh();
        long since_refresh = 0;
        for (;;) {
            Eigen::Index j = 0;
            const double kappa = g.maxCoeff(&j);
            Eigen::Index k = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (lambda[i] > 0.0 && (k < 0 || g[i] < g[k])) k = i;
            }
            const double gmin = g[k];
            if ((kappa <= dd * (1.0 + level) && gmin >= dd * (1.0 - level)) || it >= budget) {
                if (since_refresh == 0) break;
                refresh();
                since_refresh = 0;
                continue;
            }
            ++it;

            Eigen::Index idx = j;
            double tau = 0.0;
            bool drop = false;
            const bool toward = (kappa / dd - 1.0) >= (1.0 - gmin / dd) || lambda[k] >= 1.0 - 1e-15;
            if (toward) {
                tau = (kappa / dd - 1.0) / (kappa - 1.0);
            } else {
                idx = k;
                const double lo = -lambda[k] / (1.0 - lambda[k]);
                tau = gmin > 1.0 ? (gmin / dd - 1.0) / (gmin - 1.0) : lo;
                if (tau <= lo) {
                    tau = lo;
                    drop = true;
                }
                if (1.0 + tau * (gmin - 1.0) <= 1e-14) {
                    tau = (gmin / dd - 1.0) / (gmin - 1.0);
                    drop = false;
                }
            }

            const double gu = g[idx];
            const double denom = 1.0 - tau + tau * gu;
            const Vector w = minv * u.col(idx);
            const Vector h = u.transpose() * w;
            g = (g - (tau / denom) * h.cwiseAbs2()) / (1.0 - tau);
            minv = (minv - (tau / denom) * w * w.transpose()) / (1.0 - tau);
            lambda *= (1.0 - tau);
            lambda[idx] += tau;
            if (drop || lambda[idx] < 0.0) lambda[idx] = 0.0;

            if (++since_refresh >= 256 || drop) {
                refresh();
                since_refresh = 0;
            }
        }
    };
    frank_wolfe(coarse);

    DesignState state = design_state(u, lambda, it, 10.0 * eps);
    if (state.kappa > dd * (1.0 + target) || state.min_support_kappa < dd * (1.0 - 10.0 * target)) {
        const auto polished =
            interior_design(u, Vector(), 0.0, inverse_spd(dd * state.moment), 0.0, dd * state.weights,
                            state.kappa - dd, 0.5 * target * dd);
        auto defect = [&](const DesignState& st) {
            // scaled so that a value <= eps means certified
            return std::max(st.kappa / dd - 1.0, 0.1 * (1.0 - st.min_support_kappa / dd));
        };
        if (polished.w.sum() > 0.0) {
            DesignState alt = design_state(u, polished.w, it, 10.0 * eps);
            if (defect(alt) < defect(state)) state = std::move(alt);
        }
        // The interior iterate is within the duality gap of the optimum, far
        // tighter than the ellipsoid the weights imply since the volume is flat
        // to second order in A. Scaled so that every point lies inside.
        const double reach = (u.array() * (polished.a * u).array()).colwise().sum().maxCoeff();
        Matrix a_best = polished.a / std::max(1.0, reach);
        // Frank-Wolfe closes a small remaining certificate gap
        if (defect(state) > eps) {
            lambda = state.weights;
            frank_wolfe(eps);
            DesignState alt = design_state(u, lambda, it, 10.0 * eps);
            if (defect(alt) < defect(state)) state = std::move(alt);
        }
        if (log_det_spd(a_best) > log_det_spd(state.A)) state.A = std::move(a_best);
    }
    const bool certified = state.kappa <= dd * (1.0 + eps) && state.min_support_kappa >= dd * (1.0 - 10.0 * eps);
    if (!certified) {
        throw NonConvergence("design solver did not certify kappa <= d (1 + eps): kappa/d - 1 = " +
                                 format_number(state.kappa / dd - 1.0) + ", support slack 1 - g_min/d = " +
                                 format_number(1.0 - state.min_support_kappa / dd),
                             state.kappa,
                             state.kappa / dd - 1.0, inverse_spd(dd * state.moment));
    }
    return state;
}

inline auto is_block_diagonal(const Matrix& a, Eigen::Index k) -> bool {
    const double scale = a.cwiseAbs().maxCoeff();
    if (k <= 0 || k >= a.rows()) return true;
    return a.topRightCorner(k, a.cols() - k).cwiseAbs().maxCoeff() <= 1e-13 * scale;
}

inline auto is_diagonal(const Matrix& a) -> bool {
    const double scale = a.diagonal().cwiseAbs().maxCoeff();
    Matrix off = a;
    off.diagonal().setZero();
    return off.size() == 0 || off.cwiseAbs().maxCoeff() <= 1e-14 * scale;
}

}  // namespace detail

inline auto mvee_points(const Matrix& points, const SolverConfig& config = {}) -> std::pair<Ellipsoid, DesignState> {
    config.validate();
    const Eigen::Index d = points.rows();
    require(d >= 1 && points.cols() >= 1, ErrorCode::degenerate_input, "empty point set");
    require(matrix_rank(points) == d, ErrorCode::degenerate_input, "points do not span R^" + std::to_string(d));
    const Vector lambda = Vector::Constant(points.cols(), 1.0 / static_cast<double>(points.cols()));
    auto state = detail::solve_design(points, lambda, config.design_target(), config.eps, config.max_iter);
    Ellipsoid e;
    e.A = detail::inverse_spd(static_cast<double>(d) * state.moment);
    e.eps_certificate = config.eps;
    return {std::move(e), std::move(state)};
}

inline auto mvee_points(const std::vector<Vector>& points, const SolverConfig& config = {})
    -> std::pair<Ellipsoid, DesignState> {
    require(!points.empty(), ErrorCode::degenerate_input, "empty point set");
    Matrix u(points.front().size(), static_cast<Eigen::Index>(points.size()));
    for (std::size_t j = 0; j < points.size(); ++j) u.col(static_cast<Eigen::Index>(j)) = points[j];
    return mvee_points(u, config);
}

// ---------------------------------------------------------------------------
// violation search: maximize x'Ax over the unit ball of the norm

struct Violation {
    Vector point;
    double value = 0.0;
};

struct ViolationResult {
    Vector point;
    double value = 0.0;
    bool heuristic = false;
    std::vector<Violation> candidates;  // distinct local maxima, best first
};

namespace detail {

inline void sort_and_dedupe(std::vector<Violation>& c, std::size_t cap) {
    std::stable_sort(c.begin(), c.end(), [](const auto& a, const auto& b) { return a.value > b.value; });
    std::vector<Violation> out;
    for (auto& v : c) {
        bool dup = false;
        for (const auto& o : out) {
            const double s = std::max(1.0, o.point.norm());
            if ((o.point - v.point).norm() <= 1e-6 * s || (o.point + v.point).norm() <= 1e-6 * s) {
                dup = true;
                break;
            }
        }
        if (!dup) out.push_back(std::move(v));
        if (out.size() >= cap) break;
    }
    c = std::move(out);
}

inline auto finish(std::vector<Violation> c, bool heuristic, std::size_t cap) -> ViolationResult {
    sort_and_dedupe(c, cap);
    ViolationResult r;
    r.point = c.front().point;
    r.value = c.front().value;
    r.heuristic = heuristic;
    r.candidates = std::move(c);
    return r;
}

inline auto lp_diagonal_violation(const Vector& a, double p) -> std::vector<Violation> {
    const Eigen::Index d = a.size();
    std::vector<Violation> out;
    if (p <= 2.0) {
        for (Eigen::Index i = 0; i < d; ++i) {
            Vector e = Vector::Zero(d);
            e[i] = 1.0;
            out.push_back({e, a[i]});
        }
        return out;
    }
    // Lagrange condition for max sum a_i y_i^(2/p) on the simplex y = |x|^p:
    // y_i proportional to a_i^r with r = p/(p-2); the maximum is ||a||_r.
    const double amax = a.maxCoeff();
    Vector x(d);
    double value = 0.0;
    if (std::isinf(p)) {
        x.setOnes();
        value = a.sum();
    } else {
        const double r = p / (p - 2.0);
        Vector ar(d);
        for (Eigen::Index i = 0; i < d; ++i) ar[i] = std::pow(std::max(a[i], 0.0) / amax, r);
        const double s = ar.sum();
        for (Eigen::Index i = 0; i < d; ++i) x[i] = std::pow(ar[i] / s, 1.0 / p);
        value = amax * std::pow(s, 1.0 / r);
    }
    const Eigen::Index free_bits = std::min<Eigen::Index>(d - 1, 11);
    for (Eigen::Index mask = 0; mask < (Eigen::Index{1} << free_bits); ++mask) {
        Vector y = x;
        for (Eigen::Index i = 1; i <= free_bits; ++i)
            if ((mask >> (i - 1)) & 1) y[i] = -y[i];
        out.push_back({y, value});
    }
    return out;
}

inline auto violation_candidates(const NormOracle& norm, const Matrix& a, const SolverConfig& config,
                                 std::size_t cap) -> ViolationResult;

/// max x'Ax over the direct sum ball when A has no cross block.
inline auto block_violation(const DirectSumData& ds, const Matrix& a, const SolverConfig& config, std::size_t cap)
    -> ViolationResult {
    const auto kl = ds.left.dim();
    const auto kr = ds.right.dim();
    const auto left = violation_candidates(ds.left, a.topLeftCorner(kl, kl), config, 4);
    const auto right = violation_candidates(ds.right, a.bottomRightCorner(kr, kr), config, 4);
    const double p = ds.p;
    std::vector<Violation> out;
    auto push = [&](const Vector& u, double su, const Vector& v, double sv, double value) {
        Vector x(kl + kr);
        x << su * u, sv * v;
        out.push_back({x, value});
        if (su != 0.0 && sv != 0.0) {
            x.tail(kr) = -x.tail(kr);
            out.push_back({x, value});
        }
    };
    for (const auto& l : left.candidates) {
        for (const auto& r : right.candidates) {
            const double ml = l.value;
            const double mr = r.value;
            if (p <= 2.0) {
                push(l.point, 1.0, r.point, 0.0, ml);
                push(l.point, 0.0, r.point, 1.0, mr);
            } else if (std::isinf(p)) {
                push(l.point, 1.0, r.point, 1.0, ml + mr);
            } else {
                Vector m(2);
                m << ml, mr;
                const auto best = lp_diagonal_violation(m, p);
                push(l.point, best.front().point[0], r.point, best.front().point[1], best.front().value);
            }
        }
    }
    return finish(std::move(out), left.heuristic || right.heuristic, cap);
}

inline auto power_violation(const NormOracle& norm, const Matrix& a, const SolverConfig& config, std::size_t cap)
    -> ViolationResult {
    const Eigen::Index d = norm.dim();
    std::vector<Vector> starts;
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    for (Eigen::Index i = d - 1; i >= 0; --i) starts.push_back(es.eigenvectors().col(i));
    for (Eigen::Index i = 0; i < d; ++i) starts.push_back(Vector::Unit(d, i));
    if (d <= 10) {
        for (Eigen::Index mask = 0; mask < (Eigen::Index{1} << (d - 1)); ++mask) {
            Vector s = Vector::Ones(d);
            for (Eigen::Index i = 1; i < d; ++i)
                if ((mask >> (i - 1)) & 1) s[i] = -1.0;
            starts.push_back(s);
        }
    }
    Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < config.violation_starts; ++i) starts.push_back(gaussian_vector(d, rng));

    bool heuristic = true;
    std::vector<Violation> out;
    for (const auto& s : starts) {
        auto sp = support_point(norm, a * s, config.violation_starts);
        if (sp.value == 0.0) continue;
        Vector x = sp.point;
        double val = x.dot(a * x);
        for (int it = 0; it < 5000; ++it) {
            const auto next = support_point(norm, a * x, config.violation_starts);
            const double nv = next.point.dot(a * next.point);
            if (!(nv > val * (1.0 + 1e-15))) break;
            x = next.point;
            val = nv;
        }
        out.push_back({x, val});
    }
    return finish(std::move(out), heuristic, cap);
}

inline auto violation_candidates(const NormOracle& norm, const Matrix& a, const SolverConfig& config,
                                 std::size_t cap) -> ViolationResult {
    const Eigen::Index d = norm.dim();
    const auto& node = norm.node();

    if (node.quadratic) {
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(a, *node.quadratic);
        std::vector<Violation> out;
        for (Eigen::Index i = d - 1; i >= 0; --i) out.push_back({es.eigenvectors().col(i), es.eigenvalues()[i]});
        return finish(std::move(out), false, cap);
    }
    if (auto ext = extreme_points(norm, 1 << 14)) {
        std::vector<Violation> out;
        for (Eigen::Index j = 0; j < ext->cols(); ++j) {
            const Vector v = ext->col(j);
            out.push_back({v, v.dot(a * v)});
        }
        return finish(std::move(out), false, cap);
    }
    if (const auto* lp = std::get_if<LpData>(&node.data); lp != nullptr && is_diagonal(a)) {
        return finish(lp_diagonal_violation(a.diagonal(), lp->p), false, cap);
    }
    if (const auto* ds = std::get_if<DirectSumData>(&node.data);
        ds != nullptr && is_block_diagonal(a, ds->left.dim())) {
        return block_violation(*ds, a, config, cap);
    }
    if (node.caps.support_oracle) return power_violation(norm, a, config, cap);

    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    std::vector<Vector> starts;
    for (Eigen::Index i = d - 1; i >= 0; --i) starts.push_back(es.eigenvectors().col(i));
    const auto more = heuristic_starts(d, nullptr, config.violation_starts, config.seed ^ 0xabcdefULL);
    starts.insert(starts.end(), more.begin(), more.end());
    const auto res = sphere_ascent(
        norm, [&](const Vector& x) { return x.dot(a * x); }, [&](const Vector& x) { return Vector(2.0 * (a * x)); },
        2, starts);
    std::vector<Violation> out;
    for (const auto& r : res) out.push_back({r.point, r.value});
    return finish(std::move(out), true, cap);
}

}  // namespace detail

/// Unit-norm point maximizing x'Ax over the unit ball of `norm`.
inline auto violation_search(const NormOracle& norm, const Ellipsoid& e, const SolverConfig& config = {})
    -> ViolationResult {
    require_dim(e.dim(), norm.dim(), "violation search");
    return detail::violation_candidates(norm, e.A, config, static_cast<std::size_t>(2 * norm.dim() + 4));
}

// ---------------------------------------------------------------------------
// cutting-plane MVEE of a norm ball

struct BodyResult {
    Ellipsoid ellipsoid;
    DesignState design;
    Matrix support_points;  // points carrying design weight
    bool heuristic = false;
    int rounds = 0;
    double max_violation = 0.0;  // max x'Ax over the ball at termination
};

namespace detail {

/// Appends violating candidates to the design point set. Replacing nearby
/// points instead would break the monotone volume growth of the cutting plane.
inline auto update_points(Matrix& pts, Vector& weights, const std::vector<Violation>& cand, double threshold,
                          std::size_t cap) -> std::size_t {
    std::size_t added = 0;
    for (const auto& c : cand) {
        if (c.value <= threshold || added >= cap) break;
        const double s = std::max(1e-300, c.point.norm());
        bool known = false;
        for (Eigen::Index j = 0; j < pts.cols() && !known; ++j)
            known = std::min((pts.col(j) - c.point).norm(), (pts.col(j) + c.point).norm()) <= 1e-12 * s;
        if (known) continue;
        pts.conservativeResize(Eigen::NoChange, pts.cols() + 1);
        pts.col(pts.cols() - 1) = c.point;
        weights.conservativeResize(weights.size() + 1);
        weights[weights.size() - 1] = 0.0;
        ++added;
    }
    // drop unweighted points once the set grows; the oracle re-finds any that matter
    if (pts.cols() > 12 * pts.rows()) {
        const Eigen::Index first_new = pts.cols() - static_cast<Eigen::Index>(added);
        Eigen::Index keep = 0;
        for (Eigen::Index j = 0; j < pts.cols(); ++j) {
            if (weights[j] > 0.0 || j >= first_new) {
                pts.col(keep) = pts.col(j);
                weights[keep] = weights[j];
                ++keep;
            }
        }
        pts.conservativeResize(Eigen::NoChange, keep);
        weights.conservativeResize(keep);
    }
    return added;
}

/// Cutting-plane bookkeeping shared by the full and reduced solvers.
/// Rounds continue while the violation exceeds a refinement level well below
/// the containment tolerance, so that contact points are located precisely;
/// the tolerance itself decides success once progress stops.
enum class RoundOutcome { done, more, failed };

// design points themselves may sit at 1 + target after a solve
inline auto refine_level(const SolverConfig& config) -> double {
    return std::min(config.containment_tol, std::max(1e-5 * config.containment_tol, 4.0 * config.design_target()));
}

inline auto round_outcome(double violation, const SolverConfig& config, int round, std::size_t changed)
    -> RoundOutcome {
    const double refine = 1.0 + refine_level(config);
    if (violation <= refine) return RoundOutcome::done;
    if (round < config.max_rounds && changed > 0) return RoundOutcome::more;
    return violation <= 1.0 + config.containment_tol ? RoundOutcome::done : RoundOutcome::failed;
}

inline auto initial_body_points(const NormOracle& norm, std::uint64_t seed) -> Matrix {
    const Eigen::Index d = norm.dim();
    Matrix pts(d, 3 * d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const Vector e = Vector::Unit(d, i);
        pts.col(i) = e / norm.eval(e);
    }
    Rng rng(seed);
    for (Eigen::Index i = 0; i < 2 * d; ++i) {
        const Vector g = gaussian_vector(d, rng);
        pts.col(d + i) = g / norm.eval(g);
    }
    return pts;
}

inline auto support_of(const DesignState& s, double threshold) -> Matrix {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < s.weights.size(); ++i)
        if (s.weights[i] > threshold) idx.push_back(i);
    Matrix out(s.points.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = s.points.col(idx[j]);
    return out;
}

}  // namespace detail

/// Minimum-volume centered ellipsoid containing the unit ball of `norm`,
/// by alternating design solves with violation searches.
inline auto mvee_body(const NormOracle& norm, const SolverConfig& config = {}) -> BodyResult {
    config.validate();
    const Eigen::Index d = norm.dim();
    require(d >= 1, ErrorCode::invalid_parameter, "norm dimension must be positive");
    const double dd = static_cast<double>(d);

    // bodies with enumerable extreme points are solved on the full vertex set
    Matrix pts;
    if (auto ext = extreme_points(norm, 1 << 14); ext && matrix_rank(*ext) == d) {
        pts = std::move(*ext);
    } else {
        pts = detail::initial_body_points(norm, config.seed);
    }
    Vector weights = Vector::Constant(pts.cols(), 1.0 / static_cast<double>(pts.cols()));
    const std::size_t per_round = static_cast<std::size_t>(2 * d + 2);

    for (int round = 1;; ++round) {
        DesignState state =
            detail::solve_design(pts, weights, config.design_target(), config.eps, config.max_iter);
        Ellipsoid e;
        e.A = state.A;
        e.eps_certificate = config.eps;
        const auto viol = violation_search(norm, e, config);

        weights = state.weights;
        const std::size_t changed =
            viol.value <= 1.0 + detail::refine_level(config)
                ? 0
                : detail::update_points(pts, weights, viol.candidates, 1.0 + detail::refine_level(config),
                                        per_round);
        const auto outcome = detail::round_outcome(viol.value, config, round, changed);
        if (outcome == detail::RoundOutcome::done) {
            BodyResult out;
            out.support_points = detail::support_of(state, config.eps);
            out.design = std::move(state);
            out.ellipsoid = std::move(e);
            out.heuristic = viol.heuristic;
            out.rounds = round;
            out.max_violation = viol.value;
            return out;
        }
        if (outcome == detail::RoundOutcome::failed) {
            throw NonConvergence("cutting plane stalled after " + std::to_string(round) + " rounds", state.kappa,
                                 viol.value, e.A);
        }
    }
}

// ---------------------------------------------------------------------------
// reduced solver for F (+)_p l2(n)

struct ReducedResult {
    Matrix A_F;     // k x k block
    double c = 1.0;  // squared semi-axis shared by the n Euclidean coordinates
    double kappa = 0.0;
    bool heuristic = false;
    int rounds = 0;
    double max_violation = 0.0;
    Matrix points;  // (k+1) x N design points (u, t)
    Vector weights;
};

namespace detail {

struct ReducedCertificate {
    Vector weights;
    Matrix moment_f;
    double s = 0.0;
    Matrix a_f;      // ellipsoid block, feasible for every point
    double z = 0.0;  // 1 / c, the Euclidean block
    double kappa = 0.0;
    double min_support_kappa = 0.0;
};

inline auto reduced_certificate(const Matrix& uf, const Vector& t2, double n, Vector lambda, double support_floor)
    -> ReducedCertificate {
    lambda /= lambda.sum();
    ReducedCertificate out;
    out.moment_f = symmetrized(uf * lambda.asDiagonal() * uf.transpose());
    out.s = lambda.dot(t2);
    const Vector g = (uf.array() * (inverse_spd(out.moment_f) * uf).array()).colwise().sum().transpose().matrix() +
                     (n / out.s) * t2;
    out.kappa = g.maxCoeff();
    out.a_f = inverse_spd(out.kappa * out.moment_f);
    out.z = n / (out.kappa * out.s);
    double ms = kInf;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        if (lambda[i] > support_floor) ms = std::min(ms, g[i]);
    out.min_support_kappa = ms;
    out.weights = std::move(lambda);
    return out;
}

/// Frank-Wolfe on the rotation-averaged design: the full moment matrix is
/// diag(M_F, (s/n) I_n), and the n Euclidean coordinates enter only through s.
/// Step sizes come from bisection on the concave one-dimensional objective.
inline auto solve_reduced_design(const Matrix& pts, Vector lambda, long n_copies, double target, double eps,
                                 long max_iter) -> ReducedCertificate {
    const Eigen::Index k = pts.rows() - 1;
    const Eigen::Index count = pts.cols();
    const double n = static_cast<double>(n_copies);
    const double m = static_cast<double>(k) + n;
    const double coarse = std::max(target, 1e-5);
    const Matrix uf = pts.topRows(k);
    const Vector t2 = pts.row(k).transpose().cwiseAbs2();

    Matrix minv;
    Matrix mf;
    double s = 0.0;
    Vector a(count);
    Vector g(count);
    auto refresh = [&] {
        lambda = lambda.cwiseMax(0.0);
        lambda /= lambda.sum();
        mf = symmetrized(uf * lambda.asDiagonal() * uf.transpose());
        s = lambda.dot(t2);
        minv = inverse_spd(mf);
        a = (uf.array() * (minv * uf).array()).colwise().sum().transpose();
        g = a + (n / s) * t2;
    };
    refresh();

    const double kk = static_cast<double>(k);
    auto derivative = [&](Eigen::Index i, double tau) {
        const double r1 = 1.0 - tau + tau * a[i];
        const double r2 = (1.0 - tau) * s + tau * t2[i];
        if (r1 <= 0.0 || r2 <= 0.0 || tau >= 1.0) return kInf;
        return -(kk - 1.0) / (1.0 - tau) + (a[i] - 1.0) / r1 + n * (t2[i] - s) / r2;
    };

    long it = 0;
    for (; it < max_iter; ++it) {
        Eigen::Index j = 0;
        const double kappa = g.maxCoeff(&j);
        Eigen::Index lo_i = -1;
        for (Eigen::Index i = 0; i < count; ++i)
            if (lambda[i] > 0.0 && (lo_i < 0 || g[i] < g[lo_i])) lo_i = i;
        const double gmin = g[lo_i];
        if (kappa <= m * (1.0 + coarse) && gmin >= m * (1.0 - coarse)) break;

        const bool toward = (kappa / m - 1.0) >= (1.0 - gmin / m) || lambda[lo_i] >= 1.0 - 1e-15;
        const Eigen::Index idx = toward ? j : lo_i;
        double tau = 0.0;
        bool drop = false;
        if (toward) {
            double lo = 0.0;
            double hi = 1.0 - 1e-12;
            if (derivative(idx, hi) > 0.0) {
                tau = hi;
            } else {
                for (int b = 0; b < 200 && hi - lo > 1e-17; ++b) {
                    const double mid = 0.5 * (lo + hi);
                    (derivative(idx, mid) > 0.0 ? lo : hi) = mid;
                }
                tau = 0.5 * (lo + hi);
            }
        } else {
            double lo = -lambda[idx] / (1.0 - lambda[idx]);
            double hi = 0.0;
            if (derivative(idx, lo) < 0.0) {
                tau = lo;
                drop = true;
            } else {
                for (int b = 0; b < 200 && hi - lo > 1e-17; ++b) {
                    const double mid = 0.5 * (lo + hi);
                    (derivative(idx, mid) > 0.0 ? lo : hi) = mid;
                }
                tau = 0.5 * (lo + hi);
            }
        }
        lambda *= (1.0 - tau);
        lambda[idx] += tau;
        if (drop || lambda[idx] < 0.0) lambda[idx] = 0.0;
        refresh();
    }

    ReducedCertificate cert = reduced_certificate(uf, t2, n, lambda, 10.0 * eps);
    if (cert.kappa > m * (1.0 + target) || cert.min_support_kappa < m * (1.0 - 10.0 * target)) {
        const auto polished = interior_design(uf, t2, n, inverse_spd(m * cert.moment_f), n / (m * cert.s),
                                              m * cert.weights, cert.kappa - m, 0.5 * target * m);
        auto defect = [&](const ReducedCertificate& c) {
            return std::max(c.kappa / m - 1.0, 0.1 * (1.0 - c.min_support_kappa / m));
        };
        if (polished.w.sum() > 0.0) {
            ReducedCertificate alt = reduced_certificate(uf, t2, n, polished.w, 10.0 * eps);
            if (defect(alt) < defect(cert)) cert = std::move(alt);
        }
        const double reach =
            ((uf.array() * (polished.a * uf).array()).colwise().sum().transpose().matrix() + polished.z * t2)
                .maxCoeff();
        const double shrink = std::max(1.0, reach);
        if (log_det_spd(polished.a / shrink) + n * std::log(polished.z / shrink) >
            log_det_spd(cert.a_f) + n * std::log(cert.z)) {
            cert.a_f = polished.a / shrink;
            cert.z = polished.z / shrink;
        }
    }
    const bool certified = cert.kappa <= m * (1.0 + eps) && cert.min_support_kappa >= m * (1.0 - 10.0 * eps);
    if (!certified) {
        throw NonConvergence("reduced design solver did not certify kappa <= m (1 + eps): kappa/m - 1 = " +
                                 format_number(cert.kappa / m - 1.0) + ", support slack 1 - g_min/m = " +
                                 format_number(1.0 - cert.min_support_kappa / m),
                             cert.kappa,
                             cert.kappa / m - 1.0, inverse_spd(m * cert.moment_f));
    }
    return cert;
}

}  // namespace detail

/// MVEE of the unit ball of F (+)_p l2(n) in the block form
/// u'A_F u + |v|^2 / c <= 1, computed in k+1 dimensions.
inline auto mvee_direct_sum_reduced(const NormOracle& f, double p, long n, const SolverConfig& config = {})
    -> ReducedResult {
    config.validate();
    require(p >= 1.0, ErrorCode::invalid_parameter, "p must be >= 1");
    require(n >= 1, ErrorCode::invalid_parameter, "n must be positive");
    const Eigen::Index k = f.dim();
    const NormOracle body = make_direct_sum(p, f, make_lp(1, 2.0));
    const double m = static_cast<double>(k) + static_cast<double>(n);

    Matrix pts = detail::initial_body_points(body, config.seed);
    Vector weights = Vector::Constant(pts.cols(), 1.0 / static_cast<double>(pts.cols()));
    const std::size_t per_round = static_cast<std::size_t>(2 * k + 4);

    for (int round = 1;; ++round) {
        const auto st =
            detail::solve_reduced_design(pts, weights, n, config.design_target(), config.eps, config.max_iter);
        Matrix a_f = st.a_f;
        const double c = 1.0 / st.z;
        Matrix a = Matrix::Zero(k + 1, k + 1);
        a.topLeftCorner(k, k) = a_f;
        a(k, k) = 1.0 / c;
        const auto viol = detail::violation_candidates(body, a, config, per_round + 4);

        weights = st.weights;
        const std::size_t changed =
            viol.value <= 1.0 + detail::refine_level(config)
                ? 0
                : detail::update_points(pts, weights, viol.candidates, 1.0 + detail::refine_level(config),
                                        per_round);
        const auto outcome = detail::round_outcome(viol.value, config, round, changed);
        if (outcome == detail::RoundOutcome::done) {
            ReducedResult out;
            out.A_F = std::move(a_f);
            out.c = c;
            out.kappa = st.kappa;
            out.heuristic = viol.heuristic;
            out.rounds = round;
            out.max_violation = viol.value;
            out.points = pts;
            out.weights = st.weights;
            return out;
        }
        if (outcome == detail::RoundOutcome::failed) {
            throw NonConvergence("reduced cutting plane stalled after " + std::to_string(round) + " rounds",
                                 st.kappa, viol.value, a);
        }
    }
}

// ---------------------------------------------------------------------------
// geometry of an ellipsoid

struct SemiAxes {
    Vector values;  // squared semi-axis lengths C_i, descending
    Matrix frame;   // matching eigenvectors as columns
};

inline auto semi_axes(const Ellipsoid& e) -> SemiAxes {
    validate(e);
    Eigen::SelfAdjointEigenSolver<Matrix> es(e.A);
    const Eigen::Index d = e.dim();
    SemiAxes out{Vector(d), Matrix(d, d)};
    // eigenvalues of A ascend, so their reciprocals descend
    for (Eigen::Index i = 0; i < d; ++i) {
        out.values[i] = 1.0 / es.eigenvalues()[i];
        out.frame.col(i) = es.eigenvectors().col(i);
    }
    return out;
}

/// Vol(E) / Vol(Euclidean unit ball) = det(A)^(-1/2).
inline auto volume_ratio(const Ellipsoid& e) -> double {
    validate(e);
    return std::exp(-0.5 * detail::log_det_spd(e.A));
}

// ---------------------------------------------------------------------------
// text formats

/// Text record: dimension, basis id, certificate eps, row-major entries of A.
inline auto to_record(const Ellipsoid& e) -> std::string {
    std::ostringstream os;
    os << "ellipsoid\n";
    os << "dim " << e.dim() << "\n";
    os << "basis_id " << e.basis_id << "\n";
    os << "eps_certificate " << format_number(e.eps_certificate) << "\n";
    os << "A";
    for (Eigen::Index i = 0; i < e.dim(); ++i)
        for (Eigen::Index j = 0; j < e.dim(); ++j) os << ' ' << format_number(e.A(i, j));
    os << "\n";
    return os.str();
}

inline auto parse_record(const std::string& text) -> Ellipsoid {
    std::istringstream is(text);
    std::string tag;
    require(static_cast<bool>(is >> tag) && tag == "ellipsoid", ErrorCode::invalid_input, "missing ellipsoid header");
    Ellipsoid e;
    Eigen::Index d = -1;
    while (is >> tag) {
        if (tag == "dim") {
            is >> d;
        } else if (tag == "basis_id") {
            is >> e.basis_id;
        } else if (tag == "eps_certificate") {
            std::string v;
            is >> v;
            e.eps_certificate = std::stod(v);
        } else if (tag == "A") {
            require(d >= 1, ErrorCode::invalid_input, "dimension must precede matrix entries");
            e.A.resize(d, d);
            for (Eigen::Index i = 0; i < d; ++i) {
                for (Eigen::Index j = 0; j < d; ++j) {
                    std::string v;
                    require(static_cast<bool>(is >> v), ErrorCode::invalid_input, "truncated matrix entries");
                    e.A(i, j) = std::stod(v);
                }
            }
        } else {
            throw Error(ErrorCode::invalid_input, "unknown ellipsoid record field '" + tag + "'");
        }
    }
    require(d >= 1 && e.A.rows() == d, ErrorCode::invalid_input, "incomplete ellipsoid record");
    return e;
}

inline auto semi_axes_csv(const Ellipsoid& e) -> std::string {
    const auto axes = semi_axes(e);
    std::string out = "index,C\n";
    for (Eigen::Index i = 0; i < axes.values.size(); ++i)
        out += std::to_string(i + 1) + "," + format_number(axes.values[i]) + "\n";
    return out;
}

}  // namespace desx
