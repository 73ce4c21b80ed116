#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "desx/core.hpp"
#include "desx/detail/simplex.hpp"

namespace desx {

enum class NormFamily { lp, polytope, direct_sum, restricted, custom };

inline const char* to_string(NormFamily f) {
    switch (f) {
        case NormFamily::lp: return "lp";
        case NormFamily::polytope: return "polytope";
        case NormFamily::direct_sum: return "direct_sum";
        case NormFamily::restricted: return "restricted";
        case NormFamily::custom: return "custom";
    }
    return "unknown";
}

struct Capabilities {
    bool analytic_dual = false;
    bool extreme_points = false;
    bool analytic_violation = false;
    /// exact linear maximization over the unit ball
    bool support_oracle = false;
};

namespace detail {
struct NormNode;
}

/// A symmetric norm on R^dim. Immutable; copies share the underlying node.
class NormOracle {
  public:
    using Callback = std::function<double(const Vector&)>;

    NormOracle() = default;
    explicit NormOracle(std::shared_ptr<const detail::NormNode> node) : node_(std::move(node)) {}

    auto dim() const -> Eigen::Index;
    auto family() const -> NormFamily;
    auto capabilities() const -> const Capabilities&;
    /// Gram matrix Q when the norm is Euclidean-type, i.e. ||x||^2 = x'Qx.
    auto quadratic_form() const -> const std::optional<Matrix>&;
    auto describe() const -> const std::string&;
    auto eval(const Vector& x) const -> double;
    auto operator()(const Vector& x) const -> double { return eval(x); }
    auto node() const -> const detail::NormNode& { return *node_; }
    auto valid() const -> bool { return static_cast<bool>(node_); }

  private:
    std::shared_ptr<const detail::NormNode> node_;
};

namespace detail {

struct LpData {
    double p;
};

struct PolytopeData {
    Matrix vertices;     // d x m, one representative per +-pair
    Matrix constraints;  // gauge LP constraint matrix
};

struct DirectSumData {
    double p;
    NormOracle left;
    NormOracle right;
};

struct RestrictedData {
    NormOracle ambient;
    Matrix basis;                   // ambient_dim x k
    std::optional<Matrix> inverse;  // when the basis is square
};

struct CustomData {
    NormOracle::Callback fn;
};

struct NormNode {
    Eigen::Index dim = 0;
    NormFamily family = NormFamily::custom;
    Capabilities caps;
    std::optional<Matrix> quadratic;
    std::string description;
    std::variant<LpData, PolytopeData, DirectSumData, RestrictedData, CustomData> data;
};

inline auto format_p(double p) -> std::string {
    if (std::isinf(p)) return "inf";
    std::ostringstream os;
    os.precision(17);
    os << p;
    return os.str();
}

/// Flip to a canonical sign so that eval(-x) == eval(x) bit for bit.
inline auto canonical_sign(const Vector& x) -> Vector {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] != 0.0) return x[i] < 0.0 ? Vector(-x) : x;
    }
    return x;
}

inline auto polytope_gauge(const PolytopeData& data, const Vector& x) -> double {
    if (x.isZero(0.0)) return 0.0;
    const Vector xc = canonical_sign(x);
    const Eigen::Index d = xc.size();
    Vector c(2 * d);
    c << xc, -xc;
    const Vector b = Vector::Ones(data.constraints.rows());
    return std::max(0.0, simplex_max(c, data.constraints, b));
}

}  // namespace detail

inline auto NormOracle::dim() const -> Eigen::Index { return node_->dim; }
inline auto NormOracle::family() const -> NormFamily { return node_->family; }
inline auto NormOracle::capabilities() const -> const Capabilities& { return node_->caps; }
inline auto NormOracle::quadratic_form() const -> const std::optional<Matrix>& { return node_->quadratic; }
inline auto NormOracle::describe() const -> const std::string& { return node_->description; }

inline auto NormOracle::eval(const Vector& x) const -> double {
    require_dim(x.size(), node_->dim, "norm evaluation");
    return std::visit(
        [&](const auto& data) -> double {
            using T = std::decay_t<decltype(data)>;
            if constexpr (std::is_same_v<T, detail::LpData>) {
                return lp_norm(x, data.p);
            } else if constexpr (std::is_same_v<T, detail::PolytopeData>) {
                return detail::polytope_gauge(data, x);
            } else if constexpr (std::is_same_v<T, detail::DirectSumData>) {
                const auto k = data.left.dim();
                return combine_p(data.left.eval(x.head(k)), data.right.eval(x.tail(x.size() - k)), data.p);
            } else if constexpr (std::is_same_v<T, detail::RestrictedData>) {
                return data.ambient.eval(data.basis * x);
            } else {
                return std::abs(data.fn(detail::canonical_sign(x)));
            }
        },
        node_->data);
}

// ---------------------------------------------------------------------------
// construction

inline auto make_lp(Eigen::Index d, double p) -> NormOracle {
    require(d >= 1, ErrorCode::invalid_parameter, "dimension must be positive");
    require(p >= 1.0, ErrorCode::invalid_parameter, "p must be >= 1, got " + detail::format_p(p));
    auto node = std::make_shared<detail::NormNode>();
    node->dim = d;
    node->family = NormFamily::lp;
    const bool vertexy = (p == 1.0 || std::isinf(p));
    node->caps = Capabilities{true, vertexy, true, true};
    if (p == 2.0) node->quadratic = Matrix::Identity(d, d);
    node->description = "lp(" + std::to_string(d) + "," + detail::format_p(p) + ")";
    node->data = detail::LpData{p};
    return NormOracle(std::move(node));
}

inline auto make_polytope(const Matrix& vertices) -> NormOracle {
    const Eigen::Index d = vertices.rows();
    require(d >= 1 && vertices.cols() >= 1, ErrorCode::degenerate_norm, "empty vertex set");
    require(matrix_rank(vertices) == d, ErrorCode::degenerate_norm,
            "vertices do not span R^" + std::to_string(d));
    auto node = std::make_shared<detail::NormNode>();
    node->dim = d;
    node->family = NormFamily::polytope;
    node->caps = Capabilities{true, true, true, true};
    const Matrix vt = vertices.transpose();
    const Eigen::Index m = vertices.cols();
    Matrix g(2 * m, 2 * d);
    g << vt, -vt, -vt, vt;
    node->description = "polytope(" + std::to_string(m) + " vertices in R^" + std::to_string(d) + ")";
    node->data = detail::PolytopeData{vertices, std::move(g)};
    return NormOracle(std::move(node));
}

inline auto make_polytope(const std::vector<Vector>& vertices) -> NormOracle {
    require(!vertices.empty(), ErrorCode::degenerate_norm, "empty vertex set");
    Matrix v(vertices.front().size(), static_cast<Eigen::Index>(vertices.size()));
    for (std::size_t j = 0; j < vertices.size(); ++j) {
        require_dim(vertices[j].size(), v.rows(), "polytope vertex");
        v.col(static_cast<Eigen::Index>(j)) = vertices[j];
    }
    return make_polytope(v);
}

inline auto make_direct_sum(double p, const NormOracle& left, const NormOracle& right) -> NormOracle {
    require(p >= 1.0, ErrorCode::invalid_parameter, "p must be >= 1, got " + detail::format_p(p));
    auto node = std::make_shared<detail::NormNode>();
    const auto kl = left.dim();
    const auto kr = right.dim();
    node->dim = kl + kr;
    node->family = NormFamily::direct_sum;
    const auto& cl = left.capabilities();
    const auto& cr = right.capabilities();
    node->caps.analytic_dual = cl.analytic_dual && cr.analytic_dual;
    node->caps.support_oracle = cl.support_oracle && cr.support_oracle;
    node->caps.analytic_violation = cl.analytic_violation && cr.analytic_violation;
    node->caps.extreme_points = (p == 1.0 || std::isinf(p)) && cl.extreme_points && cr.extreme_points;
    if (p == 2.0 && left.quadratic_form() && right.quadratic_form()) {
        Matrix q = Matrix::Zero(node->dim, node->dim);
        q.topLeftCorner(kl, kl) = *left.quadratic_form();
        q.bottomRightCorner(kr, kr) = *right.quadratic_form();
        node->quadratic = std::move(q);
    }
    node->description = "sum(" + detail::format_p(p) + "," + left.describe() + "," + right.describe() + ")";
    node->data = detail::DirectSumData{p, left, right};
    return NormOracle(std::move(node));
}

/// Norm given by an evaluation callback; no analytic capabilities.
inline auto make_custom(Eigen::Index d, NormOracle::Callback fn, std::string name = "custom") -> NormOracle {
    require(d >= 1, ErrorCode::invalid_parameter, "dimension must be positive");
    require(static_cast<bool>(fn), ErrorCode::invalid_parameter, "empty norm callback");
    auto node = std::make_shared<detail::NormNode>();
    node->dim = d;
    node->family = NormFamily::custom;
    node->description = name + "(" + std::to_string(d) + ")";
    node->data = detail::CustomData{std::move(fn)};
    return NormOracle(std::move(node));
}

// ---------------------------------------------------------------------------
// subspaces

/// A finite-dimensional subspace given by an explicit basis of ambient vectors.
struct Subspace {
    NormOracle ambient;
    Matrix basis;      // ambient_dim x k, columns are basis vectors
    Matrix projector;  // k x ambient_dim, Euclidean-orthogonal projection in basis coordinates
    NormOracle norm;   // induced norm on basis coordinates

    auto dim() const -> Eigen::Index { return basis.cols(); }
    auto embed(const Vector& coords) const -> Vector { return basis * coords; }
    auto project(const Vector& x) const -> Vector { return projector * x; }
    auto induced_norm(const Vector& coords) const -> double { return ambient.eval(basis * coords); }
    /// Euclidean distance from x to the span, relative to |x|.
    auto relative_residual(const Vector& x) const -> double {
        const double nx = x.norm();
        if (nx == 0.0) return 0.0;
        return (x - basis * (projector * x)).norm() / nx;
    }
};

/// Columns are distinct signed unit vectors.
inline auto is_coordinate_selection(const Matrix& basis) -> bool {
    std::vector<bool> used(static_cast<std::size_t>(basis.rows()), false);
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
        Eigen::Index hit = -1;
        for (Eigen::Index i = 0; i < basis.rows(); ++i) {
            const double v = basis(i, j);
            if (v == 0.0) continue;
            if (hit >= 0 || std::abs(v) != 1.0) return false;
            hit = i;
        }
        if (hit < 0 || used[static_cast<std::size_t>(hit)]) return false;
        used[static_cast<std::size_t>(hit)] = true;
    }
    return true;
}

inline auto restrict(const NormOracle& ambient, const Matrix& basis) -> Subspace {
    require_dim(basis.rows(), ambient.dim(), "subspace basis");
    require(basis.cols() >= 1, ErrorCode::degenerate_subspace, "empty basis");
    require(basis.cols() <= ambient.dim(), ErrorCode::degenerate_subspace, "more basis vectors than dimensions");
    const Matrix gram = basis.transpose() * basis;
    Eigen::JacobiSVD<Matrix> svd(gram);
    const double smax = svd.singularValues()[0];
    const double smin = svd.singularValues()[gram.rows() - 1];
    require(smin > 1e-10 * std::max(1.0, smax), ErrorCode::degenerate_subspace,
            "basis vectors are linearly dependent");

    Subspace sub;
    sub.ambient = ambient;
    sub.basis = basis;
    sub.projector = gram.ldlt().solve(basis.transpose());

    // a signed selection of coordinates of an lp space is lp again, with the
    // same values and the exact oracles of the family
    if (const auto* lp = std::get_if<detail::LpData>(&ambient.node().data); lp && is_coordinate_selection(basis)) {
        sub.norm = make_lp(basis.cols(), lp->p);
        return sub;
    }

    auto node = std::make_shared<detail::NormNode>();
    node->dim = basis.cols();
    node->family = NormFamily::restricted;
    std::optional<Matrix> inverse;
    if (basis.cols() == ambient.dim()) inverse = basis.partialPivLu().inverse();
    const auto& ac = ambient.capabilities();
    if (ambient.quadratic_form()) node->quadratic = symmetrized(basis.transpose() * *ambient.quadratic_form() * basis);
    const bool quad = node->quadratic.has_value();
    node->caps.extreme_points = inverse.has_value() && ac.extreme_points;
    node->caps.support_oracle = quad || (inverse.has_value() && ac.support_oracle);
    node->caps.analytic_dual = quad || (inverse.has_value() && ac.analytic_dual);
    node->caps.analytic_violation = quad || node->caps.extreme_points;
    node->description = "restrict(" + ambient.describe() + "," + std::to_string(basis.cols()) + ")";
    node->data = detail::RestrictedData{ambient, basis, std::move(inverse)};
    sub.norm = NormOracle(std::move(node));
    return sub;
}

inline auto restrict(const NormOracle& ambient, const std::vector<Vector>& basis) -> Subspace {
    require(!basis.empty(), ErrorCode::degenerate_subspace, "empty basis");
    Matrix b(ambient.dim(), static_cast<Eigen::Index>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j) {
        require_dim(basis[j].size(), ambient.dim(), "subspace basis vector");
        b.col(static_cast<Eigen::Index>(j)) = basis[j];
    }
    return restrict(ambient, b);
}

// ---------------------------------------------------------------------------
// linear maximization over the unit ball, dual norm, extreme points

struct SupportPoint {
    Vector point;  // unit-norm maximizer of g.x
    double value = 0.0;
    bool heuristic = false;
};

struct DualValue {
    double value = 0.0;
    bool heuristic = false;
};

namespace detail {

inline auto numeric_norm_gradient(const NormOracle& norm, const Vector& x) -> Vector {
    const double h = 1e-7 * std::max(x.norm(), 1e-300);
    Vector grad(x.size());
    Vector y = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        y[i] = x[i] + h;
        const double fp = norm.eval(y);
        y[i] = x[i] - h;
        const double fm = norm.eval(y);
        y[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

/// Multi-start projected gradient ascent on the unit sphere of `norm` for a
/// scale-invariant objective phi(x) / N(x)^degree. Returns local maxima, best first.
struct SphereAscentResult {
    Vector point;
    double value;
};

inline auto sphere_ascent(const NormOracle& norm, const std::function<double(const Vector&)>& phi,
                          const std::function<Vector(const Vector&)>& phi_grad, int degree,
                          const std::vector<Vector>& starts) -> std::vector<SphereAscentResult> {
    std::vector<SphereAscentResult> out;
    auto objective = [&](const Vector& x) {
        const double n = norm.eval(x);
        return phi(x) / std::pow(n, degree);
    };
    for (const auto& s : starts) {
        const double ns = norm.eval(s);
        if (!(ns > 0.0) || !std::isfinite(ns)) continue;
        Vector x = s / ns;
        double fx = objective(x);
        double step = 1.0;
        for (int it = 0; it < 400; ++it) {
            const Vector gn = numeric_norm_gradient(norm, x);
            const Vector grad = phi_grad(x) - static_cast<double>(degree) * phi(x) * gn;
            const double gnorm2 = grad.squaredNorm();
            if (gnorm2 < 1e-30) break;
            bool improved = false;
            double t = step;
            while (t > 1e-16) {
                Vector y = x + t * grad;
                const double ny = norm.eval(y);
                if (ny > 0.0) {
                    y /= ny;
                    const double fy = objective(y);
                    if (fy > fx) {
                        const double gain = fy - fx;
                        x = y;
                        fx = fy;
                        improved = true;
                        step = std::min(4.0 * t, 1e6);
                        if (gain <= 1e-15 * std::abs(fx)) t = 0.0;
                        break;
                    }
                }
                t *= 0.5;
            }
            if (!improved || t == 0.0) break;
        }
        out.push_back({x, fx});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.value > b.value; });
    return out;
}

inline auto heuristic_starts(Eigen::Index d, const Vector* hint, int random_starts, std::uint64_t seed)
    -> std::vector<Vector> {
    std::vector<Vector> starts;
    if (hint != nullptr && !hint->isZero(0.0)) starts.push_back(*hint);
    for (Eigen::Index i = 0; i < d; ++i) {
        Vector e = Vector::Zero(d);
        e[i] = (hint != nullptr && (*hint)[i] < 0.0) ? -1.0 : 1.0;
        starts.push_back(e);
    }
    Rng rng(seed);
    for (int i = 0; i < random_starts; ++i) starts.push_back(gaussian_vector(d, rng));
    return starts;
}

inline auto lp_support(const Vector& g, double p) -> Vector {
    const Eigen::Index d = g.size();
    Vector x = Vector::Zero(d);
    if (p == 1.0) {
        Eigen::Index i = 0;
        g.cwiseAbs().maxCoeff(&i);
        x[i] = sign_of(g[i]);
    } else if (std::isinf(p)) {
        for (Eigen::Index i = 0; i < d; ++i) x[i] = sign_of(g[i]);
    } else if (p == 2.0) {
        x = g / g.stableNorm();
    } else {
        const double q = conjugate_exponent(p);
        const double nq = lp_norm(g, q);
        for (Eigen::Index i = 0; i < d; ++i) x[i] = sign_of(g[i]) * std::pow(std::abs(g[i]) / nq, q - 1.0);
    }
    return x;
}

}  // namespace detail

inline auto dual_eval(const NormOracle& norm, const Vector& f) -> DualValue;

/// argmax { g.x : ||x|| <= 1 }; the zero functional maps to the zero vector.
inline auto support_point(const NormOracle& norm, const Vector& g, int random_starts = 32) -> SupportPoint {
    require_dim(g.size(), norm.dim(), "support functional");
    const Eigen::Index d = norm.dim();
    if (g.isZero(0.0)) return {Vector::Zero(d), 0.0, false};
    const auto& node = norm.node();

    if (node.quadratic && node.family != NormFamily::lp) {
        const Vector w = node.quadratic->ldlt().solve(g);
        const double v = std::sqrt(std::max(0.0, g.dot(w)));
        return {w / v, v, false};
    }
    return std::visit(
        [&](const auto& data) -> SupportPoint {
            using T = std::decay_t<decltype(data)>;
            if constexpr (std::is_same_v<T, detail::LpData>) {
                const Vector x = detail::lp_support(g, data.p);
                return {x, lp_norm(g, conjugate_exponent(data.p)), false};
            } else if constexpr (std::is_same_v<T, detail::PolytopeData>) {
                const Vector s = data.vertices.transpose() * g;
                Eigen::Index j = 0;
                const double v = s.cwiseAbs().maxCoeff(&j);
                return {sign_of(s[j]) * data.vertices.col(j), v, false};
            } else if constexpr (std::is_same_v<T, detail::DirectSumData>) {
                const auto k = data.left.dim();
                const auto sl = support_point(data.left, g.head(k), random_starts);
                const auto sr = support_point(data.right, g.tail(d - k), random_starts);
                Vector ab(2);
                ab << sl.value, sr.value;
                const Vector st = detail::lp_support(ab, data.p);
                Vector x(d);
                x << st[0] * sl.point, st[1] * sr.point;
                return {x, combine_p(sl.value, sr.value, conjugate_exponent(data.p)),
                        sl.heuristic || sr.heuristic};
            } else if constexpr (std::is_same_v<T, detail::RestrictedData>) {
                if (data.inverse && data.ambient.capabilities().support_oracle) {
                    const auto sa = support_point(data.ambient, data.inverse->transpose() * g, random_starts);
                    return {*data.inverse * sa.point, sa.value, sa.heuristic};
                }
                const auto starts = detail::heuristic_starts(d, &g, random_starts, 0x5eed);
                const auto res = detail::sphere_ascent(
                    norm, [&](const Vector& x) { return g.dot(x); }, [&](const Vector&) { return g; }, 1, starts);
                return {res.front().point, std::max(0.0, res.front().value), true};
            } else {
                const auto starts = detail::heuristic_starts(d, &g, random_starts, 0x5eed);
                const auto res = detail::sphere_ascent(
                    norm, [&](const Vector& x) { return g.dot(x); }, [&](const Vector&) { return g; }, 1, starts);
                return {res.front().point, std::max(0.0, res.front().value), true};
            }
        },
        node.data);
}

/// sup { f.x : ||x|| <= 1 }.
inline auto dual_eval(const NormOracle& norm, const Vector& f) -> DualValue {
    require_dim(f.size(), norm.dim(), "dual evaluation");
    if (f.isZero(0.0)) return {0.0, false};
    const auto& node = norm.node();
    if (const auto* lp = std::get_if<detail::LpData>(&node.data)) {
        return {lp_norm(f, conjugate_exponent(lp->p)), false};
    }
    if (const auto* ds = std::get_if<detail::DirectSumData>(&node.data)) {
        const auto k = ds->left.dim();
        const auto a = dual_eval(ds->left, f.head(k));
        const auto b = dual_eval(ds->right, f.tail(f.size() - k));
        return {combine_p(a.value, b.value, conjugate_exponent(ds->p)), a.heuristic || b.heuristic};
    }
    const auto s = support_point(norm, f);
    return {s.value, s.heuristic};
}

/// Extreme points of the unit ball, one representative per +-pair, as columns.
/// Empty when the family has no finite enumeration or it exceeds `limit`.
inline auto extreme_points(const NormOracle& norm, Eigen::Index limit = 1 << 16) -> std::optional<Matrix> {
    const auto& node = norm.node();
    if (!node.caps.extreme_points) return std::nullopt;
    const Eigen::Index d = norm.dim();
    if (const auto* lp = std::get_if<detail::LpData>(&node.data)) {
        if (lp->p == 1.0) return Matrix(Matrix::Identity(d, d));
        if (d > 30 || (Eigen::Index{1} << (d - 1)) > limit) return std::nullopt;
        const Eigen::Index count = Eigen::Index{1} << (d - 1);
        Matrix v(d, count);
        for (Eigen::Index j = 0; j < count; ++j) {
            v(0, j) = 1.0;
            for (Eigen::Index i = 1; i < d; ++i) v(i, j) = ((j >> (i - 1)) & 1) ? -1.0 : 1.0;
        }
        return v;
    }
    if (const auto* poly = std::get_if<detail::PolytopeData>(&node.data)) {
        if (poly->vertices.cols() > limit) return std::nullopt;
        return poly->vertices;
    }
    if (const auto* ds = std::get_if<detail::DirectSumData>(&node.data)) {
        const auto l = extreme_points(ds->left, limit);
        const auto r = extreme_points(ds->right, limit);
        if (!l || !r) return std::nullopt;
        const auto kl = ds->left.dim();
        const auto kr = ds->right.dim();
        if (ds->p == 1.0) {
            if (l->cols() + r->cols() > limit) return std::nullopt;
            Matrix v = Matrix::Zero(d, l->cols() + r->cols());
            v.topLeftCorner(kl, l->cols()) = *l;
            v.bottomRightCorner(kr, r->cols()) = *r;
            return v;
        }
        if (2 * l->cols() * r->cols() > limit) return std::nullopt;
        Matrix v(d, 2 * l->cols() * r->cols());
        Eigen::Index j = 0;
        for (Eigen::Index a = 0; a < l->cols(); ++a) {
            for (Eigen::Index b = 0; b < r->cols(); ++b) {
                v.col(j).head(kl) = l->col(a);
                v.col(j++).tail(kr) = r->col(b);
                v.col(j).head(kl) = l->col(a);
                v.col(j++).tail(kr) = -r->col(b);
            }
        }
        return v;
    }
    if (const auto* rs = std::get_if<detail::RestrictedData>(&node.data)) {
        if (!rs->inverse) return std::nullopt;
        const auto a = extreme_points(rs->ambient, limit);
        if (!a) return std::nullopt;
        return Matrix(*rs->inverse * *a);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// directions

/// A functional normalized to dual norm 1.
struct Direction {
    Vector coefficients;
    double dual_norm = 0.0;
    bool heuristic = false;
};

inline auto make_direction(const NormOracle& norm, const Vector& f) -> Direction {
    require_dim(f.size(), norm.dim(), "direction");
    require(!f.isZero(0.0), ErrorCode::invalid_input, "direction functional must be nonzero");
    const auto dv = dual_eval(norm, f);
    require(dv.value > 0.0, ErrorCode::invalid_input, "direction has zero dual norm");
    Direction dir;
    dir.coefficients = f / dv.value;
    const auto check = dual_eval(norm, dir.coefficients);
    dir.dual_norm = check.value;
    dir.heuristic = dv.heuristic || check.heuristic;
    return dir;
}

}  // namespace desx
