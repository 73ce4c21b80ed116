#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "desx/core.hpp"
#include "desx/detail/parallel.hpp"
#include "desx/mvee.hpp"
#include "desx/spaces.hpp"

namespace desx {

// ---------------------------------------------------------------------------
// extents and gauges

/// max |f.y| over { y : y'Ay <= 1 }, i.e. sqrt(f' A^-1 f).
inline auto directional_extent(const Vector& f, const Ellipsoid& e) -> double {
    require_dim(f.size(), e.dim(), "directional extent");
    validate(e);
    Eigen::LLT<Matrix> llt(e.A);
    require(llt.info() == Eigen::Success, ErrorCode::invalid_input, "ellipsoid matrix is not positive definite");
    return std::sqrt(std::max(0.0, f.dot(llt.solve(f))));
}

inline auto directional_extent(const Direction& f, const Ellipsoid& e) -> double {
    return directional_extent(f.coefficients, e);
}

/// sup { a > 0 : a x in E } = 1 / sqrt(x'Ax).
inline auto gauge(const Ellipsoid& e, const Vector& x) -> double {
    require_dim(x.size(), e.dim(), "gauge");
    require(!x.isZero(0.0), ErrorCode::invalid_input, "gauge of the zero vector");
    validate(e);
    return 1.0 / std::sqrt(x.dot(e.A * x));
}

// ---------------------------------------------------------------------------
// eta on a subspace

struct EtaReport {
    Direction direction;
    Eigen::Index subspace_dim = 0;
    double eta = 0.0;
    double eps_certificate = 0.0;
    bool heuristic = false;
    Ellipsoid ellipsoid;  // in basis coordinates
    Vector restricted;    // f composed with the basis map
};

/// eta(f, E) for E spanned by the columns of `basis`.
inline auto eta_subspace(const NormOracle& ambient, const Direction& f, const Matrix& basis,
                         const SolverConfig& config = {}) -> EtaReport {
    require_dim(f.coefficients.size(), ambient.dim(), "direction");
    const Subspace sub = restrict(ambient, basis);
    auto body = mvee_body(sub.norm, config);
    EtaReport out;
    out.direction = f;
    out.subspace_dim = sub.dim();
    out.restricted = basis.transpose() * f.coefficients;
    out.eta = directional_extent(out.restricted, body.ellipsoid);
    out.eps_certificate = body.ellipsoid.eps_certificate;
    out.heuristic = body.heuristic || f.heuristic;
    out.ellipsoid = std::move(body.ellipsoid);
    return out;
}

inline auto eta_subspace(const NormOracle& ambient, const Direction& f, const std::vector<Vector>& basis,
                         const SolverConfig& config = {}) -> EtaReport {
    return eta_subspace(ambient, f, restrict(ambient, basis).basis, config);
}

// ---------------------------------------------------------------------------
// lattice scans

/// Sampling plan for a finite subspace lattice. Each flag is a nested chain of
/// spans of its leading columns; seed subspaces F are flag prefixes of the
/// listed dimensions, and their extensions are the longer prefixes of the same
/// flag, `extra_extensions` random enlargements of F, and the whole space.
struct LatticeSpec {
    int flags = 3;                            // random orthonormal flags
    std::vector<Eigen::Index> seed_dims{1};   // dimensions of the seed subspaces F
    int extra_extensions = 1;                 // random E containing F, per seed
    bool anchored = true;                     // random flags start at a norming point of f
    bool full_space = false;                  // the whole space is also a seed
    std::vector<Matrix> user_flags;           // ambient x k, columns nested in order
    std::uint64_t seed = 0;
    int threads = 1;
};

struct LatticeEntry {
    int flag = -1;  // owning flag, -1 for the whole space
    Eigen::Index dim = 0;
    std::string role;  // "prefix", "extension" or "full"
    double eta = 0.0;
    bool heuristic = false;
};

struct SeedRow {
    int flag = -1;
    Eigen::Index dim = 0;
    std::size_t subspace = 0;               // index of F in the entries
    std::vector<std::size_t> extensions;    // indices of the sampled E containing F
    double min_eta = 0.0;
    double max_eta = 0.0;
};

/// Finite-sample surrogates of inf_F sup_E eta and sup_F inf_E eta.
struct DesScanReport {
    std::string lattice;
    std::vector<Matrix> flags;
    std::vector<Matrix> bases;  // one per entry
    std::vector<LatticeEntry> entries;
    std::vector<SeedRow> seeds;
    double est_inf_sup = 0.0;
    double est_sup_inf = 0.0;
    double lambda_hat = 0.0;  // est_inf_sup, the sampled DES constant
    bool heuristic = false;
};

namespace detail {

/// Orthonormal d x d flag whose first column is parallel to `lead`.
inline auto anchored_flag(const Vector& lead, Rng& rng) -> Matrix {
    const Eigen::Index d = lead.size();
    Matrix g = gaussian_matrix(d, d, rng);
    g.col(0) = lead;
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < d; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

}  // namespace detail

inline auto des_scan(const NormOracle& ambient, const Direction& f, const LatticeSpec& spec,
                     const SolverConfig& config = {}) -> DesScanReport {
    const Eigen::Index d = ambient.dim();
    require_dim(f.coefficients.size(), d, "direction");
    for (auto k : spec.seed_dims)
        require(k >= 1 && k <= d, ErrorCode::invalid_parameter, "seed dimension out of range");
    require(spec.flags >= 0 && spec.extra_extensions >= 0, ErrorCode::invalid_parameter,
            "lattice counts must be nonnegative");

    DesScanReport rep;
    Rng rng(spec.seed);
    const Vector lead = support_point(ambient, f.coefficients).point;
    for (int i = 0; i < spec.flags; ++i) {
        rep.flags.push_back(spec.anchored ? detail::anchored_flag(lead, rng) : random_orthogonal(d, rng));
    }
    for (const auto& u : spec.user_flags) {
        require_dim(u.rows(), d, "user flag");
        require(u.cols() >= 1 && matrix_rank(u) == u.cols(), ErrorCode::degenerate_subspace,
                "user flag columns must be independent");
        rep.flags.push_back(u);
    }

    // the whole space is one shared entry so every seed sees the same value
    rep.bases.push_back(Matrix::Identity(d, d));
    rep.entries.push_back({-1, d, "full", 0.0, false});

    std::vector<std::vector<std::size_t>> prefix(rep.flags.size());
    for (std::size_t fi = 0; fi < rep.flags.size(); ++fi) {
        const Matrix& q = rep.flags[fi];
        for (Eigen::Index j = 1; j <= q.cols(); ++j) {
            if (j == d) {
                prefix[fi].push_back(0);
                continue;
            }
            prefix[fi].push_back(rep.entries.size());
            rep.bases.push_back(q.leftCols(j));
            rep.entries.push_back({static_cast<int>(fi), j, "prefix", 0.0, false});
        }
    }

    auto add_seed = [&](int flag, std::size_t index, std::vector<std::size_t> ext) {
        SeedRow row;
        row.flag = flag;
        row.dim = rep.entries[index].dim;
        row.subspace = index;
        row.extensions = std::move(ext);
        rep.seeds.push_back(std::move(row));
    };
    for (std::size_t fi = 0; fi < rep.flags.size(); ++fi) {
        const Matrix& q = rep.flags[fi];
        for (auto k : spec.seed_dims) {
            if (k > q.cols()) continue;
            std::vector<std::size_t> ext(prefix[fi].begin() + (k - 1), prefix[fi].end());
            const Matrix base = q.leftCols(k);
            for (int r = 0; r < spec.extra_extensions && k + 1 < d; ++r) {
                std::uniform_int_distribution<Eigen::Index> extra(1, d - k - 1);
                const Eigen::Index m = extra(rng);
                Matrix b(d, k + m);
                b.leftCols(k) = base;
                b.rightCols(m) = gaussian_matrix(d, m, rng);
                ext.push_back(rep.entries.size());
                rep.bases.push_back(b);
                rep.entries.push_back({static_cast<int>(fi), k + m, "extension", 0.0, false});
            }
            if (ext.back() != 0) ext.push_back(0);
            add_seed(static_cast<int>(fi), prefix[fi][static_cast<std::size_t>(k - 1)], std::move(ext));
        }
    }
    if (spec.full_space) add_seed(-1, 0, {0});
    require(!rep.seeds.empty(), ErrorCode::invalid_input, "empty lattice: no seed subspaces");

    const auto etas = detail::parallel_map(rep.entries.size(), spec.threads, [&](std::size_t i) {
        return eta_subspace(ambient, f, rep.bases[i], config);
    });
    for (std::size_t i = 0; i < etas.size(); ++i) {
        rep.entries[i].eta = etas[i].eta;
        rep.entries[i].heuristic = etas[i].heuristic;
        rep.heuristic = rep.heuristic || etas[i].heuristic;
    }

    rep.est_inf_sup = kInf;
    rep.est_sup_inf = -kInf;
    for (auto& row : rep.seeds) {
        row.min_eta = kInf;
        row.max_eta = -kInf;
        for (auto e : row.extensions) {
            row.min_eta = std::min(row.min_eta, rep.entries[e].eta);
            row.max_eta = std::max(row.max_eta, rep.entries[e].eta);
        }
        rep.est_inf_sup = std::min(rep.est_inf_sup, row.max_eta);
        rep.est_sup_inf = std::max(rep.est_sup_inf, row.min_eta);
    }
    rep.lambda_hat = rep.est_inf_sup;

    std::ostringstream os;
    os << "flags=" << spec.flags << " user_flags=" << spec.user_flags.size() << " seed_dims=";
    for (std::size_t i = 0; i < spec.seed_dims.size(); ++i) os << (i ? "," : "") << spec.seed_dims[i];
    os << " extra_extensions=" << spec.extra_extensions << " anchored=" << (spec.anchored ? 1 : 0)
       << " full_space=" << (spec.full_space ? 1 : 0) << " seed=" << spec.seed;
    rep.lattice = os.str();
    return rep;
}

// ---------------------------------------------------------------------------
// chains

struct ChainReport {
    std::vector<Eigen::Index> dims;
    std::vector<std::vector<double>> gram;  // gram[link][pair]
    std::vector<std::vector<bool>> inside;  // both vectors lie in the link
    std::vector<double> limit_estimate;     // per pair, the last link
    double oscillation = 0.0;               // max deviation from the last value over the last quartile
    bool converged = false;                 // oscillation within the chain tolerance
    double max_cauchy_schwarz_excess = -kInf;
    // with a direction: (x|x) against (|f(x)| / est_sup_inf)^2 at the last link
    std::vector<double> lower_bound;
    bool lower_bound_holds = true;
    bool heuristic = false;
};

/// Gram values (P_E x | P_E y)_E along a nested chain of subspaces, where P_E
/// is the orthogonal projection and (.|.)_E the inner product of the MVEE.
inline auto chain_inner_product(const NormOracle& ambient, const std::vector<Matrix>& chain,
                                const std::vector<std::pair<Vector, Vector>>& pairs, const SolverConfig& config = {},
                                const Direction* f = nullptr, double est_sup_inf = 0.0, double tol = 1e-6)
    -> ChainReport {
    require(!chain.empty(), ErrorCode::invalid_input, "empty chain");
    for (const auto& [x, y] : pairs) {
        require_dim(x.size(), ambient.dim(), "chain pair");
        require_dim(y.size(), ambient.dim(), "chain pair");
    }
    std::vector<Subspace> links;
    links.reserve(chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i) {
        links.push_back(restrict(ambient, chain[i]));
        if (i == 0) continue;
        require(links[i].dim() > links[i - 1].dim(), ErrorCode::invalid_input,
                "chain is not strictly increasing at link " + std::to_string(i));
        for (Eigen::Index j = 0; j < chain[i - 1].cols(); ++j) {
            require(links[i].relative_residual(chain[i - 1].col(j)) <= 1e-9, ErrorCode::invalid_input,
                    "chain is not nested at link " + std::to_string(i));
        }
    }

    ChainReport rep;
    for (const auto& link : links) {
        const auto body = mvee_body(link.norm, config);
        rep.heuristic = rep.heuristic || body.heuristic;
        const Matrix& a = body.ellipsoid.A;
        rep.dims.push_back(link.dim());
        std::vector<double> row;
        std::vector<bool> in;
        for (const auto& [x, y] : pairs) {
            const Vector px = link.project(x);
            const Vector py = link.project(y);
            const double v = px.dot(a * py);
            row.push_back(v);
            const bool both = link.relative_residual(x) <= 1e-9 && link.relative_residual(y) <= 1e-9;
            in.push_back(both);
            if (both) {
                rep.max_cauchy_schwarz_excess =
                    std::max(rep.max_cauchy_schwarz_excess, v - ambient.eval(x) * ambient.eval(y));
            }
        }
        rep.gram.push_back(std::move(row));
        rep.inside.push_back(std::move(in));
    }

    const std::size_t links_n = rep.gram.size();
    const std::size_t tail = std::max<std::size_t>(1, (links_n + 3) / 4);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const double last = rep.gram.back()[p];
        rep.limit_estimate.push_back(last);
        for (std::size_t i = links_n - tail; i < links_n; ++i)
            rep.oscillation = std::max(rep.oscillation, std::abs(rep.gram[i][p] - last));
    }
    rep.converged = links_n > 1 && rep.oscillation <= tol;

    if (f != nullptr && est_sup_inf > 0.0) {
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const Vector& x = pairs[p].first;
            const double bound = std::pow(std::abs(f->coefficients.dot(x)) / est_sup_inf, 2);
            rep.lower_bound.push_back(bound);
            if (pairs[p].first == pairs[p].second && rep.gram.back()[p] < bound * (1.0 - 1e-9))
                rep.lower_bound_holds = false;
        }
    }
    return rep;
}

/// Spans of the first d_1 < d_2 < ... coordinate vectors.
inline auto coordinate_chain(Eigen::Index ambient_dim, const std::vector<Eigen::Index>& dims) -> std::vector<Matrix> {
    std::vector<Matrix> out;
    for (auto k : dims) {
        require(k >= 1 && k <= ambient_dim, ErrorCode::invalid_parameter, "chain dimension out of range");
        out.push_back(Matrix::Identity(ambient_dim, k));
    }
    return out;
}

// ---------------------------------------------------------------------------
// F (+)_p l2(n)

struct SumAsymptoticsRow {
    long n = 0;
    double c = 1.0;   // squared semi-axis of the Euclidean block
    Vector C_F;       // squared semi-axes of the F block, descending
    double eta = 0.0;  // eta((f, 0), F (+)_p l2(n))
    double kappa = 0.0;
    bool heuristic = false;
};

inline auto lp_sum_asymptotics(const NormOracle& F, double p, const Direction& f, const std::vector<long>& n_list,
                               const SolverConfig& config = {}, int threads = 1) -> std::vector<SumAsymptoticsRow> {
    require(p >= 1.0, ErrorCode::invalid_parameter, "p must be >= 1");
    require_dim(f.coefficients.size(), F.dim(), "direction");
    require(!n_list.empty(), ErrorCode::invalid_parameter, "empty n list");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        require(n_list[i] >= 1, ErrorCode::invalid_parameter, "n must be positive");
        require(i == 0 || n_list[i] > n_list[i - 1], ErrorCode::invalid_parameter, "n list must be ascending");
    }
    return detail::parallel_map(n_list.size(), threads, [&](std::size_t i) {
        const auto r = mvee_direct_sum_reduced(F, p, n_list[i], config);
        SumAsymptoticsRow row;
        row.n = n_list[i];
        row.c = r.c;
        Ellipsoid block;
        block.A = r.A_F;
        row.C_F = semi_axes(block).values;
        row.eta = directional_extent(f.coefficients, block);
        row.kappa = r.kappa;
        row.heuristic = r.heuristic || f.heuristic;
        return row;
    });
}

// ---------------------------------------------------------------------------
// alpha_p(b)

struct AlphaReport {
    double p = 0.0;
    double b = 0.0;
    double alpha = 0.0;
    double lower = 0.0;  // b / (2^(2/p) b - 1)
    double upper = 0.0;  // b / (b - 1)
    double argmax_s = 0.0;
};

/// Smallest a with x^2/a + y^2/b <= ||(x, y)||_p^2 for x, y > 0. By homogeneity
/// this is sup_s 1 / (||(1, s)||_p^2 - s^2/b) over s where the denominator is
/// positive, searched on a log grid and refined by golden section.
inline auto alpha_p(double p, double b, int grid = 4096, double s_min = 1e-6, double s_max = 1e6) -> AlphaReport {
    require(p > 2.0, ErrorCode::invalid_parameter, "alpha_p needs p > 2");
    require(b > 1.0, ErrorCode::invalid_parameter, "alpha_p needs b > 1");
    require(grid >= 3 && s_min > 0.0 && s_max > s_min, ErrorCode::invalid_parameter, "invalid alpha grid");

    auto value = [&](double t) {
        const double s = std::exp(t);
        const double n = combine_p(1.0, s, p);
        const double den = n * n - s * s / b;
        return den > 0.0 ? 1.0 / den : -kInf;
    };
    const double t0 = std::log(s_min);
    const double step = (std::log(s_max) - t0) / static_cast<double>(grid - 1);
    int best = 0;
    double best_v = -kInf;
    for (int i = 0; i < grid; ++i) {
        const double v = value(t0 + step * i);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    double lo = t0 + step * std::max(0, best - 1);
    double hi = t0 + step * std::min(grid - 1, best + 1);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = value(x1);
    double f2 = value(x2);
    while (hi - lo > 1e-12) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = value(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = value(x2);
        }
    }
    double t_best = t0 + step * best;
    for (double t : {lo, hi, 0.5 * (lo + hi)}) {
        const double v = value(t);
        if (v > best_v) {
            best_v = v;
            t_best = t;
        }
    }

    AlphaReport out;
    out.p = p;
    out.b = b;
    out.alpha = best_v;
    out.argmax_s = std::exp(t_best);
    const double two = std::isinf(p) ? 1.0 : std::pow(2.0, 2.0 / p);
    out.lower = b / (two * b - 1.0);
    out.upper = b / (b - 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// perturbations of the norm

struct Distortion {
    double min_ratio = kInf;  // min ||Tx|| / ||x|| over the samples
    double max_ratio = 0.0;
};

/// Sampled range of ||Tx|| / ||x||, with both extremes polished by ascent on the sphere.
inline auto estimate_distortion(const NormOracle& norm, const Matrix& t, int samples = 2000,
                                std::uint64_t seed = 0) -> Distortion {
    const Eigen::Index d = norm.dim();
    require(t.rows() == d && t.cols() == d, ErrorCode::dimension_mismatch, "operator must be square of the norm dimension");
    Distortion out;
    Rng rng(seed);
    std::vector<Vector> starts;
    for (int i = 0; i < samples; ++i) {
        const Vector x = gaussian_vector(d, rng);
        const double r = norm.eval(t * x) / norm.eval(x);
        out.min_ratio = std::min(out.min_ratio, r);
        out.max_ratio = std::max(out.max_ratio, r);
        if (i < 16) starts.push_back(x);
    }
    auto ratio = [&](const Vector& x) { return norm.eval(t * x); };
    auto grad = [&](const Vector& x) -> Vector { return t.transpose() * detail::numeric_norm_gradient(norm, t * x); };
    for (const auto& r : detail::sphere_ascent(norm, ratio, grad, 1, starts))
        out.max_ratio = std::max(out.max_ratio, r.value);
    auto inv_ratio = [&](const Vector& x) { return -norm.eval(t * x); };
    auto inv_grad = [&](const Vector& x) -> Vector {
        return -t.transpose() * detail::numeric_norm_gradient(norm, t * x);
    };
    for (const auto& r : detail::sphere_ascent(norm, inv_ratio, inv_grad, 1, starts))
        out.min_ratio = std::min(out.min_ratio, -r.value);
    return out;
}

struct PerturbationReport {
    Eigen::Index n = 0;
    double C = 0.0;
    double det = 0.0;                 // |det T|
    double volume_original = 0.0;     // Vol(MVEE of B) / Vol(Euclidean ball)
    double volume_transformed = 0.0;  // Vol(MVEE of T(B)) / Vol(Euclidean ball)
    double ratio = 0.0;               // nu(T(E)) / mu(E) with mu(B) = nu(B) = 1
    double lower = 1.0;
    double upper = 0.0;  // C^n
    bool within = false;
    bool heuristic = false;
};

/// Measure comparison for T : (R^n, ||.||) -> (R^n, ||.||) with
/// ||x|| <= ||Tx|| <= C||x||. Both measures give the unit ball mass one, so
/// nu(T(E)) / mu(E) = Vol(T(E)) / Vol(E), computed from the MVEE of the ball and,
/// independently, of its image T(B) (whose MVEE is T(E) by uniqueness).
inline auto perturbation_volume_bounds(const NormOracle& norm, const Matrix& t, double C = 0.0,
                                       const SolverConfig& config = {}, double tol = 1e-6) -> PerturbationReport {
    const Eigen::Index n = norm.dim();
    require(t.rows() == n && t.cols() == n, ErrorCode::dimension_mismatch, "operator must be square of the norm dimension");
    Eigen::FullPivLU<Matrix> lu(t);
    require(lu.isInvertible() && relative_min_singular_value(t) > 1e-12, ErrorCode::singular_matrix,
            "perturbation operator is singular");
    PerturbationReport rep;
    rep.n = n;
    rep.C = C > 0.0 ? C : estimate_distortion(norm, t, 2000, config.seed).max_ratio;
    rep.det = std::abs(lu.determinant());

    const auto original = mvee_body(norm, config);
    // the unit ball of y -> ||T^-1 y|| is T(B)
    const Subspace image = restrict(norm, Matrix(lu.inverse()));
    const auto transformed = mvee_body(image.norm, config);
    rep.volume_original = volume_ratio(original.ellipsoid);
    rep.volume_transformed = volume_ratio(transformed.ellipsoid);
    rep.ratio = rep.volume_transformed / rep.volume_original;
    rep.upper = std::pow(rep.C, static_cast<double>(n));
    rep.within = rep.ratio >= rep.lower * (1.0 - tol) && rep.ratio <= rep.upper * (1.0 + tol);
    rep.heuristic = original.heuristic || transformed.heuristic;
    return rep;
}

// ---------------------------------------------------------------------------
// convergence along a perturbation schedule

struct UltralimitRow {
    long k = 0;
    double volume = 0.0;  // det(A_k)^(-1/2) in the shared coordinates
    double volume_deviation = 0.0;
    double gram_deviation = 0.0;  // max over pairs of |(x|y)_k - (x|y)|
};

struct UltralimitReport {
    double target_volume = 0.0;
    std::vector<double> target_gram;
    std::vector<UltralimitRow> rows;
    long monotone_from = 0;
    bool volume_monotone = true;  // deviations non-increasing for k >= monotone_from
    bool gram_monotone = true;
    double last_volume_deviation = 0.0;
    double last_gram_deviation = 0.0;
    bool heuristic = false;
};

/// E_k = span(basis_k) is identified with E = span(target) through the shared
/// coefficient coordinates, T_k(sum a_i b_i^k) = sum a_i b_i. Volumes and pulled
/// back Gram values (T_k^-1 x | T_k^-1 y)_{E_k} are compared in those coordinates.
inline auto ultralimit_convergence(const NormOracle& ambient, const Matrix& target,
                                   const std::function<Matrix(long)>& schedule, const std::vector<long>& ks,
                                   const std::vector<std::pair<Vector, Vector>>& pairs, long monotone_from = 0,
                                   const SolverConfig& config = {}, int threads = 1) -> UltralimitReport {
    require(!ks.empty(), ErrorCode::invalid_parameter, "empty schedule");
    const Subspace e = restrict(ambient, target);
    std::vector<std::pair<Vector, Vector>> coords;
    for (const auto& [x, y] : pairs) {
        require_dim(x.size(), ambient.dim(), "pair");
        require_dim(y.size(), ambient.dim(), "pair");
        require(e.relative_residual(x) <= 1e-9 && e.relative_residual(y) <= 1e-9, ErrorCode::invalid_input,
                "pairs must lie in the target subspace");
        coords.emplace_back(e.project(x), e.project(y));
    }
    auto grams = [&](const Matrix& a) {
        std::vector<double> g;
        for (const auto& [cx, cy] : coords) g.push_back(cx.dot(a * cy));
        return g;
    };

    UltralimitReport rep;
    rep.monotone_from = monotone_from;
    const auto base = mvee_body(e.norm, config);
    rep.target_volume = volume_ratio(base.ellipsoid);
    rep.target_gram = grams(base.ellipsoid.A);
    rep.heuristic = base.heuristic;

    struct Solved {
        Matrix a;
        bool heuristic;
    };
    const auto solved = detail::parallel_map(ks.size(), threads, [&](std::size_t i) {
        const long k = ks[i];
        const Matrix b = schedule(k);
        require(b.rows() == target.rows() && b.cols() == target.cols(), ErrorCode::dimension_mismatch,
                "schedule basis at k=" + std::to_string(k) + " has the wrong shape");
        require(matrix_rank(b) == b.cols(), ErrorCode::degenerate_subspace,
                "schedule basis at k=" + std::to_string(k) + " is singular");
        const Subspace ek = restrict(ambient, b);
        auto body = mvee_body(ek.norm, config);
        return Solved{std::move(body.ellipsoid.A), body.heuristic};
    });

    for (std::size_t i = 0; i < ks.size(); ++i) {
        UltralimitRow row;
        row.k = ks[i];
        Ellipsoid ek;
        ek.A = solved[i].a;
        row.volume = volume_ratio(ek);
        row.volume_deviation = std::abs(row.volume / rep.target_volume - 1.0);
        const auto g = grams(ek.A);
        for (std::size_t p = 0; p < g.size(); ++p)
            row.gram_deviation = std::max(row.gram_deviation, std::abs(g[p] - rep.target_gram[p]));
        rep.heuristic = rep.heuristic || solved[i].heuristic;
        if (!rep.rows.empty() && row.k > monotone_from && rep.rows.back().k >= monotone_from) {
            if (row.volume_deviation > rep.rows.back().volume_deviation) rep.volume_monotone = false;
            if (row.gram_deviation > rep.rows.back().gram_deviation) rep.gram_monotone = false;
        }
        rep.rows.push_back(row);
    }
    rep.last_volume_deviation = rep.rows.back().volume_deviation;
    rep.last_gram_deviation = rep.rows.back().gram_deviation;
    return rep;
}

}  // namespace desx
