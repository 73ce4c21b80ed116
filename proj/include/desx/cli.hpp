#pragma once

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "desx/core.hpp"
#include "desx/des.hpp"
#include "desx/detail/parallel.hpp"
#include "desx/duality.hpp"
#include "desx/mvee.hpp"
#include "desx/spaces.hpp"

namespace desx::cli {

inline constexpr const char* kVersion = "0.1.0";

enum Status : int { ok = 0, validation_error = 2, solver_failure = 3 };

// ---------------------------------------------------------------------------
// configuration files

/// Flat `key = value` text. Values are scalars or bracketed lists; `#` starts a comment.
struct Config {
    std::map<std::string, std::string> values;
    std::vector<std::string> order;  // keys in file order, for echoing
    std::string source;

    auto has(const std::string& key) const -> bool { return values.count(key) != 0; }

    void set(const std::string& key, const std::string& value) {
        if (!has(key)) order.push_back(key);
        values[key] = value;
    }

    auto get(const std::string& key) const -> const std::string& {
        const auto it = values.find(key);
        require(it != values.end(), ErrorCode::invalid_input, "missing required key '" + key + "'");
        return it->second;
    }
};

inline auto trim(const std::string& s) -> std::string {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline auto parse_config(const std::string& text, const std::string& source = "<string>") -> Config {
    Config c;
    c.source = source;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(lineno);
        require(eq != std::string::npos, ErrorCode::invalid_input, where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        require(!key.empty() && !value.empty(), ErrorCode::invalid_input, where + ": empty key or value");
        require(!c.has(key), ErrorCode::invalid_input, where + ": duplicate key '" + key + "'");
        c.set(key, value);
    }
    return c;
}

inline auto read_file(const std::string& path) -> std::string {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::invalid_input, "cannot read '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline auto load_config(const std::string& path) -> Config { return parse_config(read_file(path), path); }

inline auto parse_number(const std::string& raw, const std::string& key) -> double {
    const std::string s = trim(raw);
    if (s == "inf" || s == "+inf" || s == "infinity") return kInf;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::invalid_input, "key '" + key + "': '" + s + "' is not a number");
}

inline auto parse_list(const std::string& raw, const std::string& key) -> std::vector<double> {
    std::string s = trim(raw);
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
    std::vector<double> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(parse_number(item, key));
    }
    return out;
}

inline auto get_number(const Config& c, const std::string& key, std::optional<double> fallback = std::nullopt)
    -> double {
    if (!c.has(key)) {
        require(fallback.has_value(), ErrorCode::invalid_input, "missing required key '" + key + "'");
        return *fallback;
    }
    return parse_number(c.get(key), key);
}

inline auto get_int(const Config& c, const std::string& key, std::optional<long> fallback = std::nullopt) -> long {
    const double v = get_number(c, key, fallback ? std::optional<double>(static_cast<double>(*fallback)) : std::nullopt);
    require(v == std::floor(v) && std::abs(v) < 9e15, ErrorCode::invalid_input, "key '" + key + "' must be an integer");
    return static_cast<long>(v);
}

inline auto get_list(const Config& c, const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt)
    -> std::vector<double> {
    if (!c.has(key)) {
        require(fallback.has_value(), ErrorCode::invalid_input, "missing required key '" + key + "'");
        return *fallback;
    }
    auto v = parse_list(c.get(key), key);
    require(!v.empty(), ErrorCode::invalid_input, "key '" + key + "' is an empty list");
    return v;
}

inline auto get_bool(const Config& c, const std::string& key, bool fallback) -> bool {
    if (!c.has(key)) return fallback;
    const auto& v = c.get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorCode::invalid_input, "key '" + key + "' must be a boolean");
}

inline auto to_vector(const std::vector<double>& v) -> Vector {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Row-major d x d matrix from a flat list.
inline auto square_matrix(const std::vector<double>& v, Eigen::Index d, const std::string& key) -> Matrix {
    require(static_cast<Eigen::Index>(v.size()) == d * d, ErrorCode::invalid_input,
            "key '" + key + "' needs " + std::to_string(d * d) + " entries");
    Matrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = v[static_cast<std::size_t>(i * d + j)];
    return m;
}

// ---------------------------------------------------------------------------
// space specs: lp(d, p) | polytope(d, [v...]) | sum(p, space, space)

namespace detail {

struct SpaceParser {
    std::string s;
    std::size_t pos = 0;

    void skip() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::invalid_input, "space spec '" + s + "': " + what);
    }
    void expect(char ch) {
        skip();
        if (pos >= s.size() || s[pos] != ch) fail(std::string("expected '") + ch + "'");
        ++pos;
    }
    auto word() -> std::string {
        skip();
        const std::size_t b = pos;
        while (pos < s.size() && std::isalpha(static_cast<unsigned char>(s[pos]))) ++pos;
        return s.substr(b, pos - b);
    }
    auto number() -> double {
        skip();
        const std::size_t b = pos;
        while (pos < s.size() && s[pos] != ',' && s[pos] != ')' && s[pos] != ']') ++pos;
        return parse_number(s.substr(b, pos - b), "space");
    }
    auto dimension() -> Eigen::Index {
        const double d = number();
        if (d < 1 || d != std::floor(d) || d > 4096) fail("dimension must be a positive integer");
        return static_cast<Eigen::Index>(d);
    }
    auto space() -> NormOracle {
        const std::string w = word();
        expect('(');
        if (w == "lp") {
            const auto d = dimension();
            expect(',');
            const double p = number();
            expect(')');
            return make_lp(d, p);
        }
        if (w == "polytope") {
            const auto d = dimension();
            expect(',');
            expect('[');
            std::vector<double> v;
            skip();
            while (pos < s.size() && s[pos] != ']') {
                v.push_back(number());
                skip();
                if (pos < s.size() && s[pos] == ',') ++pos;
                skip();
            }
            expect(']');
            expect(')');
            if (v.empty() || v.size() % static_cast<std::size_t>(d) != 0) fail("vertex list length must be a multiple of d");
            const auto m = static_cast<Eigen::Index>(v.size()) / d;
            Matrix vert(d, m);
            for (Eigen::Index j = 0; j < m; ++j)
                for (Eigen::Index i = 0; i < d; ++i) vert(i, j) = v[static_cast<std::size_t>(j * d + i)];
            return make_polytope(vert);
        }
        if (w == "sum") {
            const double p = number();
            expect(',');
            auto left = space();
            expect(',');
            auto right = space();
            expect(')');
            return make_direct_sum(p, left, right);
        }
        fail("unknown family '" + w + "'");
    }
};

}  // namespace detail

inline auto parse_space(const std::string& spec) -> NormOracle {
    detail::SpaceParser parser{spec};
    auto norm = parser.space();
    parser.skip();
    if (parser.pos != spec.size()) parser.fail("trailing characters");
    return norm;
}

// ---------------------------------------------------------------------------
// experiments

/// CSV body plus the certificates that go into the manifest.
struct RunResult {
    std::string header;
    std::vector<std::string> rows;
    std::vector<std::pair<std::string, std::string>> certificates;
    bool heuristic = false;
};

inline auto join(const std::vector<std::string>& cells) -> std::string {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    return out;
}

inline auto num(double v) -> std::string { return format_number(v); }
inline auto num(long v) -> std::string { return std::to_string(v); }
inline auto num(bool v) -> std::string { return v ? "1" : "0"; }

inline auto inline_vector(const Vector& v) -> std::string {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ";" : "") + format_number(v[i]);
    return out;
}

inline const std::vector<std::string>& kinds() {
    static const std::vector<std::string> k{"mvee",  "eta",          "des-scan",   "sum-asymptotics", "alpha",
                                            "chain", "perturbation", "ultralimit", "duality",         "invariance"};
    return k;
}

inline auto solver_config(const Config& c) -> SolverConfig {
    SolverConfig s;
    s.seed = static_cast<std::uint64_t>(get_int(c, "seed"));
    s.eps = get_number(c, "eps", s.eps);
    s.containment_tol = get_number(c, "containment_tol", s.containment_tol);
    s.max_iter = get_int(c, "max_iter", s.max_iter);
    s.max_rounds = static_cast<int>(get_int(c, "max_rounds", s.max_rounds));
    s.validate();
    return s;
}

inline auto direction_of(const Config& c, const NormOracle& norm) -> Direction {
    const Vector f = c.has("direction") ? to_vector(get_list(c, "direction")) : Vector(Vector::Unit(norm.dim(), 0));
    return make_direction(norm, f);
}

inline auto threads_of(const Config& c) -> int { return static_cast<int>(std::max(1L, get_int(c, "threads", 1))); }

namespace detail {

inline auto run_mvee(const Config& c) -> RunResult {
    const auto norm = parse_space(c.get("space"));
    const auto body = mvee_body(norm, solver_config(c));
    RunResult r;
    r.header = "row,col,a";
    const auto& a = body.ellipsoid.A;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) r.rows.push_back(join({num(long(i)), num(long(j)), num(a(i, j))}));
    r.certificates = {{"kappa", num(body.design.kappa)},
                      {"eps_certificate", num(body.ellipsoid.eps_certificate)},
                      {"max_violation", num(body.max_violation)},
                      {"rounds", num(long(body.rounds))}};
    r.heuristic = body.heuristic;
    return r;
}

inline auto run_eta(const Config& c) -> RunResult {
    const auto norm = parse_space(c.get("space"));
    const auto config = solver_config(c);
    const auto f = direction_of(c, norm);
    const Eigen::Index d = norm.dim();
    const long k = get_int(c, "subspace_dim", d);
    require(k >= 1 && k <= d, ErrorCode::invalid_input, "subspace_dim out of range");
    Matrix basis;
    if (c.has("basis")) {
        const auto v = get_list(c, "basis");
        require(static_cast<Eigen::Index>(v.size()) == d * k, ErrorCode::invalid_input,
                "basis needs subspace_dim * dim entries (columns in order)");
        basis = Eigen::Map<const Matrix>(v.data(), d, k);
    } else {
        Rng rng(config.seed);
        basis = gaussian_matrix(d, k, rng);
    }
    const auto rep = eta_subspace(norm, f, basis, config);
    RunResult r;
    r.header = "subspace_dim,eta,eps_certificate";
    r.rows.push_back(join({num(long(rep.subspace_dim)), num(rep.eta), num(rep.eps_certificate)}));
    r.certificates = {{"dual_norm", num(f.dual_norm)}};
    r.heuristic = rep.heuristic;
    return r;
}

inline auto run_des_scan(const Config& c) -> RunResult {
    const auto norm = parse_space(c.get("space"));
    const auto config = solver_config(c);
    const auto f = direction_of(c, norm);
    LatticeSpec spec;
    spec.flags = static_cast<int>(get_int(c, "flags", spec.flags));
    spec.seed_dims.clear();
    for (double k : get_list(c, "seed_dims", std::vector<double>{1.0})) spec.seed_dims.push_back(static_cast<Eigen::Index>(k));
    spec.extra_extensions = static_cast<int>(get_int(c, "extra_extensions", spec.extra_extensions));
    spec.anchored = get_bool(c, "anchored", spec.anchored);
    spec.full_space = get_bool(c, "full_space", spec.full_space);
    spec.seed = config.seed;
    spec.threads = threads_of(c);
    const auto rep = des_scan(norm, f, spec, config);
    RunResult r;
    r.header = "seed_index,flag,dim,extensions,min_eta,max_eta,est_inf_sup,est_sup_inf";
    for (std::size_t i = 0; i < rep.seeds.size(); ++i) {
        const auto& s = rep.seeds[i];
        r.rows.push_back(join({num(long(i)), num(long(s.flag)), num(long(s.dim)), num(long(s.extensions.size())),
                               num(s.min_eta), num(s.max_eta), num(rep.est_inf_sup), num(rep.est_sup_inf)}));
    }
    r.certificates = {{"lattice", rep.lattice},
                      {"est_inf_sup", num(rep.est_inf_sup)},
                      {"est_sup_inf", num(rep.est_sup_inf)},
                      {"lambda_hat", num(rep.lambda_hat)},
                      {"subspaces", num(long(rep.entries.size()))},
                      {"note", "finite-sample surrogates over the listed lattice"}};
    r.heuristic = rep.heuristic;
    return r;
}

inline auto run_sum_asymptotics(const Config& c) -> RunResult {
    const auto F = parse_space(c.get("space"));
    const auto config = solver_config(c);
    const double p = get_number(c, "p");
    const auto f = direction_of(c, F);
    std::vector<long> ns;
    for (double n : get_list(c, "n")) {
        require(n == std::floor(n), ErrorCode::invalid_input, "n entries must be integers");
        ns.push_back(static_cast<long>(n));
    }
    const auto rows = lp_sum_asymptotics(F, p, f, ns, config, threads_of(c));
    RunResult r;
    r.header = "p,n,c,eta,kappa";
    for (Eigen::Index i = 0; i < F.dim(); ++i) r.header += ",C_" + std::to_string(i + 1);
    double kappa_slack = 0.0;
    for (const auto& row : rows) {
        std::vector<std::string> cells{num(p), num(row.n), num(row.c), num(row.eta), num(row.kappa)};
        for (Eigen::Index i = 0; i < row.C_F.size(); ++i) cells.push_back(num(row.C_F[i]));
        r.rows.push_back(join(cells));
        r.heuristic = r.heuristic || row.heuristic;
        kappa_slack = std::max(kappa_slack, row.kappa / static_cast<double>(F.dim() + row.n) - 1.0);
    }
    r.certificates = {{"eps", num(config.eps)}, {"max_reduced_kappa_excess", num(kappa_slack)}};
    return r;
}

inline auto run_alpha(const Config& c) -> RunResult {
    const auto ps = get_list(c, "p");
    const auto bs = get_list(c, "b");
    const int grid = static_cast<int>(get_int(c, "grid", 4096));
    RunResult r;
    r.header = "p,b,alpha,lower,upper,argmax_s";
    for (double p : ps) {
        for (double b : bs) {
            const auto a = alpha_p(p, b, grid);
            r.rows.push_back(join({num(a.p), num(a.b), num(a.alpha), num(a.lower), num(a.upper), num(a.argmax_s)}));
        }
    }
    r.certificates = {{"grid", num(long(grid))}, {"refinement", "golden section to 1e-12 in log s"}};
    return r;
}

inline auto pairs_of(const Config& c, Eigen::Index d) -> std::vector<std::pair<Vector, Vector>> {
    if (!c.has("x") && !c.has("y")) {
        std::vector<std::pair<Vector, Vector>> out;
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = i; j < d; ++j) out.emplace_back(Vector::Unit(d, i), Vector::Unit(d, j));
        return out;
    }
    const Vector x = to_vector(get_list(c, "x"));
    const Vector y = c.has("y") ? to_vector(get_list(c, "y")) : x;
    require(x.size() == d && y.size() == d, ErrorCode::invalid_input, "x and y must match the space dimension");
    return {{x, y}};
}

inline auto run_chain(const Config& c) -> RunResult {
    const auto norm = parse_space(c.get("space"));
    const auto config = solver_config(c);
    std::vector<Eigen::Index> dims;
    for (double k : get_list(c, "chain")) dims.push_back(static_cast<Eigen::Index>(k));
    const auto chain = coordinate_chain(norm.dim(), dims);
    const Vector x = c.has("x") ? to_vector(get_list(c, "x")) : Vector(Vector::Unit(norm.dim(), 0));
    const Vector y = c.has("y") ? to_vector(get_list(c, "y")) : x;
    require(x.size() == norm.dim() && y.size() == norm.dim(), ErrorCode::invalid_input,
            "x and y must match the space dimension");
    std::optional<Direction> f;
    if (c.has("direction")) f = direction_of(c, norm);
    const double s = get_number(c, "est_sup_inf", 0.0);
    const auto rep = chain_inner_product(norm, chain, {{x, y}}, config, f ? &*f : nullptr, s,
                                         get_number(c, "chain_tol", 1e-6));
    RunResult r;
    r.header = "link,dim,gram,inside";
    for (std::size_t i = 0; i < rep.gram.size(); ++i)
        r.rows.push_back(join({num(long(i)), num(long(rep.dims[i])), num(rep.gram[i][0]), num(bool(rep.inside[i][0]))}));
    r.certificates = {{"limit_estimate", num(rep.limit_estimate[0])},
                      {"oscillation", num(rep.oscillation)},
                      {"converged", num(rep.converged)},
                      {"max_cauchy_schwarz_excess", num(rep.max_cauchy_schwarz_excess)}};
    if (!rep.lower_bound.empty()) {
        r.certificates.emplace_back("lower_bound", num(rep.lower_bound[0]));
        r.certificates.emplace_back("lower_bound_holds", num(rep.lower_bound_holds));
    }
    r.heuristic = rep.heuristic;
    return r;
}

/// T from the config, or I + scale G rescaled so that min ||Tx|| / ||x|| = 1.
inline auto operator_of(const Config& c, const NormOracle& norm, const SolverConfig& config) -> Matrix {
    const Eigen::Index d = norm.dim();
    if (c.has("T")) return square_matrix(get_list(c, "T"), d, "T");
    Rng rng(config.seed);
    const double scale = get_number(c, "t_scale", 0.3);
    const Matrix t = Matrix::Identity(d, d) + scale * gaussian_matrix(d, d, rng);
    return t / estimate_distortion(norm, t, 2000, config.seed).min_ratio;
}

inline auto run_perturbation(const Config& c) -> RunResult {
    const auto norm = parse_space(c.get("space"));
    const auto config = solver_config(c);
    const Matrix t = operator_of(c, norm, config);
    const auto rep = perturbation_volume_bounds(norm, t, get_number(c, "C", 0.0), config);
    RunResult r;
    r.header = "n,C,det,volume_original,volume_transformed,ratio,lower,upper,within";
    r.rows.push_back(join({num(long(rep.n)), num(rep.C), num(rep.det), num(rep.volume_original),
                           num(rep.volume_transformed), num(rep.ratio), num(rep.lower), num(rep.upper),
                           num(rep.within)}));
    r.certificates = {{"within", num(rep.within)}};
    r.heuristic = rep.heuristic;
    return r;
}

inline auto run_ultralimit(const Config& c) -> RunResult {
    const auto norm = parse_space(c.get("space"));
    const auto config = solver_config(c);
    const Eigen::Index d = norm.dim();
    Matrix pert;
    if (c.has("perturbation")) {
        pert = square_matrix(get_list(c, "perturbation"), d, "perturbation");
    } else {
        // a Gaussian direction scaled to operator norm perturbation_scale on the space
        Rng rng(config.seed);
        const Matrix g = gaussian_matrix(d, d, rng);
        pert = get_number(c, "perturbation_scale", 0.05) / estimate_distortion(norm, g, 2000, config.seed).max_ratio * g;
    }
    std::vector<long> ks;
    for (double k : get_list(c, "k")) {
        require(k >= 1 && k == std::floor(k), ErrorCode::invalid_input, "k entries must be positive integers");
        ks.push_back(static_cast<long>(k));
    }
    const Matrix target = Matrix::Identity(d, d);
    const auto schedule = [&](long k) -> Matrix { return target + pert / static_cast<double>(k); };
    const auto rep = ultralimit_convergence(norm, target, schedule, ks, pairs_of(c, d), get_int(c, "monotone_from", 0),
                                            config, threads_of(c));
    RunResult r;
    r.header = "k,volume,volume_deviation,gram_deviation";
    for (const auto& row : rep.rows)
        r.rows.push_back(join({num(row.k), num(row.volume), num(row.volume_deviation), num(row.gram_deviation)}));
    r.certificates = {{"target_volume", num(rep.target_volume)},
                      {"volume_monotone", num(rep.volume_monotone)},
                      {"gram_monotone", num(rep.gram_monotone)},
                      {"last_volume_deviation", num(rep.last_volume_deviation)},
                      {"last_gram_deviation", num(rep.last_gram_deviation)}};
    r.heuristic = rep.heuristic;
    return r;
}

inline auto run_duality(const Config& c) -> RunResult {
    const auto norm = parse_space(c.get("space"));
    const auto config = solver_config(c);
    const Eigen::Index d = norm.dim();
    const std::string which = c.has("basis") ? c.get("basis") : "auerbach";
    require(which == "auerbach" || which == "standard", ErrorCode::invalid_input, "basis must be auerbach or standard");
    const auto basis =
        which == "standard" ? auerbach_from(norm, Matrix::Identity(d, d)) : auerbach_basis(norm, config);

    const long samples = get_int(c, "samples", 1000);
    require(samples >= 1, ErrorCode::invalid_input, "samples must be positive");
    Rng rng(config.seed);
    std::vector<Vector> xs{Vector::Ones(d)};
    double j_pair = 0.0;
    double j_dual = 0.0;
    bool numeric = false;
    for (long i = 0; i < samples; ++i) {
        const Vector x = gaussian_vector(d, rng);
        xs.push_back(x);
        const auto j = duality_map(norm, x);
        numeric = numeric || j.numeric;
        const double n = norm.eval(x);
        j_pair = std::max(j_pair, std::abs(j.functional.dot(x) - n * n) / (n * n));
        j_dual = std::max(j_dual, std::abs(dual_eval(norm, j.functional).value - n) / n);
    }
    DefectSpec ds;
    ds.count = static_cast<int>(samples);
    ds.tuple_size = static_cast<int>(get_int(c, "tuple_size", 2));
    ds.seed = config.seed;
    ds.basis = &basis;
    ds.points = {Vector::Ones(d)};
    const auto defect = near_convexity_defect(norm, ds);
    const double C = get_number(c, "C", 0.5);
    const auto sw = sandwich_check(norm, basis, C, xs);

    RunResult r;
    r.header = "samples,j_pairing_error,j_dual_error,defect_hat,basis_det,approximate,C,sandwich_passed,worst_ratio,"
               "first_witness";
    r.rows.push_back(join({num(samples), num(j_pair), num(j_dual), num(defect.defect_hat), num(basis.quality),
                           num(basis.approximate), num(C), num(sw.passed), num(sw.worst_ratio),
                           sw.witnesses.empty() ? std::string() : inline_vector(sw.witnesses.front())}));
    std::string witness;
    for (const auto& w : defect.witness) witness += (witness.empty() ? "" : " | ") + inline_vector(w);
    r.certificates = {{"defect_witness", witness},
                      {"defect_note", "sampled lower bound for C"},
                      {"basis_dual_norms", inline_vector(basis.dual_norms)},
                      {"numeric_duality_map", num(numeric)}};
    r.heuristic = basis.heuristic;
    return r;
}

inline auto run_invariance(const Config& c) -> RunResult {
    const auto norm = parse_space(c.get("space"));
    require(norm.family() == NormFamily::lp, ErrorCode::invalid_input,
            "invariance checks use signed permutations, which are isometries of lp spaces");
    auto config = solver_config(c);
    const Eigen::Index d = norm.dim();
    const long seeds = get_int(c, "seeds", 5);
    const long trials = get_int(c, "trials", 20);
    require(seeds >= 1 && trials >= 0, ErrorCode::invalid_input, "seeds must be positive and trials nonnegative");
    const std::uint64_t base_seed = config.seed;
    const auto bodies = desx::detail::parallel_map(static_cast<std::size_t>(seeds), threads_of(c), [&](std::size_t i) {
        SolverConfig sc = config;
        sc.seed = base_seed + i;
        return mvee_body(norm, sc).ellipsoid.A;
    });
    RunResult r;
    r.header = "check,index,deviation";
    const Matrix& a = bodies.front();
    for (std::size_t i = 0; i < bodies.size(); ++i)
        r.rows.push_back(join({"seed", num(long(i)), num((bodies[i] - a).norm() / a.norm())}));
    Rng rng(base_seed);
    for (long t = 0; t < trials; ++t) {
        const Matrix s = random_signed_permutation(d, rng);
        r.rows.push_back(join({"permutation", num(t), num((s.transpose() * a * s - a).norm())}));
    }
    return r;
}

}  // namespace detail

inline auto run_experiment(const Config& c) -> RunResult {
    const std::string& kind = c.get("kind");
    require(c.has("seed"), ErrorCode::invalid_input, "missing required key 'seed'");
    if (kind == "mvee") return detail::run_mvee(c);
    if (kind == "eta") return detail::run_eta(c);
    if (kind == "des-scan") return detail::run_des_scan(c);
    if (kind == "sum-asymptotics") return detail::run_sum_asymptotics(c);
    if (kind == "alpha") return detail::run_alpha(c);
    if (kind == "chain") return detail::run_chain(c);
    if (kind == "perturbation") return detail::run_perturbation(c);
    if (kind == "ultralimit") return detail::run_ultralimit(c);
    if (kind == "duality") return detail::run_duality(c);
    if (kind == "invariance") return detail::run_invariance(c);
    throw Error(ErrorCode::invalid_input, "unknown experiment kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// runs, sweeps and output files

struct Overrides {
    std::optional<std::string> seed;
    std::optional<std::string> eps;
    std::optional<std::string> out;
    std::optional<int> threads;
};

/// DESX_SEED, DESX_EPS, DESX_OUT and DESX_THREADS; command-line flags win.
inline auto environment_overrides(Overrides flags) -> Overrides {
    auto env = [](const char* name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name); v != nullptr && *v != '\0') return std::string(v);
        return std::nullopt;
    };
    if (!flags.seed) flags.seed = env("DESX_SEED");
    if (!flags.eps) flags.eps = env("DESX_EPS");
    if (!flags.out) flags.out = env("DESX_OUT");
    if (!flags.threads) {
        if (auto t = env("DESX_THREADS")) flags.threads = static_cast<int>(parse_number(*t, "DESX_THREADS"));
    }
    return flags;
}

inline void apply(Config& c, const Overrides& o) {
    if (o.seed) c.set("seed", *o.seed);
    if (o.eps) c.set("eps", *o.eps);
    if (o.threads) c.set("threads", std::to_string(*o.threads));
}

struct Outcome {
    int status = Status::ok;
    std::string message;
    RunResult result;
    std::vector<std::pair<std::string, std::string>> diagnostics;
    double seconds = 0.0;
};

inline auto execute(const Config& c) -> Outcome {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        out.result = run_experiment(c);
    } catch (const NonConvergence& e) {
        out.status = Status::solver_failure;
        out.message = e.what();
        out.diagnostics = {{"kappa", format_number(e.kappa())}, {"violation", format_number(e.violation())}};
    } catch (const Error& e) {
        out.status = e.code() == ErrorCode::non_convergence ? Status::solver_failure : Status::validation_error;
        out.message = e.what();
    } catch (const std::exception& e) {
        out.status = Status::validation_error;
        out.message = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

inline auto csv_text(const std::string& header, const std::vector<std::string>& rows) -> std::string {
    std::string out = header + "\n";
    for (const auto& r : rows) out += r + "\n";
    return out;
}

inline void write_file(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), ErrorCode::invalid_input, "cannot write '" + path + "'");
    os << text;
}

inline auto status_name(int status) -> std::string {
    switch (status) {
        case Status::ok: return "ok";
        case Status::validation_error: return "validation-error";
        default: return "non-convergence";
    }
}

inline auto manifest_entry(const std::string& prefix, const Config& c, const Outcome& o) -> std::string {
    std::ostringstream m;
    m << prefix << "source = " << c.source << "\n";
    for (const auto& k : c.order) m << prefix << "config." << k << " = " << c.values.at(k) << "\n";
    m << prefix << "status = " << status_name(o.status) << "\n";
    if (!o.message.empty()) m << prefix << "error = " << o.message << "\n";
    for (const auto& [k, v] : o.diagnostics) m << prefix << "diagnostic." << k << " = " << v << "\n";
    m << prefix << "wall_time_s = " << format_number(o.seconds) << "\n";
    if (o.status == Status::ok) {
        m << prefix << "rows = " << o.result.rows.size() << "\n";
        m << prefix << "heuristic = " << (o.result.heuristic ? 1 : 0) << "\n";
        for (const auto& [k, v] : o.result.certificates) m << prefix << "certificate." << k << " = " << v << "\n";
    }
    return m.str();
}

inline auto default_output(const std::string& config_path) -> std::string {
    return std::filesystem::path(config_path).stem().string() + ".csv";
}

/// `desx run`: data file plus `<out>.manifest`. Validation errors write nothing.
inline auto run_command(const std::string& path, const Overrides& flags, std::ostream& log) -> int {
    Config c;
    try {
        c = load_config(path);
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return Status::validation_error;
    }
    const auto o = environment_overrides(flags);
    apply(c, o);
    const std::string out = o.out ? *o.out : c.has("out") ? c.get("out") : default_output(path);
    const auto res = execute(c);
    if (res.status == Status::validation_error) {
        log << "error: " << res.message << "\n";
        return res.status;
    }
    try {
        std::string manifest = "tool = desx " + std::string(kVersion) + "\n" +
                               "kind = " + c.values.at("kind") + "\n" + "data = " + out + "\n" +
                               manifest_entry("", c, res);
        if (res.status == Status::ok) write_file(out, csv_text(res.result.header, res.result.rows));
        write_file(out + ".manifest", manifest);
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return Status::validation_error;
    }
    if (res.status != Status::ok) log << "error: " << res.message << "\n";
    return res.status;
}

/// `desx sweep`: member config paths one per line, relative to the list file.
inline auto sweep_command(const std::string& list_path, const Overrides& flags, std::ostream& log) -> int {
    std::vector<Config> members;
    try {
        const auto base = std::filesystem::path(list_path).parent_path();
        std::istringstream is(read_file(list_path));
        std::string line;
        while (std::getline(is, line)) {
            if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
            line = trim(line);
            if (line.empty()) continue;
            const auto p = std::filesystem::path(line).is_absolute() ? std::filesystem::path(line) : base / line;
            members.push_back(load_config(p.string()));
        }
        require(!members.empty(), ErrorCode::invalid_input, "sweep list is empty");
        for (const auto& m : members) {
            require(m.has("kind"), ErrorCode::invalid_input, m.source + ": missing required key 'kind'");
            require(m.get("kind") == members.front().get("kind"), ErrorCode::invalid_input,
                    "sweep members mix kinds '" + members.front().get("kind") + "' and '" + m.get("kind") + "'");
        }
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return Status::validation_error;
    }
    const auto o = environment_overrides(flags);
    for (auto& m : members) apply(m, o);
    const std::string out = o.out ? *o.out : default_output(list_path);

    // members run concurrently; each keeps to one thread internally
    Overrides single;
    single.threads = 1;
    for (auto& m : members) apply(m, single);
    const int workers = o.threads ? *o.threads : 1;
    const auto results = desx::detail::parallel_map(members.size(), workers, [&](std::size_t i) { return execute(members[i]); });

    int status = Status::ok;
    std::string header;
    std::vector<std::string> rows;
    std::ostringstream manifest;
    manifest << "tool = desx " << kVersion << "\n"
             << "kind = " << members.front().get("kind") << "\n"
             << "data = " << out << "\n"
             << "members = " << members.size() << "\n";
    for (std::size_t i = 0; i < members.size(); ++i) {
        const auto& r = results[i];
        manifest << manifest_entry("member." + std::to_string(i) + ".", members[i], r);
        if (r.status != Status::ok) {
            status = std::max(status, r.status);
            log << "error: " << members[i].source << ": " << r.message << "\n";
            continue;
        }
        if (header.empty()) header = r.result.header;
        if (r.result.header != header) {
            status = std::max(status, int(Status::validation_error));
            log << "error: " << members[i].source << ": CSV columns differ from the first member\n";
            continue;
        }
        rows.insert(rows.end(), r.result.rows.begin(), r.result.rows.end());
    }
    manifest << "status = " << status_name(status) << "\n";
    try {
        if (!header.empty()) write_file(out, csv_text(header, rows));
        write_file(out + ".manifest", manifest.str());
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return Status::validation_error;
    }
    return status;
}

}  // namespace desx::cli
