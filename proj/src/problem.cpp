#include "slowfast/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "slowfast/expr.hpp"

namespace slowfast {

namespace {

std::vector<Vec> lattice(const std::vector<std::pair<double, double>>& bounds,
                         int samples_per_axis) {
    if (samples_per_axis <= 0)
        throw std::invalid_argument("empty control set");
    std::size_t k = bounds.size();
    std::vector<Vec> out;
    std::vector<int> idx(k, 0);
    for (;;) {
        Vec a(k);
        for (std::size_t d = 0; d < k; ++d) {
            if (samples_per_axis == 1)
                a[d] = 0.5 * (bounds[d].first + bounds[d].second);
            else
                a[d] = bounds[d].first + (bounds[d].second - bounds[d].first) *
                                             double(idx[d]) / double(samples_per_axis - 1);
        }
        out.push_back(std::move(a));
        std::size_t d = 0;
        while (d < k && ++idx[d] == samples_per_axis) idx[d++] = 0;
        if (d == k) break;
    }
    return out;
}

double sq_norm(const Vec& v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return s;
}

double radius_1d(const std::vector<Vec>& pts) {
    double lo = pts.front()[0], hi = lo;
    for (auto& p : pts) {
        lo = std::min(lo, p[0]);
        hi = std::max(hi, p[0]);
    }
    return std::max(0.0, std::min(hi, -lo));
}

double radius_2d(const std::vector<Vec>& pts) {
    // Andrew monotone chain
    std::vector<Vec> p = pts;
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    if (p.size() < 3) return 0.0;
    auto cross = [](const Vec& o, const Vec& a, const Vec& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<Vec> hull(2 * p.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
        hull[k++] = p[i];
    }
    std::size_t lower_size = k + 1;
    for (std::size_t i = p.size() - 1; i-- > 0;) {
        while (k >= lower_size && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
        hull[k++] = p[i];
    }
    hull.resize(k - 1);
    if (hull.size() < 3) return 0.0;
    double r = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Vec& a = hull[i];
        const Vec& b = hull[(i + 1) % hull.size()];
        double nx = b[1] - a[1], ny = a[0] - b[0];  // outward for ccw hull
        double len = std::hypot(nx, ny);
        if (len < 1e-14) continue;
        double dist = (nx * a[0] + ny * a[1]) / len;
        r = std::min(r, dist);
    }
    return std::max(0.0, std::isfinite(r) ? r : 0.0);
}

double radius_3d(const std::vector<Vec>& pts) {
    std::vector<Vec> p = pts;
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    std::size_t n = p.size();
    if (n < 4) return 0.0;
    double r = std::numeric_limits<double>::infinity();
    bool any_facet = false;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k) {
                double ux = p[j][0] - p[i][0], uy = p[j][1] - p[i][1], uz = p[j][2] - p[i][2];
                double vx = p[k][0] - p[i][0], vy = p[k][1] - p[i][1], vz = p[k][2] - p[i][2];
                double nx = uy * vz - uz * vy;
                double ny = uz * vx - ux * vz;
                double nz = ux * vy - uy * vx;
                double len = std::sqrt(nx * nx + ny * ny + nz * nz);
                if (len < 1e-12) continue;
                nx /= len; ny /= len; nz /= len;
                double h = nx * p[i][0] + ny * p[i][1] + nz * p[i][2];
                bool upper = true, lower = true;
                for (std::size_t q = 0; q < n; ++q) {
                    double d = nx * p[q][0] + ny * p[q][1] + nz * p[q][2] - h;
                    if (d > 1e-10) upper = false;
                    if (d < -1e-10) lower = false;
                    if (!upper && !lower) break;
                }
                if (upper) { any_facet = true; r = std::min(r, h); }
                if (lower) { any_facet = true; r = std::min(r, -h); }
            }
    if (!any_facet) return 0.0;
    return std::max(0.0, r);
}

}  // namespace

double inscribed_radius(const std::vector<Vec>& points, int dim) {
    if (points.empty()) return 0.0;
    switch (dim) {
        case 1: return radius_1d(points);
        case 2: return radius_2d(points);
        case 3: return radius_3d(points);
        default:
            throw std::invalid_argument("inscribed_radius: fast dimension must be <= 3");
    }
}

ControlProblem builtin_problem(const std::string& name, int samples_per_axis) {
    ControlProblem p;
    p.name = name;
    if (name == "quadcell") {
        p.dim_slow = 1;
        p.dim_fast = 1;
        p.controls = lattice({{-1, 1}, {-1, 1}}, samples_per_axis);
        p.drift_slow = [](const Vec&, const Vec&, const Vec& a) { return Vec{a[0]}; };
        p.drift_fast = [](const Vec&, const Vec&, const Vec& a) { return Vec{a[1]}; };
        p.running_cost = [](const Vec&, const Vec& y, const Vec&) { return y[0] * y[0]; };
        p.terminal_cost = [](const Vec& x, const Vec& y) {
            return x[0] * x[0] + 1.0 - std::exp(-y[0] * y[0]);
        };
        p.bound_f = 1.0;
        p.lipschitz = 1.0;
    } else if (name == "quadcell2d") {
        p.dim_slow = 1;
        p.dim_fast = 2;
        p.controls = lattice({{-1, 1}, {-1, 1}, {-1, 1}}, samples_per_axis);
        p.drift_slow = [](const Vec&, const Vec&, const Vec& a) { return Vec{a[0]}; };
        p.drift_fast = [](const Vec&, const Vec&, const Vec& a) { return Vec{a[1], a[2]}; };
        p.running_cost = [](const Vec&, const Vec& y, const Vec&) { return sq_norm(y); };
        p.terminal_cost = [](const Vec& x, const Vec& y) {
            return x[0] * x[0] + 1.0 - std::exp(-sq_norm(y));
        };
        p.bound_f = 1.0;
        p.lipschitz = 1.0;
    } else {
        throw std::invalid_argument("unknown name: " + name);
    }
    return p;
}

namespace {

using nlohmann::json;

ControlProblem from_expressions(const json& cfg) {
    int N = cfg.at("dims").at("N").get<int>();
    int M = cfg.at("dims").at("M").get<int>();
    if (N < 1 || M < 1) throw std::invalid_argument("config: dims must be >= 1");
    if (M > 3) throw std::invalid_argument("config: fast dimension M > 3 not supported");

    const json& ctrl = cfg.at("control");
    std::vector<std::pair<double, double>> bounds;
    for (const auto& b : ctrl.at("bounds"))
        bounds.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
    if (bounds.empty()) throw std::invalid_argument("empty control set");
    int spa = ctrl.at("samples_per_axis").get<int>();
    if (spa <= 0) throw std::invalid_argument("empty control set");

    int K = int(bounds.size());
    std::vector<std::string> vars;
    for (int i = 1; i <= N; ++i) vars.push_back("x" + std::to_string(i));
    for (int i = 1; i <= M; ++i) vars.push_back("y" + std::to_string(i));
    for (int i = 1; i <= K; ++i) vars.push_back("a" + std::to_string(i));

    const json& ex = cfg.at("expressions");
    auto compile_list = [&](const json& j, int want) {
        std::vector<Expression> out;
        if (j.is_string()) {
            out.push_back(Expression::compile(j.get<std::string>(), vars));
        } else {
            for (const auto& s : j)
                out.push_back(Expression::compile(s.get<std::string>(), vars));
        }
        if (int(out.size()) != want)
            throw std::invalid_argument("config: dimension mismatch in expression list");
        return out;
    };
    auto f_exprs = std::make_shared<std::vector<Expression>>(compile_list(ex.at("f"), N));
    auto g_exprs = std::make_shared<std::vector<Expression>>(compile_list(ex.at("g"), M));
    auto ell_expr = std::make_shared<Expression>(
        Expression::compile(ex.at("ell").get<std::string>(), vars));
    std::vector<std::string> u0_vars(vars.begin(), vars.begin() + N + M);
    auto u0_expr = std::make_shared<Expression>(
        Expression::compile(ex.at("u0").get<std::string>(), u0_vars));

    auto pack = [N, M, K](const Vec& x, const Vec& y, const Vec& a) {
        Vec env;
        env.reserve(std::size_t(N + M + K));
        env.insert(env.end(), x.begin(), x.end());
        env.insert(env.end(), y.begin(), y.end());
        env.insert(env.end(), a.begin(), a.end());
        return env;
    };

    ControlProblem p;
    p.name = cfg.value("label", std::string("custom"));
    p.dim_slow = N;
    p.dim_fast = M;
    p.controls = lattice(bounds, spa);
    p.drift_slow = [f_exprs, pack](const Vec& x, const Vec& y, const Vec& a) {
        Vec env = pack(x, y, a), out(f_exprs->size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*f_exprs)[i].eval(env);
        return out;
    };
    p.drift_fast = [g_exprs, pack](const Vec& x, const Vec& y, const Vec& a) {
        Vec env = pack(x, y, a), out(g_exprs->size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*g_exprs)[i].eval(env);
        return out;
    };
    p.running_cost = [ell_expr, pack](const Vec& x, const Vec& y, const Vec& a) {
        return ell_expr->eval(pack(x, y, a));
    };
    p.terminal_cost = [u0_expr](const Vec& x, const Vec& y) {
        Vec env;
        env.reserve(x.size() + y.size());
        env.insert(env.end(), x.begin(), x.end());
        env.insert(env.end(), y.begin(), y.end());
        return u0_expr->eval(env);
    };
    return p;
}

}  // namespace

ControlProblem load_problem(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed config: ") + e.what());
    }
    const json& cfg = doc.contains("problem") ? doc.at("problem") : doc;
    ControlProblem p;
    try {
        if (cfg.contains("name")) {
            p = builtin_problem(cfg.at("name").get<std::string>(),
                                cfg.value("samples_per_axis", 5));
        } else {
            p = from_expressions(cfg);
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed config: ") + e.what());
    }
    if (cfg.contains("q0")) p.bound_f = cfg.at("q0").get<double>();
    if (cfg.contains("lipschitz")) p.lipschitz = cfg.at("lipschitz").get<double>();
    if (p.bound_f == 0.0 || p.lipschitz == 0.0) {
        // estimate the constants by sampling a reference box
        Vec lo(std::size_t(p.dim_slow + p.dim_fast), -2.0);
        Vec hi(std::size_t(p.dim_slow + p.dim_fast), 2.0);
        AssumptionReport rep = check_assumptions(p, lo, hi, 7);
        if (p.bound_f == 0.0) p.bound_f = rep.q0_observed;
        if (p.lipschitz == 0.0) p.lipschitz = rep.lipschitz_observed;
    }
    return p;
}

ControlProblem load_problem_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_problem(ss.str());
}

ControlProblem resolve_problem(const std::string& name_or_path) {
    static const std::set<std::string> builtins = {"quadcell", "quadcell2d"};
    if (builtins.count(name_or_path)) return builtin_problem(name_or_path);
    return load_problem_file(name_or_path);
}

AssumptionReport check_assumptions(const ControlProblem& problem,
                                   const Vec& box_lower, const Vec& box_upper,
                                   int samples_per_axis) {
    int N = problem.dim_slow, M = problem.dim_fast;
    if (int(box_lower.size()) != N + M || int(box_upper.size()) != N + M)
        throw std::invalid_argument("check_assumptions: box dimension mismatch");
    if (samples_per_axis < 2)
        throw std::invalid_argument("check_assumptions: need samples >= 2 per axis");
    for (int d = 0; d < N + M; ++d)
        if (!(box_lower[std::size_t(d)] < box_upper[std::size_t(d)]))
            throw std::invalid_argument("check_assumptions: degenerate box");

    std::vector<int> res(std::size_t(N + M), samples_per_axis);
    BoxGrid grid = make_box_grid(box_lower, box_upper, res);
    std::size_t n_nodes = grid.node_count();

    AssumptionReport rep;
    rep.box_lower = box_lower;
    rep.box_upper = box_upper;

    double radius = std::numeric_limits<double>::infinity();
    std::map<double, double> profile;  // |y| -> min ell
    std::vector<Vec> fs(n_nodes * problem.controls.size());
    std::vector<Vec> gs(n_nodes * problem.controls.size());

    for (std::size_t i = 0; i < n_nodes; ++i) {
        Vec xy = grid.node(i);
        Vec x(xy.begin(), xy.begin() + N);
        Vec y(xy.begin() + N, xy.end());
        double ynorm = std::sqrt(sq_norm(y));
        std::vector<Vec> gvals;
        gvals.reserve(problem.controls.size());
        for (std::size_t c = 0; c < problem.controls.size(); ++c) {
            const Vec& a = problem.controls[c];
            Vec f = problem.drift_slow(x, y, a);
            Vec g = problem.drift_fast(x, y, a);
            rep.q0_observed = std::max(rep.q0_observed, std::sqrt(sq_norm(f)));
            double ell = problem.running_cost(x, y, a);
            auto it = profile.find(ynorm);
            if (it == profile.end()) profile.emplace(ynorm, ell);
            else it->second = std::min(it->second, ell);
            gvals.push_back(g);
            fs[i * problem.controls.size() + c] = std::move(f);
            gs[i * problem.controls.size() + c] = std::move(g);
        }
        radius = std::min(radius, inscribed_radius(gvals, M));
        if (problem.terminal_cost(x, y) < -problem.bound_f - 1e-12)
            rep.u0_lower_bound_ok = false;
    }
    rep.controllability_radius = std::isfinite(radius) ? radius : 0.0;
    rep.controllability_ok = rep.controllability_radius > 0.0;
    rep.coercivity_profile.assign(profile.begin(), profile.end());

    // empirical L0 from difference quotients between axis-neighbor samples
    double lip = 0.0;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        std::vector<int> multi = grid.multi_index(i);
        for (int d = 0; d < N + M; ++d) {
            if (multi[std::size_t(d)] + 1 >= grid.resolution[std::size_t(d)]) continue;
            std::vector<int> nb = multi;
            ++nb[std::size_t(d)];
            std::size_t j = grid.index(nb);
            double h = grid.spacing[std::size_t(d)];
            for (std::size_t c = 0; c < problem.controls.size(); ++c) {
                double df = 0.0, dg = 0.0;
                const Vec& fi = fs[i * problem.controls.size() + c];
                const Vec& fj = fs[j * problem.controls.size() + c];
                const Vec& gi = gs[i * problem.controls.size() + c];
                const Vec& gj = gs[j * problem.controls.size() + c];
                for (std::size_t k = 0; k < fi.size(); ++k) df += (fi[k] - fj[k]) * (fi[k] - fj[k]);
                for (std::size_t k = 0; k < gi.size(); ++k) dg += (gi[k] - gj[k]) * (gi[k] - gj[k]);
                lip = std::max(lip, std::sqrt(std::max(df, dg)) / h);
            }
        }
    }
    rep.lipschitz_observed = lip;

    rep.hard_failure = !rep.controllability_ok || !rep.u0_lower_bound_ok;
    return rep;
}

double bar_u0(const ControlProblem& problem, const Vec& x, const BoxGrid& y_grid) {
    std::size_t n = y_grid.node_count();
    if (n == 0) throw std::invalid_argument("bar_u0: empty grid");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        best = std::min(best, problem.terminal_cost(x, y_grid.node(i)));
    return best;
}

}  // namespace slowfast
