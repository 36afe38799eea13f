#include "slowfast/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace slowfast {

namespace {

using nlohmann::json;

json grid_to_json(const BoxGrid& g) {
    return json{{"lower", g.lower}, {"upper", g.upper}, {"resolution", g.resolution}};
}

std::vector<std::size_t> central_nodes(const BoxGrid& g, double fraction) {
    std::vector<std::size_t> out;
    std::size_t n = g.node_count();
    for (std::size_t i = 0; i < n; ++i) {
        Vec p = g.node(i);
        bool in = true;
        for (int k = 0; k < g.dim(); ++k) {
            double lo = g.lower[std::size_t(k)], hi = g.upper[std::size_t(k)];
            double half = 0.5 * fraction * (hi - lo);
            double mid = 0.5 * (lo + hi);
            if (p[std::size_t(k)] < mid - half - 1e-12 || p[std::size_t(k)] > mid + half + 1e-12)
                in = false;
        }
        if (in) out.push_back(i);
    }
    return out;
}

std::size_t nearest_slice(const std::vector<double>& times, double t) {
    std::size_t best = 0;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < times.size(); ++k) {
        double g = std::fabs(times[k] - t);
        if (g < gap) { gap = g; best = k; }
    }
    return best;
}

}  // namespace

std::vector<double> table_dissipation(const EffectiveTable& table) {
    int pd = table.p_grid.dim();
    std::vector<double> theta(std::size_t(pd), 0.0);
    std::size_t nx = table.x_grid.node_count(), np = table.p_grid.node_count();
    for (std::size_t xi = 0; xi < nx; ++xi)
        for (std::size_t pj = 0; pj < np; ++pj) {
            if (table.failed[table.entry(xi, pj)]) continue;
            std::vector<int> pm = table.p_grid.multi_index(pj);
            for (int k = 0; k < pd; ++k) {
                if (pm[std::size_t(k)] + 1 >= table.p_grid.resolution[std::size_t(k)]) continue;
                std::vector<int> nb = pm;
                ++nb[std::size_t(k)];
                std::size_t other = table.entry(xi, table.p_grid.index(nb));
                if (table.failed[other]) continue;
                double diff = std::fabs(table.values[other] - table.values[table.entry(xi, pj)]);
                theta[std::size_t(k)] = std::max(theta[std::size_t(k)],
                                                 diff / table.p_grid.spacing[std::size_t(k)]);
            }
        }
    return theta;
}

Field lower_envelope(const Field& f) {
    const BoxGrid& g = f.grid;
    Field out = make_field(g);
    std::size_t n = g.node_count();
    int d = g.dim();
    std::vector<int> off(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> multi = g.multi_index(i);
        double best = f.values[i];
        std::fill(off.begin(), off.end(), -1);
        for (;;) {
            std::vector<int> nb = multi;
            bool ok = true;
            for (int k = 0; k < d; ++k) {
                nb[std::size_t(k)] += off[std::size_t(k)];
                if (nb[std::size_t(k)] < 0 || nb[std::size_t(k)] >= g.resolution[std::size_t(k)])
                    ok = false;
            }
            if (ok) best = std::min(best, f.values[g.index(nb)]);
            int k = 0;
            while (k < d && ++off[std::size_t(k)] == 2) off[std::size_t(k++)] = -1;
            if (k == d) break;
        }
        out.values[i] = best;
    }
    return out;
}

ConvergenceReport run_convergence(const ControlProblem& problem,
                                  const std::vector<double>& eps_list,
                                  const BoxGrid& x_grid, const BoxGrid& y_grid,
                                  const BoxGrid& p_grid, double horizon, double t_min,
                                  const ConvergenceOptions& options) {
    if (eps_list.empty()) throw std::invalid_argument("run_convergence: empty eps list");
    for (std::size_t i = 1; i < eps_list.size(); ++i)
        if (!(eps_list[i] < eps_list[i - 1]))
            throw std::invalid_argument("run_convergence: eps list must be strictly decreasing");
    if (!(t_min >= 0.0 && t_min < horizon))
        throw std::invalid_argument("run_convergence: need 0 <= t_min < horizon");

    ConvergenceReport rep;
    rep.problem = problem.name;
    rep.x_grid = x_grid;
    rep.y_grid = y_grid;
    rep.p_grid = p_grid;
    rep.eps_list = eps_list;
    rep.options = options;
    rep.informative_only = eps_list.size() < 2;
    rep.t_layer = 2.0 * eps_list.back();

    // stage 1: effective table on a coarse x grid
    std::vector<int> tx_res(std::size_t(x_grid.dim()), options.table_x_nodes);
    BoxGrid table_x = make_box_grid(x_grid.lower, x_grid.upper, tx_res);
    EffectiveTable table;
    try {
        table = tabulate_effective(problem, table_x, p_grid, y_grid, options.cell_tol);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("run_convergence [tabulate_effective]: ") + e.what());
    }
    for (std::size_t i = 0; i < table.failed.size(); ++i)
        if (table.failed[i])
            throw std::runtime_error("run_convergence [tabulate_effective]: entry failed: " +
                                     table.messages[i]);

    // stage 2: limit solution; boundary closures of the scheme are monotone
    // only up to half the interior CFL bound
    std::vector<double> theta = table_dissipation(table);
    double theta_sum = 0.0;
    for (int k = 0; k < x_grid.dim(); ++k)
        theta_sum += theta[std::size_t(k)] / x_grid.spacing[std::size_t(k)];
    double dt_limit = theta_sum > 0.0 ? options.cfl_safety * 0.5 / theta_sum : horizon;
    LimitSolution limit;
    try {
        limit = solve_limit(problem, table, x_grid, y_grid, horizon, dt_limit);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("run_convergence [solve_limit]: ") + e.what());
    }

    // CFL data for the eps solves
    double max_f = 0.0, max_g = 0.0;
    {
        std::size_t ny = y_grid.node_count();
        std::size_t nx = x_grid.node_count();
        for (std::size_t i = 0; i < nx; ++i) {
            Vec x = x_grid.node(i);
            for (std::size_t j = 0; j < ny; ++j) {
                Vec y = y_grid.node(j);
                for (const Vec& a : problem.controls) {
                    for (double c : problem.drift_slow(x, y, a)) max_f = std::max(max_f, std::fabs(c));
                    for (double c : problem.drift_fast(x, y, a)) max_g = std::max(max_g, std::fabs(c));
                }
            }
        }
    }

    std::vector<std::size_t> probe_x = central_nodes(x_grid, options.probe_x_fraction);
    std::vector<std::size_t> core_y = central_nodes(y_grid, options.core_y_fraction);
    std::size_t ny = y_grid.node_count();

    Field u0bar = make_field(x_grid);
    for (std::size_t i = 0; i < x_grid.node_count(); ++i)
        u0bar.values[i] = bar_u0(problem, x_grid.node(i), y_grid);
    Field u0sharp = lower_envelope(u0bar);

    for (std::size_t ei = 0; ei < eps_list.size(); ++ei) {
        double eps = eps_list[ei];
        double dt = std::numeric_limits<double>::infinity();
        if (max_g > 0.0) dt = std::min(dt, eps * y_grid.min_spacing() / max_g);
        if (max_f > 0.0) dt = std::min(dt, x_grid.min_spacing() / max_f);
        if (!std::isfinite(dt)) dt = horizon;
        dt *= options.cfl_safety;

        ValueFunction v;
        try {
            v = solve_value_function(problem, eps, x_grid, y_grid, horizon, dt);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("run_convergence [solve_value_function]: ") +
                                     e.what());
        }

        double sup_err = 0.0;
        for (std::size_t k = 0; k < v.times.size(); ++k) {
            double t = v.times[k];
            if (t < t_min - 1e-12 || t > horizon + 1e-12) continue;
            for (std::size_t xi : probe_x) {
                double u = limit.value(x_grid.node(xi), t);
                for (std::size_t yj : core_y) {
                    double err = std::fabs(v.slices[k].values[xi * ny + yj] - u);
                    sup_err = std::max(sup_err, err);
                }
            }
        }
        rep.interior_error.push_back({eps, sup_err});

        for (double t : {0.5 * horizon, horizon}) {
            std::size_t k = nearest_slice(v.times, t);
            Field osc = y_oscillation(v, k, options.core_y_fraction);
            double worst = 0.0;
            for (std::size_t xi : probe_x) worst = std::max(worst, osc.values[xi]);
            rep.oscillation.push_back({eps, v.times[k], worst});
        }

        if (ei + 1 == eps_list.size()) {
            // initial layer at the smallest eps: by t = 2*eps the fast variable
            // has equilibrated, so V is squeezed between the envelopes of u0.
            // The lower bound holds only up to the slow-drift modulus
            // Lip(u0bar) * max|f| * t, which we add back into that margin.
            std::size_t k = nearest_slice(v.times, rep.t_layer);
            double lip = 0.0;
            for (std::size_t xi : probe_x) {
                std::vector<int> mi = x_grid.multi_index(xi);
                for (int ax = 0; ax < x_grid.dim(); ++ax)
                    for (int dir : {-1, 1}) {
                        std::vector<int> nb = mi;
                        nb[std::size_t(ax)] += dir;
                        if (nb[std::size_t(ax)] < 0 ||
                            nb[std::size_t(ax)] >= x_grid.resolution[std::size_t(ax)])
                            continue;
                        double diff = std::fabs(u0bar.values[x_grid.index(nb)] - u0bar.values[xi]);
                        lip = std::max(lip, diff / x_grid.spacing[std::size_t(ax)]);
                    }
            }
            double drift_modulus = lip * max_f * rep.t_layer;
            double upper = -std::numeric_limits<double>::infinity();
            double lower = std::numeric_limits<double>::infinity();
            for (std::size_t xi : probe_x)
                for (std::size_t yj : core_y) {
                    double val = v.slices[k].values[xi * ny + yj];
                    upper = std::max(upper, val - u0bar.values[xi]);
                    lower = std::min(lower, val - u0sharp.values[xi] + drift_modulus);
                }
            rep.layer_upper_margin = upper;
            rep.layer_lower_margin = lower;
            rep.layer_upper_ok = upper <= options.layer_threshold;
            rep.layer_lower_ok = lower >= -options.layer_threshold;
        }
    }

    bool ok = rep.layer_upper_ok && rep.layer_lower_ok;
    ok = ok && rep.interior_error.back().sup_err <= options.interior_threshold;
    if (!rep.informative_only) {
        for (std::size_t i = 1; i < rep.interior_error.size(); ++i)
            ok = ok && rep.interior_error[i].sup_err < rep.interior_error[i - 1].sup_err;
        // oscillation trend at the final time
        std::vector<double> final_osc;
        for (const auto& o : rep.oscillation)
            if (std::fabs(o.t - horizon) < 1e-9) final_osc.push_back(o.max_osc);
        for (std::size_t i = 1; i < final_osc.size(); ++i) ok = ok && final_osc[i] < final_osc[i - 1];
        if (!final_osc.empty()) ok = ok && final_osc.back() <= options.oscillation_threshold;
    }
    rep.pass = ok;
    return rep;
}

std::string ConvergenceReport::to_json() const {
    json j;
    j["problem"] = problem;
    j["grids"] = json{{"x", grid_to_json(x_grid)},
                      {"y", grid_to_json(y_grid)},
                      {"p", grid_to_json(p_grid)}};
    j["eps_list"] = eps_list;
    json errs = json::array();
    for (const auto& e : interior_error) errs.push_back({{"eps", e.eps}, {"sup_err", e.sup_err}});
    j["interior_error"] = errs;
    json oscs = json::array();
    for (const auto& o : oscillation)
        oscs.push_back({{"eps", o.eps}, {"t", o.t}, {"max_osc", o.max_osc}});
    j["oscillation"] = oscs;
    j["layer"] = json{{"upper_ok", layer_upper_ok},
                      {"lower_ok", layer_lower_ok},
                      {"t_layer", t_layer},
                      {"margins", {{"upper", layer_upper_margin}, {"lower", layer_lower_margin}}}};
    j["thresholds"] = json{{"interior", options.interior_threshold},
                           {"oscillation", options.oscillation_threshold},
                           {"layer", options.layer_threshold}};
    j["informative_only"] = informative_only;
    j["pass"] = pass;
    return j.dump(2) + "\n";
}

}  // namespace slowfast
