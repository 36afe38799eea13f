#include "slowfast/effective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "slowfast/cell.hpp"
#include "slowfast/parallel.hpp"

namespace slowfast {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

EffectiveTable tabulate_effective(const ControlProblem& problem, const BoxGrid& x_grid,
                                  const BoxGrid& p_grid, const BoxGrid& y_grid, double tol) {
    if (x_grid.dim() != problem.dim_slow || p_grid.dim() != problem.dim_slow)
        throw std::invalid_argument("tabulate_effective: slow-space grid dimension mismatch");
    EffectiveTable t;
    t.x_grid = x_grid;
    t.p_grid = p_grid;
    std::size_t nx = x_grid.node_count(), np = p_grid.node_count();
    t.values.assign(nx * np, kNaN);
    t.bracket_width.assign(nx * np, 0.0);
    t.gap_ratio.assign(nx * np, 0.0);
    t.failed.assign(nx * np, 0);
    t.messages.assign(nx * np, std::string());

    parallel_for(nx * np, [&](std::size_t idx) {
        std::size_t xi = idx / np, pj = idx % np;
        try {
            CellInstance cell = freeze(problem, x_grid.node(xi), p_grid.node(pj));
            CriticalResult crit = critical_value(cell, y_grid, tol);
            t.values[idx] = crit.c0;
            t.bracket_width[idx] = crit.bracket_hi - crit.bracket_lo;
            t.gap_ratio[idx] = crit.gap_ratio;
        } catch (const std::exception& e) {
            t.failed[idx] = 1;
            t.messages[idx] = e.what();
        }
    });
    return t;
}

TableDiagnostics table_diagnostics(const EffectiveTable& table) {
    TableDiagnostics d;
    std::size_t nx = table.x_grid.node_count(), np = table.p_grid.node_count();
    int pd = table.p_grid.dim();

    for (std::size_t xi = 0; xi < nx; ++xi) {
        for (std::size_t pj = 0; pj < np; ++pj) {
            std::size_t mid = table.entry(xi, pj);
            if (table.failed[mid]) continue;
            std::vector<int> multi = table.p_grid.multi_index(pj);
            for (int k = 0; k < pd; ++k) {
                if (multi[std::size_t(k)] == 0 ||
                    multi[std::size_t(k)] == table.p_grid.resolution[std::size_t(k)] - 1)
                    continue;
                std::vector<int> lo = multi, hi = multi;
                --lo[std::size_t(k)];
                ++hi[std::size_t(k)];
                std::size_t a = table.entry(xi, table.p_grid.index(lo));
                std::size_t b = table.entry(xi, table.p_grid.index(hi));
                if (table.failed[a] || table.failed[b]) continue;
                double viol = table.values[mid] - 0.5 * (table.values[a] + table.values[b]);
                if (viol > d.worst_convexity) {
                    d.worst_convexity = viol;
                    d.convexity_at = mid;
                }
            }
        }
    }

    // nearest-neighbor increments across the (x,p) product lattice
    auto consider = [&](std::size_t a, std::size_t b) {
        if (table.failed[a] || table.failed[b]) return;
        double inc = std::fabs(table.values[a] - table.values[b]);
        if (inc > d.worst_increment) {
            d.worst_increment = inc;
            d.increment_at = a;
        }
    };
    int xd = table.x_grid.dim();
    for (std::size_t xi = 0; xi < nx; ++xi) {
        std::vector<int> xm = table.x_grid.multi_index(xi);
        for (std::size_t pj = 0; pj < np; ++pj) {
            std::vector<int> pm = table.p_grid.multi_index(pj);
            for (int k = 0; k < xd; ++k) {
                if (xm[std::size_t(k)] + 1 >= table.x_grid.resolution[std::size_t(k)]) continue;
                std::vector<int> nb = xm;
                ++nb[std::size_t(k)];
                consider(table.entry(xi, pj), table.entry(table.x_grid.index(nb), pj));
            }
            for (int k = 0; k < pd; ++k) {
                if (pm[std::size_t(k)] + 1 >= table.p_grid.resolution[std::size_t(k)]) continue;
                std::vector<int> nb = pm;
                ++nb[std::size_t(k)];
                consider(table.entry(xi, pj), table.entry(xi, table.p_grid.index(nb)));
            }
        }
    }

    for (std::size_t i = 0; i < table.values.size(); ++i)
        if (!table.failed[i]) d.max_bracket = std::max(d.max_bracket, table.bracket_width[i]);
    return d;
}

namespace {
void append_value(std::string& row, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    row += buf;
}
}  // namespace

void write_table_csv(const EffectiveTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    std::size_t nx = table.x_grid.node_count(), np = table.p_grid.node_count();
    std::string row;
    for (std::size_t xi = 0; xi < nx; ++xi) {
        Vec x = table.x_grid.node(xi);
        for (std::size_t pj = 0; pj < np; ++pj) {
            Vec p = table.p_grid.node(pj);
            row.clear();
            for (double c : x) { append_value(row, c); row += ','; }
            for (double c : p) { append_value(row, c); row += ','; }
            std::size_t e = table.entry(xi, pj);
            append_value(row, table.values[e]);
            row += ',';
            append_value(row, table.bracket_width[e]);
            row += ',';
            append_value(row, table.gap_ratio[e]);
            row += '\n';
            out << row;
        }
    }
}

EffectiveTable read_table_csv(const std::string& path, int dim_slow) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty() || int(rows.front().size()) < 2 * dim_slow + 3)
        throw std::runtime_error("table csv: empty or malformed");
    std::size_t d = 2 * std::size_t(dim_slow);

    auto infer_axis = [&](std::size_t col) {
        std::vector<double> c;
        for (auto& r : rows) c.push_back(r[col]);
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end(),
                            [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
                c.end());
        return c;
    };
    std::vector<double> xlo, xhi, plo, phi;
    std::vector<int> xres, pres;
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> ax = infer_axis(k);
        if (ax.size() < 2) throw std::runtime_error("table csv: degenerate axis");
        if (k < std::size_t(dim_slow)) {
            xlo.push_back(ax.front()); xhi.push_back(ax.back()); xres.push_back(int(ax.size()));
        } else {
            plo.push_back(ax.front()); phi.push_back(ax.back()); pres.push_back(int(ax.size()));
        }
    }
    EffectiveTable t;
    t.x_grid = make_box_grid(xlo, xhi, xres);
    t.p_grid = make_box_grid(plo, phi, pres);
    std::size_t total = t.x_grid.node_count() * t.p_grid.node_count();
    if (rows.size() != total)
        throw std::runtime_error("table csv: row count does not match grids");
    t.values.assign(total, kNaN);
    t.bracket_width.assign(total, 0.0);
    t.gap_ratio.assign(total, 0.0);
    t.failed.assign(total, 0);
    t.messages.assign(total, std::string());
    for (auto& r : rows) {
        std::vector<int> xm(static_cast<std::size_t>(dim_slow)), pm(static_cast<std::size_t>(dim_slow));
        for (int k = 0; k < dim_slow; ++k) {
            double tt = (r[std::size_t(k)] - t.x_grid.lower[std::size_t(k)]) / t.x_grid.spacing[std::size_t(k)];
            xm[std::size_t(k)] = int(std::lround(tt));
        }
        for (int k = 0; k < dim_slow; ++k) {
            double tt = (r[std::size_t(dim_slow + k)] - t.p_grid.lower[std::size_t(k)]) / t.p_grid.spacing[std::size_t(k)];
            pm[std::size_t(k)] = int(std::lround(tt));
        }
        std::size_t e = t.entry(t.x_grid.index(xm), t.p_grid.index(pm));
        t.values[e] = r[d];
        t.bracket_width[e] = r[d + 1];
        t.gap_ratio[e] = r[d + 2];
        if (!std::isfinite(r[d])) t.failed[e] = 1;
    }
    return t;
}

double LimitSolution::value(const Vec& x, double t) const {
    if (times.empty()) throw std::runtime_error("LimitSolution: empty");
    if (t <= times.front()) return interpolate(slices.front(), x);
    if (t >= times.back()) return interpolate(slices.back(), x);
    std::size_t hi = 1;
    while (times[hi] < t) ++hi;
    double w = (t - times[hi - 1]) / (times[hi] - times[hi - 1]);
    return (1.0 - w) * interpolate(slices[hi - 1], x) + w * interpolate(slices[hi], x);
}

LimitSolution solve_limit(const ControlProblem& problem, const EffectiveTable& table,
                          const BoxGrid& x_grid, const BoxGrid& y_grid_for_u0,
                          double horizon, double dt) {
    if (dt <= 0.0 || horizon < 0.0)
        throw std::invalid_argument("solve_limit: need dt > 0 and horizon >= 0");
    int N = x_grid.dim();
    if (N != table.x_grid.dim() || N != table.p_grid.dim())
        throw std::invalid_argument("solve_limit: dimension mismatch with table");
    for (unsigned char f : table.failed)
        if (f) throw std::invalid_argument("solve_limit: table has failed entries");

    // interpolation field over the (x,p) product grid
    std::vector<double> lower = table.x_grid.lower, upper = table.x_grid.upper;
    std::vector<int> res = table.x_grid.resolution;
    lower.insert(lower.end(), table.p_grid.lower.begin(), table.p_grid.lower.end());
    upper.insert(upper.end(), table.p_grid.upper.begin(), table.p_grid.upper.end());
    res.insert(res.end(), table.p_grid.resolution.begin(), table.p_grid.resolution.end());
    Field hbar = make_field(make_box_grid(lower, upper, res));
    hbar.values = table.values;

    // dissipation per p-axis: max divided difference of the table
    std::vector<double> theta(std::size_t(N), 0.0);
    std::size_t nx = table.x_grid.node_count(), np = table.p_grid.node_count();
    for (std::size_t xi = 0; xi < nx; ++xi)
        for (std::size_t pj = 0; pj < np; ++pj) {
            std::vector<int> pm = table.p_grid.multi_index(pj);
            for (int k = 0; k < N; ++k) {
                if (pm[std::size_t(k)] + 1 >= table.p_grid.resolution[std::size_t(k)]) continue;
                std::vector<int> nb = pm;
                ++nb[std::size_t(k)];
                double diff = std::fabs(table.values[table.entry(xi, table.p_grid.index(nb))] -
                                        table.values[table.entry(xi, pj)]);
                theta[std::size_t(k)] = std::max(theta[std::size_t(k)],
                                                 diff / table.p_grid.spacing[std::size_t(k)]);
            }
        }

    std::size_t steps = horizon > 0.0 ? std::size_t(std::ceil(horizon / dt * (1.0 - 1e-12))) : 0;
    double dt_eff = steps > 0 ? horizon / double(steps) : dt;
    double cfl = 0.0;
    for (int k = 0; k < N; ++k)
        cfl += dt_eff * theta[std::size_t(k)] / x_grid.spacing[std::size_t(k)];
    if (steps > 0 && cfl > 1.0 + 1e-9) {
        std::ostringstream msg;
        msg << "solve_limit: CFL violation, dt*theta/h = " << cfl;
        throw std::invalid_argument(msg.str());
    }

    LimitSolution sol;
    sol.x_grid = x_grid;
    sol.horizon = horizon;
    sol.dt = dt_eff;
    sol.dissipation = theta;

    std::size_t n = x_grid.node_count();
    Field prev = make_field(x_grid);
    for (std::size_t i = 0; i < n; ++i)
        prev.values[i] = bar_u0(problem, x_grid.node(i), y_grid_for_u0);
    sol.times.push_back(0.0);
    sol.slices.push_back(prev);

    Field next = make_field(x_grid);
    std::vector<unsigned char> out_of_range(n, 0);
    for (std::size_t step = 1; step <= steps; ++step) {
        parallel_for(n, [&](std::size_t i) {
            std::vector<int> multi = x_grid.multi_index(i);
            Vec q(static_cast<std::size_t>(N));
            double diss = 0.0;
            std::vector<int> probe = multi;
            for (int k = 0; k < N; ++k) {
                int idx = multi[std::size_t(k)];
                int nk = x_grid.resolution[std::size_t(k)];
                double h = x_grid.spacing[std::size_t(k)];
                double th = theta[std::size_t(k)];
                if (idx == 0) {
                    probe[std::size_t(k)] = 1;
                    double up = prev.values[x_grid.index(probe)];
                    q[std::size_t(k)] = (up - prev.values[i]) / h;
                    diss += th * q[std::size_t(k)];  // upwinded closure
                } else if (idx == nk - 1) {
                    probe[std::size_t(k)] = nk - 2;
                    double dn = prev.values[x_grid.index(probe)];
                    q[std::size_t(k)] = (prev.values[i] - dn) / h;
                    diss += -th * q[std::size_t(k)];
                } else {
                    probe[std::size_t(k)] = idx + 1;
                    double up = prev.values[x_grid.index(probe)];
                    probe[std::size_t(k)] = idx - 1;
                    double dn = prev.values[x_grid.index(probe)];
                    q[std::size_t(k)] = (up - dn) / (2.0 * h);
                    diss += 0.5 * th * (up - 2.0 * prev.values[i] + dn) / h;
                }
                probe[std::size_t(k)] = idx;
                double pl = table.p_grid.lower[std::size_t(k)], pu = table.p_grid.upper[std::size_t(k)];
                if (q[std::size_t(k)] < pl - 1e-9 || q[std::size_t(k)] > pu + 1e-9)
                    out_of_range[i] = 1;
            }
            Vec xp = x_grid.node(i);
            xp.insert(xp.end(), q.begin(), q.end());
            next.values[i] = prev.values[i] - dt_eff * (interpolate(hbar, xp) - diss);
        });
        for (std::size_t i = 0; i < n; ++i)
            if (out_of_range[i])
                throw std::runtime_error(
                    "solve_limit: discrete gradient left the table's p-range; rebuild the "
                    "table over a wider p-box");
        prev.values.swap(next.values);
        sol.times.push_back(double(step) * dt_eff);
        sol.slices.push_back(prev);
    }
    return sol;
}

double hopf_lax_oracle(double x, double t, const std::function<double(double)>& u0bar,
                       double radius_speed) {
    if (t < 0.0) throw std::invalid_argument("hopf_lax_oracle: t must be >= 0");
    double r = radius_speed * t;
    double best = kInf;
    const int n = 10000;
    for (int i = 0; i <= n; ++i)
        best = std::min(best, u0bar(x - r + 2.0 * r * double(i) / double(n)));
    return best;
}

}  // namespace slowfast
