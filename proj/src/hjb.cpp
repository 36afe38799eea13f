#include "slowfast/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "slowfast/parallel.hpp"

namespace slowfast {

namespace {

BoxGrid product_grid(const BoxGrid& a, const BoxGrid& b) {
    std::vector<double> lower = a.lower, upper = a.upper;
    std::vector<int> res = a.resolution;
    lower.insert(lower.end(), b.lower.begin(), b.lower.end());
    upper.insert(upper.end(), b.upper.begin(), b.upper.end());
    res.insert(res.end(), b.resolution.begin(), b.resolution.end());
    return make_box_grid(lower, upper, res);
}

double sup_norm(const Vec& v) {
    double s = 0.0;
    for (double c : v) s = std::max(s, std::fabs(c));
    return s;
}

}  // namespace

const Field& ValueFunction::slice_at(double t) const {
    std::size_t best = 0;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < times.size(); ++k) {
        double g = std::fabs(times[k] - t);
        if (g < gap) { gap = g; best = k; }
    }
    return slices[best];
}

ValueFunction solve_value_function(const ControlProblem& problem, double eps,
                                   const BoxGrid& x_grid, const BoxGrid& y_grid,
                                   double horizon, double dt, int output_stride) {
    if (eps <= 0.0 || dt <= 0.0 || horizon < 0.0)
        throw std::invalid_argument("solve_value_function: need eps, dt > 0 and horizon >= 0");
    if (x_grid.dim() != problem.dim_slow || y_grid.dim() != problem.dim_fast)
        throw std::invalid_argument("solve_value_function: grid dimension mismatch");
    if (output_stride < 1) output_stride = 1;

    int N = problem.dim_slow, M = problem.dim_fast;
    BoxGrid xy = product_grid(x_grid, y_grid);
    std::size_t n_nodes = xy.node_count();
    std::size_t n_ctrl = problem.controls.size();

    std::size_t steps = horizon > 0.0
        ? std::size_t(std::ceil(horizon / dt * (1.0 - 1e-12)))
        : 0;
    double dt_eff = steps > 0 ? horizon / double(steps) : dt;

    // CFL for the feet: dt <= eps*h_y/max|g| and dt <= h_x/max|f|
    double max_f = 0.0, max_g = 0.0;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        Vec xyv = xy.node(i);
        Vec x(xyv.begin(), xyv.begin() + N), y(xyv.begin() + N, xyv.end());
        for (std::size_t c = 0; c < n_ctrl; ++c) {
            max_f = std::max(max_f, sup_norm(problem.drift_slow(x, y, problem.controls[c])));
            max_g = std::max(max_g, sup_norm(problem.drift_fast(x, y, problem.controls[c])));
        }
    }
    if (steps > 0) {
        double lim = std::numeric_limits<double>::infinity();
        if (max_g > 0.0) lim = std::min(lim, eps * y_grid.min_spacing() / max_g);
        if (max_f > 0.0) lim = std::min(lim, x_grid.min_spacing() / max_f);
        if (dt_eff > lim * (1.0 + 1e-9)) {
            std::ostringstream msg;
            msg << "solve_value_function: CFL violation, dt/dt_max = " << dt_eff / lim;
            throw std::invalid_argument(msg.str());
        }
    }

    // Precompute interpolation stencils and stage costs; the dynamics are
    // time-independent so they are shared by all steps.
    unsigned corners = 1u << unsigned(N + M);
    std::vector<std::size_t> stencil_idx(n_nodes * n_ctrl * corners);
    std::vector<double> stencil_w(n_nodes * n_ctrl * corners);
    std::vector<double> stage_cost(n_nodes * n_ctrl);
    parallel_for(n_nodes, [&](std::size_t i) {
        Vec xyv = xy.node(i);
        Vec x(xyv.begin(), xyv.begin() + N), y(xyv.begin() + N, xyv.end());
        std::vector<int> base(std::size_t(N + M));
        std::vector<double> frac(std::size_t(N + M));
        std::vector<int> corner(std::size_t(N + M));
        for (std::size_t c = 0; c < n_ctrl; ++c) {
            const Vec& a = problem.controls[c];
            Vec f = problem.drift_slow(x, y, a);
            Vec g = problem.drift_fast(x, y, a);
            stage_cost[i * n_ctrl + c] = dt_eff * problem.running_cost(x, y, a);
            for (int k = 0; k < N + M; ++k) {
                double foot = k < N ? x[std::size_t(k)] + dt_eff * f[std::size_t(k)]
                                    : y[std::size_t(k - N)] + dt_eff / eps * g[std::size_t(k - N)];
                double t = (foot - xy.lower[std::size_t(k)]) / xy.spacing[std::size_t(k)];
                t = std::max(0.0, std::min(t, double(xy.resolution[std::size_t(k)] - 1)));
                int lo = std::min(int(t), xy.resolution[std::size_t(k)] - 2);
                base[std::size_t(k)] = lo;
                frac[std::size_t(k)] = t - double(lo);
            }
            for (unsigned mask = 0; mask < corners; ++mask) {
                double w = 1.0;
                for (int k = 0; k < N + M; ++k) {
                    bool hi = mask & (1u << unsigned(k));
                    corner[std::size_t(k)] = base[std::size_t(k)] + (hi ? 1 : 0);
                    w *= hi ? frac[std::size_t(k)] : 1.0 - frac[std::size_t(k)];
                }
                std::size_t slot = (i * n_ctrl + c) * corners + mask;
                stencil_idx[slot] = xy.index(corner);
                stencil_w[slot] = w;
            }
        }
    });

    ValueFunction vf;
    vf.eps = eps;
    vf.x_grid = x_grid;
    vf.y_grid = y_grid;
    vf.xy_grid = xy;
    vf.horizon = horizon;
    vf.dt = dt_eff;

    Field prev = make_field(xy);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        Vec xyv = xy.node(i);
        Vec x(xyv.begin(), xyv.begin() + N), y(xyv.begin() + N, xyv.end());
        prev.values[i] = problem.terminal_cost(x, y);
    }
    vf.times.push_back(0.0);
    vf.slices.push_back(prev);

    Field next = make_field(xy);
    for (std::size_t step = 1; step <= steps; ++step) {
        parallel_for(n_nodes, [&](std::size_t i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < n_ctrl; ++c) {
                std::size_t slot = (i * n_ctrl + c) * corners;
                double v = stage_cost[i * n_ctrl + c];
                for (unsigned m = 0; m < corners; ++m)
                    v += stencil_w[slot + m] * prev.values[stencil_idx[slot + m]];
                if (v < best) best = v;  // strict: ties keep the lower index
            }
            next.values[i] = best;
        });
        for (double v : next.values)
            if (!std::isfinite(v))
                throw std::runtime_error("solve_value_function: non-finite value encountered");
        prev.values.swap(next.values);
        if (step % std::size_t(output_stride) == 0 || step == steps) {
            vf.times.push_back(double(step) * dt_eff);
            vf.slices.push_back(prev);
        }
    }
    return vf;
}

namespace {

// one Heun step of xi' = eps f, eta' = g at fixed control
void heun_step(const ControlProblem& problem, double eps, double dt,
               Vec& x, Vec& y, const Vec& a) {
    Vec f1 = problem.drift_slow(x, y, a);
    Vec g1 = problem.drift_fast(x, y, a);
    Vec x1 = x, y1 = y;
    for (std::size_t k = 0; k < x.size(); ++k) x1[k] += dt * eps * f1[k];
    for (std::size_t k = 0; k < y.size(); ++k) y1[k] += dt * g1[k];
    Vec f2 = problem.drift_slow(x1, y1, a);
    Vec g2 = problem.drift_fast(x1, y1, a);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += 0.5 * dt * eps * (f1[k] + f2[k]);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += 0.5 * dt * (g1[k] + g2[k]);
}

Vec concat(const Vec& a, const Vec& b) {
    Vec out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace

Trajectory simulate_trajectory(const ControlProblem& problem, double eps,
                               const Vec& x0, const Vec& y0,
                               const std::vector<int>& controls, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("simulate_trajectory: dt must be > 0");
    Trajectory tr;
    tr.eps = eps;
    Vec x = x0, y = y0;
    tr.times.push_back(0.0);
    tr.states.push_back(concat(x, y));
    for (std::size_t s = 0; s < controls.size(); ++s) {
        const Vec& a = problem.controls.at(std::size_t(controls[s]));
        tr.cost += eps * problem.running_cost(x, y, a) * dt;
        heun_step(problem, eps, dt, x, y, a);
        tr.controls.push_back(controls[s]);
        tr.times.push_back(double(s + 1) * dt);
        tr.states.push_back(concat(x, y));
    }
    return tr;
}

Trajectory steer_fast(const ControlProblem& problem, double eps, const Vec& x0,
                      const Vec& y0, const Vec& z, double budget, double dt,
                      double h_y, double tol, double capture_radius_cells) {
    if (budget <= 0.0 || dt <= 0.0)
        throw std::invalid_argument("steer_fast: need positive budget and dt");
    if (tol < 0.0) tol = 5.0 * eps + 2.0 * h_y;
    double capture = capture_radius_cells * h_y;

    Trajectory tr;
    tr.eps = eps;
    Vec x = x0, y = y0;
    tr.times.push_back(0.0);
    tr.states.push_back(concat(x, y));
    std::size_t steps = std::size_t(std::ceil(budget / dt - 1e-12));
    for (std::size_t s = 0; s < steps; ++s) {
        double dist2 = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k)
            dist2 += (y[k] - z[k]) * (y[k] - z[k]);
        bool captured = std::sqrt(dist2) < capture;
        std::size_t pick = 0;
        double best = captured ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < problem.controls.size(); ++c) {
            Vec g = problem.drift_fast(x, y, problem.controls[c]);
            double score = 0.0;
            if (captured) {
                for (double gc : g) score += gc * gc;  // hover: minimize |g|
                if (score < best) { best = score; pick = c; }
            } else {
                for (std::size_t k = 0; k < y.size(); ++k) score += -(y[k] - z[k]) * g[k];
                if (score > best) { best = score; pick = c; }
            }
        }
        const Vec& a = problem.controls[pick];
        tr.cost += eps * problem.running_cost(x, y, a) * dt;
        double step = std::min(dt, budget - double(s) * dt);
        heun_step(problem, eps, step, x, y, a);
        tr.controls.push_back(int(pick));
        tr.times.push_back(std::min(double(s + 1) * dt, budget));
        tr.states.push_back(concat(x, y));
    }
    double miss2 = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) miss2 += (y[k] - z[k]) * (y[k] - z[k]);
    tr.miss = std::sqrt(miss2);
    if (tr.miss > tol) {
        std::ostringstream msg;
        msg << "steering failed: miss distance " << tr.miss << " exceeds tolerance " << tol;
        throw std::runtime_error(msg.str());
    }
    return tr;
}

Field y_oscillation(const ValueFunction& v, std::size_t t_index, double core_fraction) {
    if (t_index >= v.slices.size())
        throw std::invalid_argument("y_oscillation: slice index out of range");
    const Field& slice = v.slices[t_index];
    int M = v.y_grid.dim();

    // fast nodes inside the centered core box
    std::vector<std::size_t> core;
    std::size_t ny = v.y_grid.node_count();
    for (std::size_t j = 0; j < ny; ++j) {
        Vec y = v.y_grid.node(j);
        bool in = true;
        for (int k = 0; k < M; ++k) {
            double lo = v.y_grid.lower[std::size_t(k)], hi = v.y_grid.upper[std::size_t(k)];
            double half = 0.5 * core_fraction * (hi - lo);
            double mid = 0.5 * (lo + hi);
            if (y[std::size_t(k)] < mid - half - 1e-12 || y[std::size_t(k)] > mid + half + 1e-12)
                in = false;
        }
        if (in) core.push_back(j);
    }

    Field out = make_field(v.x_grid);
    std::size_t nx = v.x_grid.node_count();
    for (std::size_t i = 0; i < nx; ++i) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t j : core) {
            double val = slice.values[i * ny + j];
            lo = std::min(lo, val);
            hi = std::max(hi, val);
        }
        out.values[i] = core.empty() ? 0.0 : hi - lo;
    }
    return out;
}

}  // namespace slowfast
