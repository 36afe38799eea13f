#include "slowfast/cell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "slowfast/lp.hpp"
#include "slowfast/parallel.hpp"

namespace slowfast {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-12;

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// support function of {q : normals[a].q <= base[a] + b} in direction v;
// normals/base flattened control-major.
SigmaResult sigma_from_rows(const double* normals, const double* base,
                            std::size_t n_ctrl, int M, double b, const Vec& v) {
    if (M == 1) {
        double qlo = -kInf, qhi = kInf;
        for (std::size_t a = 0; a < n_ctrl; ++a) {
            double g = normals[a];  // row is -g0, single column
            double r = base[a] + b;
            if (g > kFeasTol) qhi = std::min(qhi, r / g);
            else if (g < -kFeasTol) qlo = std::max(qlo, r / g);
            else if (r < -kFeasTol) return {SigmaResult::Status::Infeasible, 0.0};
        }
        if (qlo > qhi + kFeasTol) return {SigmaResult::Status::Infeasible, 0.0};
        if (qlo > qhi) qlo = qhi = 0.5 * (qlo + qhi);
        double val = 0.0;
        if (v[0] > 0.0) val = qhi * v[0];
        else if (v[0] < 0.0) val = qlo * v[0];
        if (!std::isfinite(val)) return {SigmaResult::Status::Unbounded, 0.0};
        return {SigmaResult::Status::Value, val};
    }
    std::vector<std::vector<double>> rows(n_ctrl, std::vector<double>(std::size_t(M)));
    std::vector<double> rhs(n_ctrl);
    for (std::size_t a = 0; a < n_ctrl; ++a) {
        for (int k = 0; k < M; ++k) rows[a][std::size_t(k)] = normals[a * std::size_t(M) + std::size_t(k)];
        rhs[a] = base[a] + b;
    }
    LpResult lp = lp_maximize(rows, rhs, v);
    switch (lp.status) {
        case LpResult::Status::Infeasible: return {SigmaResult::Status::Infeasible, 0.0};
        case LpResult::Status::Unbounded: return {SigmaResult::Status::Unbounded, 0.0};
        default: return {SigmaResult::Status::Value, lp.value};
    }
}

void constraint_rows(const CellInstance& cell, const Vec& y,
                     std::vector<double>& normals, std::vector<double>& base) {
    std::size_t n_ctrl = cell.problem->controls.size();
    int M = cell.problem->dim_fast;
    normals.resize(n_ctrl * std::size_t(M));
    base.resize(n_ctrl);
    for (std::size_t a = 0; a < n_ctrl; ++a) {
        Vec g = cell.g0(y, a);
        for (int k = 0; k < M; ++k) normals[a * std::size_t(M) + std::size_t(k)] = -g[std::size_t(k)];
        base[a] = cell.ell0(y, a);
    }
}

}  // namespace

double CellInstance::ell0(const Vec& y, std::size_t a) const {
    const Vec& ctrl = problem->controls[a];
    double v = problem->running_cost(x0, y, ctrl);
    Vec f = problem->drift_slow(x0, y, ctrl);
    return v + dot(p0, f);
}

Vec CellInstance::g0(const Vec& y, std::size_t a) const {
    return problem->drift_fast(x0, y, problem->controls[a]);
}

CellInstance freeze(const ControlProblem& problem, const Vec& x0, const Vec& p0) {
    if (int(x0.size()) != problem.dim_slow || int(p0.size()) != problem.dim_slow)
        throw std::invalid_argument("freeze: slow dimension mismatch");
    CellInstance c;
    c.problem = &problem;
    c.x0 = x0;
    c.p0 = p0;
    return c;
}

double hamiltonian_h0(const CellInstance& cell, const Vec& y, const Vec& q) {
    double best = -kInf;
    for (std::size_t a = 0; a < cell.problem->controls.size(); ++a) {
        double v = -dot(q, cell.g0(y, a)) - cell.ell0(y, a);
        best = std::max(best, v);
    }
    return best;
}

double h0_floor(const CellInstance& cell, const Vec& y) {
    // min_q max_a (-q.g0 - ell0) as an LP in (q, t): max -t subject to
    // -g0(y,a).q - t <= ell0(y,a)
    std::size_t n_ctrl = cell.problem->controls.size();
    int M = cell.problem->dim_fast;
    std::vector<std::vector<double>> rows(n_ctrl, std::vector<double>(std::size_t(M) + 1));
    std::vector<double> rhs(n_ctrl);
    for (std::size_t a = 0; a < n_ctrl; ++a) {
        Vec g = cell.g0(y, a);
        for (int k = 0; k < M; ++k) rows[a][std::size_t(k)] = -g[std::size_t(k)];
        rows[a][std::size_t(M)] = -1.0;
        rhs[a] = cell.ell0(y, a);
    }
    std::vector<double> obj(std::size_t(M) + 1, 0.0);
    obj[std::size_t(M)] = -1.0;
    LpResult lp = lp_maximize(rows, rhs, obj);
    if (lp.status == LpResult::Status::Unbounded) return -kInf;
    if (lp.status == LpResult::Status::Infeasible)
        throw std::runtime_error("h0_floor: epigraph LP infeasible (should not happen)");
    return -lp.value;  // optimum of max(-t) is -min(t)
}

SigmaResult support_sigma(const CellInstance& cell, double b, const Vec& y, const Vec& v) {
    std::vector<double> normals, base;
    constraint_rows(cell, y, normals, base);
    return sigma_from_rows(normals.data(), base.data(), cell.problem->controls.size(),
                           cell.problem->dim_fast, b, v);
}

ReweightStatus reweight_graph(MetricGraph& graph, double b,
                              std::vector<std::size_t>* bad_edges) {
    std::size_t ne = graph.edges.size();
    std::size_t n_ctrl = graph.cell.problem->controls.size();
    int M = graph.cell.problem->dim_fast;
    graph.weights.assign(ne, 0.0);
    std::vector<unsigned char> status(ne, 0);
    parallel_for(ne, [&](std::size_t e) {
        SigmaResult s = sigma_from_rows(&graph.edge_normals[e * n_ctrl * std::size_t(M)],
                                        &graph.edge_base[e * n_ctrl], n_ctrl, M, b,
                                        graph.edge_disp[e]);
        if (s.status == SigmaResult::Status::Value) graph.weights[e] = s.value;
        else status[e] = s.status == SigmaResult::Status::Infeasible ? 1 : 2;
    });
    graph.current_b = b;
    ReweightStatus out = ReweightStatus::Ok;
    for (std::size_t e = 0; e < ne; ++e) {
        if (status[e] == 0) continue;
        if (bad_edges) bad_edges->push_back(e);
        if (status[e] == 2) out = ReweightStatus::Unbounded;
        else if (out == ReweightStatus::Ok) out = ReweightStatus::Infeasible;
    }
    return out;
}

MetricGraph build_metric_graph(const CellInstance& cell, const BoxGrid& y_grid, double b) {
    if (y_grid.dim() != cell.problem->dim_fast)
        throw std::invalid_argument("build_metric_graph: fast dimension mismatch");
    MetricGraph g;
    g.cell = cell;
    g.y_grid = y_grid;
    int M = y_grid.dim();
    std::size_t n = y_grid.node_count();
    std::size_t n_ctrl = cell.problem->controls.size();

    // neighbor offsets {-1,0,1}^M \ {0}
    std::vector<std::vector<int>> offsets;
    std::vector<int> off(std::size_t(M), -1);
    for (;;) {
        if (std::any_of(off.begin(), off.end(), [](int v) { return v != 0; }))
            offsets.push_back(off);
        int d = 0;
        while (d < M && ++off[std::size_t(d)] == 2) off[std::size_t(d++)] = -1;
        if (d == M) break;
    }

    g.out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> multi = y_grid.multi_index(i);
        for (const auto& o : offsets) {
            std::vector<int> nb = multi;
            bool ok = true;
            for (int k = 0; k < M; ++k) {
                nb[std::size_t(k)] += o[std::size_t(k)];
                if (nb[std::size_t(k)] < 0 || nb[std::size_t(k)] >= y_grid.resolution[std::size_t(k)])
                    ok = false;
            }
            if (!ok) continue;
            g.out[i].push_back(g.edges.size());
            g.edges.push_back({i, y_grid.index(nb)});
        }
    }

    std::size_t ne = g.edges.size();
    g.edge_disp.resize(ne);
    g.edge_normals.resize(ne * n_ctrl * std::size_t(M));
    g.edge_base.resize(ne * n_ctrl);
    parallel_for(ne, [&](std::size_t e) {
        Vec from = y_grid.node(g.edges[e].from);
        Vec to = y_grid.node(g.edges[e].to);
        Vec mid(from.size()), disp(from.size());
        for (std::size_t k = 0; k < from.size(); ++k) {
            mid[k] = 0.5 * (from[k] + to[k]);
            disp[k] = to[k] - from[k];
        }
        g.edge_disp[e] = disp;
        for (std::size_t a = 0; a < n_ctrl; ++a) {
            Vec gv = cell.g0(mid, a);
            for (int k = 0; k < M; ++k)
                g.edge_normals[(e * n_ctrl + a) * std::size_t(M) + std::size_t(k)] = -gv[std::size_t(k)];
            g.edge_base[e * n_ctrl + a] = cell.ell0(mid, a);
        }
    });

    std::vector<std::size_t> bad;
    ReweightStatus st = reweight_graph(g, b, &bad);
    if (st != ReweightStatus::Ok) {
        std::ostringstream msg;
        if (st == ReweightStatus::Unbounded) {
            msg << "build_metric_graph: unbounded support function (sampled controls do "
                   "not surround the origin in g-space) near node "
                << g.edges[bad.front()].from;
        } else {
            msg << "build_metric_graph: empty Z_b at b=" << b << "; infeasible nodes:";
            std::vector<char> seen(n, 0);
            for (std::size_t e : bad) {
                std::size_t node = g.edges[e].from;
                if (!seen[node]) { seen[node] = 1; msg << ' ' << node; }
            }
        }
        throw std::runtime_error(msg.str());
    }
    return g;
}

namespace {

// Bellman-Ford with the given initial distances; returns false when a
// negative cycle is reachable.
bool bellman_ford(const MetricGraph& g, std::vector<double>& dist) {
    std::size_t n = g.y_grid.node_count();
    bool changed = true;
    for (std::size_t pass = 0; pass < n && changed; ++pass) {
        changed = false;
        for (std::size_t e = 0; e < g.edges.size(); ++e) {
            double du = dist[g.edges[e].from];
            if (du == kInf) continue;
            double cand = du + g.weights[e];
            if (cand < dist[g.edges[e].to] - 1e-12) {
                dist[g.edges[e].to] = cand;
                changed = true;
            }
        }
    }
    if (!changed) return true;
    // still relaxing after n passes: decide with one detection scan
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        double du = dist[g.edges[e].from];
        if (du != kInf && du + g.weights[e] < dist[g.edges[e].to] - 1e-12) return false;
    }
    return true;
}

// Dijkstra on nonnegative weights w (per edge), multi-source.
std::vector<double> dijkstra(const MetricGraph& g, const std::vector<double>& w,
                             const std::vector<std::size_t>& sources) {
    std::size_t n = g.y_grid.node_count();
    std::vector<double> dist(n, kInf);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    for (std::size_t s : sources) {
        dist[s] = 0.0;
        heap.push({0.0, s});
    }
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (std::size_t e : g.out[u]) {
            double cand = d + w[e];
            std::size_t v = g.edges[e].to;
            if (cand < dist[v]) {
                dist[v] = cand;
                heap.push({cand, v});
            }
        }
    }
    return dist;
}

bool has_negative_weight(const MetricGraph& g) {
    for (double w : g.weights)
        if (w < 0.0) return true;
    return false;
}

}  // namespace

std::vector<double> all_pairs_distances(const MetricGraph& g) {
    std::size_t n = g.y_grid.node_count();
    // Johnson potentials from a virtual source connected to every node
    std::vector<double> pot(n, 0.0);
    if (!bellman_ford(g, pot))
        throw std::runtime_error("all_pairs_distances: negative cycle");
    std::vector<double> w(g.edges.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e)
        w[e] = std::max(0.0, g.weights[e] + pot[g.edges[e].from] - pot[g.edges[e].to]);
    std::vector<double> d(n * n);
    parallel_for(n, [&](std::size_t s) {
        std::vector<double> row = dijkstra(g, w, {s});
        for (std::size_t j = 0; j < n; ++j)
            d[s * n + j] = row[j] == kInf ? kInf : row[j] - pot[s] + pot[j];
    });
    return d;
}

CycleOutcome min_cycle_length(MetricGraph& graph, double b) {
    ReweightStatus st = reweight_graph(graph, b);
    if (st == ReweightStatus::Unbounded)
        throw std::runtime_error("min_cycle_length: unbounded support function at b");
    if (st == ReweightStatus::Infeasible)
        return {CycleOutcome::Kind::Infeasible, 0.0};
    std::vector<double> dist(graph.y_grid.node_count(), 0.0);
    if (!bellman_ford(graph, dist))
        return {CycleOutcome::Kind::NegativeCycle, 0.0};
    std::vector<double> d = all_pairs_distances(graph);
    std::size_t n = graph.y_grid.node_count();
    double rho = kInf;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && d[i * n + j] != kInf && d[j * n + i] != kInf)
                rho = std::min(rho, d[i * n + j] + d[j * n + i]);
    return {CycleOutcome::Kind::MinLoop, rho};
}

DistanceField distance_field(const MetricGraph& graph, const std::vector<std::size_t>& source) {
    if (source.empty()) throw std::invalid_argument("distance_field: empty source set");
    DistanceField out;
    out.source = source;
    out.b = graph.current_b;
    out.values = make_field(graph.y_grid, kInf);
    if (has_negative_weight(graph)) {
        std::vector<double> dist(graph.y_grid.node_count(), kInf);
        for (std::size_t s : source) dist[s] = 0.0;
        if (!bellman_ford(graph, dist))
            throw std::runtime_error("distance_field: negative cycle");
        out.values.values = std::move(dist);
    } else {
        out.values.values = dijkstra(graph, graph.weights, source);
    }
    return out;
}

namespace {

bool has_subsolution(MetricGraph& g, double b) {
    ReweightStatus st = reweight_graph(g, b);
    if (st == ReweightStatus::Unbounded)
        throw std::runtime_error("critical_value: unbounded support function");
    if (st == ReweightStatus::Infeasible) return false;
    std::vector<double> dist(g.y_grid.node_count(), 0.0);
    return bellman_ford(g, dist);
}

}  // namespace

CriticalResult critical_value(const CellInstance& cell, const BoxGrid& y_grid, double tol) {
    if (tol <= 0.0) throw std::invalid_argument("critical_value: tol must be > 0");
    std::size_t n = y_grid.node_count();
    double h = y_grid.max_spacing();

    // upper seed: the zero function is a subsolution at max{0, max H0(y,0)}
    Vec zero_q(std::size_t(y_grid.dim()), 0.0);
    double upper = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        upper = std::max(upper, hamiltonian_h0(cell, y_grid.node(i), zero_q));

    MetricGraph graph = build_metric_graph(cell, y_grid, upper);

    // feasibility floor: largest pointwise min_q H0 over nodes and midpoints
    std::vector<double> floors(n + graph.edges.size());
    parallel_for(n, [&](std::size_t i) { floors[i] = h0_floor(cell, y_grid.node(i)); });
    parallel_for(graph.edges.size(), [&](std::size_t e) {
        Vec from = y_grid.node(graph.edges[e].from);
        Vec to = y_grid.node(graph.edges[e].to);
        Vec mid(from.size());
        for (std::size_t k = 0; k < from.size(); ++k) mid[k] = 0.5 * (from[k] + to[k]);
        floors[n + e] = h0_floor(cell, mid);
    });
    double floor = -kInf;
    for (double f : floors) floor = std::max(floor, f);
    if (!std::isfinite(floor)) floor = std::min(0.0, upper) - 1.0;

    double lo = floor, hi = std::max(upper, floor);
    // sharpen beyond the requested tol so the loop defects at c0 keep their
    // O(h^3) separation between Aubry and non-Aubry nodes
    double width = std::max(std::min(tol, h * h * h) / 4.0, 1e-13);

    if (has_subsolution(graph, lo)) {
        hi = lo;
    } else {
        for (int guard = 0; !has_subsolution(graph, hi); ++guard) {
            if (guard > 60) throw std::runtime_error("critical_value: no feasible upper bound");
            double step = std::max(1.0, hi - lo);
            lo = hi;
            hi += step;
        }
        while (hi - lo > width) {
            double mid = 0.5 * (lo + hi);
            if (has_subsolution(graph, mid)) hi = mid;
            else lo = mid;
        }
    }

    CriticalResult res;
    res.y_grid = y_grid;
    res.c0 = hi;
    res.bracket_lo = lo;
    res.bracket_hi = hi;

    if (reweight_graph(graph, res.c0) != ReweightStatus::Ok)
        throw std::runtime_error("critical_value: graph infeasible at c0");
    res.apsp = all_pairs_distances(graph);

    res.loop_defect = make_field(y_grid);
    for (std::size_t i = 0; i < n; ++i) {
        double rho = kInf;
        for (std::size_t j = 0; j < n; ++j)
            if (i != j)
                rho = std::min(rho, res.apsp[i * n + j] + res.apsp[j * n + i]);
        res.loop_defect.values[i] = rho;
    }

    // Aubry nodes: split the sorted defects at the largest relative jump,
    // capped by the coarse threshold 4*(tol + h)
    const double kappa = 4.0, delta = 1e-11;
    double cap = kappa * (tol + h);
    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = std::max(res.loop_defect.values[i], 0.0) + delta;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() > cap)
        throw std::runtime_error("Aubry detection inconclusive; refine grid");
    double best_ratio = 0.0;
    std::size_t split = n;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (sorted[k] > cap + delta) break;
        double ratio = sorted[k + 1] / sorted[k];
        if (ratio > best_ratio) { best_ratio = ratio; split = k; }
    }
    double threshold;
    if (split < n && best_ratio >= 2.0) {
        threshold = sorted[split];
        res.gap_ratio = best_ratio;
    } else {
        threshold = cap;  // flat defect plateau: keep the coarse threshold
        res.gap_ratio = n > 1 ? best_ratio : kInf;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (std::max(res.loop_defect.values[i], 0.0) + delta <= threshold * (1.0 + 1e-9))
            res.aubry_nodes.push_back(i);
    if (res.aubry_nodes.empty())
        throw std::runtime_error("Aubry detection inconclusive; refine grid");

    res.y0 = res.aubry_nodes.front();
    for (std::size_t i : res.aubry_nodes)
        if (res.loop_defect.values[i] < res.loop_defect.values[res.y0]) res.y0 = i;

    res.distance_from_aubry = make_field(y_grid);
    for (std::size_t j = 0; j < n; ++j)
        res.distance_from_aubry.values[j] = res.apsp[res.y0 * n + j];
    return res;
}

std::vector<char> core_set_k0(const CellInstance& cell, const CriticalResult& crit) {
    const BoxGrid& grid = crit.y_grid;
    std::size_t n = grid.node_count();
    double q0 = cell.problem->bound_f;
    Vec zero_q(std::size_t(grid.dim()), 0.0);

    std::vector<std::size_t> c_set;
    double best = -kInf;
    std::size_t best_node = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = hamiltonian_h0(cell, grid.node(i), zero_q);
        if (v >= crit.c0 - q0) c_set.push_back(i);
        if (v > best) { best = v; best_node = i; }
    }
    if (c_set.empty()) c_set.push_back(best_node);

    double max_s = 0.0;
    for (std::size_t i : c_set)
        for (std::size_t j : c_set)
            max_s = std::max(max_s, std::fabs(crit.apsp[i * n + j]));

    std::vector<char> k0(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        Vec y = grid.node(i);
        double dist = kInf;
        for (std::size_t j : c_set) {
            Vec z = grid.node(j);
            double d2 = 0.0;
            for (std::size_t k = 0; k < y.size(); ++k) d2 += (y[k] - z[k]) * (y[k] - z[k]);
            dist = std::min(dist, std::sqrt(d2));
        }
        k0[i] = dist <= max_s + 1e-12 ? 1 : 0;
    }
    return k0;
}

Field bounded_subsolution(const CellInstance& cell, const CriticalResult& crit) {
    const BoxGrid& grid = crit.y_grid;
    std::size_t n = grid.node_count();
    std::vector<char> k0 = core_set_k0(cell, crit);
    std::vector<std::size_t> outside;
    for (std::size_t i = 0; i < n; ++i)
        if (!k0[i]) outside.push_back(i);
    if (outside.empty())
        throw std::runtime_error("bounded_subsolution: K0 covers the grid; enlarge y-box");

    Field u = make_field(grid);
    for (std::size_t i = 0; i < n; ++i) {
        if (!k0[i]) continue;  // u vanishes outside K0
        double best = kInf;
        for (std::size_t z : outside) best = std::min(best, crit.apsp[z * n + i]);
        u.values[i] = best;
    }
    return u;
}

namespace {

double radial_profile(double r, double r0, double m0) {
    if (r <= r0 - 3.0) return 1.0;
    if (r >= r0 - 2.0) return m0;
    return 1.0 + (m0 - 1.0) * (r - (r0 - 3.0));
}

double norm2(const Vec& v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
}

}  // namespace

Field weighted_distance(const CellInstance& cell, const CriticalResult& crit,
                        double R0, double M0, std::size_t y0) {
    if (M0 < 1.0) throw std::invalid_argument("weighted_distance: M0 must be >= 1");
    const BoxGrid& grid = crit.y_grid;
    std::size_t n = grid.node_count();

    std::vector<char> k0 = core_set_k0(cell, crit);
    for (std::size_t i = 0; i < n; ++i)
        if (k0[i] && norm2(grid.node(i)) > R0 - 3.0)
            throw std::invalid_argument("weighted_distance: K0 not contained in B(0, R0-3)");

    // where the profile exceeds 1 the level must be strictly supercritical
    Vec zero_q(std::size_t(grid.dim()), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        Vec y = grid.node(i);
        if (radial_profile(norm2(y), R0, M0) > 1.0 + 1e-12 &&
            hamiltonian_h0(cell, y, zero_q) >= crit.c0) {
            std::ostringstream msg;
            msg << "weighted_distance: H0(y,0) >= c0 where the weight exceeds 1, node " << i;
            throw std::runtime_error(msg.str());
        }
    }

    MetricGraph graph = build_metric_graph(cell, grid, crit.c0);
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        Vec from = grid.node(graph.edges[e].from);
        Vec to = grid.node(graph.edges[e].to);
        Vec mid(from.size());
        for (std::size_t k = 0; k < from.size(); ++k) mid[k] = 0.5 * (from[k] + to[k]);
        graph.weights[e] *= radial_profile(norm2(mid), R0, M0);
    }
    DistanceField d = distance_field(graph, {y0});
    return d.values;
}

SupersolutionResult build_supersolution(const CellInstance& cell, const CriticalResult& crit,
                                        const Field& U, double lambda, double R0) {
    if (lambda <= 0.0) throw std::invalid_argument("build_supersolution: lambda must be > 0");
    const BoxGrid& grid = crit.y_grid;
    std::size_t n = grid.node_count();
    if (U.values.size() != n)
        throw std::invalid_argument("build_supersolution: U not on the cell grid");

    double sup_u = -kInf;
    for (std::size_t i = 0; i < n; ++i) {
        double r = norm2(grid.node(i));
        if (r <= R0 - 1.0 && U.values[i] > 1e-12)
            throw std::invalid_argument("build_supersolution: U must be <= 0 on B(0, R0-1)");
        if (r <= R0) {
            if (!std::isfinite(U.values[i]))
                throw std::invalid_argument("build_supersolution: U unbounded on B(0, R0)");
            sup_u = std::max(sup_u, U.values[i]);
        }
    }

    SupersolutionResult out;
    double h = grid.max_spacing();
    double min_s = kInf;
    for (std::size_t j = 0; j < n; ++j)
        min_s = std::min(min_s, crit.apsp[crit.y0 * n + j]);
    out.d = -min_s + h;
    out.m0 = std::max(sup_u / lambda, 1.0);

    Field sh = weighted_distance(cell, crit, R0, out.m0, crit.y0);
    out.w = make_field(grid);
    for (std::size_t i = 0; i < n; ++i) out.w.values[i] = out.d + sh.values[i];

    // postconditions
    out.lower_bound_ok = true;
    out.positive_ok = true;
    out.outer_ok = true;
    for (std::size_t i = 0; i < n; ++i) {
        double r = norm2(grid.node(i));
        if (r <= R0 && lambda * out.w.values[i] < U.values[i] - 1e-9) out.lower_bound_ok = false;
        if (!(out.w.values[i] > 0.0)) out.positive_ok = false;
        if (r > R0 - 1.0 && out.w.values[i] < out.m0 - 1e-9) out.outer_ok = false;
    }
    out.near_match_ok = true;
    std::vector<int> multi = grid.multi_index(crit.y0);
    std::vector<std::size_t> near = {crit.y0};
    for (int k = 0; k < grid.dim(); ++k) {
        for (int s : {-1, 1}) {
            std::vector<int> nb = multi;
            nb[std::size_t(k)] += s;
            if (nb[std::size_t(k)] >= 0 && nb[std::size_t(k)] < grid.resolution[std::size_t(k)])
                near.push_back(grid.index(nb));
        }
    }
    for (std::size_t i : near) {
        if (norm2(grid.node(i)) > R0 - 3.0) continue;
        if (std::fabs(out.w.values[i] - (out.d + crit.apsp[crit.y0 * n + i])) > 1e-9)
            out.near_match_ok = false;
    }
    return out;
}

ViscosityReport verify_viscosity(const Field& u, const CellInstance& cell, double b,
                                 ViscosityMode mode, double tol) {
    ViscosityReport rep;
    const BoxGrid& grid = u.grid;
    if (mode == ViscosityMode::Subsolution) {
        MetricGraph graph = build_metric_graph(cell, grid, b);
        double worst = -kInf;
        for (std::size_t e = 0; e < graph.edges.size(); ++e) {
            double viol = u.values[graph.edges[e].to] - u.values[graph.edges[e].from]
                          - graph.weights[e];
            if (viol > worst) {
                worst = viol;
                rep.where = graph.edges[e].from;
            }
        }
        rep.worst = worst;
        rep.pass = worst <= tol;
        return rep;
    }

    int M = grid.dim();
    std::size_t n = grid.node_count();
    double worst = -kInf;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> multi = grid.multi_index(i);
        bool interior = true;
        for (int k = 0; k < M; ++k)
            if (multi[std::size_t(k)] == 0 || multi[std::size_t(k)] == grid.resolution[std::size_t(k)] - 1)
                interior = false;
        if (!interior) continue;
        Vec y = grid.node(i);
        std::vector<double> fwd(static_cast<std::size_t>(M)), bwd(static_cast<std::size_t>(M));
        std::vector<int> probe = multi;
        for (int k = 0; k < M; ++k) {
            double h = grid.spacing[std::size_t(k)];
            probe[std::size_t(k)] = multi[std::size_t(k)] + 1;
            fwd[std::size_t(k)] = (u.values[grid.index(probe)] - u.values[i]) / h;
            probe[std::size_t(k)] = multi[std::size_t(k)] - 1;
            bwd[std::size_t(k)] = (u.values[i] - u.values[grid.index(probe)]) / h;
            probe[std::size_t(k)] = multi[std::size_t(k)];
        }
        double best = -kInf;
        Vec q(static_cast<std::size_t>(M));
        for (unsigned mask = 0; mask < (1u << unsigned(M)); ++mask) {
            for (int k = 0; k < M; ++k)
                q[std::size_t(k)] = (mask & (1u << unsigned(k))) ? fwd[std::size_t(k)] : bwd[std::size_t(k)];
            best = std::max(best, hamiltonian_h0(cell, y, q));
        }
        double viol = b - best;  // want H0 >= b - tol on some branch
        if (viol > worst) {
            worst = viol;
            rep.where = i;
        }
    }
    rep.worst = worst == -kInf ? 0.0 : worst;
    rep.pass = rep.worst <= tol;
    return rep;
}

}  // namespace slowfast
