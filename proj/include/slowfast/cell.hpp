#pragma once

#include <cstddef>
#include <vector>

#include "slowfast/grid.hpp"
#include "slowfast/problem.hpp"

namespace slowfast {

// Cell data frozen at a slow point/momentum pair: ell0 = ell + p0.f and
// g0 = g, both evaluated at x0.
struct CellInstance {
    const ControlProblem* problem = nullptr;
    Vec x0, p0;

    double ell0(const Vec& y, std::size_t a) const;
    Vec g0(const Vec& y, std::size_t a) const;
};

CellInstance freeze(const ControlProblem& problem, const Vec& x0, const Vec& p0);

// H0(y,q) = max_a (-q.g0 - ell0), a finite max over the sampled controls.
double hamiltonian_h0(const CellInstance& cell, const Vec& y, const Vec& q);

// Pointwise feasibility floor min_q H0(y,q); Z_b(y) is nonempty iff b is at
// least this value.
double h0_floor(const CellInstance& cell, const Vec& y);

struct SigmaResult {
    enum class Status { Value, Infeasible, Unbounded } status;
    double value = 0.0;
};

// Support function of the sublevel set Z_b(y) = {q : H0(y,q) <= b} in
// direction v: max q.v over -q.g0(y,a) <= ell0(y,a) + b. Infeasible when
// Z_b(y) is empty, Unbounded when the sampled controls fail to surround
// the origin in g-space.
SigmaResult support_sigma(const CellInstance& cell, double b, const Vec& y, const Vec& v);

// Grid digraph whose b-parametric edge weights discretize the intrinsic
// length functional: w(y -> y', b) = sigma_b((y+y')/2, y'-y). Each node
// connects to its 3^M - 1 axis and diagonal neighbors. The constraint
// rows of every edge LP depend only on the midpoint, so reweighting at a
// new b reuses the cached rows.
struct MetricGraph {
    CellInstance cell;
    BoxGrid y_grid;

    struct Edge { std::size_t from, to; };
    std::vector<Edge> edges;
    std::vector<Vec> edge_disp;            // y(to) - y(from)
    std::vector<double> edge_normals;      // [e*C*M + a*M + k] = -g0(mid,a)[k]
    std::vector<double> edge_base;         // [e*C + a] = ell0(mid,a)
    std::vector<std::vector<std::size_t>> out;  // outgoing edge ids per node

    std::vector<double> weights;           // at current_b
    double current_b = 0.0;
};

enum class ReweightStatus { Ok, Infeasible, Unbounded };

// Recomputes all edge weights at level b. On Infeasible/Unbounded the
// weights array is not usable; bad_edges (optional) receives offenders.
ReweightStatus reweight_graph(MetricGraph& graph, double b,
                              std::vector<std::size_t>* bad_edges = nullptr);

// Builds the graph and weights at b; throws listing infeasible nodes when
// some Z_b is empty (this is how the bisection's feasibility floor shows up).
MetricGraph build_metric_graph(const CellInstance& cell, const BoxGrid& y_grid, double b);

struct CycleOutcome {
    enum class Kind { Infeasible, NegativeCycle, MinLoop } kind;
    double rho_min = 0.0;  // min over nodes of the loop defect (MinLoop only)
};

// Reweights at b, then detects negative cycles (Bellman-Ford from a virtual
// source); if none, computes the minimal loop defect via all-pairs
// distances (Johnson reweighting + per-source Dijkstra). Infeasible b counts
// as the no-subsolution side, same as a negative cycle.
CycleOutcome min_cycle_length(MetricGraph& graph, double b);

// All-pairs distances at the current weights, row-major n*n. Requires no
// negative cycle.
std::vector<double> all_pairs_distances(const MetricGraph& graph);

struct DistanceField {
    std::vector<std::size_t> source;
    Field values;  // +inf sentinel for unreachable nodes
    double b = 0.0;
};

// Multi-source shortest path at the graph's current weights; value(y) =
// min over the sources z of S_b(z, y). Throws on a negative cycle.
DistanceField distance_field(const MetricGraph& graph, const std::vector<std::size_t>& source);

struct CriticalResult {
    double c0 = 0.0;
    double bracket_lo = 0.0, bracket_hi = 0.0;
    std::vector<std::size_t> aubry_nodes;
    double gap_ratio = 0.0;   // separation between Aubry and non-Aubry defects
    Field loop_defect;        // rho(y) = min_{z != y} S(y,z) + S(z,y) at c0
    std::size_t y0 = 0;       // minimal-defect Aubry node
    Field distance_from_aubry;  // S_{c0}(y0, .)
    std::vector<double> apsp;   // S_{c0}(i,j) row-major, reused downstream
    BoxGrid y_grid;
};

// Bisection on b between the feasibility floor and the zero-subsolution
// upper seed max{0, max_y H0(y,0)}, locating the smallest b admitting a
// subsolution (no negative sigma_b-cycle). Aubry nodes are split off by the
// largest relative jump in the sorted loop defects, capped by the
// threshold 4*(tol + h).
CriticalResult critical_value(const CellInstance& cell, const BoxGrid& y_grid, double tol);

// Nodes of the compact core K0: the set C = {H0(y,0) >= c0 - Q0} fattened
// by the largest |S| over C x C (Euclidean fattening).
std::vector<char> core_set_k0(const CellInstance& cell, const CriticalResult& crit);

// Bounded critical subsolution: u(y) = min over z outside K0 of S(z,y),
// zero outside K0. Throws "enlarge y-box" when K0 swallows the grid.
Field bounded_subsolution(const CellInstance& cell, const CriticalResult& crit);

// Shortest-path distances S^h(y0, .) with edge weights scaled by the radial
// profile h: 1 on [0, R0-3], M0 on [R0-2, inf), linear between. Requires
// M0 >= 1, K0 inside B(0, R0-3), and H0(y,0) < c0 wherever the profile
// exceeds 1.
Field weighted_distance(const CellInstance& cell, const CriticalResult& crit,
                        double R0, double M0, std::size_t y0);

struct SupersolutionResult {
    Field w;
    double d = 0.0;   // positive offset, -min S(y0,.) + h
    double m0 = 1.0;  // outer plateau height of the weight profile
    bool lower_bound_ok = false;  // lambda*w >= U on B(0,R0)
    bool near_match_ok = false;   // w = d + S(y0,.) near y0
    bool positive_ok = false;     // w > 0 everywhere
    bool outer_ok = false;        // w >= m0 outside B(0,R0-1)
};

// Strict supersolution w = d + S^h(y0,.) dominating U/lambda; the four
// postconditions are checked nodewise and reported.
SupersolutionResult build_supersolution(const CellInstance& cell, const CriticalResult& crit,
                                        const Field& U, double lambda, double R0);

enum class ViscosityMode { Subsolution, Supersolution };

struct ViscosityReport {
    bool pass = true;
    double worst = 0.0;     // largest violation found (<= 0 when passing)
    std::size_t where = 0;  // node index of the worst violation
};

// Subsolution mode checks u(y') - u(y) <= w(y->y', b) + tol on every edge.
// Supersolution mode checks, at every interior node, that some one-sided
// difference combination D of u satisfies H0(y, D) >= b - tol.
ViscosityReport verify_viscosity(const Field& u, const CellInstance& cell, double b,
                                 ViscosityMode mode, double tol);

}  // namespace slowfast
