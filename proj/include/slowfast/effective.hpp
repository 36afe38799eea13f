#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "slowfast/grid.hpp"
#include "slowfast/problem.hpp"

namespace slowfast {

// Sampled effective Hamiltonian: values[i*np + j] = c0(x_i, p_j) with the
// per-entry bisection diagnostics. Failed entries stay NaN with a message.
struct EffectiveTable {
    BoxGrid x_grid, p_grid;
    std::vector<double> values;
    std::vector<double> bracket_width;
    std::vector<double> gap_ratio;
    std::vector<unsigned char> failed;
    std::vector<std::string> messages;

    std::size_t entry(std::size_t xi, std::size_t pj) const {
        return xi * p_grid.node_count() + pj;
    }
};

EffectiveTable tabulate_effective(const ControlProblem& problem, const BoxGrid& x_grid,
                                  const BoxGrid& p_grid, const BoxGrid& y_grid, double tol);

struct TableDiagnostics {
    double worst_convexity = 0.0;      // max midpoint-convexity violation in p
    std::size_t convexity_at = 0;      // entry index of the violating midpoint
    double worst_increment = 0.0;      // max nearest-neighbor jump in (x,p)
    std::size_t increment_at = 0;
    double max_bracket = 0.0;
};

TableDiagnostics table_diagnostics(const EffectiveTable& table);

// CSV round trip: columns x..., p..., c0, bracket, gap_ratio.
void write_table_csv(const EffectiveTable& table, const std::string& path);
EffectiveTable read_table_csv(const std::string& path, int dim_slow);

struct LimitSolution {
    BoxGrid x_grid;
    double horizon = 0.0;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<Field> slices;
    std::vector<double> dissipation;  // Lax-Friedrichs theta per axis

    double value(const Vec& x, double t) const;  // multilinear in x, linear in t
};

// Explicit Lax-Friedrichs for u_t + Hbar(x, Du) = 0 with u(.,0) = the
// discrete lower envelope of u0 over y_grid_for_u0. Hbar comes from
// multilinear interpolation of the table; gradients leaving the table's
// p-range are an error.
LimitSolution solve_limit(const ControlProblem& problem, const EffectiveTable& table,
                          const BoxGrid& x_grid, const BoxGrid& y_grid_for_u0,
                          double horizon, double dt);

// Brute-force Hopf-Lax value for Hbar(x,p) = radius_speed*|p|: min of u0bar
// over the interval reachable in time t (dense 1D scan).
double hopf_lax_oracle(double x, double t, const std::function<double(double)>& u0bar,
                       double radius_speed);

}  // namespace slowfast
