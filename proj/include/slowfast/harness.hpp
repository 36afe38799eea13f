#pragma once

#include <string>
#include <vector>

#include "slowfast/effective.hpp"
#include "slowfast/grid.hpp"
#include "slowfast/hjb.hpp"
#include "slowfast/problem.hpp"

namespace slowfast {

struct ConvergenceOptions {
    double cell_tol = 1e-3;        // bisection tolerance for the table entries
    int table_x_nodes = 5;         // coarse x-resolution of the effective table
    double probe_x_fraction = 0.6; // central x-fraction of the probe set K
    double core_y_fraction = 0.5;  // central y-fraction (matches y_oscillation)
    double interior_threshold = 0.1;
    double oscillation_threshold = 0.1;
    double layer_threshold = 0.15;
    double cfl_safety = 0.8;       // fraction of the CFL limit actually used
};

struct ErrorEntry { double eps = 0.0, sup_err = 0.0; };
struct OscillationEntry { double eps = 0.0, t = 0.0, max_osc = 0.0; };

struct ConvergenceReport {
    std::string problem;
    BoxGrid x_grid, y_grid, p_grid;
    std::vector<double> eps_list;
    std::vector<ErrorEntry> interior_error;
    std::vector<OscillationEntry> oscillation;
    double t_layer = 0.0;
    bool layer_upper_ok = false;   // V^eps <= u0bar(x) + threshold inside the layer
    bool layer_lower_ok = false;   // V^eps >= lower envelope of u0bar - threshold
    double layer_upper_margin = 0.0;
    double layer_lower_margin = 0.0;
    bool informative_only = false; // single-eps run: no trend assertions
    bool pass = false;
    ConvergenceOptions options;    // thresholds echoed into the report

    std::string to_json() const;  // stable key order, machine readable
};

// Full pipeline: effective table -> limit solution -> per-eps value
// functions -> interior errors on the probe set, oscillation trends, and
// the initial-layer inequality checks with t_layer = 2 * eps_list.back().
ConvergenceReport run_convergence(const ControlProblem& problem,
                                  const std::vector<double>& eps_list,
                                  const BoxGrid& x_grid, const BoxGrid& y_grid,
                                  const BoxGrid& p_grid, double horizon, double t_min,
                                  const ConvergenceOptions& options = {});

// Max divided difference of the table per p-axis (the Lax-Friedrichs theta).
std::vector<double> table_dissipation(const EffectiveTable& table);

// Discrete lower envelope: nodewise min of f over the 3^N neighborhood.
Field lower_envelope(const Field& f);

}  // namespace slowfast
