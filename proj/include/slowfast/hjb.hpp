#pragma once

#include <cstddef>
#include <vector>

#include "slowfast/grid.hpp"
#include "slowfast/problem.hpp"

namespace slowfast {

// Discrete value function of the two-scale problem. Slices live on the
// product grid (slow axes first, then fast axes); slice 0 is the terminal
// cost, which plays the role of the t=0 datum in the forward recursion.
struct ValueFunction {
    double eps = 0.0;
    BoxGrid x_grid, y_grid;
    BoxGrid xy_grid;  // product grid the slices are stored on
    double horizon = 0.0;
    double dt = 0.0;  // actual step after fitting an integer step count
    std::vector<double> times;
    std::vector<Field> slices;

    const Field& slice_at(double t) const;  // nearest stored slice
};

struct Trajectory {
    double eps = 0.0;
    std::vector<double> times;
    std::vector<Vec> states;  // concatenated (xi, eta), size N+M
    std::vector<int> controls;
    double cost = 0.0;
    double miss = 0.0;  // final distance to target (steering only)
};

// Semi-Lagrangian recursion u^{k+1} = min_a [dt*ell + u^k at the foot
// (x + dt f, y + (dt/eps) g)], u^0 = u0. Feet are clamped to the box.
// Ties in the control argmin break toward the lowest index.
ValueFunction solve_value_function(const ControlProblem& problem, double eps,
                                   const BoxGrid& x_grid, const BoxGrid& y_grid,
                                   double horizon, double dt,
                                   int output_stride = 1);

// Heun integration of xi' = eps f, eta' = g under a prescribed control
// index sequence; cost accumulates eps*ell*dt per step.
Trajectory simulate_trajectory(const ControlProblem& problem, double eps,
                               const Vec& x0, const Vec& y0,
                               const std::vector<int>& controls, double dt);

// Greedy closed-loop steering of the fast state toward z; hovers once within
// capture_radius_cells * h_y of the target. Throws if the final miss
// distance exceeds tol (default 5*eps + 2*h_y).
Trajectory steer_fast(const ControlProblem& problem, double eps, const Vec& x,
                      const Vec& y, const Vec& z, double budget, double dt,
                      double h_y, double tol = -1.0,
                      double capture_radius_cells = 1.0);

// Per slow node: max minus min of the slice over fast nodes inside the
// central core of the fast box (default the middle 50% per axis).
Field y_oscillation(const ValueFunction& v, std::size_t t_index,
                    double core_fraction = 0.5);

}  // namespace slowfast
