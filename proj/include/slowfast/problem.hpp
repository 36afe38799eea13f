#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "slowfast/grid.hpp"

namespace slowfast {

using Vec = std::vector<double>;

// Slow/fast control problem: dynamics f (slow), g (fast), running cost ell,
// terminal cost u0, finite control sample set.
struct ControlProblem {
    std::string name;
    int dim_slow = 0;  // N
    int dim_fast = 0;  // M
    std::vector<Vec> controls;

    std::function<Vec(const Vec& x, const Vec& y, const Vec& a)> drift_slow;
    std::function<Vec(const Vec& x, const Vec& y, const Vec& a)> drift_fast;
    std::function<double(const Vec& x, const Vec& y, const Vec& a)> running_cost;
    std::function<double(const Vec& x, const Vec& y)> terminal_cost;

    double bound_f = 0.0;   // Q0, sup|f|; -Q0 also lower-bounds u0
    double lipschitz = 0.0; // L0
};

struct AssumptionReport {
    double q0_observed = 0.0;
    double lipschitz_observed = 0.0;
    std::vector<double> box_lower, box_upper;
    double controllability_radius = 0.0;
    // (|y|, min over sampled (x,a) of ell) along growing |y| shells
    std::vector<std::pair<double, double>> coercivity_profile;
    bool u0_lower_bound_ok = true;
    bool controllability_ok = true;
    bool hard_failure = false;
};

ControlProblem builtin_problem(const std::string& name, int samples_per_axis = 5);

// Config document (JSON): problem.name or problem.expressions + dims + control.
ControlProblem load_problem(const std::string& json_text);
ControlProblem load_problem_file(const std::string& path);
// Accepts a builtin name or a path to a JSON config.
ControlProblem resolve_problem(const std::string& name_or_path);

AssumptionReport check_assumptions(const ControlProblem& problem,
                                   const Vec& box_lower, const Vec& box_upper,
                                   int samples_per_axis);

// Discrete bar-u0: min over y-grid nodes of u0(x, y).
double bar_u0(const ControlProblem& problem, const Vec& x, const BoxGrid& y_grid);

// Largest r with B(0,r) inside the convex hull of the given points (dim <= 3).
double inscribed_radius(const std::vector<Vec>& points, int dim);

}  // namespace slowfast
