#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "slowfast/effective.hpp"
#include "slowfast/hjb.hpp"
#include "slowfast/problem.hpp"

using namespace slowfast;

namespace {

std::size_t control_index(const ControlProblem& p, const Vec& a) {
    for (std::size_t i = 0; i < p.controls.size(); ++i) {
        double d = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) d += std::fabs(p.controls[i][k] - a[k]);
        if (d < 1e-12) return i;
    }
    throw std::runtime_error("control not in the sample set");
}

}  // namespace

TEST_CASE("zero horizon returns the terminal cost") {
    ControlProblem p = builtin_problem("quadcell");
    BoxGrid xg = make_box_grid({-1}, {1}, {11});
    BoxGrid yg = make_box_grid({-1}, {1}, {11});
    ValueFunction v = solve_value_function(p, 0.2, xg, yg, 0.0, 0.01);
    REQUIRE(v.slices.size() == 1);
    for (std::size_t i = 0; i < v.xy_grid.node_count(); ++i) {
        Vec n = v.xy_grid.node(i);
        CHECK(v.slices[0].values[i] == doctest::Approx(p.terminal_cost({n[0]}, {n[1]})));
    }
}

TEST_CASE("constant running cost, zero terminal cost gives V = c*t") {
    ControlProblem p = builtin_problem("quadcell");
    p.running_cost = [](const Vec&, const Vec&, const Vec&) { return 0.7; };
    p.terminal_cost = [](const Vec&, const Vec&) { return 0.0; };
    BoxGrid xg = make_box_grid({-1}, {1}, {9});
    BoxGrid yg = make_box_grid({-1}, {1}, {9});
    ValueFunction v = solve_value_function(p, 0.5, xg, yg, 0.4, 0.05);
    for (std::size_t k = 0; k < v.times.size(); ++k)
        for (double val : v.slices[k].values)
            CHECK(val == doctest::Approx(0.7 * v.times[k]).epsilon(1e-12));
}

TEST_CASE("quadcell value approximates the Hopf-Lax limit at eps = 0.2") {
    ControlProblem p = builtin_problem("quadcell");
    BoxGrid xg = make_box_grid({-2}, {2}, {81});
    BoxGrid yg = make_box_grid({-2}, {2}, {81});
    double dt = 0.2 * 0.05 * 0.8;  // CFL with margin
    ValueFunction v = solve_value_function(p, 0.2, xg, yg, 0.5, dt);
    double got = interpolate(v.slices.back(), {1.0, 0.0});
    double oracle = hopf_lax_oracle(1.0, 0.5, [](double z) { return z * z; }, 1.0);
    CHECK(oracle == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(std::fabs(got - oracle) <= 0.08);
}

TEST_CASE("CFL violation is rejected with the offending ratio") {
    ControlProblem p = builtin_problem("quadcell");
    BoxGrid xg = make_box_grid({-1}, {1}, {11});
    BoxGrid yg = make_box_grid({-1}, {1}, {11});
    CHECK_THROWS_WITH_AS(solve_value_function(p, 0.1, xg, yg, 0.5, 0.1),
                         doctest::Contains("CFL violation"), std::invalid_argument);
}

TEST_CASE("simulate_trajectory: frozen dynamics accumulate pure cost") {
    ControlProblem p = builtin_problem("quadcell");
    p.drift_slow = [](const Vec&, const Vec&, const Vec&) { return Vec{0.0}; };
    p.drift_fast = [](const Vec&, const Vec&, const Vec&) { return Vec{0.0}; };
    Trajectory tr = simulate_trajectory(p, 0.3, {0.5}, {1.0}, std::vector<int>(10, 0), 0.1);
    for (const Vec& s : tr.states) {
        CHECK(s[0] == doctest::Approx(0.5));
        CHECK(s[1] == doctest::Approx(1.0));
    }
    CHECK(tr.cost == doctest::Approx(0.3 * 1.0 * 1.0));  // eps * ell(y=1) * total time
}

TEST_CASE("simulate_trajectory: constant drift integrates exactly") {
    ControlProblem p = builtin_problem("quadcell");
    int a11 = int(control_index(p, {1.0, 1.0}));
    Trajectory tr = simulate_trajectory(p, 0.1, {0.0}, {0.0}, std::vector<int>(10, a11), 0.1);
    // xi' = eps * f = 0.1, over total time 1.0
    CHECK(tr.states.back()[0] == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(tr.states.back()[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("est1: slow variable moves at most eps * Q0 * t") {
    ControlProblem p = builtin_problem("quadcell");
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> pos(-1.0, 1.0);
    std::uniform_int_distribution<int> ctrl(0, int(p.controls.size()) - 1);
    for (int run = 0; run < 50; ++run) {
        std::vector<int> controls(40);
        for (int& c : controls) c = ctrl(rng);
        double eps = 0.05 + 0.3 * std::fabs(pos(rng));
        Trajectory tr = simulate_trajectory(p, eps, {pos(rng)}, {pos(rng)}, controls, 0.05);
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            double drift = std::fabs(tr.states[k][0] - tr.states[0][0]);
            CHECK(drift <= eps * p.bound_f * tr.times[k] + 1e-6);
        }
    }
}

TEST_CASE("steer_fast hits the target and hovers") {
    ControlProblem p = builtin_problem("quadcell");
    SUBCASE("already at the target") {
        Trajectory tr = steer_fast(p, 0.1, {0.0}, {0.5}, {0.5}, 1.0, 0.01, 0.05);
        CHECK(tr.miss <= 0.05 + 1e-9);
    }
    SUBCASE("cross the box in ample time") {
        Trajectory tr = steer_fast(p, 0.05, {0.0}, {1.0}, {-1.0}, 3.0, 0.01, 0.05);
        CHECK(tr.miss <= 5 * 0.05 + 2 * 0.05);
    }
    SUBCASE("insufficient budget fails loudly") {
        CHECK_THROWS_WITH_AS(steer_fast(p, 0.05, {0.0}, {1.0}, {-1.0}, 0.02, 0.005, 0.05),
                             doctest::Contains("steering failed"), std::runtime_error);
    }
}

TEST_CASE("y_oscillation is zero for y-independent slices") {
    ControlProblem p = builtin_problem("quadcell");
    p.running_cost = [](const Vec&, const Vec&, const Vec&) { return 0.0; };
    p.terminal_cost = [](const Vec& x, const Vec&) { return x[0] * x[0]; };
    p.drift_fast = [](const Vec&, const Vec&, const Vec&) { return Vec{0.0}; };
    BoxGrid xg = make_box_grid({-1}, {1}, {11});
    BoxGrid yg = make_box_grid({-1}, {1}, {11});
    ValueFunction v = solve_value_function(p, 0.2, xg, yg, 0.2, 0.02);
    Field osc = y_oscillation(v, v.times.size() - 1);
    for (double o : osc.values) CHECK(o == doctest::Approx(0.0));
}

TEST_CASE("y_oscillation at t=0 sees the u0 range over the core box") {
    ControlProblem p = builtin_problem("quadcell");
    BoxGrid xg = make_box_grid({-1}, {1}, {5});
    BoxGrid yg = make_box_grid({-2}, {2}, {81});
    ValueFunction v = solve_value_function(p, 0.2, xg, yg, 0.0, 0.01);
    Field osc = y_oscillation(v, 0);
    // core |y| <= 1: range of 1 - exp(-y^2) is 1 - exp(-1)
    for (double o : osc.values) CHECK(o == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("oscillation shrinks as eps shrinks") {
    ControlProblem p = builtin_problem("quadcell");
    BoxGrid xg = make_box_grid({-2}, {2}, {41});
    BoxGrid yg = make_box_grid({-2}, {2}, {41});
    double prev = 1e9;
    for (double eps : {0.4, 0.2, 0.1}) {
        double dt = 0.8 * eps * yg.spacing[0];
        ValueFunction v = solve_value_function(p, eps, xg, yg, 0.5, dt);
        Field osc = y_oscillation(v, v.times.size() - 1);
        double at0 = osc.values[20];  // x = 0
        CHECK(at0 < prev);
        prev = at0;
    }
}

TEST_CASE("monotone comparison: ordered data give ordered values, exactly") {
    ControlProblem a = builtin_problem("quadcell");
    ControlProblem b = a;
    b.terminal_cost = [](const Vec& x, const Vec& y) {
        return x[0] * x[0] + 1 - std::exp(-y[0] * y[0]) + 0.3 * (1.0 + std::sin(3.0 * x[0]));
    };
    BoxGrid xg = make_box_grid({-1}, {1}, {21});
    BoxGrid yg = make_box_grid({-1}, {1}, {21});
    double dt = 0.8 * 0.2 * yg.spacing[0];
    ValueFunction va = solve_value_function(a, 0.2, xg, yg, 0.2, dt);
    ValueFunction vb = solve_value_function(b, 0.2, xg, yg, 0.2, dt);
    REQUIRE(va.times.size() == vb.times.size());
    for (std::size_t k = 0; k < va.times.size(); ++k)
        for (std::size_t i = 0; i < va.slices[k].values.size(); ++i)
            CHECK(va.slices[k].values[i] <= vb.slices[k].values[i]);
}

TEST_CASE("slice lower bound P0*t - Q0 and y-coercivity shell") {
    ControlProblem p = builtin_problem("quadcell");
    BoxGrid xg = make_box_grid({-2}, {2}, {41});
    BoxGrid yg = make_box_grid({-2}, {2}, {41});
    double dt = 0.8 * 0.2 * yg.spacing[0];
    ValueFunction v = solve_value_function(p, 0.2, xg, yg, 0.5, dt);
    // P0 = min ell = 0 over the box, Q0 = 1
    for (std::size_t k = 0; k < v.times.size(); ++k)
        for (double val : v.slices[k].values) CHECK(val >= 0.0 * v.times[k] - 1.0 - 1e-12);

    // outer 10% shell in y dominates the core values at the final time
    std::size_t ny = yg.node_count();
    for (std::size_t xi = 0; xi < xg.node_count(); ++xi) {
        double core_max = -1e18, shell_min = 1e18;
        for (std::size_t yj = 0; yj < ny; ++yj) {
            double y = yg.node(yj)[0], val = v.slices.back().values[xi * ny + yj];
            if (std::fabs(y) <= 1.0) core_max = std::max(core_max, val);
            if (std::fabs(y) >= 1.8) shell_min = std::min(shell_min, val);
        }
        CHECK(shell_min > core_max);
    }
}
