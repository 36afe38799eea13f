#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "slowfast/problem.hpp"

using namespace slowfast;

TEST_CASE("builtin quadcell closed forms") {
    ControlProblem p = builtin_problem("quadcell");
    CHECK(p.dim_slow == 1);
    CHECK(p.dim_fast == 1);
    CHECK(p.controls.size() == 25);  // 5 samples per axis, 2 axes
    for (const Vec& a : p.controls) {
        CHECK(std::fabs(a[0]) <= 1.0 + 1e-12);
        CHECK(std::fabs(a[1]) <= 1.0 + 1e-12);
    }
    CHECK(p.running_cost({0.3}, {2.0}, {1.0, -1.0}) == doctest::Approx(4.0));
    CHECK(p.terminal_cost({0.0}, {0.0}) == doctest::Approx(0.0));
    CHECK(p.drift_slow({0.0}, {0.0}, {0.7, -0.2})[0] == doctest::Approx(0.7));
    CHECK(p.drift_fast({0.0}, {0.0}, {0.7, -0.2})[0] == doctest::Approx(-0.2));
    CHECK(builtin_problem("quadcell2d").dim_fast == 2);
    CHECK_THROWS_WITH_AS(builtin_problem("nosuch"), doctest::Contains("unknown name"),
                         std::invalid_argument);
}

TEST_CASE("control lattice includes the vertices") {
    ControlProblem p = builtin_problem("quadcell");
    int corners = 0;
    for (const Vec& a : p.controls)
        if (std::fabs(std::fabs(a[0]) - 1.0) < 1e-12 && std::fabs(std::fabs(a[1]) - 1.0) < 1e-12)
            ++corners;
    CHECK(corners == 4);
}

TEST_CASE("load_problem: builtin pass-through and expression configs") {
    ControlProblem byname = load_problem(R"json({"problem": {"name": "quadcell"}})json");
    CHECK(byname.name == "quadcell");
    CHECK(byname.controls.size() == 25);
    CHECK(byname.running_cost({0.3}, {2.0}, {1.0, -1.0}) == doctest::Approx(4.0));

    // quadcell written out as expressions
    ControlProblem expr = load_problem(R"json({
        "problem": {
            "expressions": {"f": ["a1"], "g": ["a2"], "ell": "y1^2",
                            "u0": "x1^2 + 1 - exp(-y1^2)"},
            "dims": {"N": 1, "M": 1},
            "control": {"bounds": [[-1, 1], [-1, 1]], "samples_per_axis": 5}
        }})json");
    CHECK(expr.dim_slow == 1);
    CHECK(expr.controls.size() == 25);
    CHECK(expr.running_cost({0.3}, {2.0}, {1.0, -1.0}) == doctest::Approx(4.0));
    CHECK(expr.terminal_cost({0.5}, {0.0}) == doctest::Approx(0.25));

    CHECK_THROWS_WITH_AS(load_problem(R"json({
        "problem": {
            "expressions": {"f": ["a1"], "g": ["a2"], "ell": "y1^2", "u0": "0"},
            "dims": {"N": 1, "M": 1},
            "control": {"bounds": [[-1, 1], [-1, 1]], "samples_per_axis": 0}
        }})json"), doctest::Contains("empty control set"), std::invalid_argument);

    CHECK_THROWS(load_problem("not json at all"));
}

TEST_CASE("bar_u0 equals x^2 for quadcell when 0 is a grid node") {
    ControlProblem p = builtin_problem("quadcell");
    BoxGrid yg = make_box_grid({-2}, {2}, {81});
    CHECK(bar_u0(p, {0.5}, yg) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(bar_u0(p, {0.0}, yg) == doctest::Approx(0.0).epsilon(1e-9));

    ControlProblem constant = p;
    constant.terminal_cost = [](const Vec&, const Vec&) { return 3.0; };
    CHECK(bar_u0(constant, {0.7}, yg) == doctest::Approx(3.0));
}

TEST_CASE("check_assumptions on quadcell") {
    ControlProblem p = builtin_problem("quadcell");
    AssumptionReport rep = check_assumptions(p, {-1, -2}, {1, 2}, 9);
    CHECK(rep.q0_observed == doctest::Approx(1.0));
    CHECK(rep.controllability_radius == doctest::Approx(1.0));
    CHECK(rep.controllability_ok);
    CHECK(rep.u0_lower_bound_ok);
    CHECK_FALSE(rep.hard_failure);
    // coercivity profile strictly increasing for |y| >= 1
    REQUIRE(rep.coercivity_profile.size() >= 2);
    for (std::size_t i = 1; i < rep.coercivity_profile.size(); ++i) {
        if (rep.coercivity_profile[i - 1].first < 1.0) continue;
        CHECK(rep.coercivity_profile[i].second > rep.coercivity_profile[i - 1].second);
    }
}

TEST_CASE("g = 0 is a controllability hard failure") {
    ControlProblem p = builtin_problem("quadcell");
    p.drift_fast = [](const Vec&, const Vec&, const Vec&) { return Vec{0.0}; };
    AssumptionReport rep = check_assumptions(p, {-1, -1}, {1, 1}, 5);
    CHECK(rep.controllability_radius == doctest::Approx(0.0));
    CHECK_FALSE(rep.controllability_ok);
    CHECK(rep.hard_failure);
}

TEST_CASE("refining the control sampling never shrinks the radius") {
    double prev = 0.0;
    for (int samples : {2, 3, 5, 9}) {
        ControlProblem p = builtin_problem("quadcell", samples);
        AssumptionReport rep = check_assumptions(p, {-1, -1}, {1, 1}, 5);
        CHECK(rep.controllability_radius >= prev - 1e-12);
        prev = rep.controllability_radius;
    }
}

TEST_CASE("inscribed_radius in 1, 2, and 3 dimensions") {
    CHECK(inscribed_radius({{-1.0}, {0.5}}, 1) == doctest::Approx(0.5));
    CHECK(inscribed_radius({{1.0}, {2.0}}, 1) == doctest::Approx(0.0));  // 0 outside hull
    // unit square
    CHECK(inscribed_radius({{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}, 2) == doctest::Approx(1.0));
    // diamond: distance from origin to edge is 1/sqrt(2)
    CHECK(inscribed_radius({{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, 2) ==
          doctest::Approx(std::sqrt(0.5)));
    // unit cube
    std::vector<Vec> cube;
    for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0})
            for (double sz : {-1.0, 1.0}) cube.push_back({sx, sy, sz});
    CHECK(inscribed_radius(cube, 3) == doctest::Approx(1.0));
}

TEST_CASE("resolve_problem accepts builtin names") {
    CHECK(resolve_problem("quadcell").name == "quadcell");
    CHECK(resolve_problem("quadcell2d").name == "quadcell2d");
    CHECK_THROWS(resolve_problem("/no/such/file.json"));
}
