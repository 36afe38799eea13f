#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "slowfast/cell.hpp"
#include "slowfast/problem.hpp"

using namespace slowfast;

namespace {

// planar rotation instance: g spans [-1,1]^2, ell = 1 - a.R(y) with
// R(y) = (-y2, y1). Z_b(y) = {q : |q - R(y)|_1 <= 1 + b}, so cycles winding
// against the rotation have genuinely negative sigma_b-length for b near -1.
ControlProblem rotation_problem() {
    ControlProblem p = builtin_problem("quadcell2d");
    p.name = "rotation";
    p.drift_slow = [](const Vec&, const Vec&, const Vec&) { return Vec{0.0}; };
    p.running_cost = [](const Vec&, const Vec& y, const Vec& a) {
        return 1.0 - (a[1] * (-y[1]) + a[2] * y[0]);
    };
    return p;
}

std::size_t node_at(const BoxGrid& g, double y) {
    for (std::size_t i = 0; i < g.node_count(); ++i)
        if (std::fabs(g.node(i)[0] - y) < 1e-9) return i;
    throw std::runtime_error("node not found");
}

}  // namespace

TEST_CASE("freeze composes ell0 = ell + p0.f") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance zero = freeze(p, {0.0}, {0.0});
    CellInstance one = freeze(p, {0.0}, {1.0});
    for (std::size_t a = 0; a < p.controls.size(); ++a) {
        CHECK(zero.ell0({1.5}, a) == doctest::Approx(2.25));
        CHECK(one.ell0({1.5}, a) == doctest::Approx(2.25 + p.controls[a][0]));
        CHECK(zero.g0({1.5}, a)[0] == doctest::Approx(p.controls[a][1]));
    }
}

TEST_CASE("hamiltonian_h0 closed forms") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance cell = freeze(p, {0.0}, {1.0});
    // H0(y,q) = |p0| + |q| - y^2 with vertex controls
    CHECK(hamiltonian_h0(cell, {0.5}, {2.0}) == doctest::Approx(2.75));
    CHECK(hamiltonian_h0(cell, {0.0}, {0.0}) == doctest::Approx(1.0));

    CellInstance c0cell = freeze(p, {0.0}, {0.0});
    for (double y : {-1.3, 0.0, 0.4}) {
        double minell = 1e18;
        for (std::size_t a = 0; a < p.controls.size(); ++a)
            minell = std::min(minell, c0cell.ell0({y}, a));
        CHECK(hamiltonian_h0(c0cell, {y}, {0.0}) == doctest::Approx(-minell));
    }
}

TEST_CASE("h0_floor is the pointwise min over q") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance cell = freeze(p, {0.0}, {0.0});
    CHECK(h0_floor(cell, {0.3}) == doctest::Approx(-0.09));
    CHECK(h0_floor(cell, {0.0}) == doctest::Approx(0.0));
    CellInstance one = freeze(p, {0.0}, {1.0});
    CHECK(h0_floor(one, {0.5}) == doctest::Approx(1.0 - 0.25));
}

TEST_CASE("support_sigma solves the sublevel support LP") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance one = freeze(p, {0.0}, {1.0});
    SigmaResult s = support_sigma(one, 1.5, {1.0}, {1.0});
    REQUIRE(s.status == SigmaResult::Status::Value);
    CHECK(s.value == doctest::Approx(1.5));  // Z = [-1.5, 1.5]

    SigmaResult at0 = support_sigma(one, 1.5, {1.0}, {0.0});
    REQUIRE(at0.status == SigmaResult::Status::Value);
    CHECK(at0.value == doctest::Approx(0.0));

    CellInstance zero = freeze(p, {0.0}, {0.0});
    CHECK(support_sigma(zero, -0.1, {0.0}, {1.0}).status == SigmaResult::Status::Infeasible);
}

TEST_CASE("sigma positive homogeneity and subadditivity") {
    ControlProblem p = builtin_problem("quadcell2d");
    CellInstance cell = freeze(p, {0.0}, {0.5});
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        Vec y = {u(rng), u(rng)}, v = {u(rng), u(rng)}, w = {u(rng), u(rng)};
        double b = 1.0 + std::fabs(u(rng));
        SigmaResult sv = support_sigma(cell, b, y, v);
        SigmaResult s2v = support_sigma(cell, b, y, {2 * v[0], 2 * v[1]});
        SigmaResult sw = support_sigma(cell, b, y, w);
        SigmaResult svw = support_sigma(cell, b, y, {v[0] + w[0], v[1] + w[1]});
        REQUIRE(sv.status == SigmaResult::Status::Value);
        CHECK(s2v.value == doctest::Approx(2 * sv.value).epsilon(1e-9));
        CHECK(svw.value <= sv.value + sw.value + 1e-9);
    }
}

TEST_CASE("metric graph edge weights use the midpoint rule") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance cell = freeze(p, {0.0}, {0.0});
    BoxGrid yg = make_box_grid({-2}, {2}, {161});
    double h = yg.spacing[0];
    MetricGraph g = build_metric_graph(cell, yg, 0.5);
    std::size_t center = node_at(yg, 0.0);
    bool found = false;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        if (g.edges[e].from != center || g.edges[e].to != center + 1) continue;
        found = true;
        CHECK(g.weights[e] == doctest::Approx((0.5 + h * h / 4) * h));
        // symmetric instance: the reverse edge has the same weight
        for (std::size_t r = 0; r < g.edges.size(); ++r)
            if (g.edges[r].from == center + 1 && g.edges[r].to == center)
                CHECK(g.weights[r] == doctest::Approx(g.weights[e]));
    }
    CHECK(found);
    for (double w : g.weights) CHECK(w > 0.0);

    CHECK_THROWS_WITH_AS(build_metric_graph(cell, yg, -0.5),
                         doctest::Contains("infeasible"), std::runtime_error);
}

TEST_CASE("min_cycle_length around the origin cell") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance cell = freeze(p, {0.0}, {0.0});
    BoxGrid yg = make_box_grid({-2}, {2}, {161});
    double h = yg.spacing[0];
    MetricGraph g = build_metric_graph(cell, yg, 1.0);

    CycleOutcome pos = min_cycle_length(g, 0.05);
    REQUIRE(pos.kind == CycleOutcome::Kind::MinLoop);
    CHECK(pos.rho_min == doctest::Approx(2 * 0.05 * h).epsilon(0.01));

    // below the feasibility floor: counts as the no-subsolution side
    CycleOutcome neg = min_cycle_length(g, -0.05);
    CHECK(neg.kind != CycleOutcome::Kind::MinLoop);
}

TEST_CASE("rotation field produces genuine negative cycles") {
    ControlProblem p = rotation_problem();
    CellInstance cell = freeze(p, {0.0}, {0.0});
    BoxGrid yg = make_box_grid({-1.5, -1.5}, {1.5, 1.5}, {13, 13});
    MetricGraph g = build_metric_graph(cell, yg, 2.0);

    CHECK(min_cycle_length(g, -0.9).kind == CycleOutcome::Kind::NegativeCycle);
    CHECK(min_cycle_length(g, 2.0).kind == CycleOutcome::Kind::MinLoop);

    // monotone b-ladder: no-subsolution outcomes first, then MinLoop, one switch
    int switches = 0;
    bool prev_minloop = false;
    for (int k = 0; k <= 20; ++k) {
        double b = -1.0 + 3.0 * k / 20.0;
        bool minloop = min_cycle_length(g, b).kind == CycleOutcome::Kind::MinLoop;
        if (minloop != prev_minloop) {
            ++switches;
            CHECK(minloop);  // may only switch toward MinLoop
        }
        prev_minloop = minloop;
    }
    CHECK(switches == 1);
}

TEST_CASE("critical_value on quadcell matches |p0| with a tight Aubry set") {
    ControlProblem p = builtin_problem("quadcell");
    BoxGrid yg = make_box_grid({-2}, {2}, {161});
    double h = yg.spacing[0];

    for (double p0 : {0.0, 1.0}) {
        CellInstance cell = freeze(p, {0.0}, {p0});
        CriticalResult crit = critical_value(cell, yg, 1e-3);
        CHECK(std::fabs(crit.c0 - p0) <= 1e-3);
        CHECK(crit.bracket_hi - crit.bracket_lo <= 1e-3);
        REQUIRE_FALSE(crit.aubry_nodes.empty());
        for (std::size_t i : crit.aubry_nodes)
            CHECK(std::fabs(yg.node(i)[0]) <= 2 * h + 1e-12);
        CHECK(crit.gap_ratio >= 3.0);
        for (double d : crit.loop_defect.values) CHECK(d >= -1e-9);
    }

    CellInstance cell = freeze(p, {0.0}, {0.0});
    CriticalResult crit = critical_value(cell, yg, 1e-3);
    double s06 = crit.distance_from_aubry.values[node_at(yg, 0.6)];
    CHECK(s06 == doctest::Approx(0.216 / 3).epsilon(0.05));  // |y|^3/3 up to O(h)
}

TEST_CASE("zero running cost makes every node Aubry at c0 = 0") {
    ControlProblem p = builtin_problem("quadcell");
    p.running_cost = [](const Vec&, const Vec&, const Vec&) { return 0.0; };
    CellInstance cell = freeze(p, {0.0}, {0.0});
    BoxGrid yg = make_box_grid({-1}, {1}, {21});
    CriticalResult crit = critical_value(cell, yg, 1e-3);
    CHECK(std::fabs(crit.c0) <= 1e-3);
    CHECK(crit.aubry_nodes.size() == yg.node_count());
}

TEST_CASE("c0 converges as the grid refines") {
    // shifted well: the floor -dist(0.3, sample points)^2 sharpens under refinement
    ControlProblem p = builtin_problem("quadcell");
    p.running_cost = [](const Vec&, const Vec& y, const Vec&) {
        return (y[0] - 0.3) * (y[0] - 0.3);
    };
    std::vector<double> c0s;
    for (int n : {43, 85, 169}) {
        CellInstance cell = freeze(p, {0.0}, {0.0});
        c0s.push_back(critical_value(cell, make_box_grid({-2}, {2}, {n}), 1e-3).c0);
    }
    CHECK(std::fabs(c0s[1] - c0s[0]) >= std::fabs(c0s[2] - c0s[1]));
    CHECK(std::fabs(c0s[2]) <= std::fabs(c0s[0]) + 1e-12);
}

TEST_CASE("distance_field matches the cubic oracle and metric axioms") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance cell = freeze(p, {0.0}, {0.0});
    BoxGrid yg = make_box_grid({-2}, {2}, {161});
    CriticalResult crit = critical_value(cell, yg, 1e-3);
    std::size_t n = yg.node_count();

    MetricGraph g = build_metric_graph(cell, yg, crit.c0);
    DistanceField from0 = distance_field(g, {node_at(yg, 0.0)});
    for (std::size_t i = 0; i < n; ++i) {
        double y = yg.node(i)[0];
        if (std::fabs(y) > 1.5) continue;
        CHECK(std::fabs(from0.values.values[i] - std::fabs(y * y * y) / 3.0) <= 5e-2);
    }
    // coercivity: outermost nodes are farther than core nodes
    CHECK(from0.values.values[0] > from0.values.values[node_at(yg, 0.5)]);
    CHECK(from0.values.values[n - 1] > from0.values.values[node_at(yg, 0.5)]);

    // source = all nodes gives the zero field (all weights >= 0 at c0)
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    DistanceField everywhere = distance_field(g, all);
    for (double v : everywhere.values.values) CHECK(v == doctest::Approx(0.0));

    // triangle inequality on 200 random triples, S(y,y) = 0 at b >= c0
    std::mt19937 rng(11);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int t = 0; t < 200; ++t) {
        std::size_t i = pick(rng), j = pick(rng), k = pick(rng);
        CHECK(crit.apsp[i * n + k] <= crit.apsp[i * n + j] + crit.apsp[j * n + k] + 1e-9);
    }
    for (std::size_t i : {std::size_t(0), n / 2, n - 1}) {
        DistanceField self = distance_field(g, {i});
        CHECK(self.values.values[i] == doctest::Approx(0.0));
    }
    MetricGraph above = build_metric_graph(cell, yg, crit.c0 + 0.3);
    DistanceField self = distance_field(above, {n / 2});
    CHECK(self.values.values[n / 2] == doctest::Approx(0.0));
}

TEST_CASE("two-sided coercivity of S along the outer shells") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance cell = freeze(p, {0.0}, {0.0});
    BoxGrid yg = make_box_grid({-2}, {2}, {81});
    CriticalResult crit = critical_value(cell, yg, 1e-3);
    std::size_t n = yg.node_count(), y0 = crit.y0;
    for (int shell = 3; shell >= 1; --shell) {
        std::size_t outer = n - std::size_t(shell), inner = outer - 1;
        CHECK(crit.apsp[y0 * n + outer] > crit.apsp[y0 * n + inner]);
        CHECK(crit.apsp[outer * n + y0] > crit.apsp[inner * n + y0]);
        std::size_t louter = std::size_t(shell - 1), linner = louter + 1;
        CHECK(crit.apsp[y0 * n + louter] > crit.apsp[y0 * n + linner]);
        CHECK(crit.apsp[louter * n + y0] > crit.apsp[linner * n + y0]);
    }
}

TEST_CASE("bounded subsolution vanishes outside K0 and certifies") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance cell = freeze(p, {0.0}, {0.0});
    BoxGrid yg = make_box_grid({-6}, {6}, {241});
    double h = yg.spacing[0];
    CriticalResult crit = critical_value(cell, yg, 1e-3);

    std::vector<char> k0 = core_set_k0(cell, crit);
    // K0 for this instance is close to [-5/3, 5/3]
    for (std::size_t i = 0; i < yg.node_count(); ++i) {
        double y = yg.node(i)[0];
        if (std::fabs(y) < 1.4) CHECK(k0[i]);
        if (std::fabs(y) > 2.0) CHECK_FALSE(k0[i]);
    }

    Field u = bounded_subsolution(cell, crit);
    for (std::size_t i = 0; i < yg.node_count(); ++i)
        if (!k0[i]) CHECK(u.values[i] == doctest::Approx(0.0));
    double bound = 0.0;
    for (double v : u.values) bound = std::max(bound, std::fabs(v));
    CHECK(bound <= 2.0 * std::pow(5.0 / 3.0 + 0.1, 3) / 3.0);

    ViscosityReport rep = verify_viscosity(u, cell, crit.c0, ViscosityMode::Subsolution, 10 * h);
    CHECK(rep.pass);

    // sigma lower bound outside K0: outgoing edge weights at least |dy| - tol
    MetricGraph g = build_metric_graph(cell, yg, crit.c0);
    for (std::size_t e = 0; e < g.edges.size(); ++e)
        if (!k0[g.edges[e].from] && !k0[g.edges[e].to])
            CHECK(g.weights[e] >= std::fabs(g.edge_disp[e][0]) - 1e-9);

    // too small a box: K0 swallows the grid
    BoxGrid tiny = make_box_grid({-1}, {1}, {41});
    CriticalResult tiny_crit = critical_value(cell, tiny, 1e-3);
    CHECK_THROWS_WITH_AS(bounded_subsolution(cell, tiny_crit),
                         doctest::Contains("enlarge"), std::runtime_error);
}

TEST_CASE("weighted_distance reduces to S at M0 = 1 and dominates it") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance cell = freeze(p, {0.0}, {0.0});
    BoxGrid yg = make_box_grid({-6}, {6}, {241});
    CriticalResult crit = critical_value(cell, yg, 1e-3);

    Field flat = weighted_distance(cell, crit, 5.0, 1.0, crit.y0);
    Field heavy = weighted_distance(cell, crit, 5.0, 2.0, crit.y0);
    for (std::size_t i = 0; i < yg.node_count(); ++i) {
        CHECK(flat.values[i] == doctest::Approx(crit.distance_from_aubry.values[i]));
        CHECK(heavy.values[i] >= flat.values[i] - 1e-12);
        // paths staying inside B(0, R0-3) are not reweighted
        if (std::fabs(yg.node(i)[0]) <= 1.5)
            CHECK(heavy.values[i] == doctest::Approx(flat.values[i]));
    }
    CHECK_THROWS(weighted_distance(cell, crit, 5.0, 0.5, crit.y0));  // M0 < 1
}

TEST_CASE("build_supersolution postconditions and certificate") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance cell = freeze(p, {0.0}, {0.0});
    BoxGrid yg = make_box_grid({-6}, {6}, {241});
    double h = yg.spacing[0];
    CriticalResult crit = critical_value(cell, yg, 1e-3);

    SUBCASE("U = 0") {
        Field U = make_field(yg, 0.0);
        SupersolutionResult r = build_supersolution(cell, crit, U, 1.0, 5.0);
        CHECK(r.lower_bound_ok);
        CHECK(r.near_match_ok);
        CHECK(r.positive_ok);
        CHECK(r.outer_ok);
        CHECK(r.m0 == doctest::Approx(1.0));
        for (double w : r.w.values) CHECK(w > 0.0);
    }
    SUBCASE("bump of height 2 on the outer shell") {
        Field U = make_field(yg, 0.0);
        for (std::size_t i = 0; i < yg.node_count(); ++i) {
            double ay = std::fabs(yg.node(i)[0]);
            if (ay > 4.0 && ay < 5.0) U.values[i] = 2.0;
        }
        SupersolutionResult r = build_supersolution(cell, crit, U, 1.0, 5.0);
        CHECK(r.m0 == doctest::Approx(2.0));
        CHECK(r.lower_bound_ok);
        CHECK(r.near_match_ok);
        CHECK(r.positive_ok);
        CHECK(r.outer_ok);
        for (std::size_t i = 0; i < yg.node_count(); ++i)
            CHECK(1.0 * r.w.values[i] >= U.values[i] - 1e-9);

        ViscosityReport rep =
            verify_viscosity(r.w, cell, crit.c0, ViscosityMode::Supersolution, 10 * h);
        CHECK(rep.pass);
    }
    SUBCASE("U positive inside B(0, R0-1) is rejected") {
        Field U = make_field(yg, 0.5);
        CHECK_THROWS(build_supersolution(cell, crit, U, 1.0, 5.0));
    }
}

TEST_CASE("verify_viscosity oracle fields") {
    ControlProblem p = builtin_problem("quadcell");
    CellInstance cell = freeze(p, {0.0}, {0.0});
    BoxGrid yg = make_box_grid({-2}, {2}, {161});
    double h = yg.spacing[0];

    Field zero = make_field(yg, 0.0);
    CHECK(verify_viscosity(zero, cell, 0.0, ViscosityMode::Subsolution, 1e-9).pass);

    Field cubic = make_field(yg);
    for (std::size_t i = 0; i < yg.node_count(); ++i) {
        double y = yg.node(i)[0];
        cubic.values[i] = std::fabs(y * y * y) / 3.0;
    }
    CHECK(verify_viscosity(cubic, cell, 0.0, ViscosityMode::Subsolution, h).pass);
    CHECK(verify_viscosity(cubic, cell, 0.0, ViscosityMode::Supersolution, h).pass);

    Field steep = make_field(yg);
    for (std::size_t i = 0; i < yg.node_count(); ++i) steep.values[i] = 10.0 * yg.node(i)[0];
    ViscosityReport rep = verify_viscosity(steep, cell, 0.0, ViscosityMode::Subsolution, h);
    CHECK_FALSE(rep.pass);
    CHECK(rep.worst > 5.0 * h);  // per-edge excess, roughly 10h above the tiny weight
}
