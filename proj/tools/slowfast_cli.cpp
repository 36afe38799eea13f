// slowfast: command-line front end for the slow/fast HJB toolkit.
//
// Subcommands: audit, cell, effective, solve-eps, solve-limit, converge,
// verify. Exit codes: 0 success, 1 numerical-criterion failure, 2 usage or
// configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "slowfast/cell.hpp"
#include "slowfast/effective.hpp"
#include "slowfast/harness.hpp"
#include "slowfast/hjb.hpp"
#include "slowfast/problem.hpp"

namespace {

using namespace slowfast;
using nlohmann::json;

// grid spec: "lo,hi,n" per axis, axes joined with ';'
BoxGrid parse_grid(const std::string& spec) {
    std::vector<double> lo, hi;
    std::vector<int> res;
    std::stringstream axes(spec);
    std::string axis;
    while (std::getline(axes, axis, ';')) {
        double a, b;
        int n;
        char c1, c2;
        std::stringstream ss(axis);
        if (!(ss >> a >> c1 >> b >> c2 >> n) || c1 != ',' || c2 != ',')
            throw std::invalid_argument("bad grid spec '" + spec + "', expected lo,hi,n[;...]");
        lo.push_back(a);
        hi.push_back(b);
        res.push_back(n);
    }
    return make_box_grid(lo, hi, res);
}

Vec parse_vec(const std::string& spec) {
    Vec out;
    std::stringstream ss(spec);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

std::vector<double> parse_list(const std::string& spec) { return parse_vec(spec); }

void write_value_csv(const ValueFunction& v, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    char buf[40];
    auto put = [&](double x, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << buf << sep;
    };
    std::size_t n = v.xy_grid.node_count();
    for (std::size_t k = 0; k < v.times.size(); ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            for (double c : v.xy_grid.node(i)) put(c, ',');
            put(v.times[k], ',');
            put(v.slices[k].values[i], '\n');
        }
    }
}

void write_limit_csv(const LimitSolution& sol, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    char buf[40];
    auto put = [&](double x, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << buf << sep;
    };
    std::size_t n = sol.x_grid.node_count();
    for (std::size_t k = 0; k < sol.times.size(); ++k)
        for (std::size_t i = 0; i < n; ++i) {
            for (double c : sol.x_grid.node(i)) put(c, ',');
            put(sol.times[k], ',');
            put(sol.slices[k].values[i], '\n');
        }
}

int run(int argc, char** argv) {
    CLI::App app{"slow/fast Hamilton-Jacobi-Bellman toolkit"};
    app.require_subcommand(1);

    std::string problem_spec, out_path = "out.csv", out_dir = ".";
    std::string xgrid_spec, ygrid_spec, pgrid_spec, table_path, field_path, mode = "subsolution";
    std::string x0_spec = "0", p0_spec = "0", eps_spec = "0.1", box_spec;
    double eps = 0.1, horizon = 0.5, dt = 0.0, tol = 1e-3, t_min = 0.2, b_level = 0.0;
    int samples = 9;

    auto* audit = app.add_subcommand("audit", "check the standing assumptions by sampling");
    audit->add_option("--problem", problem_spec)->required();
    audit->add_option("--box", box_spec, "sampling box lo,hi,n per (x,y) axis, ';'-joined")->required();
    audit->add_option("--samples", samples);
    audit->add_option("--out", out_path);

    auto* cellc = app.add_subcommand("cell", "critical value / Aubry set of one frozen cell");
    cellc->add_option("--problem", problem_spec)->required();
    cellc->add_option("--x0", x0_spec);
    cellc->add_option("--p0", p0_spec);
    cellc->add_option("--ygrid", ygrid_spec)->required();
    cellc->add_option("--tol", tol);
    cellc->add_option("--out", out_path);

    auto* eff = app.add_subcommand("effective", "tabulate the effective Hamiltonian");
    eff->add_option("--problem", problem_spec)->required();
    eff->add_option("--xgrid", xgrid_spec)->required();
    eff->add_option("--pgrid", pgrid_spec)->required();
    eff->add_option("--ygrid", ygrid_spec)->required();
    eff->add_option("--tol", tol);
    eff->add_option("--out", out_path);

    auto* seps = app.add_subcommand("solve-eps", "semi-Lagrangian value function at one eps");
    seps->add_option("--problem", problem_spec)->required();
    seps->add_option("--eps", eps)->required();
    seps->add_option("--T", horizon)->required();
    seps->add_option("--xgrid", xgrid_spec)->required();
    seps->add_option("--ygrid", ygrid_spec)->required();
    seps->add_option("--dt", dt)->required();
    seps->add_option("--out", out_path);

    auto* slim = app.add_subcommand("solve-limit", "Lax-Friedrichs limit equation from a table");
    slim->add_option("--table", table_path)->required();
    slim->add_option("--problem", problem_spec)->required();
    slim->add_option("--xgrid", xgrid_spec)->required();
    slim->add_option("--ygrid", ygrid_spec, "y-grid for the initial envelope")->required();
    slim->add_option("--T", horizon)->required();
    slim->add_option("--dt", dt)->required();
    slim->add_option("--out", out_path);

    auto* conv = app.add_subcommand("converge", "full convergence ladder vs the limit solution");
    conv->add_option("--problem", problem_spec)->required();
    conv->add_option("--eps", eps_spec, "decreasing comma list")->required();
    conv->add_option("--xgrid", xgrid_spec)->required();
    conv->add_option("--ygrid", ygrid_spec)->required();
    conv->add_option("--pgrid", pgrid_spec)->required();
    conv->add_option("--T", horizon);
    conv->add_option("--tmin", t_min);
    conv->add_option("--tol", tol);
    conv->add_option("--out-dir", out_dir);

    auto* ver = app.add_subcommand("verify", "viscosity sub/supersolution certificate check");
    ver->add_option("--field", field_path)->required();
    ver->add_option("--problem", problem_spec)->required();
    ver->add_option("--x0", x0_spec);
    ver->add_option("--p0", p0_spec);
    ver->add_option("--b", b_level)->required();
    ver->add_option("--mode", mode)->check(CLI::IsMember({"subsolution", "supersolution"}));
    ver->add_option("--tol", tol);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_name() == "CallForHelp" ? 0 : 2;
    }

    ControlProblem problem;
    if (!problem_spec.empty()) problem = resolve_problem(problem_spec);

    if (audit->parsed()) {
        BoxGrid box = parse_grid(box_spec);
        AssumptionReport rep = check_assumptions(problem, box.lower, box.upper, samples);
        json j;
        j["q0_observed"] = rep.q0_observed;
        j["lipschitz_observed"] = rep.lipschitz_observed;
        j["controllability_radius"] = rep.controllability_radius;
        j["controllability_ok"] = rep.controllability_ok;
        j["u0_lower_bound_ok"] = rep.u0_lower_bound_ok;
        j["hard_failure"] = rep.hard_failure;
        json prof = json::array();
        for (auto& [r, v] : rep.coercivity_profile) prof.push_back({{"y_norm", r}, {"min_ell", v}});
        j["coercivity_profile"] = prof;
        std::ofstream(out_path) << j.dump(2) << "\n";
        std::cout << (rep.hard_failure ? "audit: FAIL" : "audit: ok") << "\n";
        return rep.hard_failure ? 1 : 0;
    }

    if (cellc->parsed()) {
        CellInstance cell = freeze(problem, parse_vec(x0_spec), parse_vec(p0_spec));
        CriticalResult crit = critical_value(cell, parse_grid(ygrid_spec), tol);
        std::filesystem::path base(out_path);
        std::string defect_csv = (base.parent_path() / (base.stem().string() + "_loop_defect.csv")).string();
        std::string dist_csv = (base.parent_path() / (base.stem().string() + "_distance.csv")).string();
        write_field_csv(crit.loop_defect, defect_csv);
        write_field_csv(crit.distance_from_aubry, dist_csv);
        json j;
        j["c0"] = crit.c0;
        j["bracket"] = {crit.bracket_lo, crit.bracket_hi};
        j["aubry_nodes"] = crit.aubry_nodes;
        j["gap_ratio"] = crit.gap_ratio;
        j["loop_defect_csv_path"] = defect_csv;
        j["distance_csv_path"] = dist_csv;
        std::ofstream(out_path) << j.dump(2) << "\n";
        std::cout << "c0 = " << crit.c0 << "\n";
        return 0;
    }

    if (eff->parsed()) {
        EffectiveTable table = tabulate_effective(problem, parse_grid(xgrid_spec),
                                                  parse_grid(pgrid_spec), parse_grid(ygrid_spec), tol);
        write_table_csv(table, out_path);
        for (unsigned char f : table.failed)
            if (f) { std::cerr << "effective: some entries failed\n"; return 1; }
        return 0;
    }

    if (seps->parsed()) {
        ValueFunction v = solve_value_function(problem, eps, parse_grid(xgrid_spec),
                                               parse_grid(ygrid_spec), horizon, dt);
        write_value_csv(v, out_path);
        return 0;
    }

    if (slim->parsed()) {
        EffectiveTable table = read_table_csv(table_path, problem.dim_slow);
        LimitSolution sol = solve_limit(problem, table, parse_grid(xgrid_spec),
                                        parse_grid(ygrid_spec), horizon, dt);
        write_limit_csv(sol, out_path);
        return 0;
    }

    if (conv->parsed()) {
        ConvergenceOptions opts;
        opts.cell_tol = tol;
        ConvergenceReport rep = run_convergence(problem, parse_list(eps_spec),
                                                parse_grid(xgrid_spec), parse_grid(ygrid_spec),
                                                parse_grid(pgrid_spec), horizon, t_min, opts);
        std::filesystem::create_directories(out_dir);
        std::ofstream(std::filesystem::path(out_dir) / "report.json") << rep.to_json();
        std::cout << (rep.pass ? "converge: PASS" : "converge: FAIL") << "\n";
        return rep.pass ? 0 : 1;
    }

    if (ver->parsed()) {
        Field field = read_field_csv(field_path);
        CellInstance cell = freeze(problem, parse_vec(x0_spec), parse_vec(p0_spec));
        ViscosityMode m = mode == "subsolution" ? ViscosityMode::Subsolution
                                                : ViscosityMode::Supersolution;
        ViscosityReport rep = verify_viscosity(field, cell, b_level, m, tol);
        std::cout << (rep.pass ? "verify: PASS" : "verify: FAIL")
                  << " worst=" << rep.worst << " at node " << rep.where << "\n";
        return rep.pass ? 0 : 1;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
