#include "slowfast/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace slowfast {

namespace {

constexpr double kTol = 1e-9;

struct Tableau {
    // rows: m constraints, columns: n structural + 1 rhs
    std::size_t m, n;
    std::vector<double> a;     // (m) x (n+1)
    std::vector<int> basis;    // basic column per row

    double& at(std::size_t i, std::size_t j) { return a[i * (n + 1) + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * (n + 1) + j]; }
    double& rhs(std::size_t i) { return a[i * (n + 1) + n]; }
    double rhs(std::size_t i) const { return a[i * (n + 1) + n]; }

    void pivot(std::size_t row, std::size_t col) {
        double p = at(row, col);
        for (std::size_t j = 0; j <= n; ++j) at(row, j) /= p;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == row) continue;
            double f = at(i, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= n; ++j) at(i, j) -= f * at(row, j);
        }
        basis[row] = int(col);
    }
};

// maximize cost . x over the current tableau; returns false if unbounded.
bool run_simplex(Tableau& t, const std::vector<double>& cost, std::size_t max_iter) {
    std::vector<double> red(t.n);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // reduced costs: c_j - c_B . B^{-1} A_j
        for (std::size_t j = 0; j < t.n; ++j) {
            double v = cost[j];
            for (std::size_t i = 0; i < t.m; ++i) v -= cost[std::size_t(t.basis[i])] * t.at(i, j);
            red[j] = v;
        }
        // Bland: lowest-index improving column
        std::size_t enter = t.n;
        for (std::size_t j = 0; j < t.n; ++j) {
            if (red[j] > kTol) { enter = j; break; }
        }
        if (enter == t.n) return true;  // optimal
        // ratio test, Bland tie-break on basis index
        std::size_t leave = t.m;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < t.m; ++i) {
            double aij = t.at(i, enter);
            if (aij > kTol) {
                double ratio = t.rhs(i) / aij;
                if (ratio < best - kTol ||
                    (ratio < best + kTol && (leave == t.m || t.basis[i] < t.basis[leave]))) {
                    best = ratio;
                    leave = i;
                }
            }
        }
        if (leave == t.m) return false;  // unbounded
        t.pivot(leave, enter);
    }
    throw std::runtime_error("simplex: iteration limit exceeded");
}

}  // namespace

LpResult lp_maximize(const std::vector<std::vector<double>>& normals,
                     const std::vector<double>& rhs,
                     const std::vector<double>& objective) {
    std::size_t m = normals.size();
    std::size_t d = objective.size();
    if (rhs.size() != m) throw std::invalid_argument("lp_maximize: size mismatch");
    for (auto& row : normals)
        if (row.size() != d) throw std::invalid_argument("lp_maximize: size mismatch");

    // columns: u(d), v(d) with x = u - v, slack(m), artificial (per negative row)
    std::size_t n_struct = 2 * d + m;
    std::vector<std::size_t> art_rows;
    for (std::size_t i = 0; i < m; ++i)
        if (rhs[i] < 0.0) art_rows.push_back(i);
    std::size_t n = n_struct + art_rows.size();

    Tableau t;
    t.m = m;
    t.n = n;
    t.a.assign(m * (n + 1), 0.0);
    t.basis.assign(m, 0);

    std::size_t art = 0;
    for (std::size_t i = 0; i < m; ++i) {
        double sign = rhs[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            t.at(i, j) = sign * normals[i][j];
            t.at(i, d + j) = -sign * normals[i][j];
        }
        t.at(i, 2 * d + i) = sign;  // slack
        t.rhs(i) = sign * rhs[i];
        if (sign < 0.0) {
            std::size_t col = n_struct + art++;
            t.at(i, col) = 1.0;
            t.basis[i] = int(col);
        } else {
            t.basis[i] = int(2 * d + i);
        }
    }

    std::size_t max_iter = 200 * (n + m + 8);

    if (!art_rows.empty()) {
        std::vector<double> phase1(n, 0.0);
        for (std::size_t j = n_struct; j < n; ++j) phase1[j] = -1.0;
        run_simplex(t, phase1, max_iter);
        double obj = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            if (std::size_t(t.basis[i]) >= n_struct) obj += t.rhs(i);
        if (obj > 1e-7) return {LpResult::Status::Infeasible, 0.0, {}};
        // pivot lingering degenerate artificials out when possible
        for (std::size_t i = 0; i < m; ++i) {
            if (std::size_t(t.basis[i]) < n_struct) continue;
            for (std::size_t j = 0; j < n_struct; ++j) {
                if (std::fabs(t.at(i, j)) > kTol) { t.pivot(i, j); break; }
            }
        }
    }

    std::vector<double> phase2(n, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        phase2[j] = objective[j];
        phase2[d + j] = -objective[j];
    }
    // keep artificials pinned at zero
    for (std::size_t j = n_struct; j < n; ++j) phase2[j] = -1e18;

    if (!run_simplex(t, phase2, max_iter))
        return {LpResult::Status::Unbounded, 0.0, {}};

    std::vector<double> x(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t b = std::size_t(t.basis[i]);
        if (b < d) x[b] += t.rhs(i);
        else if (b < 2 * d) x[b - d] -= t.rhs(i);
    }
    double value = 0.0;
    for (std::size_t j = 0; j < d; ++j) value += objective[j] * x[j];
    return {LpResult::Status::Optimal, value, std::move(x)};
}

}  // namespace slowfast
