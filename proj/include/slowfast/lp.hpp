#pragma once

#include <vector>

namespace slowfast {

struct LpResult {
    enum class Status { Optimal, Infeasible, Unbounded } status;
    double value = 0.0;
    std::vector<double> point;
};

// maximize objective . q  subject to  normals[i] . q <= rhs[i],  q free.
// Dense two-phase simplex with Bland's rule; sized for tiny desk-scale
// programs (a few variables, tens of constraints).
LpResult lp_maximize(const std::vector<std::vector<double>>& normals,
                     const std::vector<double>& rhs,
                     const std::vector<double>& objective);

}  // namespace slowfast
