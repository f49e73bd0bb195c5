#pragma once

#include <utility>
#include <vector>

#include "cosa/mip_model.hpp"

namespace cosa::detail {

/// min c.x  s.t.  rows, x >= 0. Small and dense; used for node bounds only.
struct LpProblem {
    struct Row {
        std::vector<std::pair<int, double>> a;
        Sense sense;
        double rhs;
    };
    int n = 0;
    std::vector<double> c;
    std::vector<Row> rows;

    int add_col(double cost) {
        c.push_back(cost);
        return n++;
    }
};

struct LpResult {
    enum Status { Optimal, Infeasible, Unbounded } status = Infeasible;
    double value = 0.0;
    std::vector<double> x;
};

LpResult solve_lp(const LpProblem& p);

}  // namespace cosa::detail
