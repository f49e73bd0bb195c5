#pragma once

#include <chrono>
#include <vector>

#include "cosa/mip_model.hpp"

namespace cosa::detail {

/// First row that no choice of the group variables can satisfy, as a one-row witness.
std::vector<int> single_row_witness(const MipModel& m, double tol);

/// Fill derived variables of x in derived_order; false when some value is infeasible.
bool derive_auxiliaries(const MipModel& m, const std::vector<std::vector<int>>& cols,
                        std::vector<double>& x, std::vector<char>& set, double tol);

class Clock {
public:
    Clock() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace cosa::detail
