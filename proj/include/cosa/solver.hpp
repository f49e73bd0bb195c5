#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cosa/formulation.hpp"
#include "cosa/mip_model.hpp"

namespace cosa {

enum class SolveStatus { Optimal, Infeasible, Timeout };

const char* solve_status_name(SolveStatus s);

struct SolveStats {
    std::int64_t nodes = 0;
    std::int64_t leaves = 0;
    double wall_seconds = 0.0;
};

struct Solution {
    std::vector<double> assignment;  // empty when no incumbent exists
    double objective_value = 0.0;
    SolveStatus status = SolveStatus::Infeasible;
    SolveStats stats;
    /// Rows that cannot be satisfied on their own, when such rows exist.
    std::vector<int> infeasible_rows;

    bool has_assignment() const { return status == SolveStatus::Optimal || !assignment.empty(); }
};

struct SolverOptions {
    double time_limit_s = 60.0;
    double tolerance = 1e-6;
    /// Worker threads; 0 means COSA_THREADS or 1.
    int threads = 0;

    void check() const;
};

/// Worker count after applying COSA_THREADS.
int effective_threads(const SolverOptions& opts);

class SpaceTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Generic depth-first branch-and-bound over the model's choice groups.
/// Every variable must belong to a choice group or to derived_order.
/// Among equal-objective optima the lexicographically smallest assignment vector wins.
Solution solve(const MipModel& model, const SolverOptions& opts = {});

/// Brute force over all group choices (guarded at 1e7 combinations), same tie-break as solve(MipModel).
Solution exhaustive_solve(const MipModel& model, double tolerance = 1e-6);

/// Schedule-aware branch-and-bound: branches on how many identical prime
/// factors go to each (level, mapping) pair, bounds nodes with an LP over the
/// remaining counts, and orders loops above the NoC boundary exactly.
/// Ties are broken by tie_key().
Solution solve(const ScheduleModel& model, const SolverOptions& opts = {});

/// Brute force over placements with the tie_key() rule; the reference for
/// solve(ScheduleModel). Visits one placement per distinct loop nest (packed
/// ranks, identical factors in order) and gives up after 1e7 of them.
Solution exhaustive_solve(const ScheduleModel& model, double tolerance = 1e-6);

/// Total order on schedules used to pick one optimum among ties; smaller wins.
/// Components, compared in order: per factor kind and (level, mapping) the
/// negated count; per level and rank the kind/mapping code of the loop there
/// (empty slots last); per factor its option index; partition menu indices.
std::vector<int> tie_key(const ScheduleModel& model, const std::vector<Placement>& placements,
                         const std::vector<int>& picks);

/// Pluggable solver behind the same contract as the built-in one.
class SolverBackend {
public:
    virtual ~SolverBackend() = default;
    virtual std::string name() const = 0;
    virtual Solution solve(const ScheduleModel& model, const SolverOptions& opts) = 0;
};

class BuiltinBackend : public SolverBackend {
public:
    std::string name() const override { return "builtin"; }
    Solution solve(const ScheduleModel& model, const SolverOptions& opts) override {
        return cosa::solve(model, opts);
    }
};

}  // namespace cosa
