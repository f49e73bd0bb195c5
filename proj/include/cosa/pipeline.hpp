#pragma once

#include <optional>
#include <vector>

#include "cosa/costmodel.hpp"
#include "cosa/formulation.hpp"
#include "cosa/schedule.hpp"
#include "cosa/search.hpp"
#include "cosa/solver.hpp"

namespace cosa {

struct RunOptions {
    FormulationOptions formulation;
    SolverOptions solver;
    PaddingPolicy padding;
    ValidateOptions validate;
    EvalOptions eval;
    /// Re-solves allowed for buffer constraints the log-domain model cannot
    /// express (input halo, shared buffers).
    int max_tighten = 64;
};

struct LayerRun {
    SolveStatus status = SolveStatus::Infeasible;
    ScheduleModel model;  // the model of the last solve
    Solution solution;
    std::optional<Schedule> schedule;
    ArchSpec arch;            // with partition picks applied
    std::vector<int> picks;   // partition menu index per pair
    std::optional<CostReport> report;
    int tighten_rounds = 0;
    double wall_seconds = 0.0;
};

/// Factorize, formulate, solve, decode and check one layer. When the decoded
/// schedule breaks a constraint the model approximates, the offending buffer
/// is capped just below the tile the solver chose and the layer is re-solved.
LayerRun solve_layer(const LayerDims& layer, const ArchSpec& arch, const RunOptions& opts);

/// Bytes the partition picks occupy.
std::int64_t partition_bytes(const ScheduleModel& model, const std::vector<int>& picks);

struct SweepPoint {
    ObjectiveWeights weights;
    SolveStatus status = SolveStatus::Infeasible;
    std::optional<std::int64_t> latency;
    double wall_seconds = 0.0;
};

/// Combined-mode weight triples over the cartesian grid, skipping all-zero ones.
std::vector<ObjectiveWeights> weight_grid(const std::vector<double>& w_util, const std::vector<double>& w_comp,
                                          const std::vector<double>& w_traffic);

std::vector<SweepPoint> sweep(const LayerDims& layer, const ArchSpec& arch,
                              const std::vector<ObjectiveWeights>& grid, const RunOptions& opts);

/// Small layers used to tune objective weights for an architecture.
std::vector<LayerDims> calibration_benchmarks();

struct Calibration {
    ObjectiveWeights best;
    std::vector<double> geomean_latency;  // per grid point; +inf when some layer failed
};

/// Grid point with the lowest geometric-mean cost-model latency over `bench`
/// (first one on ties).
Calibration calibrate_weights(const std::vector<LayerDims>& bench, const ArchSpec& arch,
                              const std::vector<ObjectiveWeights>& grid, const RunOptions& opts);

struct Comparison {
    LayerRun solver;
    std::optional<SearchResult> random;
    std::int64_t solver_metric = 0;
    double ratio = 0.0;  // random best metric / solver metric
};

Comparison compare_layer(const LayerDims& layer, const ArchSpec& arch, const RunOptions& opts,
                         const SearchConfig& search);

}  // namespace cosa
