#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cosa/architecture.hpp"
#include "cosa/mip_model.hpp"
#include "cosa/workload.hpp"

namespace cosa {

enum class Mapping : int { Spatial = 0, Temporal = 1 };

enum class ObjectiveMode { Util, Comp, Traffic, Combined, Balance };

const char* objective_mode_name(ObjectiveMode m);
bool parse_objective_mode(const std::string& s, ObjectiveMode& out);

struct ObjectiveWeights {
    double w_util = 1.0;
    double w_comp = 1.0;
    double w_traffic = 1.0;
    ObjectiveMode mode = ObjectiveMode::Combined;

    /// Empty string when valid, otherwise the reason.
    std::string check() const;
    bool uses_traffic() const;
};

/// Co-optimize per-buffer capacities from a menu of power-of-two element counts.
struct PartitionSpec {
    std::int64_t budget_bytes = 0;
    int e_min = 4;
    std::optional<int> e_max;  // default floor(log2(budget_bytes))
};

struct FormulationOptions {
    ObjectiveWeights weights;
    std::optional<PartitionSpec> partition;
    /// Tightened element capacities, keyed by (level, tensor index).
    std::map<std::pair<int, int>, std::int64_t> capacity_override;
};

class FormulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the partition menu cannot hold some tensor within the budget.
class EmptyPartitionMenu : public FormulationError {
public:
    using FormulationError::FormulationError;
};

/// One prime factor of one dimension: the unit of allocation.
struct FactorInfo {
    Dim dim;
    int ordinal;  // position in the dimension's factor list
    std::int64_t value;
    double log2;
};

/// Semantic coordinates of an allocation variable X[(j,n), (level, rank), mapping].
struct VarIndex {
    int factor;  // index into ScheduleModel::factors
    int level;
    int rank;
    Mapping mapping;
};

/// Where a factor ended up.
struct Placement {
    int level = 0;
    int rank = 0;
    Mapping mapping = Mapping::Temporal;

    friend bool operator==(const Placement&, const Placement&) = default;
};

struct PartitionPair {
    int level;
    Tensor tensor;
    std::vector<int> exponents;  // menu, ascending (element exponents)
    int group = -1;              // choice group in the MIP
    std::vector<int> vars;       // one selector per menu entry
};

/// The MIP together with the bookkeeping that maps it back to loop nests.
struct ScheduleModel {
    MipModel mip;
    PrimeFactorization pf;
    ArchSpec arch;
    FormulationOptions options;

    int Z = 0;    // rank slots per level (= total prime factors)
    int noc = -1;

    /// Factors in branching order (largest factor first); factor f owns choice group factor_group[f].
    std::vector<FactorInfo> factors;
    std::vector<int> factor_group;
    std::vector<VarIndex> x_index;     // per X variable
    std::vector<int> x_slot_of_var;    // var -> index into x_index, or -1

    // Traffic auxiliaries (present when the objective needs them).
    bool has_traffic = false;
    std::vector<std::pair<int, int>> positions;       // g -> (level, rank), levels >= noc
    std::array<std::vector<int>, kNumTensors> y_var;  // [v][g]
    std::array<std::vector<std::vector<int>>, kNumTensors> p_var;  // [v][g][factor]

    std::vector<PartitionPair> partitions;
    int budget_row = -1;
    int balance_var = -1;

    /// Capacity rows keyed by (level, tensor index).
    std::map<std::pair<int, int>, int> capacity_rows;

    // Objective building blocks, all in log2 domain.
    LinearExpr util;
    LinearExpr comp;
    std::array<LinearExpr, kNumTensors> D, L, T;
    LinearExpr traffic;

    int x_var(int factor, int level, int rank, Mapping m) const;
    int num_x_vars() const { return static_cast<int>(x_index.size()); }
    bool spatial_allowed(int level) const { return arch.levels[level].spatial_fanout > 1; }

    /// Full assignment for the given placements (one per factor) and partition
    /// picks (one menu index per partition pair). Auxiliaries take their implied values.
    std::vector<double> assignment(const std::vector<Placement>& placements,
                                   const std::vector<int>& partition_picks = {}) const;

    /// Inverse of assignment() on the choice-group variables.
    std::vector<Placement> placements(const std::vector<double>& x) const;
    std::vector<int> partition_picks(const std::vector<double>& x) const;
};

// Builders, applied in this order by build_model().
void declare_allocation_vars(ScheduleModel& m);
void build_assignment_constraints(ScheduleModel& m);
void build_partition_vars(ScheduleModel& m);
void build_buffer_constraints(ScheduleModel& m);
void build_spatial_constraints(ScheduleModel& m);
void build_util_objective(ScheduleModel& m);
void build_comp_objective(ScheduleModel& m);
void build_traffic_objective(ScheduleModel& m);
void compose_objective(ScheduleModel& m);

ScheduleModel build_model(const PrimeFactorization& pf, const ArchSpec& arch,
                          const FormulationOptions& options = {});

/// Sum of element capacities in bytes over the (level, tensor) pairs a partition run decides.
std::int64_t baseline_partition_bytes(const ArchSpec& arch);

/// (level, tensor) pairs with a capacity constraint: on-chip, stored, and above some level.
std::vector<std::pair<int, Tensor>> constrained_buffers(const ArchSpec& arch);

}  // namespace cosa
