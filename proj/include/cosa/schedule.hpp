#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cosa/architecture.hpp"
#include "cosa/formulation.hpp"
#include "cosa/workload.hpp"

namespace cosa {

struct Loop {
    Dim dim;
    std::int64_t bound;
    Mapping mapping;

    friend bool operator==(const Loop&, const Loop&) = default;
};

/// A loop nest bound to a memory hierarchy. levels[I] lists the loops that
/// live at level I, innermost first.
struct Schedule {
    LayerDims layer;
    LayerDims padded;
    std::string arch_name;
    std::vector<std::string> level_names;
    std::vector<std::vector<Loop>> levels;

    std::size_t loop_count() const;
    friend bool operator==(const Schedule&, const Schedule&) = default;
};

/// Empty schedule skeleton for a layer on an architecture.
Schedule empty_schedule(const PrimeFactorization& pf, const ArchSpec& arch);

/// One loop per placed factor, ordered by rank within each level.
Schedule decode(const ScheduleModel& model, const std::vector<double>& assignment);
Schedule decode_placements(const ScheduleModel& model, const std::vector<Placement>& placements);

/// Placements reproducing the schedule; composite loops are split into
/// consecutive prime loops. Throws std::invalid_argument when the schedule's
/// loops do not multiply out to the model's factors.
std::vector<Placement> encode_placements(const ScheduleModel& model, const Schedule& s);
std::vector<double> encode(const ScheduleModel& model, const Schedule& s,
                           const std::vector<int>& partition_picks = {});

struct Violation {
    std::string kind;  // "dimension underflow", "spatial overflow", ...
    int level = -1;
    int tensor = -1;
    int dim = -1;
    std::string message;
};

struct ValidateOptions {
    /// Size input tiles as ((P-1)*stride + R) x ((Q-1)*stride + S) x C x N.
    bool halo = true;
};

std::vector<Violation> validate(const Schedule& s, const ArchSpec& arch, const ValidateOptions& opts = {});

/// Loop-nest text, outermost loop first.
std::string render(const Schedule& s);

std::string serialize(const Schedule& s);

class ScheduleParseError : public std::runtime_error {
public:
    ScheduleParseError(int line, int column, const std::string& what);
    int line;
    int column;
};

Schedule parse_schedule(std::string_view text);

/// Architecture with the capacities picked by a partition solution.
ArchSpec apply_partition(const ScheduleModel& model, const std::vector<int>& picks);

}  // namespace cosa
