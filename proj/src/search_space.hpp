#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cosa/formulation.hpp"

namespace cosa::detail {

/// Identical prime factors of one dimension.
struct Kind {
    Dim dim;
    std::int64_t value;
    double log2;
    std::vector<int> factors;  // indices into ScheduleModel::factors, ascending
    std::array<bool, kNumTensors> rel{};
};

/// A (level, mapping) pair, ordered like the options of a choice group.
struct Config {
    int level;
    Mapping mapping;
};

struct Space {
    std::vector<Kind> kinds;
    std::vector<int> kind_of_factor;
    std::vector<Config> configs;
    int H = 0;
    int Z = 0;

    int config_index(int level, Mapping k) const;
    /// Loop code used by the tie-break: spatial sorts before temporal of the same kind.
    static int code(int kind, Mapping k) { return kind * 2 + static_cast<int>(k); }
    int empty_code() const { return static_cast<int>(kinds.size()) * 2; }
    /// Monotone in the position of (level, mapping, rank) within a choice group.
    int option_order(const Placement& p) const {
        return (p.level * 2 + static_cast<int>(p.mapping)) * Z + p.rank;
    }
};

Space build_space(const ScheduleModel& m);

}  // namespace cosa::detail
