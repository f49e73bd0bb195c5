#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cosa/architecture.hpp"
#include "cosa/schedule.hpp"

namespace cosa {

enum class TrafficClass { Multicast, Unicast, Reduction };

const char* traffic_class_name(TrafficClass c);

struct TrafficClassEntry {
    int loop;  // index into the NoC level's loop list
    Dim dim;
    Tensor tensor;
    TrafficClass cls;
};

/// Class of every (spatial NoC-level loop, tensor) pair.
std::vector<TrafficClassEntry> classify_traffic(const Schedule& s, const ArchSpec& arch);

struct TrafficTerms {
    std::int64_t per_transfer_elems = 1;  // tile below the NoC boundary
    std::int64_t link_multiplier = 1;     // related spatial loops at the boundary
    std::int64_t iterations = 1;          // outer temporal loops from the first relevant one
    std::int64_t total_elems = 1;
    std::int64_t reduction_fanin = 1;     // unrelated spatial loops for OA (reported only)
};

std::array<TrafficTerms, kNumTensors> traffic_terms(const Schedule& s, const ArchSpec& arch);

struct CostReport {
    /// utilization[I][v]: elements of tensor v below level I (0 where not stored).
    std::vector<std::array<std::int64_t, kNumTensors>> utilization;
    std::int64_t compute_cycles = 1;
    std::int64_t spatial_product = 1;
    std::array<TrafficTerms, kNumTensors> traffic{};
    std::int64_t noc_cycles = 0;
    std::int64_t latency_cycles = 0;

    /// sum over on-chip stored (I, v) of log2 utilization
    double log2_util_sum(const ArchSpec& arch) const;
    /// sum over tensors of log2 total traffic
    double log2_traffic_sum() const;
};

class CostModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EvalOptions {
    /// Also multiply OA traffic by its reduction fan-in.
    bool charge_reduction = false;
};

/// Product-domain cost of a schedule; throws CostModelError on an invalid one
/// (unless check_valid is false, for sampling loops that validated already).
CostReport evaluate(const Schedule& s, const ArchSpec& arch, const EvalOptions& opts = {},
                    bool check_valid = true);

/// Element tile of tensor v held at level I (loops strictly below I, no halo).
std::int64_t tile_elems(const Schedule& s, const ArchSpec& arch, int level, Tensor v);

/// Input tile below level I with convolution halo.
std::int64_t input_tile_with_halo(const Schedule& s, int level);

std::int64_t checked_mul(std::int64_t a, std::int64_t b);

}  // namespace cosa
