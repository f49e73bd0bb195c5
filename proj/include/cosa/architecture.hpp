#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cosa/workload.hpp"

namespace cosa {

/// Data tensors of a convolution: weights, input activations, output activations.
enum class Tensor : int { W = 0, IA, OA };

inline constexpr int kNumTensors = 3;
inline constexpr std::array<Tensor, kNumTensors> kAllTensors = {Tensor::W, Tensor::IA, Tensor::OA};

const char* tensor_name(Tensor v);
bool parse_tensor(const std::string& s, Tensor& out);

/// Dimension-to-tensor relation, rows R..N, columns W/IA/OA.
using TensorDimMatrix = std::array<std::array<std::uint8_t, kNumTensors>, kNumDims>;

/// Level-to-tensor storage relation, one row per memory level (innermost first).
using MemTensorMatrix = std::vector<std::array<std::uint8_t, kNumTensors>>;

/// Capacity in bytes; std::nullopt means unbounded.
using Capacity = std::optional<std::int64_t>;

struct MemLevel {
    std::string name;
    std::array<Capacity, kNumTensors> capacity_bytes{};
    std::int64_t spatial_fanout = 1;
    bool is_noc_boundary = false;
    /// Optional combined byte budget for all tensors resident at this level.
    /// Enforced by the exact validator only.
    Capacity shared_capacity_bytes;
};

struct ArchSpec {
    std::string name;
    std::vector<MemLevel> levels;  // inner -> outer
    TensorDimMatrix A{};
    MemTensorMatrix B;
    std::array<std::int64_t, kNumTensors> precision_bytes{1, 1, 1};
    double noc_bandwidth = 8.0;  // bytes per cycle across the NoC boundary

    int num_levels() const { return static_cast<int>(levels.size()); }
    bool related(Dim j, Tensor v) const {
        return A[static_cast<int>(j)][static_cast<int>(v)] != 0;
    }
    bool stores(int level, Tensor v) const { return B.at(level)[static_cast<int>(v)] != 0; }
    std::int64_t precision(Tensor v) const { return precision_bytes[static_cast<int>(v)]; }
    /// Index of the NoC boundary level, or -1 when none is marked.
    int noc_level() const;
    bool is_dram(int level) const { return level == num_levels() - 1; }
};

/// The conventional relation between the seven loop dimensions and the tensors.
TensorDimMatrix default_tensor_dim_matrix();

/// Six-level spatial accelerator: Register, AccumBuf, WeightBuf, InputBuf,
/// GlobalBuf (NoC boundary, 4x4 PEs) and DRAM.
ArchSpec default_simba_arch();

struct ArchDiagnostic {
    int level = -1;   // -1 when not level-specific
    int tensor = -1;  // -1 when not tensor-specific
    std::string message;
};

std::vector<ArchDiagnostic> validate_arch(const ArchSpec& arch);

/// log2 of the element capacity of tensor v at level I, or nullopt when unbounded.
/// Throws std::invalid_argument when the level does not store v.
std::optional<double> log2_capacity(const ArchSpec& arch, int level, Tensor v);

/// Element capacity (floor of bytes / precision), or nullopt when unbounded.
std::optional<std::int64_t> capacity_elements(const ArchSpec& arch, int level, Tensor v);

}  // namespace cosa
