#include "cosa/architecture.hpp"

#include <cmath>
#include <stdexcept>

namespace cosa {

const char* tensor_name(Tensor v) {
    switch (v) {
        case Tensor::W: return "W";
        case Tensor::IA: return "IA";
        case Tensor::OA: return "OA";
    }
    return "?";
}

bool parse_tensor(const std::string& s, Tensor& out) {
    if (s == "W") { out = Tensor::W; return true; }
    if (s == "IA") { out = Tensor::IA; return true; }
    if (s == "OA") { out = Tensor::OA; return true; }
    return false;
}

int ArchSpec::noc_level() const {
    for (int i = 0; i < num_levels(); ++i) {
        if (levels[i].is_noc_boundary) return i;
    }
    return -1;
}

TensorDimMatrix default_tensor_dim_matrix() {
    //          W  IA OA
    return {{{1, 0, 0},    // R
             {1, 0, 0},    // S
             {0, 1, 1},    // P
             {0, 1, 1},    // Q
             {1, 1, 0},    // C
             {1, 0, 1},    // K
             {0, 1, 1}}};  // N
}

ArchSpec default_simba_arch() {
    constexpr std::int64_t KB = 1024;
    ArchSpec a;
    a.name = "simba";
    a.A = default_tensor_dim_matrix();
    a.precision_bytes = {1, 1, 3};
    // One 64-bit flit per cycle enters the mesh from the global buffer.
    a.noc_bandwidth = 8.0;

    MemLevel reg{"Register", {64, 64, 64}, 1, false, {}};
    // The 64 MACs of a PE are 8 vector lanes of width 8; the lane fanout sits
    // above the input buffer and the vector width above the accumulators.
    MemLevel accum{"AccumBuf", {std::nullopt, std::nullopt, 3 * KB}, 8, false, {}};
    MemLevel weight{"WeightBuf", {32 * KB, std::nullopt, std::nullopt}, 1, false, {}};
    MemLevel input{"InputBuf", {std::nullopt, 8 * KB, std::nullopt}, 8, false, {}};
    MemLevel global{"GlobalBuf", {128 * KB, 128 * KB, std::nullopt}, 16, true, {}};
    MemLevel dram{"DRAM", {std::nullopt, std::nullopt, std::nullopt}, 1, false, {}};
    a.levels = {reg, accum, weight, input, global, dram};
    a.B = {{1, 1, 1},   // Register
           {0, 0, 1},   // AccumBuf
           {1, 0, 0},   // WeightBuf
           {0, 1, 0},   // InputBuf
           {1, 1, 0},   // GlobalBuf
           {1, 1, 1}};  // DRAM
    return a;
}

std::vector<ArchDiagnostic> validate_arch(const ArchSpec& arch) {
    std::vector<ArchDiagnostic> out;
    const int H = arch.num_levels();
    if (H < 2) out.push_back({-1, -1, "need at least one on-chip level and DRAM"});
    if (static_cast<int>(arch.B.size()) != H) {
        out.push_back({-1, -1, "B has " + std::to_string(arch.B.size()) + " rows for " +
                                   std::to_string(H) + " levels"});
        return out;
    }
    int noc_count = 0;
    for (int i = 0; i < H; ++i) {
        const auto& L = arch.levels[i];
        if (L.is_noc_boundary) ++noc_count;
        if (L.spatial_fanout < 1) out.push_back({i, -1, "spatial fanout must be >= 1"});
        for (int v = 0; v < kNumTensors; ++v) {
            if (arch.B[i][v] > 1) out.push_back({i, v, "B entries must be 0 or 1"});
            if (arch.B[i][v] == 0) continue;
            const auto& cap = L.capacity_bytes[v];
            if (i == H - 1) {
                if (cap) out.push_back({i, v, "DRAM capacity must be unbounded"});
            } else if (!cap) {
                out.push_back({i, v, "on-chip capacity must be bounded"});
            } else if (*cap <= 0) {
                out.push_back({i, v, "zero capacity for a stored tensor"});
            }
        }
    }
    if (noc_count == 0) out.push_back({-1, -1, "no NoC boundary"});
    if (noc_count > 1) out.push_back({-1, -1, "multiple NoC boundaries"});
    for (int v = 0; v < kNumTensors; ++v) {
        if (arch.precision_bytes[v] < 1) out.push_back({-1, v, "precision must be >= 1 byte"});
        if (H >= 1 && arch.B.back()[v] != 1) out.push_back({H - 1, v, "DRAM must store every tensor"});
        bool on_chip = false;
        for (int i = 0; i + 1 < H; ++i) on_chip = on_chip || arch.B[i][v] == 1;
        if (!on_chip) out.push_back({-1, v, "tensor has no on-chip level"});
    }
    for (int j = 0; j < kNumDims; ++j) {
        for (int v = 0; v < kNumTensors; ++v) {
            if (arch.A[j][v] > 1) out.push_back({-1, v, "A entries must be 0 or 1"});
        }
    }
    if (!(arch.noc_bandwidth > 0)) out.push_back({-1, -1, "NoC bandwidth must be positive"});
    return out;
}

std::optional<std::int64_t> capacity_elements(const ArchSpec& arch, int level, Tensor v) {
    if (!arch.stores(level, v)) {
        throw std::invalid_argument("level " + arch.levels.at(level).name + " does not store " +
                                    tensor_name(v));
    }
    const auto& cap = arch.levels.at(level).capacity_bytes[static_cast<int>(v)];
    if (!cap) return std::nullopt;
    return *cap / arch.precision(v);
}

std::optional<double> log2_capacity(const ArchSpec& arch, int level, Tensor v) {
    if (!arch.stores(level, v)) {
        throw std::invalid_argument("level " + arch.levels.at(level).name + " does not store " +
                                    tensor_name(v));
    }
    const auto& cap = arch.levels.at(level).capacity_bytes[static_cast<int>(v)];
    if (!cap) return std::nullopt;
    return std::log2(static_cast<double>(*cap) / static_cast<double>(arch.precision(v)));
}

}  // namespace cosa
