#pragma once

#include "cosa/architecture.hpp"
#include "cosa/schedule.hpp"

namespace cosa::test {

inline LayerDims table2_layer() { return LayerDims::make(3, 1, 1, 1, 1, 4, 3); }
inline LayerDims listing1_layer() { return LayerDims::make(3, 3, 28, 28, 8, 4, 3); }
inline LayerDims resnet_layer() { return LayerDims::make(3, 3, 14, 14, 256, 256, 1); }
inline LayerDims fig8_layer() { return LayerDims::make(3, 3, 7, 7, 512, 512, 1); }

inline std::vector<LayerDims> suite_layers() {
    return {table2_layer(), listing1_layer(), resnet_layer(), fig8_layer()};
}

inline Loop T(Dim d, std::int64_t b) { return {d, b, Mapping::Temporal}; }
inline Loop S(Dim d, std::int64_t b) { return {d, b, Mapping::Spatial}; }

/// The four-factor example: K split across InputBuf and GlobalBuf, both spatial.
inline Schedule table2_schedule() {
    const auto arch = default_simba_arch();
    auto s = empty_schedule(factorize(table2_layer()), arch);
    s.levels[3] = {S(Dim::K, 2)};
    s.levels[4] = {T(Dim::N, 3), S(Dim::K, 2), S(Dim::R, 3)};
    return s;
}

/// The loop-nest example with the extra c1 loop removed, so C multiplies out to 8.
inline Schedule listing1_schedule() {
    const auto arch = default_simba_arch();
    auto s = empty_schedule(factorize(listing1_layer()), arch);
    s.levels[0] = {T(Dim::Q, 2)};
    s.levels[1] = {S(Dim::C, 8), T(Dim::P, 2), T(Dim::S, 3)};
    s.levels[2] = {T(Dim::P, 2)};
    s.levels[3] = {S(Dim::K, 2)};
    s.levels[4] = {S(Dim::K, 2), S(Dim::R, 3), T(Dim::N, 3), T(Dim::Q, 7), T(Dim::P, 7)};
    s.levels[5] = {T(Dim::Q, 2)};
    return s;
}

}  // namespace cosa::test

namespace cosa::test {

/// Register, a weight buffer of `w_elems` one-byte elements, a shared NoC
/// buffer with fanout 4, and DRAM.
inline ArchSpec toy_arch(std::int64_t w_elems = 16) {
    ArchSpec a;
    a.name = "toy";
    a.A = default_tensor_dim_matrix();
    a.precision_bytes = {1, 1, 1};
    a.levels = {
        {"Reg", {64, 64, 64}, 1, false, {}},
        {"WBuf", {w_elems, std::nullopt, std::nullopt}, 1, false, {}},
        {"Glb", {std::nullopt, 4096, 4096}, 4, true, {}},
        {"DRAM", {std::nullopt, std::nullopt, std::nullopt}, 1, false, {}},
    };
    a.B = {{1, 1, 1}, {1, 0, 0}, {0, 1, 1}, {1, 1, 1}};
    return a;
}

}  // namespace cosa::test

namespace cosa::test {

/// Three levels: a register file with fanout 4 at the NoC boundary, a global
/// buffer, DRAM. Small enough for exhaustive_solve.
inline ArchSpec oracle_arch() {
    ArchSpec a;
    a.name = "oracle";
    a.A = default_tensor_dim_matrix();
    a.precision_bytes = {1, 1, 2};
    a.levels = {
        {"Reg", {4, 4, 8}, 4, true, {}},
        {"Glb", {32, 64, 64}, 1, false, {}},
        {"DRAM", {std::nullopt, std::nullopt, std::nullopt}, 1, false, {}},
    };
    a.B = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
    return a;
}

/// Layers with 1..max_factors prime factors drawn from {2, 3}.
template <class Rng>
LayerDims random_small_layer(Rng& rng, int max_factors) {
    std::array<std::int64_t, kNumDims> b{1, 1, 1, 1, 1, 1, 1};
    const int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_factors));
    for (int i = 0; i < n; ++i) b[rng() % kNumDims] *= (rng() % 3 == 0) ? 3 : 2;
    return LayerDims::make(b[0], b[1], b[2], b[3], b[4], b[5], b[6]);
}

}  // namespace cosa::test
