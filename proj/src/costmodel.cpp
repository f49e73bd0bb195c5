#include "cosa/costmodel.hpp"

#include <cmath>

namespace cosa {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw CostModelError("integer overflow in cost model");
    return r;
}

const char* traffic_class_name(TrafficClass c) {
    switch (c) {
        case TrafficClass::Multicast: return "multicast";
        case TrafficClass::Unicast: return "unicast";
        case TrafficClass::Reduction: return "reduction";
    }
    return "?";
}

std::int64_t tile_elems(const Schedule& s, const ArchSpec& arch, int level, Tensor v) {
    std::int64_t t = 1;
    for (int I = 0; I < level; ++I) {
        for (const auto& loop : s.levels[I]) {
            if (arch.related(loop.dim, v)) t = checked_mul(t, loop.bound);
        }
    }
    return t;
}

std::int64_t input_tile_with_halo(const Schedule& s, int level) {
    std::array<std::int64_t, kNumDims> p{};
    p.fill(1);
    for (int I = 0; I < level; ++I) {
        for (const auto& loop : s.levels[I]) p[static_cast<int>(loop.dim)] = checked_mul(p[static_cast<int>(loop.dim)], loop.bound);
    }
    auto at = [&](Dim d) { return p[static_cast<int>(d)]; };
    const std::int64_t stride = s.padded.stride;
    const std::int64_t w = checked_mul(at(Dim::P) - 1, stride) + at(Dim::R);
    const std::int64_t h = checked_mul(at(Dim::Q) - 1, stride) + at(Dim::S);
    return checked_mul(checked_mul(checked_mul(w, h), at(Dim::C)), at(Dim::N));
}

std::vector<TrafficClassEntry> classify_traffic(const Schedule& s, const ArchSpec& arch) {
    std::vector<TrafficClassEntry> out;
    const int noc = arch.noc_level();
    if (noc < 0 || noc >= static_cast<int>(s.levels.size())) return out;
    const auto& loops = s.levels[noc];
    for (std::size_t i = 0; i < loops.size(); ++i) {
        if (loops[i].mapping != Mapping::Spatial) continue;
        for (auto v : kAllTensors) {
            TrafficClass c;
            if (arch.related(loops[i].dim, v)) c = TrafficClass::Unicast;
            else if (v == Tensor::OA) c = TrafficClass::Reduction;
            else c = TrafficClass::Multicast;
            out.push_back({static_cast<int>(i), loops[i].dim, v, c});
        }
    }
    return out;
}

std::array<TrafficTerms, kNumTensors> traffic_terms(const Schedule& s, const ArchSpec& arch) {
    std::array<TrafficTerms, kNumTensors> out{};
    const int noc = arch.noc_level();
    if (noc < 0) return out;
    for (auto v : kAllTensors) {
        auto& t = out[static_cast<int>(v)];
        t.per_transfer_elems = tile_elems(s, arch, noc, v);
        for (const auto& loop : s.levels[noc]) {
            if (loop.mapping != Mapping::Spatial) continue;
            if (arch.related(loop.dim, v)) t.link_multiplier = checked_mul(t.link_multiplier, loop.bound);
            else if (v == Tensor::OA) t.reduction_fanin = checked_mul(t.reduction_fanin, loop.bound);
        }
        // Once a v-relevant temporal loop is seen, every outer temporal loop repeats the transfer.
        bool on = false;
        for (int I = noc; I < static_cast<int>(s.levels.size()); ++I) {
            for (const auto& loop : s.levels[I]) {
                if (loop.mapping != Mapping::Temporal) continue;
                if (arch.stores(I, v) && arch.related(loop.dim, v)) on = true;
                if (on) t.iterations = checked_mul(t.iterations, loop.bound);
            }
        }
        t.total_elems = checked_mul(checked_mul(t.per_transfer_elems, t.link_multiplier), t.iterations);
    }
    return out;
}

double CostReport::log2_util_sum(const ArchSpec& arch) const {
    double s = 0.0;
    for (int I = 0; I + 1 < arch.num_levels(); ++I) {
        for (auto v : kAllTensors) {
            if (arch.stores(I, v)) s += std::log2(static_cast<double>(utilization[I][static_cast<int>(v)]));
        }
    }
    return s;
}

double CostReport::log2_traffic_sum() const {
    double s = 0.0;
    for (const auto& t : traffic) s += std::log2(static_cast<double>(t.total_elems));
    return s;
}

CostReport evaluate(const Schedule& s, const ArchSpec& arch, const EvalOptions& opts, bool check_valid) {
    if (check_valid) {
        const auto bad = validate(s, arch);
        if (!bad.empty()) throw CostModelError("invalid schedule: " + bad.front().message);
    } else if (static_cast<int>(s.levels.size()) != arch.num_levels()) {
        throw CostModelError("schedule and architecture disagree on the level count");
    }
    CostReport r;
    const int H = arch.num_levels();
    r.utilization.assign(H, {});
    for (int I = 0; I < H; ++I) {
        for (auto v : kAllTensors) {
            r.utilization[I][static_cast<int>(v)] = arch.stores(I, v) ? tile_elems(s, arch, I, v) : 0;
        }
        for (const auto& loop : s.levels[I]) {
            if (loop.mapping == Mapping::Temporal) r.compute_cycles = checked_mul(r.compute_cycles, loop.bound);
            else r.spatial_product = checked_mul(r.spatial_product, loop.bound);
        }
    }
    r.traffic = traffic_terms(s, arch);
    if (opts.charge_reduction) {
        auto& oa = r.traffic[static_cast<int>(Tensor::OA)];
        oa.total_elems = checked_mul(oa.total_elems, oa.reduction_fanin);
    }
    std::int64_t bytes = 0;
    for (auto v : kAllTensors) {
        bytes += checked_mul(r.traffic[static_cast<int>(v)].total_elems, arch.precision(v));
    }
    const double bw = arch.noc_bandwidth;
    if (bw == std::floor(bw) && bw >= 1.0) {
        const auto b = static_cast<std::int64_t>(bw);
        r.noc_cycles = (bytes + b - 1) / b;
    } else {
        r.noc_cycles = static_cast<std::int64_t>(std::ceil(static_cast<double>(bytes) / bw));
    }
    r.latency_cycles = std::max(r.compute_cycles, r.noc_cycles);
    return r;
}

}  // namespace cosa
