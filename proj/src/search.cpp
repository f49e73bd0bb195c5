#include "cosa/search.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <thread>

#include "solver_common.hpp"

namespace cosa {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform integer in [0, n) without relying on a library distribution,
/// so draws are identical across standard libraries.
std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

struct Draw {
    bool valid = false;
    std::int64_t metric = 0;
    Schedule schedule;
    CostReport report;
};

}  // namespace

const char* metric_name(Metric m) {
    switch (m) {
        case Metric::Latency: return "latency";
        case Metric::Traffic: return "traffic";
        case Metric::Compute: return "compute";
    }
    return "?";
}

bool parse_metric(const std::string& s, Metric& out) {
    for (auto m : {Metric::Latency, Metric::Traffic, Metric::Compute}) {
        if (s == metric_name(m)) {
            out = m;
            return true;
        }
    }
    return false;
}

std::int64_t metric_value(const CostReport& r, const ArchSpec& arch, Metric m) {
    switch (m) {
        case Metric::Latency: return r.latency_cycles;
        case Metric::Compute: return r.compute_cycles;
        case Metric::Traffic: {
            std::int64_t bytes = 0;
            for (auto v : kAllTensors)
                bytes += checked_mul(r.traffic[static_cast<int>(v)].total_elems, arch.precision(v));
            return bytes;
        }
    }
    return 0;
}

std::string SearchConfig::check() const {
    if (valid_target < 1) return "valid_target must be at least 1";
    if (samples < valid_target) return "samples must be at least valid_target";
    if (threads < 0) return "threads must be non-negative";
    return {};
}

std::mt19937_64 draw_rng(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) + index));
}

Schedule random_schedule(const PrimeFactorization& pf, const ArchSpec& arch, std::mt19937_64& rng) {
    auto s = empty_schedule(pf, arch);
    const int H = arch.num_levels();
    std::vector<std::vector<std::pair<std::uint64_t, Loop>>> keyed(H);
    for (auto d : kAllDims) {
        for (auto f : pf.of(d)) {
            const int I = static_cast<int>(below(rng, static_cast<std::uint64_t>(H)));
            Mapping m = Mapping::Temporal;
            if (arch.levels[I].spatial_fanout > 1 && below(rng, 2) == 0) m = Mapping::Spatial;
            keyed[I].push_back({rng(), Loop{d, f, m}});
        }
    }
    for (int I = 0; I < H; ++I) {
        // Stable on equal keys, so the result never depends on the sort implementation.
        std::stable_sort(keyed[I].begin(), keyed[I].end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto& [k, loop] : keyed[I]) s.levels[I].push_back(loop);
    }
    return s;
}

SearchResult random_search(const PrimeFactorization& pf, const ArchSpec& arch, const SearchConfig& cfg,
                           const EvalOptions& eval) {
    if (auto why = cfg.check(); !why.empty()) throw std::invalid_argument(why);
    detail::Clock clock;
    SolverOptions so;
    so.threads = cfg.threads;
    const int threads = effective_threads(so);
    const std::int64_t block = 256;

    SearchResult out;
    bool have = false;
    std::vector<Draw> draws;
    for (std::int64_t start = 0; start < cfg.samples && out.stats.valid < cfg.valid_target; start += block) {
        const std::int64_t n = std::min(block, cfg.samples - start);
        draws.assign(static_cast<std::size_t>(n), Draw{});
        auto work = [&](int w) {
            for (std::int64_t i = w; i < n; i += threads) {
                auto rng = draw_rng(cfg.seed, static_cast<std::uint64_t>(start + i));
                auto& d = draws[static_cast<std::size_t>(i)];
                d.schedule = random_schedule(pf, arch, rng);
                if (!validate(d.schedule, arch).empty()) continue;
                d.valid = true;
                d.report = evaluate(d.schedule, arch, eval, false);
                d.metric = metric_value(d.report, arch, cfg.metric);
            }
        };
        if (threads == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
            for (auto& t : pool) t.join();
        }
        // Fold in draw order so the answer does not depend on the worker count.
        for (auto& d : draws) {
            ++out.stats.draws;
            if (!d.valid) continue;
            ++out.stats.valid;
            if (!have || d.metric < out.metric) {
                have = true;
                out.metric = d.metric;
                out.best = std::move(d.schedule);
                out.report = d.report;
            }
            if (out.stats.valid >= cfg.valid_target) break;
        }
    }
    out.stats.wall_seconds = clock.seconds();
    if (!have) {
        throw NoValidSchedule("no valid schedule in " + std::to_string(out.stats.draws) + " random draws");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration of distinct loop nests.

namespace {

struct LoopKind {
    Dim dim;
    std::int64_t prime;
    int count;
};

struct Slot {
    int level;
    Mapping mapping;
};

class Enumerator {
public:
    Enumerator(const PrimeFactorization& pf, const ArchSpec& arch, std::int64_t limit)
        : pf_(pf), arch_(arch), limit_(limit) {
        for (auto d : kAllDims) {
            std::map<std::int64_t, int> c;
            for (auto f : pf.of(d)) ++c[f];
            for (auto [p, n] : c) kinds_.push_back({d, p, n});
        }
        for (int I = 0; I < arch.num_levels(); ++I) {
            if (arch.levels[I].spatial_fanout > 1) slots_.push_back({I, Mapping::Spatial});
            slots_.push_back({I, Mapping::Temporal});
        }
        counts_.assign(kinds_.size() * slots_.size(), 0);
    }

    std::int64_t count() {
        yield_ = nullptr;
        total_ = 0;
        place(0, 0, kinds_.empty() ? 0 : kinds_[0].count);
        return total_;
    }

    std::int64_t run(const std::function<void(const Schedule&)>& yield) {
        yield_ = &yield;
        total_ = 0;
        place(0, 0, kinds_.empty() ? 0 : kinds_[0].count);
        return total_;
    }

private:
    int& at(std::size_t t, std::size_t c) { return counts_[t * slots_.size() + c]; }

    /// Loops per level for the current counts, in ascending (kind, mapping) code.
    std::vector<std::vector<int>> codes() const {
        std::vector<std::vector<int>> out(arch_.num_levels());
        for (std::size_t t = 0; t < kinds_.size(); ++t) {
            for (std::size_t c = 0; c < slots_.size(); ++c) {
                const int code = static_cast<int>(t) * 2 + static_cast<int>(slots_[c].mapping);
                for (int j = 0; j < counts_[t * slots_.size() + c]; ++j) out[slots_[c].level].push_back(code);
            }
        }
        for (auto& l : out) std::sort(l.begin(), l.end());
        return out;
    }

    Schedule build(const std::vector<std::vector<int>>& lv) const {
        auto s = empty_schedule(pf_, arch_);
        for (std::size_t I = 0; I < lv.size(); ++I) {
            for (int code : lv[I]) {
                const auto& k = kinds_[code / 2];
                s.levels[I].push_back({k.dim, k.prime, static_cast<Mapping>(code % 2)});
            }
        }
        return s;
    }

    // Capacity and fanout only grow as factors are added, so a partial
    // placement that already overflows has no valid completion.
    bool partial_ok() const {
        for (const auto& v : validate(build(codes()), arch_)) {
            if (v.kind != "dimension underflow") return false;
        }
        return true;
    }

    void place(std::size_t t, std::size_t c, int rem) {
        if (t == kinds_.size()) {
            leaf();
            return;
        }
        if (rem == 0 || c + 1 == slots_.size()) {
            at(t, c) += rem;
            if (rem == 0 || partial_ok()) {
                if (t + 1 < kinds_.size()) place(t + 1, 0, kinds_[t + 1].count);
                else leaf();
            }
            at(t, c) -= rem;
            return;
        }
        for (int v = rem; v >= 0; --v) {
            at(t, c) += v;
            if (v == 0 || partial_ok()) place(t, c + 1, rem - v);
            at(t, c) -= v;
        }
    }

    static std::int64_t arrangements(const std::vector<int>& sorted) {
        // Multinomial coefficient, built incrementally so intermediate values stay exact.
        std::int64_t r = 1;
        int run = 0;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            run = i > 0 && sorted[i] == sorted[i - 1] ? run + 1 : 1;
            const std::int64_t num = static_cast<std::int64_t>(i) + 1;
            std::int64_t next;
            if (__builtin_mul_overflow(r, num, &next)) return std::numeric_limits<std::int64_t>::max();
            r = next / run;
        }
        return r;
    }

    void leaf() {
        auto lv = codes();
        if (!yield_) {
            std::int64_t n = 1;
            for (const auto& l : lv) {
                if (__builtin_mul_overflow(n, arrangements(l), &n)) n = std::numeric_limits<std::int64_t>::max();
            }
            if (__builtin_add_overflow(total_, n, &total_) || total_ > limit_) {
                throw SpaceTooLarge("more than " + std::to_string(limit_) + " valid schedules");
            }
            return;
        }
        permute(lv, 0);
    }

    void permute(std::vector<std::vector<int>>& lv, std::size_t I) {
        if (I == lv.size()) {
            (*yield_)(build(lv));
            ++total_;
            return;
        }
        do {
            permute(lv, I + 1);
        } while (std::next_permutation(lv[I].begin(), lv[I].end()));
    }

    const PrimeFactorization& pf_;
    const ArchSpec& arch_;
    std::int64_t limit_;
    std::vector<LoopKind> kinds_;
    std::vector<Slot> slots_;
    std::vector<int> counts_;
    const std::function<void(const Schedule&)>* yield_ = nullptr;
    std::int64_t total_ = 0;
};

}  // namespace

std::int64_t count_valid(const PrimeFactorization& pf, const ArchSpec& arch, std::int64_t limit) {
    return Enumerator(pf, arch, limit).count();
}

std::int64_t enumerate_all(const PrimeFactorization& pf, const ArchSpec& arch, std::int64_t limit,
                           const std::function<void(const Schedule&)>& yield) {
    Enumerator e(pf, arch, limit);
    e.count();
    return e.run(yield);
}

}  // namespace cosa
