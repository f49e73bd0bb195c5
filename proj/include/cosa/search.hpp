#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include "cosa/architecture.hpp"
#include "cosa/costmodel.hpp"
#include "cosa/schedule.hpp"
#include "cosa/solver.hpp"
#include "cosa/workload.hpp"

namespace cosa {

enum class Metric { Latency, Traffic, Compute };

const char* metric_name(Metric m);
bool parse_metric(const std::string& s, Metric& out);

/// Metric value of a report: latency cycles, NoC bytes or compute cycles.
std::int64_t metric_value(const CostReport& r, const ArchSpec& arch, Metric m);

struct SearchConfig {
    std::int64_t samples = 20000;
    std::int64_t valid_target = 5;  // stop after this many valid schedules
    std::uint64_t seed = 0;
    Metric metric = Metric::Latency;
    int threads = 0;  // 0 means COSA_THREADS or 1

    /// Empty string when valid, otherwise the reason.
    std::string check() const;
};

struct SearchStats {
    std::int64_t draws = 0;
    std::int64_t valid = 0;
    double wall_seconds = 0.0;

    double validity_rate() const { return draws ? static_cast<double>(valid) / static_cast<double>(draws) : 0.0; }
};

struct SearchResult {
    Schedule best;
    CostReport report;
    std::int64_t metric = 0;
    SearchStats stats;
};

class NoValidSchedule : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Generator for draw number `index` of a run seeded with `seed`.
std::mt19937_64 draw_rng(std::uint64_t seed, std::uint64_t index);

/// Uniform raw assignment: each prime factor goes to a uniform level, a uniform
/// mapping where the level has fanout, and a uniform position among its level's loops.
/// The result is not necessarily valid.
Schedule random_schedule(const PrimeFactorization& pf, const ArchSpec& arch, std::mt19937_64& rng);

/// Seeded random baseline: keeps drawing until cfg.valid_target valid schedules
/// were seen or cfg.samples draws were made, and returns the best by cfg.metric
/// (earliest draw on ties). Throws NoValidSchedule when no draw was valid.
SearchResult random_search(const PrimeFactorization& pf, const ArchSpec& arch, const SearchConfig& cfg,
                           const EvalOptions& eval = {});

/// Number of distinct valid loop nests; throws SpaceTooLarge once it exceeds `limit`.
std::int64_t count_valid(const PrimeFactorization& pf, const ArchSpec& arch, std::int64_t limit);

/// Calls `yield` once per distinct valid loop nest (prime loops only), in a fixed
/// order, and returns how many were produced. Throws SpaceTooLarge before
/// yielding anything when there are more than `limit`.
std::int64_t enumerate_all(const PrimeFactorization& pf, const ArchSpec& arch, std::int64_t limit,
                           const std::function<void(const Schedule&)>& yield);

}  // namespace cosa
