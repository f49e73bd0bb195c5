// Acceptance run: one PASS/FAIL line per criterion, details indented below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cosa/config_io.hpp"
#include "cosa/pipeline.hpp"
#include "fixtures.hpp"

using namespace cosa;
using namespace cosa::test;

namespace {

// Pinned thresholds.
constexpr int kOracleInstances = 30;
constexpr int kOracleMaxFactors = 8;
constexpr double kOracleBudgetS = 60.0;
constexpr double kDualityRelTol = 1e-9;
constexpr int kRandomSchedules = 1000;
constexpr double kMinSpread = 2.0;
constexpr double kMinWinFraction = 0.9;
constexpr double kSolveBudgetS = 30.0;
constexpr std::int64_t kRandomDraws = 20000;
constexpr int kRoundTrips = 1000;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Criterion {
    int id;
    std::string name;
    bool pass = true;
    std::vector<std::string> notes;

    void fail(const std::string& why) {
        pass = false;
        notes.push_back("failure: " + why);
    }
    void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

const std::vector<std::string> kSuiteNames = {"table2", "listing1", "resnet3x3", "fig8"};

/// Valid random schedules of a layer, drawn with a fixed seed.
std::vector<Schedule> random_valid(const LayerDims& layer, const ArchSpec& arch, int count, std::uint64_t seed) {
    const auto pf = factorize(layer);
    std::vector<Schedule> out;
    for (std::uint64_t i = 0; static_cast<int>(out.size()) < count && i < 10'000'000; ++i) {
        auto rng = draw_rng(seed, i);
        auto s = random_schedule(pf, arch, rng);
        if (validate(s, arch).empty()) out.push_back(std::move(s));
    }
    return out;
}

bool rel_close(double a, double b) { return std::abs(a - b) <= kDualityRelTol * std::max(1.0, std::abs(b)); }

// 1 ----------------------------------------------------------------------
void oracle_optimality(Criterion& c) {
    std::mt19937_64 rng(1);
    const auto arch = oracle_arch();
    const auto t0 = std::chrono::steady_clock::now();
    int same = 0, max_z = 0;
    for (int i = 0; i < kOracleInstances; ++i) {
        const auto layer = random_small_layer(rng, kOracleMaxFactors);
        const auto m = build_model(factorize(layer), arch);
        max_z = std::max(max_z, m.Z);
        const auto a = solve(m);
        const auto b = exhaustive_solve(m);
        if (a.status == SolveStatus::Optimal && b.status == SolveStatus::Optimal &&
            a.objective_value == b.objective_value && a.assignment == b.assignment) {
            ++same;
        } else {
            c.fail("instance " + layer.to_string() + ": solver " + fmt(a.objective_value, 12) + " vs oracle " +
                   fmt(b.objective_value, 12));
        }
    }
    const double wall = seconds_since(t0);
    c.note(std::to_string(same) + "/" + std::to_string(kOracleInstances) + " identical (up to " +
           std::to_string(max_z) + " factors, 3 levels), " + fmt(wall, 3) + " s");
    if (wall >= kOracleBudgetS) c.fail("took " + fmt(wall) + " s");
}

// 2 ----------------------------------------------------------------------
void suite_validity(Criterion& c, const std::vector<LayerRun>& runs, const ArchSpec& arch) {
    int ok = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        if (!r.schedule) {
            c.fail(kSuiteNames[i] + ": no schedule (" + solve_status_name(r.status) + ")");
            continue;
        }
        const auto bad = validate(*r.schedule, arch);
        if (bad.empty()) ++ok;
        else c.fail(kSuiteNames[i] + ": " + bad.front().message);
        c.note(kSuiteNames[i] + ": " + solve_status_name(r.status) + ", " + std::to_string(r.tighten_rounds) +
               " re-solves");
    }
    c.note(std::to_string(ok) + "/" + std::to_string(runs.size()) + " valid");
}

// 3 ----------------------------------------------------------------------
void duality(Criterion& c, const std::vector<LayerRun>& runs, const ArchSpec& arch) {
    std::vector<std::pair<std::string, Schedule>> cases = {{"table2 reference", table2_schedule()},
                                                           {"listing1 reference", listing1_schedule()}};
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].schedule) cases.push_back({kSuiteNames[i] + " solved", *runs[i].schedule});
    }
    double worst = 0.0;
    int terms = 0;
    for (const auto& [name, s] : cases) {
        const auto m = build_model(factorize(s.layer), arch);
        const auto x = encode(m, s);
        const auto r = evaluate(s, arch);
        std::vector<std::pair<double, double>> pairs = {
            {m.util.eval(x), r.log2_util_sum(arch)},
            {m.comp.eval(x), std::log2(static_cast<double>(r.compute_cycles))},
            {m.traffic.eval(x), r.log2_traffic_sum()}};
        for (int v = 0; v < kNumTensors; ++v) {
            const auto& t = r.traffic[v];
            pairs.push_back({m.D[v].eval(x), std::log2(static_cast<double>(t.per_transfer_elems))});
            pairs.push_back({m.L[v].eval(x), std::log2(static_cast<double>(t.link_multiplier))});
            pairs.push_back({m.T[v].eval(x), std::log2(static_cast<double>(t.iterations))});
        }
        for (const auto& [lin, prod] : pairs) {
            ++terms;
            worst = std::max(worst, std::abs(lin - prod) / std::max(1.0, std::abs(prod)));
            if (!rel_close(lin, prod)) c.fail(name + ": " + fmt(lin, 15) + " vs " + fmt(prod, 15));
        }
    }
    c.note(std::to_string(terms) + " terms over " + std::to_string(cases.size()) + " schedules, worst relative error " +
           fmt(worst, 3));
}

// 4 ----------------------------------------------------------------------
void compute_conservation(Criterion& c, const std::vector<LayerRun>& runs, const ArchSpec& arch) {
    auto check = [&](const Schedule& s, const std::string& what) {
        std::int64_t total = 1;
        for (auto d : kAllDims) total *= s.padded[d];
        const auto r = evaluate(s, arch);
        if (r.compute_cycles * r.spatial_product != total) {
            c.fail(what + ": " + std::to_string(r.compute_cycles) + " x " + std::to_string(r.spatial_product) +
                   " != " + std::to_string(total));
            return false;
        }
        return true;
    };
    int ok = 0, n = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (!runs[i].schedule) continue;
        ++n;
        ok += check(*runs[i].schedule, kSuiteNames[i]);
    }
    // Random schedules, spread over the suite.
    const auto layers = suite_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto pool = random_valid(layers[l], arch, kRandomSchedules / static_cast<int>(layers.size()), 100 + l);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            ++n;
            ok += check(pool[i], kSuiteNames[l] + " random " + std::to_string(i));
        }
    }
    c.note(std::to_string(ok) + "/" + std::to_string(n) + " schedules conserve the padded iteration space");
}

// 5 ----------------------------------------------------------------------
void latency_spread(Criterion& c, const ArchSpec& arch) {
    const auto schedules = random_valid(resnet_layer(), arch, kRandomSchedules, 7);
    if (static_cast<int>(schedules.size()) < kRandomSchedules) {
        c.fail("only " + std::to_string(schedules.size()) + " valid schedules found");
        return;
    }
    std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = 0;
    for (const auto& s : schedules) {
        const auto r = evaluate(s, arch);
        lo = std::min(lo, r.latency_cycles);
        hi = std::max(hi, r.latency_cycles);
    }
    const double spread = static_cast<double>(hi) / static_cast<double>(lo);
    c.note(std::to_string(schedules.size()) + " valid schedules, latency " + std::to_string(lo) + " .. " +
           std::to_string(hi) + ", spread " + fmt(spread));
    if (spread < kMinSpread) c.fail("spread below " + fmt(kMinSpread));
}

// 6 ----------------------------------------------------------------------
struct SolverVsRandom {
    int wins = 0;
    double geomean_ratio = 0.0;
    std::vector<std::string> rows;
};

SolverVsRandom solver_vs_random(const std::vector<LayerRun>& runs, const ArchSpec& arch, std::uint64_t seed) {
    SolverVsRandom out;
    const auto layers = suite_layers();
    double logsum = 0.0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (!runs[i].report) continue;
        SearchConfig cfg;
        cfg.seed = seed;
        cfg.valid_target = 5;
        const auto rnd = random_search(factorize(layers[i]), arch, cfg);
        const auto mine = runs[i].report->latency_cycles;
        const double ratio = static_cast<double>(rnd.metric) / static_cast<double>(mine);
        out.wins += mine <= rnd.metric;
        logsum += std::log(ratio);
        out.rows.push_back(kSuiteNames[i] + ": solver " + std::to_string(mine) + ", best of 5 random " +
                           std::to_string(rnd.metric) + ", ratio " + fmt(ratio));
    }
    out.geomean_ratio = std::exp(logsum / static_cast<double>(layers.size()));
    return out;
}

void beats_random(Criterion& c, const std::vector<LayerRun>& calibrated, const std::vector<LayerRun>& plain,
                  const ArchSpec& arch, const Calibration& cal) {
    c.note("weights calibrated on " + std::to_string(calibration_benchmarks().size()) +
           " benchmark layers outside the suite: wU=" + fmt(cal.best.w_util) + " wC=" + fmt(cal.best.w_comp) +
           " wT=" + fmt(cal.best.w_traffic));
    const auto main = solver_vs_random(calibrated, arch, 0);
    for (const auto& r : main.rows) c.note(r);
    const double frac = static_cast<double>(main.wins) / static_cast<double>(suite_layers().size());
    c.note("solver <= random on " + std::to_string(main.wins) + "/" + std::to_string(suite_layers().size()) +
           " layers, geomean random/solver latency " + fmt(main.geomean_ratio));
    if (frac < kMinWinFraction) c.fail("win fraction " + fmt(frac));

    int wins = 0, total = 0;
    for (std::uint64_t seed = 1; seed < 10; ++seed) {
        const auto r = solver_vs_random(calibrated, arch, seed);
        wins += r.wins;
        total += static_cast<int>(suite_layers().size());
    }
    c.note("other seeds 1..9: solver <= random on " + std::to_string(wins) + "/" + std::to_string(total));
    const auto dflt = solver_vs_random(plain, arch, 0);
    c.note("unit weights (for reference): solver <= random on " + std::to_string(dflt.wins) + "/" +
           std::to_string(suite_layers().size()) + ", geomean ratio " + fmt(dflt.geomean_ratio));
}

// 7 ----------------------------------------------------------------------
void solve_time(Criterion& c, const std::vector<LayerRun>& calibrated, const std::vector<LayerRun>& plain,
                const ArchSpec& arch) {
    const auto layers = suite_layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        SearchConfig cfg;
        cfg.samples = kRandomDraws;
        cfg.valid_target = kRandomDraws;
        const auto rnd = random_search(factorize(layers[i]), arch, cfg);
        c.note(kSuiteNames[i] + ": solve " + fmt(calibrated[i].wall_seconds, 3) + " s (unit weights " +
               fmt(plain[i].wall_seconds, 3) + " s), random search " + std::to_string(rnd.stats.draws) +
               " draws " + fmt(rnd.stats.wall_seconds, 3) + " s");
        for (const auto* r : {&calibrated[i], &plain[i]}) {
            if (r->wall_seconds > kSolveBudgetS || r->status != SolveStatus::Optimal) {
                c.fail(kSuiteNames[i] + ": " + solve_status_name(r->status) + " after " + fmt(r->wall_seconds) + " s");
            }
        }
        if (rnd.stats.wall_seconds > kSolveBudgetS) c.fail(kSuiteNames[i] + ": random search over budget");
    }
}

// 8 ----------------------------------------------------------------------
void partition(Criterion& c, const ArchSpec& arch) {
    const std::int64_t G = baseline_partition_bytes(arch);
    const auto layers = suite_layers();
    int within = 0, runs = 0, not_worse = 0;
    auto coopt = [&](const LayerDims& layer, std::int64_t budget) {
        RunOptions o;
        o.formulation.partition = PartitionSpec{budget, 4, std::nullopt};
        o.solver.time_limit_s = 60;
        return solve_layer(layer, arch, o);
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto fixed = solve_layer(layers[i], arch, {});
        const auto co = coopt(layers[i], G);
        ++runs;
        const auto bytes = partition_bytes(co.model, co.picks);
        within += bytes <= G;
        const bool ok = co.status == SolveStatus::Optimal &&
                        co.solution.objective_value <= fixed.solution.objective_value + 1e-9;
        not_worse += ok;
        c.note(kSuiteNames[i] + " at G=" + std::to_string(G) + ": " + std::to_string(bytes) + " bytes, objective " +
               fmt(co.solution.objective_value, 8) + " vs fixed " + fmt(fixed.solution.objective_value, 8));
        if (!ok) c.fail(kSuiteNames[i] + ": co-optimized objective above the fixed one");
    }
    // Tighter budgets on the layers that solve quickly.
    for (std::size_t i : {0u, 1u, 3u}) {
        const auto co = coopt(layers[i], G / 8);
        ++runs;
        const auto bytes = partition_bytes(co.model, co.picks);
        within += co.schedule && bytes <= G / 8;
        c.note(kSuiteNames[i] + " at G=" + std::to_string(G / 8) + ": " + std::to_string(bytes) + " bytes");
    }
    if (within != runs) c.fail("budget exceeded");
    c.note("(a) " + std::to_string(within) + "/" + std::to_string(runs) + " runs within budget; (b) " +
           std::to_string(not_worse) + "/" + std::to_string(layers.size()) + " not worse than fixed");

    // (c) A weight-heavy and an activation-heavy layer under one shared budget.
    const auto small = oracle_arch();
    const LayerDims wheavy = LayerDims::make(1, 1, 1, 1, 2, 8, 1);
    const LayerDims aheavy = LayerDims::make(1, 1, 8, 2, 1, 1, 1);
    FormulationOptions fo;
    fo.partition = PartitionSpec{48, 1, 5};
    std::vector<std::vector<int>> picks;
    for (const auto& L : {wheavy, aheavy}) {
        const auto m = build_model(factorize(L), small, fo);
        const auto ex = exhaustive_solve(m);
        const auto so = solve(m);
        if (ex.status != SolveStatus::Optimal || so.assignment != ex.assignment) {
            c.fail("crafted layer " + L.to_string() + ": solver and oracle disagree");
        }
        picks.push_back(m.partition_picks(ex.assignment));
        std::string desc;
        for (std::size_t p = 0; p < m.partitions.size(); ++p) {
            desc += std::string(p ? ", " : "") + tensor_name(m.partitions[p].tensor) + "=" +
                    std::to_string(std::int64_t{1} << m.partitions[p].exponents[picks.back()[p]]);
        }
        c.note("(c) " + L.to_string() + ": oracle partition " + desc + " elements");
    }
    if (picks[0] == picks[1]) c.fail("crafted pair got the same partition");
}

// 9 ----------------------------------------------------------------------
void serialization(Criterion& c, const ArchSpec& arch) {
    int ok = 0;
    std::mt19937_64 rng(9);
    const auto layers = suite_layers();
    for (int i = 0; i < kRoundTrips; ++i) {
        const auto s = random_schedule(factorize(layers[i % 4]), arch, rng);
        if (parse_schedule(serialize(s)) == s) ++ok;
    }
    c.note(std::to_string(ok) + "/" + std::to_string(kRoundTrips) + " schedules survive serialize then parse");
    if (ok != kRoundTrips) c.fail("round trip mismatch");
    const auto golden = read_file(std::string(COSA_SOURCE_DIR) + "/tests/golden/table2.render");
    const bool same = render(table2_schedule()) == golden;
    c.note(std::string("table2 render ") + (same ? "matches" : "differs from") + " the golden file (" +
           std::to_string(golden.size()) + " bytes)");
    if (!same) c.fail("golden render mismatch");
}

// 10 ---------------------------------------------------------------------
void determinism(Criterion& c, const ArchSpec& arch, const ObjectiveWeights& w) {
    const auto layers = suite_layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        std::vector<double> first;
        Schedule first_random;
        for (int t : {1, 4, 8}) {
            RunOptions o;
            o.formulation.weights = w;
            o.solver.threads = t;
            const auto run = solve_layer(layers[i], arch, o);
            SearchConfig cfg;
            cfg.threads = t;
            cfg.valid_target = 50;
            const auto rnd = random_search(factorize(layers[i]), arch, cfg);
            if (t == 1) {
                first = run.solution.assignment;
                first_random = rnd.best;
            } else {
                if (run.solution.assignment != first) c.fail(kSuiteNames[i] + ": solver differs at " + std::to_string(t) + " workers");
                if (!(rnd.best == first_random)) c.fail(kSuiteNames[i] + ": random search differs at " + std::to_string(t) + " workers");
            }
        }
    }
    c.note("solver and random search compared at 1, 4 and 8 workers on " + std::to_string(layers.size()) + " layers");
}

}  // namespace

int main() {
    const auto arch = default_simba_arch();
    std::vector<Criterion> cs = {
        {1, "solver matches exhaustive search on small instances"},
        {2, "suite schedules are valid"},
        {3, "log-domain terms match the product-domain cost model"},
        {4, "compute cycles times spatial product equals the padded iteration space"},
        {5, "random valid schedules differ in latency by at least 2x"},
        {6, "solver latency at or below best-of-5 random search"},
        {7, "suite layers solve within the time budget"},
        {8, "buffer partition co-optimization"},
        {9, "schedule text round trip and golden render"},
        {10, "results are independent of the worker count"},
    };

    const auto t0 = std::chrono::steady_clock::now();
    const auto layers = suite_layers();
    const auto cal = calibrate_weights(calibration_benchmarks(), arch,
                                       weight_grid({0.5, 1}, {1, 2, 4, 8}, {0, 0.5, 1, 2}), {});
    std::vector<LayerRun> plain, tuned;
    for (const auto& L : layers) {
        plain.push_back(solve_layer(L, arch, {}));
        RunOptions o;
        o.formulation.weights = cal.best;
        tuned.push_back(solve_layer(L, arch, o));
    }

    const std::vector<std::function<void(Criterion&)>> checks = {
        [&](Criterion& c) { oracle_optimality(c); },
        [&](Criterion& c) {
            suite_validity(c, plain, arch);
            suite_validity(c, tuned, arch);
        },
        [&](Criterion& c) { duality(c, plain, arch); },
        [&](Criterion& c) { compute_conservation(c, plain, arch); },
        [&](Criterion& c) { latency_spread(c, arch); },
        [&](Criterion& c) { beats_random(c, tuned, plain, arch, cal); },
        [&](Criterion& c) { solve_time(c, tuned, plain, arch); },
        [&](Criterion& c) { partition(c, arch); },
        [&](Criterion& c) { serialization(c, arch); },
        [&](Criterion& c) { determinism(c, arch, cal.best); },
    };
    int failed = 0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        auto& c = cs[i];
        try {
            checks[i](c);
        } catch (const std::exception& e) {
            c.fail(std::string("exception: ") + e.what());
        }
        failed += !c.pass;
        std::cout << (c.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << "\n";
        for (const auto& n : c.notes) std::cout << "    " << n << "\n";
        std::cout.flush();
    }
    std::cout << (cs.size() - failed) << "/" << cs.size() << " criteria passed in " << fmt(seconds_since(t0), 3)
              << " s\n";
    return failed ? 1 : 0;
}
