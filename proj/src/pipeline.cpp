#include "cosa/pipeline.hpp"

#include <cmath>
#include <limits>

#include "solver_common.hpp"

namespace cosa {

namespace {

/// Cap a buffer just below what the rejected schedule used, so the next solve
/// must pick a smaller tile there. Returns false when nothing could be tightened.
bool tighten(FormulationOptions& fo, const Schedule& s, const ArchSpec& arch, const std::vector<Violation>& bad) {
    bool changed = false;
    auto cap = [&](int I, Tensor v) {
        const std::int64_t plain = tile_elems(s, arch, I, v);
        if (plain <= 1) return;
        const std::pair<int, int> key{I, static_cast<int>(v)};
        auto it = fo.capacity_override.find(key);
        const std::int64_t next = plain - 1;
        if (it == fo.capacity_override.end() || it->second > next) {
            fo.capacity_override[key] = next;
            changed = true;
        }
    };
    for (const auto& v : bad) {
        if (v.kind == "capacity overflow") {
            cap(v.level, static_cast<Tensor>(v.tensor));
        } else if (v.kind == "shared capacity overflow") {
            // Shrink the largest resident tensor.
            Tensor worst = Tensor::W;
            std::int64_t most = -1;
            for (auto t : kAllTensors) {
                if (!arch.stores(v.level, t)) continue;
                const std::int64_t bytes = tile_elems(s, arch, v.level, t) * arch.precision(t);
                if (bytes > most) {
                    most = bytes;
                    worst = t;
                }
            }
            cap(v.level, worst);
        }
    }
    return changed;
}

}  // namespace

std::int64_t partition_bytes(const ScheduleModel& model, const std::vector<int>& picks) {
    std::int64_t total = 0;
    for (std::size_t p = 0; p < picks.size(); ++p) {
        const auto& pair = model.partitions[p];
        total += (std::int64_t{1} << pair.exponents.at(picks[p])) * model.arch.precision(pair.tensor);
    }
    return total;
}

LayerRun solve_layer(const LayerDims& layer, const ArchSpec& arch, const RunOptions& opts) {
    detail::Clock clock;
    LayerRun run;
    const auto pf = factorize(layer, opts.padding);
    FormulationOptions fo = opts.formulation;
    for (;;) {
        run.model = build_model(pf, arch, fo);
        SolverOptions so = opts.solver;
        so.time_limit_s = std::max(0.0, opts.solver.time_limit_s - clock.seconds());
        run.solution = solve(run.model, so);
        run.status = run.solution.status;
        run.schedule.reset();
        run.report.reset();
        run.picks.clear();
        run.arch = arch;
        if (!run.solution.has_assignment()) break;

        run.picks = run.model.partition_picks(run.solution.assignment);
        run.arch = run.model.partitions.empty() ? arch : apply_partition(run.model, run.picks);
        auto s = decode(run.model, run.solution.assignment);
        const auto bad = validate(s, run.arch, opts.validate);
        if (bad.empty()) {
            run.report = evaluate(s, run.arch, opts.eval, false);
            run.schedule = std::move(s);
            break;
        }
        if (run.tighten_rounds >= opts.max_tighten || !tighten(fo, s, arch, bad)) {
            throw std::logic_error("solver schedule fails validation: " + bad.front().message);
        }
        ++run.tighten_rounds;
        if (run.status == SolveStatus::Timeout) break;
    }
    run.wall_seconds = clock.seconds();
    return run;
}

std::vector<ObjectiveWeights> weight_grid(const std::vector<double>& w_util, const std::vector<double>& w_comp,
                                          const std::vector<double>& w_traffic) {
    std::vector<ObjectiveWeights> out;
    for (double u : w_util) {
        for (double c : w_comp) {
            for (double t : w_traffic) {
                if (u == 0.0 && c == 0.0 && t == 0.0) continue;
                ObjectiveWeights w;
                w.w_util = u;
                w.w_comp = c;
                w.w_traffic = t;
                w.mode = ObjectiveMode::Combined;
                out.push_back(w);
            }
        }
    }
    return out;
}

std::vector<SweepPoint> sweep(const LayerDims& layer, const ArchSpec& arch,
                              const std::vector<ObjectiveWeights>& grid, const RunOptions& opts) {
    std::vector<SweepPoint> out;
    for (const auto& w : grid) {
        RunOptions o = opts;
        o.formulation.weights = w;
        const auto run = solve_layer(layer, arch, o);
        SweepPoint p;
        p.weights = w;
        p.status = run.status;
        if (run.report) p.latency = run.report->latency_cycles;
        p.wall_seconds = run.wall_seconds;
        out.push_back(p);
    }
    return out;
}

std::vector<LayerDims> calibration_benchmarks() {
    // Pointwise, depthwise-like, 3x3 and fully connected shapes; none of them
    // belongs to the evaluation suite.
    return {
        LayerDims::make(1, 1, 8, 8, 32, 32, 1),
        LayerDims::make(3, 3, 8, 8, 16, 16, 1),
        LayerDims::make(1, 1, 1, 1, 256, 128, 4),
        LayerDims::make(5, 5, 6, 6, 8, 24, 1),
    };
}

Calibration calibrate_weights(const std::vector<LayerDims>& bench, const ArchSpec& arch,
                              const std::vector<ObjectiveWeights>& grid, const RunOptions& opts) {
    if (grid.empty()) throw std::invalid_argument("empty weight grid");
    Calibration cal;
    std::vector<std::vector<SweepPoint>> per_layer;
    for (const auto& L : bench) per_layer.push_back(sweep(L, arch, grid, opts));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double logsum = 0.0;
        bool ok = true;
        for (const auto& pts : per_layer) {
            if (!pts[g].latency || pts[g].status != SolveStatus::Optimal) {
                ok = false;
                break;
            }
            logsum += std::log(static_cast<double>(*pts[g].latency));
        }
        const double gm = ok ? std::exp(logsum / static_cast<double>(bench.size()))
                             : std::numeric_limits<double>::infinity();
        cal.geomean_latency.push_back(gm);
        if (gm < best) {
            best = gm;
            cal.best = grid[g];
        }
    }
    if (best == std::numeric_limits<double>::infinity()) throw std::runtime_error("no weight triple solved every benchmark");
    return cal;
}

Comparison compare_layer(const LayerDims& layer, const ArchSpec& arch, const RunOptions& opts,
                         const SearchConfig& search) {
    Comparison c;
    c.solver = solve_layer(layer, arch, opts);
    if (!c.solver.report) return c;
    c.solver_metric = metric_value(*c.solver.report, c.solver.arch, search.metric);
    try {
        c.random = random_search(factorize(layer, opts.padding), arch, search, opts.eval);
        c.ratio = c.solver_metric > 0 ? static_cast<double>(c.random->metric) / static_cast<double>(c.solver_metric) : 0.0;
    } catch (const NoValidSchedule&) {
        c.random.reset();
    }
    return c;
}

}  // namespace cosa
