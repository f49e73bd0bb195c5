// Command-line front end: solve, evaluate, compare, partition, sweep, enumerate.
// Tables go to stdout as tab-separated text; wall times go to stderr so stdout
// stays byte-identical across runs.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>

#include "cosa/config_io.hpp"
#include "cosa/pipeline.hpp"

using namespace cosa;

namespace {

enum Exit { kOk = 0, kUsage = 2, kInfeasible = 3, kTimeout = 4, kIo = 5 };

struct Args {
    std::string arch_path;
    std::vector<std::string> layer_paths;
    std::string schedule_path;
    std::string obj = "combined";
    std::string weights;
    std::uint64_t seed = 0;
    std::int64_t samples = 20000;
    std::int64_t valid_target = 5;
    std::string metric = "latency";
    std::optional<std::int64_t> budget;
    double time_limit = 60.0;
    std::string out;
    std::int64_t limit = 1000000;
    bool list = false;
    std::string grid_u = "0.5,1", grid_c = "1,2,4,8", grid_t = "0,0.5,1,2";
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw UsageError(std::string("bad number '") + tok + "' in " + what);
        }
        if (used != tok.size() || v < 0 || !std::isfinite(v)) throw UsageError(std::string("bad number '") + tok + "' in " + what);
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(std::string("empty list in ") + what);
    return out;
}

ArchSpec load_arch(const Args& a) {
    ArchSpec arch = a.arch_path.empty() ? default_simba_arch() : parse_arch(read_file(a.arch_path));
    const auto diags = validate_arch(arch);
    if (!diags.empty()) throw ConfigError(0, "invalid architecture: " + diags.front().message);
    return arch;
}

std::vector<NamedLayer> load_layers(const Args& a) {
    if (a.layer_paths.empty()) throw UsageError("--layer is required");
    std::vector<NamedLayer> out;
    for (const auto& p : a.layer_paths) {
        auto ls = parse_layers(read_file(p));
        out.insert(out.end(), ls.begin(), ls.end());
    }
    return out;
}

RunOptions run_options(const Args& a) {
    RunOptions o;
    auto& w = o.formulation.weights;
    if (!parse_objective_mode(a.obj, w.mode)) throw UsageError("unknown objective '" + a.obj + "'");
    if (!a.weights.empty()) {
        const auto v = parse_list(a.weights, "--weights");
        if (v.size() != 3) throw UsageError("--weights expects wU,wC,wT");
        w.w_util = v[0];
        w.w_comp = v[1];
        w.w_traffic = v[2];
    }
    if (auto why = w.check(); !why.empty()) throw UsageError(why);
    if (a.budget) o.formulation.partition = PartitionSpec{*a.budget, 4, std::nullopt};
    if (!(a.time_limit > 0)) throw UsageError("--time-limit must be positive");
    o.solver.time_limit_s = a.time_limit;
    return o;
}

SearchConfig search_config(const Args& a) {
    SearchConfig c;
    c.samples = a.samples;
    c.valid_target = a.valid_target;
    c.seed = a.seed;
    if (!parse_metric(a.metric, c.metric)) throw UsageError("unknown metric '" + a.metric + "'");
    if (auto why = c.check(); !why.empty()) throw UsageError(why);
    return c;
}

int status_exit(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return kOk;
        case SolveStatus::Infeasible: return kInfeasible;
        case SolveStatus::Timeout: return kTimeout;
    }
    return kInfeasible;
}

void print_report(std::ostream& os, const CostReport& r, const ArchSpec& arch) {
    os << "compute_cycles\t" << r.compute_cycles << "\n";
    os << "spatial_product\t" << r.spatial_product << "\n";
    os << "noc_cycles\t" << r.noc_cycles << "\n";
    os << "latency_cycles\t" << r.latency_cycles << "\n";
    for (auto v : kAllTensors) os << "traffic_" << tensor_name(v) << "\t" << r.traffic[static_cast<int>(v)].total_elems << "\n";
    for (int I = 0; I + 1 < arch.num_levels(); ++I) {
        for (auto v : kAllTensors) {
            if (!arch.stores(I, v)) continue;
            os << "util_" << arch.levels[I].name << "_" << tensor_name(v) << "\t" << r.utilization[I][static_cast<int>(v)] << "\n";
        }
    }
}

void print_partition(std::ostream& os, const LayerRun& run) {
    for (std::size_t p = 0; p < run.picks.size(); ++p) {
        const auto& pair = run.model.partitions[p];
        os << "partition_" << run.arch.levels[pair.level].name << "_" << tensor_name(pair.tensor) << "\t"
           << (std::int64_t{1} << pair.exponents[run.picks[p]]) * run.arch.precision(pair.tensor) << "\n";
    }
    if (!run.picks.empty()) os << "partition_total\t" << partition_bytes(run.model, run.picks) << "\n";
}

void log_run(const std::string& what, const LayerRun& run) {
    std::cerr << what << ": " << solve_status_name(run.status) << " nodes=" << run.solution.stats.nodes
              << " resolves=" << run.tighten_rounds << " wall=" << num(run.wall_seconds) << "s\n";
}

int cmd_solve(const Args& a) {
    const auto arch = load_arch(a);
    const auto layers = load_layers(a);
    if (layers.size() != 1) throw UsageError("solve takes exactly one layer");
    const auto run = solve_layer(layers[0].dims, arch, run_options(a));
    log_run("solve " + layers[0].name, run);
    std::cout << "status\t" << solve_status_name(run.status) << "\n";
    if (!run.schedule) {
        if (run.status == SolveStatus::Infeasible) {
            for (int r : run.solution.infeasible_rows) std::cout << "infeasible_row\t" << run.model.mip.rows()[r].name << "\n";
        }
        return status_exit(run.status);
    }
    std::cout << "objective\t" << num(run.solution.objective_value) << "\n";
    print_partition(std::cout, run);
    print_report(std::cout, *run.report, run.arch);
    std::cout << "\n" << render(*run.schedule);
    if (!a.out.empty()) write_file(a.out, serialize(*run.schedule));
    return status_exit(run.status);
}

int cmd_evaluate(const Args& a) {
    const auto arch = load_arch(a);
    if (a.schedule_path.empty()) throw UsageError("--schedule is required");
    const auto s = parse_schedule(read_file(a.schedule_path));
    const auto bad = validate(s, arch);
    if (!bad.empty()) {
        for (const auto& v : bad) std::cout << "violation\t" << v.kind << "\t" << v.message << "\n";
        return kUsage;
    }
    print_report(std::cout, evaluate(s, arch, {}, false), arch);
    return kOk;
}

int cmd_compare(const Args& a) {
    const auto arch = load_arch(a);
    const auto layers = load_layers(a);
    const auto opts = run_options(a);
    const auto cfg = search_config(a);
    std::cout << "layer\tstatus\tsolver_" << a.metric << "\trandom_" << a.metric << "\tratio\tdraws\tvalid\n";
    double logsum = 0.0;
    int n = 0, worst = kOk;
    for (const auto& L : layers) {
        const auto c = compare_layer(L.dims, arch, opts, cfg);
        log_run("solve " + L.name, c.solver);
        worst = std::max(worst, status_exit(c.solver.status));
        std::cout << L.name << "\t" << solve_status_name(c.solver.status) << "\t";
        if (c.solver.report) std::cout << c.solver_metric;
        else std::cout << "NA";
        if (c.random) {
            std::cerr << "random " << L.name << ": wall=" << num(c.random->stats.wall_seconds) << "s\n";
            std::cout << "\t" << c.random->metric << "\t";
            if (c.solver.report) {
                std::cout << num(c.ratio);
                logsum += std::log(c.ratio);
                ++n;
            } else {
                std::cout << "NA";
            }
            std::cout << "\t" << c.random->stats.draws << "\t" << c.random->stats.valid << "\n";
        } else {
            std::cout << "\tNA\tNA\t" << cfg.samples << "\t0\n";
        }
    }
    if (n > 0) std::cout << "geomean\t\t\t\t" << num(std::exp(logsum / n)) << "\t\t\n";
    return worst;
}

int cmd_partition(const Args& a) {
    const auto arch = load_arch(a);
    const auto layers = load_layers(a);
    Args fixed_args = a;
    fixed_args.budget.reset();
    const auto fixed_opts = run_options(fixed_args);
    Args co_args = a;
    if (!co_args.budget) co_args.budget = baseline_partition_bytes(arch);
    const auto co_opts = run_options(co_args);
    std::cout << "layer\tbuffer\tbytes\n";
    std::ostringstream summary;
    summary << "layer\tstatus\tbudget\ttotal_bytes\tfixed_objective\tcoopt_objective\tfixed_latency\tcoopt_latency\n";
    int worst = kOk;
    for (const auto& L : layers) {
        const auto fixed = solve_layer(L.dims, arch, fixed_opts);
        const auto co = solve_layer(L.dims, arch, co_opts);
        log_run("fixed " + L.name, fixed);
        log_run("partition " + L.name, co);
        worst = std::max({worst, status_exit(fixed.status), status_exit(co.status)});
        for (std::size_t p = 0; p < co.picks.size(); ++p) {
            const auto& pair = co.model.partitions[p];
            std::cout << L.name << "\t" << arch.levels[pair.level].name << "." << tensor_name(pair.tensor) << "\t"
                      << (std::int64_t{1} << pair.exponents[co.picks[p]]) * arch.precision(pair.tensor) << "\n";
        }
        auto obj = [](const LayerRun& r) { return r.schedule ? num(r.solution.objective_value) : std::string("NA"); };
        auto lat = [](const LayerRun& r) { return r.report ? std::to_string(r.report->latency_cycles) : std::string("NA"); };
        summary << L.name << "\t" << solve_status_name(co.status) << "\t" << *co_args.budget << "\t"
                << (co.schedule ? std::to_string(partition_bytes(co.model, co.picks)) : std::string("NA")) << "\t"
                << obj(fixed) << "\t" << obj(co) << "\t" << lat(fixed) << "\t" << lat(co) << "\n";
        if (!a.out.empty() && co.schedule && layers.size() == 1) write_file(a.out, serialize(*co.schedule));
    }
    std::cout << "\n" << summary.str();
    return worst;
}

int cmd_sweep(const Args& a) {
    const auto arch = load_arch(a);
    const auto layers = load_layers(a);
    const auto opts = run_options(a);
    const auto grid = weight_grid(parse_list(a.grid_u, "--grid-u"), parse_list(a.grid_c, "--grid-c"),
                                  parse_list(a.grid_t, "--grid-t"));
    if (grid.empty()) throw UsageError("weight grid has no nonzero triple");
    std::cout << "layer\tw_util\tw_comp\tw_traffic\tstatus\tlatency\tbest\n";
    std::vector<double> logsum(grid.size(), 0.0);
    std::vector<bool> complete(grid.size(), true);
    int worst = kOk;
    for (const auto& L : layers) {
        const auto pts = sweep(L.dims, arch, grid, opts);
        std::int64_t best = std::numeric_limits<std::int64_t>::max();
        for (const auto& p : pts)
            if (p.latency) best = std::min(best, *p.latency);
        for (std::size_t g = 0; g < pts.size(); ++g) {
            const auto& p = pts[g];
            std::cerr << "sweep " << L.name << " " << num(p.weights.w_util) << "," << num(p.weights.w_comp) << ","
                      << num(p.weights.w_traffic) << ": wall=" << num(p.wall_seconds) << "s\n";
            worst = std::max(worst, status_exit(p.status));
            std::cout << L.name << "\t" << num(p.weights.w_util) << "\t" << num(p.weights.w_comp) << "\t"
                      << num(p.weights.w_traffic) << "\t" << solve_status_name(p.status) << "\t"
                      << (p.latency ? std::to_string(*p.latency) : "NA") << "\t"
                      << (p.latency && *p.latency == best ? "*" : "") << "\n";
            if (p.latency) logsum[g] += std::log(static_cast<double>(*p.latency));
            else complete[g] = false;
        }
    }
    if (layers.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::vector<double> gm(grid.size(), best);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            if (complete[g]) gm[g] = std::exp(logsum[g] / static_cast<double>(layers.size()));
            best = std::min(best, gm[g]);
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
            std::cout << "geomean\t" << num(grid[g].w_util) << "\t" << num(grid[g].w_comp) << "\t"
                      << num(grid[g].w_traffic) << "\t" << (complete[g] ? "complete" : "incomplete") << "\t"
                      << (complete[g] ? num(gm[g]) : "NA") << "\t" << (complete[g] && gm[g] == best ? "*" : "")
                      << "\n";
        }
    }
    return worst;
}

int cmd_enumerate(const Args& a) {
    const auto arch = load_arch(a);
    const auto layers = load_layers(a);
    if (layers.size() != 1) throw UsageError("enumerate takes exactly one layer");
    const auto pf = factorize(layers[0].dims);
    std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = 0, index = 0;
    if (a.list) std::cout << "index\tcompute_cycles\tnoc_cycles\tlatency_cycles\n";
    const auto n = enumerate_all(pf, arch, a.limit, [&](const Schedule& s) {
        const auto r = evaluate(s, arch, {}, false);
        lo = std::min(lo, r.latency_cycles);
        hi = std::max(hi, r.latency_cycles);
        if (a.list) std::cout << index << "\t" << r.compute_cycles << "\t" << r.noc_cycles << "\t" << r.latency_cycles << "\n";
        ++index;
    });
    if (a.list) std::cout << "\n";
    std::cout << "valid_schedules\t" << n << "\n";
    if (n > 0) {
        std::cout << "min_latency\t" << lo << "\nmax_latency\t" << hi << "\n";
        std::cout << "spread\t" << num(static_cast<double>(hi) / static_cast<double>(lo)) << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"One-shot MIP scheduler for spatial DNN accelerators"};
    app.require_subcommand(1);
    Args a;

    auto common = [&](CLI::App* c) {
        c->add_option("--arch", a.arch_path, "architecture file (default: built-in Simba-like arch)");
        c->add_option("--obj", a.obj, "objective: util|comp|traffic|combined|balance");
        c->add_option("--weights", a.weights, "objective weights wU,wC,wT");
        c->add_option("--time-limit", a.time_limit, "solver time limit in seconds");
        c->add_option("--budget", a.budget, "partition budget in bytes (enables buffer partitioning)");
        c->add_option("--out", a.out, "schedule output file");
    };
    auto layer_opt = [&](CLI::App* c) { c->add_option("--layer", a.layer_paths, "layer file(s)")->required(); };
    auto search_opts = [&](CLI::App* c) {
        c->add_option("--seed", a.seed, "random seed");
        c->add_option("--samples", a.samples, "random draws");
        c->add_option("--valid-target", a.valid_target, "stop after this many valid draws");
        c->add_option("--metric", a.metric, "latency|traffic|compute");
    };

    auto* solve = app.add_subcommand("solve", "solve one layer and print the loop nest and cost report");
    common(solve);
    layer_opt(solve);
    auto* evaluate = app.add_subcommand("evaluate", "validate and cost a schedule file");
    evaluate->add_option("--arch", a.arch_path, "architecture file");
    evaluate->add_option("--schedule", a.schedule_path, "schedule file")->required();
    auto* compare = app.add_subcommand("compare", "solver versus seeded random search");
    common(compare);
    layer_opt(compare);
    search_opts(compare);
    auto* partition = app.add_subcommand("partition", "co-optimize buffer partitions with the schedule");
    common(partition);
    layer_opt(partition);
    auto* sweep = app.add_subcommand("sweep", "solve over a grid of objective weights");
    common(sweep);
    layer_opt(sweep);
    sweep->add_option("--grid-u", a.grid_u, "w_util values");
    sweep->add_option("--grid-c", a.grid_c, "w_comp values");
    sweep->add_option("--grid-t", a.grid_t, "w_traffic values");
    auto* enumerate = app.add_subcommand("enumerate", "enumerate every valid schedule of a small layer");
    enumerate->add_option("--arch", a.arch_path, "architecture file");
    layer_opt(enumerate);
    enumerate->add_option("--limit", a.limit, "refuse spaces with more valid schedules than this");
    enumerate->add_flag("--list", a.list, "print one line per schedule");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*solve) return cmd_solve(a);
        if (*evaluate) return cmd_evaluate(a);
        if (*compare) return cmd_compare(a);
        if (*partition) return cmd_partition(a);
        if (*sweep) return cmd_sweep(a);
        if (*enumerate) return cmd_enumerate(a);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const EmptyPartitionMenu& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kInfeasible;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ScheduleParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const FormulationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const SpaceTooLarge& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
