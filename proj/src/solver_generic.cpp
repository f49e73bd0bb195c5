#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

#include "cosa/solver.hpp"
#include "search_space.hpp"
#include "solver_common.hpp"

namespace cosa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieEps = 1e-9;
constexpr double kSpaceGuard = 1e7;

void check_well_formed(const MipModel& m) {
    std::vector<char> derived(m.num_vars(), 0);
    for (int v : m.derived_order) {
        if (v < 0 || v >= m.num_vars() || derived[v]) throw std::invalid_argument("bad derived_order entry");
        derived[v] = 1;
    }
    int prev_max = -1;
    for (const auto& g : m.groups()) {
        for (std::size_t i = 0; i < g.options.size(); ++i) {
            if (g.options[i] <= prev_max) {
                throw std::invalid_argument("choice groups must occupy increasing variable ranges");
            }
            prev_max = g.options[i];
        }
    }
    for (int v = 0; v < m.num_vars(); ++v) {
        const bool grouped = m.group_of(v) >= 0;
        if (grouped == static_cast<bool>(derived[v])) {
            throw std::invalid_argument("variable " + m.vars()[v].name +
                                        " must be in exactly one of a choice group or derived_order");
        }
        if (grouped && m.vars()[v].kind != VarKind::Binary) {
            throw std::invalid_argument("choice-group variable " + m.vars()[v].name + " is not binary");
        }
    }
}

/// [min, max] of coef * value over a derived variable's bounds.
std::pair<double, double> derived_range(const Variable& v, double coef) {
    const double a = coef * v.lb, b = coef * v.ub;
    auto fix = [](double x) { return std::isnan(x) ? 0.0 : x; };
    return {fix(std::min(a, b)), fix(std::max(a, b))};
}

bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

const char* solve_status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Timeout: return "timeout";
    }
    return "?";
}

void SolverOptions::check() const {
    if (!(time_limit_s > 0.0)) throw std::invalid_argument("time limit must be positive");
    if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be non-negative");
    if (threads < 0) throw std::invalid_argument("thread count must be non-negative");
}

int effective_threads(const SolverOptions& opts) {
    int cap = 0;
    if (const char* env = std::getenv("COSA_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) cap = static_cast<int>(std::min<long>(v, 256));
    }
    if (opts.threads > 0) return cap > 0 ? std::min(opts.threads, cap) : opts.threads;
    return cap > 0 ? cap : 1;
}

namespace detail {

std::vector<int> single_row_witness(const MipModel& m, double tol) {
    const auto& rows = m.rows();
    for (int r = 0; r < m.num_rows(); ++r) {
        // Extreme activity with each group choosing independently.
        std::vector<double> gmin(m.groups().size(), 0.0), gmax(m.groups().size(), 0.0);
        std::vector<char> gseen(m.groups().size(), 0);
        double lo = 0.0, hi = 0.0;
        for (const auto& t : rows[r].terms) {
            const int g = m.group_of(t.var);
            if (g < 0) {
                auto [a, b] = derived_range(m.vars()[t.var], t.coef);
                lo += a;
                hi += b;
                continue;
            }
            if (!gseen[g]) {
                gseen[g] = 1;
                // options outside this row contribute 0
                const bool all_in = std::all_of(m.groups()[g].options.begin(), m.groups()[g].options.end(),
                                                [&](int v) {
                                                    for (const auto& u : rows[r].terms)
                                                        if (u.var == v) return true;
                                                    return false;
                                                });
                gmin[g] = all_in ? kInf : 0.0;
                gmax[g] = all_in ? -kInf : 0.0;
            }
            gmin[g] = std::min(gmin[g], t.coef);
            gmax[g] = std::max(gmax[g], t.coef);
        }
        for (std::size_t g = 0; g < gseen.size(); ++g) {
            if (!gseen[g]) continue;
            lo += gmin[g];
            hi += gmax[g];
        }
        const auto& row = rows[r];
        const bool bad = (row.sense != Sense::GE && lo > row.rhs + tol) ||
                         (row.sense != Sense::LE && hi < row.rhs - tol);
        if (bad) return {r};
    }
    return {};
}

bool derive_auxiliaries(const MipModel& m, const std::vector<std::vector<int>>& cols,
                        std::vector<double>& x, std::vector<char>& set, double tol) {
    const auto& rows = m.rows();
    auto determined = [&](int r, int self) {
        for (const auto& t : rows[r].terms) {
            if (t.var != self && !set[t.var]) return false;
        }
        return true;
    };
    for (int v : m.derived_order) {
        const auto& var = m.vars()[v];
        if (var.kind == VarKind::Binary) {
            bool ok = false;
            for (double val : {0.0, 1.0}) {
                x[v] = val;
                ok = true;
                for (int r : cols[v]) {
                    if (determined(r, v) && !m.row_satisfied(r, x, tol)) {
                        ok = false;
                        break;
                    }
                }
                if (ok) break;
            }
            if (!ok) return false;
        } else {
            double lo = var.lb, hi = var.ub;
            for (int r : cols[v]) {
                if (!determined(r, v)) continue;
                double coef = 0.0, rest = 0.0;
                for (const auto& t : rows[r].terms) {
                    if (t.var == v) coef += t.coef;
                    else rest += t.coef * x[t.var];
                }
                if (coef == 0.0) continue;
                const double q = (rows[r].rhs - rest) / coef;
                const Sense s = rows[r].sense;
                if (s == Sense::EQ) {
                    lo = std::max(lo, q);
                    hi = std::min(hi, q);
                } else if ((s == Sense::LE) == (coef > 0)) {
                    hi = std::min(hi, q);
                } else {
                    lo = std::max(lo, q);
                }
            }
            if (lo > hi + tol || !std::isfinite(lo)) return false;
            x[v] = lo;
        }
        set[v] = 1;
    }
    return true;
}

}  // namespace detail

Solution solve(const MipModel& m, const SolverOptions& opts) {
    opts.check();
    check_well_formed(m);
    detail::Clock clock;
    Solution sol;
    const double tol = opts.tolerance;
    const auto& groups = m.groups();
    const auto& rows = m.rows();
    const int G = static_cast<int>(groups.size());
    const int R = m.num_rows();
    const auto cols = m.columns();

    for (const auto& g : groups) {
        if (g.options.empty()) {
            sol.status = SolveStatus::Infeasible;
            return sol;
        }
    }

    // Per row, suffix sums over groups of the smallest and largest contribution.
    std::vector<double> sufmin(static_cast<std::size_t>(R) * (G + 1), 0.0), sufmax(sufmin.size(), 0.0);
    std::vector<double> dmin(R, 0.0), dmax(R, 0.0);
    std::vector<std::vector<int>> rows_of_group(G);
    {
        std::vector<double> coef(m.num_vars(), 0.0);
        for (int r = 0; r < R; ++r) {
            std::vector<int> touched;
            for (const auto& t : rows[r].terms) {
                const int g = m.group_of(t.var);
                if (g < 0) {
                    auto [a, b] = derived_range(m.vars()[t.var], t.coef);
                    dmin[r] += a;
                    dmax[r] += b;
                } else {
                    coef[t.var] += t.coef;
                    touched.push_back(g);
                }
            }
            std::sort(touched.begin(), touched.end());
            touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
            for (int g : touched) {
                double lo = kInf, hi = -kInf;
                for (int v : groups[g].options) {
                    lo = std::min(lo, coef[v]);
                    hi = std::max(hi, coef[v]);
                }
                sufmin[static_cast<std::size_t>(r) * (G + 1) + g] = lo;
                sufmax[static_cast<std::size_t>(r) * (G + 1) + g] = hi;
                rows_of_group[g].push_back(r);
            }
            for (const auto& t : rows[r].terms) coef[t.var] = 0.0;
            for (int g = G - 1; g >= 0; --g) {
                sufmin[static_cast<std::size_t>(r) * (G + 1) + g] += sufmin[static_cast<std::size_t>(r) * (G + 1) + g + 1];
                sufmax[static_cast<std::size_t>(r) * (G + 1) + g] += sufmax[static_cast<std::size_t>(r) * (G + 1) + g + 1];
            }
        }
    }
    std::vector<double> sufobj(G + 1, 0.0);
    for (int g = G - 1; g >= 0; --g) {
        double lo = kInf;
        for (int v : groups[g].options) lo = std::min(lo, m.objective[v]);
        sufobj[g] = sufobj[g + 1] + lo;
    }
    double dobj = m.objective_constant;
    for (int v : m.derived_order) {
        const double c = m.objective[v];
        if (c == 0.0) continue;
        dobj += derived_range(m.vars()[v], c).first;
    }

    std::vector<double> x(m.num_vars(), 0.0), act(R, 0.0);
    std::vector<char> set(m.num_vars(), 0);
    for (const auto& g : groups)
        for (int v : g.options) set[v] = 1;
    double best = kInf;
    std::vector<double> best_x;
    bool timed_out = false;

    auto row_open = [&](int r, int depth) {
        const auto& row = rows[r];
        const std::size_t base = static_cast<std::size_t>(r) * (G + 1) + depth;
        const double lo = act[r] + sufmin[base] + dmin[r];
        const double hi = act[r] + sufmax[base] + dmax[r];
        if (row.sense != Sense::GE && lo > row.rhs + tol) return false;
        if (row.sense != Sense::LE && hi < row.rhs - tol) return false;
        return true;
    };

    auto leaf = [&](double obj_fixed) {
        ++sol.stats.leaves;
        std::vector<char> s = set;
        if (!detail::derive_auxiliaries(m, cols, x, s, tol)) return;
        for (int r = 0; r < R; ++r) {
            if (!m.row_satisfied(r, x, tol)) return;
        }
        (void)obj_fixed;
        const double obj = m.evaluate(x);
        if (obj < best - kTieEps) {
            best = obj;
            best_x = x;
        }
    };

    // Options are tried last-to-first so the first optimum found is the
    // lexicographically smallest assignment vector.
    auto dfs = [&](auto&& self, int g, double obj_fixed) -> void {
        if (timed_out) return;
        if ((++sol.stats.nodes & 1023) == 0 && clock.seconds() > opts.time_limit_s) {
            timed_out = true;
            return;
        }
        if (g == G) {
            leaf(obj_fixed);
            return;
        }
        const auto& opts_g = groups[g].options;
        for (int i = static_cast<int>(opts_g.size()) - 1; i >= 0; --i) {
            const int v = opts_g[i];
            x[v] = 1.0;
            for (int r : cols[v]) {
                for (const auto& t : rows[r].terms)
                    if (t.var == v) act[r] += t.coef;
            }
            bool ok = true;
            for (int r : rows_of_group[g]) {
                if (!row_open(r, g + 1)) {
                    ok = false;
                    break;
                }
            }
            const double of = obj_fixed + m.objective[v];
            if (ok && of + sufobj[g + 1] + dobj < best - kTieEps) self(self, g + 1, of);
            for (int r : cols[v]) {
                for (const auto& t : rows[r].terms)
                    if (t.var == v) act[r] -= t.coef;
            }
            x[v] = 0.0;
            if (timed_out) return;
        }
    };
    dfs(dfs, 0, 0.0);

    sol.stats.wall_seconds = clock.seconds();
    if (best < kInf) {
        sol.assignment = std::move(best_x);
        sol.objective_value = m.evaluate(sol.assignment);
        sol.status = timed_out ? SolveStatus::Timeout : SolveStatus::Optimal;
    } else {
        sol.status = timed_out ? SolveStatus::Timeout : SolveStatus::Infeasible;
        if (!timed_out) sol.infeasible_rows = detail::single_row_witness(m, tol);
    }
    return sol;
}

Solution exhaustive_solve(const MipModel& m, double tol) {
    check_well_formed(m);
    detail::Clock clock;
    Solution sol;
    const auto& groups = m.groups();
    double space = 1.0;
    for (const auto& g : groups) space *= static_cast<double>(g.options.size());
    if (space > kSpaceGuard) throw SpaceTooLarge("assignment space too large for exhaustive search");
    if (space == 0.0) {
        sol.status = SolveStatus::Infeasible;
        return sol;
    }
    const auto cols = m.columns();
    const int G = static_cast<int>(groups.size());
    std::vector<int> pick(G, 0);
    std::vector<char> base_set(m.num_vars(), 0);
    for (const auto& g : groups)
        for (int v : g.options) base_set[v] = 1;
    double best = kInf;
    std::vector<double> best_x;
    for (;;) {
        ++sol.stats.leaves;
        std::vector<double> x(m.num_vars(), 0.0);
        for (int g = 0; g < G; ++g) x[groups[g].options[pick[g]]] = 1.0;
        std::vector<char> s = base_set;
        if (detail::derive_auxiliaries(m, cols, x, s, tol) && m.violations(x, tol).empty()) {
            const double obj = m.evaluate(x);
            if (obj < best - kTieEps) {
                best = obj;
                best_x = std::move(x);
            } else if (obj <= best + kTieEps && lex_less(x, best_x)) {
                best = std::min(best, obj);
                best_x = std::move(x);
            }
        }
        int g = G - 1;
        while (g >= 0 && ++pick[g] == static_cast<int>(groups[g].options.size())) pick[g--] = 0;
        if (g < 0) break;
    }
    sol.stats.wall_seconds = clock.seconds();
    if (best == kInf) {
        sol.status = SolveStatus::Infeasible;
        sol.infeasible_rows = detail::single_row_witness(m, tol);
        return sol;
    }
    sol.assignment = std::move(best_x);
    sol.objective_value = m.evaluate(sol.assignment);
    sol.status = SolveStatus::Optimal;
    return sol;
}

namespace detail {

int Space::config_index(int level, Mapping k) const {
    for (std::size_t i = 0; i < configs.size(); ++i) {
        if (configs[i].level == level && configs[i].mapping == k) return static_cast<int>(i);
    }
    return -1;
}

Space build_space(const ScheduleModel& m) {
    Space s;
    s.H = m.arch.num_levels();
    s.Z = m.Z;
    s.kind_of_factor.assign(m.Z, -1);
    for (int f = 0; f < m.Z; ++f) {
        const auto& fi = m.factors[f];
        int k = -1;
        for (std::size_t i = 0; i < s.kinds.size(); ++i) {
            if (s.kinds[i].dim == fi.dim && s.kinds[i].value == fi.value) k = static_cast<int>(i);
        }
        if (k < 0) {
            Kind kind{fi.dim, fi.value, fi.log2, {}, {}};
            for (auto v : kAllTensors) kind.rel[static_cast<int>(v)] = m.arch.related(fi.dim, v);
            s.kinds.push_back(std::move(kind));
            k = static_cast<int>(s.kinds.size()) - 1;
        }
        s.kinds[k].factors.push_back(f);
        s.kind_of_factor[f] = k;
    }
    for (int I = 0; I < s.H; ++I) {
        if (m.spatial_allowed(I)) s.configs.push_back({I, Mapping::Spatial});
        s.configs.push_back({I, Mapping::Temporal});
    }
    return s;
}

}  // namespace detail

std::vector<int> tie_key(const ScheduleModel& m, const std::vector<Placement>& pl, const std::vector<int>& picks) {
    const auto s = detail::build_space(m);
    const int K = static_cast<int>(s.kinds.size());
    const int C = static_cast<int>(s.configs.size());
    std::vector<int> key;
    key.reserve(static_cast<std::size_t>(K) * C + static_cast<std::size_t>(s.H) * s.Z + s.Z + picks.size());
    std::vector<int> counts(static_cast<std::size_t>(K) * C, 0);
    std::vector<int> slots(static_cast<std::size_t>(s.H) * s.Z, s.empty_code());
    for (int f = 0; f < m.Z; ++f) {
        const int k = s.kind_of_factor[f];
        const int c = s.config_index(pl[f].level, pl[f].mapping);
        if (c < 0) throw std::invalid_argument("placement on a mapping the level does not allow");
        ++counts[static_cast<std::size_t>(k) * C + c];
        slots[static_cast<std::size_t>(pl[f].level) * s.Z + pl[f].rank] = detail::Space::code(k, pl[f].mapping);
    }
    for (int c : counts) key.push_back(-c);
    key.insert(key.end(), slots.begin(), slots.end());
    for (int f = 0; f < m.Z; ++f) key.push_back(s.option_order(pl[f]));
    key.insert(key.end(), picks.begin(), picks.end());
    return key;
}

Solution exhaustive_solve(const ScheduleModel& m, double tol) {
    // Gaps between ranks and swaps of identical factors change neither the
    // objective nor feasibility, and tie_key() always prefers packed ranks and
    // identical factors in option order. Only those representatives are visited.
    // Below the NoC level (or without traffic terms) loop order is invisible to
    // the model, so only the tie_key() minimal order is tried there.
    detail::Clock clock;
    Solution sol;
    const int Z = m.Z;
    const int H = m.arch.num_levels();
    const auto space = detail::build_space(m);
    const int C = static_cast<int>(space.configs.size());

    // Distinct (level, mapping) multisets alone bound the count from below.
    double lower = 1.0;
    for (const auto& k : space.kinds) {
        const int n = static_cast<int>(k.factors.size());
        for (int i = 1; i <= n; ++i) lower *= static_cast<double>(C - 1 + i) / i;
    }
    for (const auto& p : m.partitions) lower *= static_cast<double>(p.exponents.size());
    if (lower > kSpaceGuard) throw SpaceTooLarge("assignment space too large for exhaustive search");

    std::vector<Placement> pl(Z);
    std::vector<int> cfg(Z, 0);
    std::vector<int> picks(m.partitions.size(), 0);
    double best = kInf;
    std::vector<int> best_key;
    std::vector<Placement> best_pl;
    std::vector<int> best_picks;
    bool found = false;
    auto same_kind = [&](int a, int b) { return space.kind_of_factor[a] == space.kind_of_factor[b]; };

    auto leaf = [&]() {
        std::fill(picks.begin(), picks.end(), 0);
        for (;;) {
            if (++sol.stats.leaves > static_cast<std::int64_t>(kSpaceGuard)) {
                throw SpaceTooLarge("assignment space too large for exhaustive search");
            }
            const auto x = m.assignment(pl, picks);
            const double obj = m.mip.evaluate(x);
            if (obj <= best + kTieEps && m.mip.violations(x, tol).empty()) {
                auto key = tie_key(m, pl, picks);
                if (!found || obj < best - kTieEps || key < best_key) {
                    found = true;
                    best = std::min(obj, best);
                    best_key = std::move(key);
                    best_pl = pl;
                    best_picks = picks;
                }
            }
            int i = static_cast<int>(picks.size()) - 1;
            while (i >= 0 && ++picks[i] == static_cast<int>(m.partitions[i].exponents.size())) picks[i--] = 0;
            if (i < 0) break;
        }
    };

    // Order the factors of each level in turn; ranks are 0..n-1.
    std::vector<std::vector<int>> at(H);
    auto order = [&](auto&& self, int I) -> void {
        if (I == H) {
            leaf();
            return;
        }
        auto& fs = at[I];
        if (!m.has_traffic || I < m.noc) {
            // Nothing in the model sees the loop order here; tie_key() wants it sorted.
            std::sort(fs.begin(), fs.end(), [&](int a, int b) {
                const int ca = detail::Space::code(space.kind_of_factor[a], space.configs[cfg[a]].mapping);
                const int cb = detail::Space::code(space.kind_of_factor[b], space.configs[cfg[b]].mapping);
                return ca != cb ? ca < cb : a < b;
            });
            for (std::size_t r = 0; r < fs.size(); ++r) pl[fs[r]].rank = static_cast<int>(r);
            for (int f : fs) pl[f] = {I, pl[f].rank, space.configs[cfg[f]].mapping};
            ++sol.stats.nodes;
            self(self, I + 1);
            return;
        }
        std::sort(fs.begin(), fs.end());
        do {
            bool canonical = true;
            for (std::size_t a = 0; a < fs.size() && canonical; ++a) {
                for (std::size_t b = a + 1; b < fs.size(); ++b) {
                    if (fs[a] > fs[b] && same_kind(fs[a], fs[b]) && cfg[fs[a]] == cfg[fs[b]]) {
                        canonical = false;
                        break;
                    }
                }
            }
            if (!canonical) continue;
            for (std::size_t r = 0; r < fs.size(); ++r) {
                const auto& c = space.configs[cfg[fs[r]]];
                pl[fs[r]] = {c.level, static_cast<int>(r), c.mapping};
            }
            ++sol.stats.nodes;
            self(self, I + 1);
        } while (std::next_permutation(fs.begin(), fs.end()));
    };

    std::vector<int> order_free_rows;
    for (int r = 0; r < m.mip.num_rows(); ++r) {
        const auto k = m.mip.rows()[r].kind;
        if (k == RowKind::Spatial || (k == RowKind::Capacity && m.partitions.empty())) order_free_rows.push_back(r);
    }
    auto order_free_ok = [&]() {
        if (order_free_rows.empty()) return true;
        const auto x = m.assignment(pl, std::vector<int>(m.partitions.size(), 0));
        for (int r : order_free_rows) {
            if (!m.mip.row_satisfied(r, x, tol)) return false;
        }
        return true;
    };

    // Identical factors take non-decreasing configurations.
    auto choose = [&](auto&& self, int f) -> void {
        if (f == Z) {
            // Capacity and fanout rows do not depend on loop order: check them once.
            for (int g = 0; g < Z; ++g) pl[g] = {space.configs[cfg[g]].level, g, space.configs[cfg[g]].mapping};
            if (!order_free_ok()) return;
            for (auto& fs : at) fs.clear();
            for (int g = 0; g < Z; ++g) at[space.configs[cfg[g]].level].push_back(g);
            order(order, 0);
            return;
        }
        const int lo = f > 0 && same_kind(f - 1, f) ? cfg[f - 1] : 0;
        for (int c = lo; c < C; ++c) {
            cfg[f] = c;
            self(self, f + 1);
        }
    };
    choose(choose, 0);

    sol.stats.wall_seconds = clock.seconds();
    if (!found) {
        sol.status = SolveStatus::Infeasible;
        sol.infeasible_rows = detail::single_row_witness(m.mip, tol);
        return sol;
    }
    sol.assignment = m.assignment(best_pl, best_picks);
    sol.objective_value = m.mip.evaluate(sol.assignment);
    sol.status = SolveStatus::Optimal;
    return sol;
}

}  // namespace cosa
