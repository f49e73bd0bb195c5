#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "cosa/solver.hpp"
#include "lp.hpp"
#include "search_space.hpp"
#include "solver_common.hpp"

namespace cosa {

namespace {

using detail::Config;
using detail::Kind;
using detail::Space;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieEps = 1e-9;
constexpr double kLpSlack = 1e-12;  // relative LP round-off allowance, well below kTieEps
constexpr int kMasks = 1 << kNumTensors;

/// A constraint row projected onto (kind, config) counts.
struct AggRow {
    std::vector<double> coef;                  // per cell
    std::vector<std::pair<int, double>> sels;  // (selector, coefficient)
    double rhs = 0.0;
    double sel_min = 0.0;
    std::vector<int> cells;  // cells with a nonzero coefficient
};

struct Selector {
    int pair;
    int index;
    int exponent;
    double bytes;
};

struct Problem {
    const ScheduleModel* m = nullptr;
    Space s;
    int K = 0, C = 0, H = 0, noc = -1;
    double tol = 1e-6;
    ObjectiveMode mode = ObjectiveMode::Combined;
    double wT = 0.0, wC = 0.0;  // weights of T and C inside the balance term / extra traffic
    bool order_matters = false;
    bool balance = false;

    std::vector<double> lin, dl, comp, tlin, tup;  // per cell
    std::vector<AggRow> rows;
    std::vector<std::vector<int>> rows_of_cell;
    std::vector<Selector> sels;
    std::vector<int> pair_row;
    double budget = kInf;

    std::vector<unsigned> stores_mask;  // per level
    std::vector<unsigned> rel_mask;     // per kind
    std::vector<int> prime_of_kind;     // index into primes
    std::vector<double> primes_log;

    int cell(int t, int c) const { return t * C + c; }
    const Config& config(int c) const { return s.configs[c]; }
    int count(int t) const { return static_cast<int>(s.kinds[t].factors.size()); }
};

Problem make_problem(const ScheduleModel& m, double tol) {
    Problem P;
    P.m = &m;
    P.s = detail::build_space(m);
    P.K = static_cast<int>(P.s.kinds.size());
    P.C = static_cast<int>(P.s.configs.size());
    P.H = P.s.H;
    P.noc = m.noc;
    P.tol = tol;
    const auto& w = m.options.weights;
    P.mode = w.mode;
    P.balance = w.mode == ObjectiveMode::Balance;
    switch (w.mode) {
        case ObjectiveMode::Traffic: P.wT = 1.0; break;
        case ObjectiveMode::Combined: P.wT = m.has_traffic ? w.w_traffic : 0.0; P.wC = w.w_comp; break;
        case ObjectiveMode::Balance: P.wT = w.w_traffic; P.wC = w.w_comp; break;
        default: break;
    }
    P.order_matters = m.has_traffic && (P.balance || P.wT > 0.0);

    const auto& arch = m.arch;
    P.stores_mask.assign(P.H, 0u);
    for (int I = 0; I < P.H; ++I) {
        for (auto v : kAllTensors)
            if (arch.stores(I, v)) P.stores_mask[I] |= 1u << static_cast<int>(v);
    }
    for (const auto& k : P.s.kinds) {
        unsigned mask = 0;
        for (int v = 0; v < kNumTensors; ++v)
            if (k.rel[v]) mask |= 1u << v;
        P.rel_mask.push_back(mask);
        int pi = -1;
        for (std::size_t i = 0; i < P.primes_log.size(); ++i)
            if (P.primes_log[i] == k.log2) pi = static_cast<int>(i);
        if (pi < 0) {
            P.primes_log.push_back(k.log2);
            pi = static_cast<int>(P.primes_log.size()) - 1;
        }
        P.prime_of_kind.push_back(pi);
    }

    const int cells = P.K * P.C;
    P.lin.assign(cells, 0.0);
    P.dl.assign(cells, 0.0);
    P.comp.assign(cells, 0.0);
    P.tlin.assign(cells, 0.0);
    P.tup.assign(cells, 0.0);
    for (int t = 0; t < P.K; ++t) {
        const auto& k = P.s.kinds[t];
        const int nrel = std::popcount(P.rel_mask[t]);
        for (int c = 0; c < P.C; ++c) {
            const auto [level, map] = P.config(c);
            const bool temporal = map == Mapping::Temporal;
            double u = 0.0;
            for (int I = level + 1; I + 1 < P.H; ++I) {
                u += k.log2 * std::popcount(P.stores_mask[I] & P.rel_mask[t]);
            }
            const double cc = temporal ? k.log2 : 0.0;
            double d = 0.0, tl = 0.0, tu = 0.0;
            if (m.has_traffic) {
                if (level < P.noc) d = k.log2 * nrel;
                if (level == P.noc && !temporal) d = k.log2 * nrel;
                if (temporal && level >= P.noc) {
                    tl = k.log2 * std::popcount(P.rel_mask[t] & P.stores_mask[level]);
                    tu = k.log2 * kNumTensors;
                }
            }
            const int i = P.cell(t, c);
            P.dl[i] = d;
            P.comp[i] = cc;
            P.tlin[i] = tl;
            P.tup[i] = tu;
            switch (w.mode) {
                case ObjectiveMode::Util: P.lin[i] = -u; break;
                case ObjectiveMode::Comp: P.lin[i] = cc; break;
                case ObjectiveMode::Traffic: P.lin[i] = d + tl; break;
                case ObjectiveMode::Combined:
                    P.lin[i] = -w.w_util * u + w.w_comp * cc + (m.has_traffic ? w.w_traffic * (d + tl) : 0.0);
                    break;
                case ObjectiveMode::Balance: break;
            }
        }
    }

    // Constraint rows, mirroring the formulation builders.
    for (std::size_t p = 0; p < m.partitions.size(); ++p) {
        const auto& pair = m.partitions[p];
        for (std::size_t e = 0; e < pair.exponents.size(); ++e) {
            P.sels.push_back({static_cast<int>(p), static_cast<int>(e), pair.exponents[e],
                              std::ldexp(1.0, pair.exponents[e]) * static_cast<double>(arch.precision(pair.tensor))});
        }
    }
    if (m.options.partition) P.budget = static_cast<double>(m.options.partition->budget_bytes);
    P.pair_row.assign(m.partitions.size(), -1);
    auto add_row = [&](AggRow r) {
        for (int i = 0; i < cells; ++i)
            if (r.coef[i] != 0.0) r.cells.push_back(i);
        for (auto [s, c] : r.sels) r.sel_min = std::min(r.sel_min, c);
        P.rows.push_back(std::move(r));
        return static_cast<int>(P.rows.size()) - 1;
    };
    for (auto [I, v] : constrained_buffers(arch)) {
        AggRow r;
        r.coef.assign(cells, 0.0);
        bool any = false;
        for (int t = 0; t < P.K; ++t) {
            if (!P.s.kinds[t].rel[static_cast<int>(v)]) continue;
            for (int c = 0; c < P.C; ++c) {
                if (P.config(c).level < I) {
                    r.coef[P.cell(t, c)] = P.s.kinds[t].log2;
                    any = true;
                }
            }
        }
        const auto over = m.options.capacity_override.find({I, static_cast<int>(v)});
        int pair = -1;
        for (std::size_t p = 0; p < m.partitions.size(); ++p)
            if (m.partitions[p].level == I && m.partitions[p].tensor == v) pair = static_cast<int>(p);
        if (pair >= 0) {
            AggRow pr = r;
            for (std::size_t sidx = 0; sidx < P.sels.size(); ++sidx) {
                if (P.sels[sidx].pair == pair) pr.sels.push_back({static_cast<int>(sidx), -P.sels[sidx].exponent});
            }
            pr.rhs = 0.0;
            P.pair_row[pair] = add_row(std::move(pr));
            if (over != m.options.capacity_override.end() && any) {
                r.rhs = std::log2(static_cast<double>(over->second));
                add_row(std::move(r));
            }
            continue;
        }
        if (!any) continue;
        r.rhs = over != m.options.capacity_override.end()
                    ? std::log2(static_cast<double>(std::max<std::int64_t>(over->second, 1)))
                    : *log2_capacity(arch, I, v);
        add_row(std::move(r));
    }
    for (int I = 0; I < P.H; ++I) {
        if (!m.spatial_allowed(I)) continue;
        const int c = P.s.config_index(I, Mapping::Spatial);
        AggRow r;
        r.coef.assign(cells, 0.0);
        bool any = false;
        for (int t = 0; t < P.K; ++t) {
            r.coef[P.cell(t, c)] = P.s.kinds[t].log2;
            any = true;
        }
        if (!any) continue;
        r.rhs = std::log2(static_cast<double>(arch.levels[I].spatial_fanout));
        add_row(std::move(r));
    }
    P.rows_of_cell.assign(cells, {});
    for (std::size_t r = 0; r < P.rows.size(); ++r)
        for (int i : P.rows[r].cells) P.rows_of_cell[i].push_back(static_cast<int>(r));
    return P;
}

// ---------------------------------------------------------------------------
// Loop order above the NoC boundary.

/// Minimal sum of L[mask] * |S after the class| over orders of the classes,
/// each class placed contiguously (never worse than interleaving).
double class_order_cost(const std::array<double, kMasks>& L, unsigned S_in) {
    int present[kMasks];
    int k = 0;
    for (int mask = 0; mask < kMasks; ++mask)
        if (L[mask] > 0.0) present[k++] = mask;
    if (k == 0) return 0.0;
    std::vector<double> f(1u << k, kInf);
    f[0] = 0.0;
    for (unsigned sub = 0; sub < (1u << k); ++sub) {
        if (f[sub] == kInf) continue;
        unsigned S = S_in;
        for (int i = 0; i < k; ++i)
            if (sub & (1u << i)) S |= static_cast<unsigned>(present[i]);
        for (int i = 0; i < k; ++i) {
            if (sub & (1u << i)) continue;
            const unsigned S2 = S | static_cast<unsigned>(present[i]);
            const double v = f[sub] + L[present[i]] * std::popcount(S2);
            f[sub | (1u << i)] = std::min(f[sub | (1u << i)], v);
        }
    }
    return f[(1u << k) - 1];
}

unsigned trig(const Problem& P, int t, int level) { return P.rel_mask[t] & P.stores_mask[level]; }

/// Cheapest traffic-iteration cost of the remaining temporal loops of one level.
double remaining_cost(const Problem& P, int level, const std::vector<int>& rem, unsigned S) {
    std::array<double, kMasks> L{};
    for (int t = 0; t < P.K; ++t)
        if (rem[t] > 0) L[trig(P, t, level)] += P.s.kinds[t].log2 * rem[t];
    return class_order_cost(L, S);
}

/// Temporal counts per kind at a level.
std::vector<int> temporal_at(const Problem& P, const std::vector<int>& n, int level) {
    std::vector<int> out(P.K, 0);
    const int c = P.s.config_index(level, Mapping::Temporal);
    for (int t = 0; t < P.K; ++t) out[t] = n[P.cell(t, c)];
    return out;
}

/// Optimal T over loop orders for the given counts, and the level-by-level on-sets.
double t_optimal(const Problem& P, const std::vector<int>& n) {
    double total = 0.0;
    unsigned S = 0;
    for (int I = P.noc; I < P.H; ++I) {
        const auto cnt = temporal_at(P, n, I);
        total += remaining_cost(P, I, cnt, S);
        for (int t = 0; t < P.K; ++t)
            if (cnt[t] > 0) S |= trig(P, t, I);
    }
    return total;
}

// Exact traffic-iteration values as integer multiples of log2(prime).
using Vec = std::vector<int>;

struct ValueSets {
    const Problem* P;
    int level;
    std::map<std::pair<std::vector<int>, unsigned>, std::set<Vec>> memo;

    const std::set<Vec>& suffix(const std::vector<int>& rem, unsigned S) {
        auto key = std::make_pair(rem, S);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        std::set<Vec> out;
        bool any = false;
        for (int t = 0; t < P->K; ++t) {
            if (rem[t] == 0) continue;
            any = true;
            auto r2 = rem;
            --r2[t];
            const unsigned S2 = S | trig(*P, t, level);
            const int mult = std::popcount(S2);
            const auto& sub = suffix(r2, S2);  // map references stay valid
            for (auto v : sub) {
                v[P->prime_of_kind[t]] += mult;
                out.insert(std::move(v));
            }
        }
        if (!any) out.insert(Vec(P->primes_log.size(), 0));
        return memo.emplace(std::move(key), std::move(out)).first->second;
    }
};

double vec_value(const Problem& P, const Vec& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * P.primes_log[i];
    return s;
}

Vec vec_add(const Vec& a, const Vec& b) {
    Vec r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
    return r;
}

Vec vec_sub(const Vec& a, const Vec& b) {
    Vec r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return r;
}

std::set<Vec> sumset(const std::set<Vec>& a, const std::set<Vec>& b) {
    std::set<Vec> out;
    for (const auto& x : a)
        for (const auto& y : b) out.insert(vec_add(x, y));
    return out;
}

struct BalanceEval {
    double value = kInf;
    std::set<Vec> targets;  // total T vectors reaching the value
};

double balance_value(const Problem& P, double dl, double comp, double T) {
    return std::abs(P.wT * (dl + T) - P.wC * comp);
}

/// Per-level value sets and on-set entering each level.
struct LevelSetsAll {
    std::vector<ValueSets> sets;
    std::vector<unsigned> S_in;
    std::vector<std::vector<int>> counts;
};

LevelSetsAll level_sets(const Problem& P, const std::vector<int>& n) {
    LevelSetsAll all;
    unsigned S = 0;
    for (int I = P.noc; I < P.H; ++I) {
        all.sets.push_back(ValueSets{&P, I, {}});
        all.S_in.push_back(S);
        auto cnt = temporal_at(P, n, I);
        for (int t = 0; t < P.K; ++t)
            if (cnt[t] > 0) S |= trig(P, t, I);
        all.counts.push_back(std::move(cnt));
    }
    return all;
}

BalanceEval balance_leaf(const Problem& P, const std::vector<int>& n, double dl, double comp) {
    auto all = level_sets(P, n);
    std::set<Vec> total{Vec(P.primes_log.size(), 0)};
    for (std::size_t i = 0; i < all.sets.size(); ++i) total = sumset(total, all.sets[i].suffix(all.counts[i], all.S_in[i]));
    BalanceEval ev;
    for (const auto& v : total) ev.value = std::min(ev.value, balance_value(P, dl, comp, vec_value(P, v)));
    for (const auto& v : total)
        if (balance_value(P, dl, comp, vec_value(P, v)) <= ev.value + kTieEps) ev.targets.insert(v);
    return ev;
}

// ---------------------------------------------------------------------------
// Search state and bounds.

struct State {
    std::vector<int> n;
    std::vector<double> act;
    double lin = 0.0, dl = 0.0, comp = 0.0, tlin = 0.0, tup = 0.0;

    explicit State(const Problem& P) : n(P.K * P.C, 0), act(P.rows.size(), 0.0) {}

    void apply(const Problem& P, int i, int cnt) {
        n[i] += cnt;
        for (int r : P.rows_of_cell[i]) act[r] += P.rows[r].coef[i] * cnt;
        lin += P.lin[i] * cnt;
        dl += P.dl[i] * cnt;
        comp += P.comp[i] * cnt;
        tlin += P.tlin[i] * cnt;
        tup += P.tup[i] * cnt;
    }
};

bool rows_ok(const Problem& P, const State& st, int i) {
    for (int r : P.rows_of_cell[i]) {
        if (st.act[r] + P.rows[r].sel_min > P.rows[r].rhs + P.tol) return false;
    }
    return true;
}

/// Objective lower bound with kind t still owning `rem` factors for configs >= c_from
/// and later kinds unplaced. +inf when infeasible.
double node_bound(const Problem& P, const State& st, int t0, int c_from, int rem) {
    detail::LpProblem lp;
    std::vector<int> col(P.K * P.C, -1);
    std::vector<std::vector<int>> kind_cols(P.K);
    std::vector<int> kind_need(P.K, 0);
    for (int t = t0; t < P.K; ++t) {
        const int need = t == t0 ? rem : P.count(t);
        kind_need[t] = need;
        if (need == 0) continue;
        for (int c = t == t0 ? c_from : 0; c < P.C; ++c) {
            const int i = P.cell(t, c);
            bool fits = true;
            for (int r : P.rows_of_cell[i]) {
                const auto& row = P.rows[r];
                if (st.act[r] + row.coef[i] + row.sel_min > row.rhs + P.tol) {
                    fits = false;
                    break;
                }
            }
            if (!fits) continue;
            const double cost = P.balance ? 0.0 : P.lin[i];
            col[i] = lp.add_col(cost);
            kind_cols[t].push_back(i);
        }
        if (kind_cols[t].empty()) return kInf;
    }
    double extra = 0.0;
    if (P.order_matters) extra = t_optimal(P, st.n) - st.tlin;

    std::vector<int> sel_col(P.sels.size());
    for (std::size_t s = 0; s < P.sels.size(); ++s) sel_col[s] = lp.add_col(0.0);

    for (int t = t0; t < P.K; ++t) {
        if (kind_need[t] == 0) continue;
        detail::LpProblem::Row r{{}, Sense::EQ, static_cast<double>(kind_need[t])};
        for (int i : kind_cols[t]) r.a.push_back({col[i], 1.0});
        lp.rows.push_back(std::move(r));
    }
    for (std::size_t ri = 0; ri < P.rows.size(); ++ri) {
        const auto& row = P.rows[ri];
        detail::LpProblem::Row r{{}, Sense::LE, row.rhs - st.act[ri]};
        for (int i : row.cells)
            if (col[i] >= 0) r.a.push_back({col[i], row.coef[i]});
        for (auto [s, c] : row.sels) r.a.push_back({sel_col[s], c});
        if (r.a.empty()) {
            if (r.rhs < -P.tol) return kInf;
            continue;
        }
        lp.rows.push_back(std::move(r));
    }
    if (!P.sels.empty()) {
        detail::LpProblem::Row budget{{}, Sense::LE, P.budget};
        for (std::size_t p = 0; p < P.pair_row.size(); ++p) {
            detail::LpProblem::Row pick{{}, Sense::EQ, 1.0};
            for (std::size_t s = 0; s < P.sels.size(); ++s)
                if (P.sels[s].pair == static_cast<int>(p)) pick.a.push_back({sel_col[s], 1.0});
            lp.rows.push_back(std::move(pick));
        }
        for (std::size_t s = 0; s < P.sels.size(); ++s) budget.a.push_back({sel_col[s], P.sels[s].bytes});
        lp.rows.push_back(std::move(budget));
    }
    double base = st.lin + P.wT * extra;
    if (P.balance) {
        // d >= |wT (DL + tau) - wC C|, tau between linear lower and upper estimates of T.
        const int tau = lp.add_col(0.0);
        const int d = lp.add_col(1.0);
        detail::LpProblem::Row lo{{{tau, 1.0}}, Sense::GE, st.tlin + extra};
        detail::LpProblem::Row hi{{{tau, 1.0}}, Sense::LE, st.tup};
        detail::LpProblem::Row pos{{{d, 1.0}, {tau, -P.wT}}, Sense::GE, P.wT * st.dl - P.wC * st.comp};
        detail::LpProblem::Row neg{{{d, 1.0}, {tau, P.wT}}, Sense::GE, P.wC * st.comp - P.wT * st.dl};
        for (int t = t0; t < P.K; ++t) {
            for (int i : kind_cols[t]) {
                if (P.tlin[i] != 0.0) lo.a.push_back({col[i], -P.tlin[i]});
                if (P.tup[i] != 0.0) hi.a.push_back({col[i], -P.tup[i]});
                const double e = P.wT * P.dl[i] - P.wC * P.comp[i];
                if (e != 0.0) {
                    pos.a.push_back({col[i], -e});
                    neg.a.push_back({col[i], e});
                }
            }
        }
        for (auto* r : {&lo, &hi, &pos, &neg}) lp.rows.push_back(std::move(*r));
        base = 0.0;
    }
    if (lp.n == 0 || lp.rows.empty()) return base;
    const auto res = detail::solve_lp(lp);
    if (res.status == detail::LpResult::Infeasible) return kInf;
    if (res.status == detail::LpResult::Unbounded) return -kInf;
    return base + res.value - (1e-11 + kLpSlack * std::abs(res.value));
}

/// Smallest partition menu indices for the placed counts, or empty when over budget.
bool pick_partitions(const Problem& P, const State& st, std::vector<int>& picks) {
    const auto& m = *P.m;
    picks.assign(m.partitions.size(), -1);
    double bytes = 0.0;
    for (std::size_t p = 0; p < m.partitions.size(); ++p) {
        const double u = st.act[P.pair_row[p]];
        const auto& ex = m.partitions[p].exponents;
        for (std::size_t e = 0; e < ex.size(); ++e) {
            if (u - ex[e] <= P.tol) {
                picks[p] = static_cast<int>(e);
                break;
            }
        }
        if (picks[p] < 0) return false;
        bytes += std::ldexp(1.0, ex[picks[p]]) * static_cast<double>(m.arch.precision(m.partitions[p].tensor));
    }
    return m.partitions.empty() || bytes <= P.budget + P.tol;
}

// ---------------------------------------------------------------------------
// Ranks for a fixed set of counts.

struct LoopRef {
    int kind;
    Mapping mapping;
};

std::vector<LoopRef> sorted_loops(const Problem& P, const std::vector<int>& n, int level) {
    std::vector<LoopRef> out;
    for (int t = 0; t < P.K; ++t) {
        for (auto k : {Mapping::Spatial, Mapping::Temporal}) {
            const int c = P.s.config_index(level, k);
            if (c < 0) continue;
            for (int j = 0; j < n[P.cell(t, c)]; ++j) out.push_back({t, k});
        }
    }
    return out;  // ascending code
}

/// Lexicographically smallest loop order at `level` whose traffic cost plus
/// the best completion stays admissible per `ok`.
template <class Admissible>
std::vector<LoopRef> pin_level(const Problem& P, const std::vector<int>& n, int level, Admissible ok) {
    auto loops = sorted_loops(P, n, level);
    std::vector<int> rem_t(P.K, 0), rem_s(P.K, 0);
    for (const auto& l : loops) (l.mapping == Mapping::Temporal ? rem_t : rem_s)[l.kind]++;
    std::vector<LoopRef> order;
    for (std::size_t pos = 0; pos < loops.size(); ++pos) {
        bool placed = false;
        for (int t = 0; t < P.K && !placed; ++t) {
            for (auto k : {Mapping::Spatial, Mapping::Temporal}) {
                auto& rem = k == Mapping::Temporal ? rem_t : rem_s;
                if (rem[t] == 0) continue;
                if (k == Mapping::Temporal && !ok(t, rem_t)) continue;
                if (k == Mapping::Temporal) ok.commit(t);
                --rem[t];
                order.push_back({t, k});
                placed = true;
                break;
            }
        }
        if (!placed) throw std::logic_error("loop ordering found no admissible loop");
    }
    return order;
}

/// Admissibility for linear objectives: prefix + step + best completion <= optimum.
struct LinearPin {
    const Problem* P;
    int level;
    unsigned S;
    double prefix = 0.0;
    double target;

    bool operator()(int t, const std::vector<int>& rem) const {
        const unsigned S2 = S | trig(*P, t, level);
        const double step = P->s.kinds[t].log2 * std::popcount(S2);
        auto r2 = rem;
        --r2[t];
        return prefix + step + remaining_cost(*P, level, r2, S2) <= target + kTieEps;
    }
    void commit(int t) {
        S |= trig(*P, t, level);
        prefix += P->s.kinds[t].log2 * std::popcount(S);
    }
};

/// Admissibility for the balance objective: the level total must land in `allowed`.
struct SetPin {
    const Problem* P;
    ValueSets* sets;
    int level;
    unsigned S;
    Vec prefix;
    const std::set<Vec>* allowed;
    std::vector<int> rem_now;

    bool operator()(int t, const std::vector<int>& rem) {
        const unsigned S2 = S | trig(*P, t, level);
        Vec p2 = prefix;
        p2[P->prime_of_kind[t]] += std::popcount(S2);
        auto r2 = rem;
        --r2[t];
        for (const auto& a : sets->suffix(r2, S2)) {
            if (allowed->count(vec_add(p2, a))) return true;
        }
        return false;
    }
    void commit(int t) {
        S |= trig(*P, t, level);
        prefix[P->prime_of_kind[t]] += std::popcount(S);
    }
};

template <class Pin>
struct PinRef {
    Pin* pin;
    bool operator()(int t, const std::vector<int>& rem) const { return (*pin)(t, rem); }
    void commit(int t) const { pin->commit(t); }
};

struct Decoded {
    std::vector<Placement> placements;
    std::vector<int> picks;
};

Decoded build_schedule(const Problem& P, const std::vector<int>& n) {
    State st(P);
    for (int i = 0; i < P.K * P.C; ++i)
        if (n[i]) st.apply(P, i, n[i]);
    Decoded out;
    if (!pick_partitions(P, st, out.picks)) throw std::logic_error("incumbent violates the partition budget");

    std::vector<std::vector<LoopRef>> order(P.H);
    for (int I = 0; I < P.H; ++I) {
        if (!P.order_matters || I < P.noc) order[I] = sorted_loops(P, n, I);
    }
    if (P.order_matters) {
        if (!P.balance) {
            unsigned S = 0;
            for (int I = P.noc; I < P.H; ++I) {
                const auto cnt = temporal_at(P, n, I);
                LinearPin pin{&P, I, S, 0.0, remaining_cost(P, I, cnt, S)};
                order[I] = pin_level(P, n, I, PinRef<LinearPin>{&pin});
                for (int t = 0; t < P.K; ++t)
                    if (cnt[t] > 0) S |= trig(P, t, I);
            }
        } else {
            const auto ev = balance_leaf(P, n, st.dl, st.comp);
            auto all = level_sets(P, n);
            const int L = static_cast<int>(all.sets.size());
            Vec chosen(P.primes_log.size(), 0);
            for (int li = 0; li < L; ++li) {
                // Level totals that can still be completed by the levels above.
                std::set<Vec> above{Vec(P.primes_log.size(), 0)};
                for (int lj = li + 1; lj < L; ++lj)
                    above = sumset(above, all.sets[lj].suffix(all.counts[lj], all.S_in[lj]));
                std::set<Vec> allowed;
                for (const auto& tgt : ev.targets) {
                    const Vec rest = vec_sub(tgt, chosen);
                    for (const auto& a : above) allowed.insert(vec_sub(rest, a));
                }
                SetPin pin{&P, &all.sets[li], P.noc + li, all.S_in[li], Vec(P.primes_log.size(), 0), &allowed, {}};
                order[P.noc + li] = pin_level(P, n, P.noc + li, PinRef<SetPin>{&pin});
                chosen = vec_add(chosen, pin.prefix);
            }
        }
    }

    // Ranks, then hand identical factors their slots in option order.
    std::vector<std::vector<Placement>> slots(P.K);
    for (int I = 0; I < P.H; ++I) {
        for (std::size_t z = 0; z < order[I].size(); ++z) {
            slots[order[I][z].kind].push_back({I, static_cast<int>(z), order[I][z].mapping});
        }
    }
    out.placements.assign(P.m->Z, {});
    for (int t = 0; t < P.K; ++t) {
        auto& sl = slots[t];
        std::sort(sl.begin(), sl.end(), [&](const Placement& a, const Placement& b) {
            return P.s.option_order(a) < P.s.option_order(b);
        });
        const auto& fs = P.s.kinds[t].factors;
        if (sl.size() != fs.size()) throw std::logic_error("slot count mismatch");
        for (std::size_t j = 0; j < fs.size(); ++j) out.placements[fs[j]] = sl[j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Branch and bound.

struct Shared {
    std::vector<std::atomic<double>> sub_best;
    std::atomic<bool> stop{false};
    std::atomic<std::int64_t> nodes{0}, leaves{0};
    explicit Shared(std::size_t n) : sub_best(n) {
        for (auto& v : sub_best) v.store(kInf);
    }
};

struct SubResult {
    bool found = false;
    double value = kInf;
    std::vector<int> n;
};

/// Whole-kind count vectors of the first kinds, explored in search order.
using Prefix = std::vector<std::pair<int, int>>;  // (cell, count)

class Worker {
public:
    Worker(const Problem& P, Shared& sh, const detail::Clock& clock, double limit)
        : P_(P), sh_(sh), clock_(clock), limit_(limit), st_(P) {}

    SubResult run(std::size_t index, const Prefix& prefix, int first_kind) {
        index_ = index;
        st_ = State(P_);
        result_ = {};
        refresh();
        for (auto [i, cnt] : prefix) {
            st_.apply(P_, i, cnt);
            if (!rows_ok(P_, st_, i)) return result_;
        }
        if (first_kind == P_.K) {
            leaf();
        } else if (!prune(node_bound(P_, st_, first_kind, 0, P_.count(first_kind)))) {
            dfs(first_kind, 0, P_.count(first_kind));
        }
        return result_;
    }

private:
    // Ties with earlier subtrees are useless; later ones only win if strictly better.
    bool prune(double bound) const {
        return bound >= std::min(result_.value, earlier_) - kTieEps || bound > later_ + kTieEps;
    }

    void refresh() {
        earlier_ = kInf;
        later_ = kInf;
        for (std::size_t j = 0; j < sh_.sub_best.size(); ++j) {
            const double v = sh_.sub_best[j].load(std::memory_order_relaxed);
            if (j < index_) earlier_ = std::min(earlier_, v);
            else if (j > index_) later_ = std::min(later_, v);
        }
    }

    bool tick() {
        if (sh_.stop.load(std::memory_order_relaxed)) return false;
        ++local_nodes_;
        sh_.nodes.fetch_add(1, std::memory_order_relaxed);
        if ((local_nodes_ & 63) == 0) {
            refresh();
            if (clock_.seconds() > limit_) {
                sh_.stop.store(true);
                return false;
            }
        }
        return true;
    }

    void leaf() {
        sh_.leaves.fetch_add(1, std::memory_order_relaxed);
        std::vector<int> picks;
        if (!pick_partitions(P_, st_, picks)) return;
        double value;
        if (P_.balance) {
            value = P_.m->has_traffic ? balance_leaf(P_, st_.n, st_.dl, st_.comp).value
                                      : balance_value(P_, st_.dl, st_.comp, 0.0);
        } else {
            value = st_.lin;
            if (P_.order_matters) value += P_.wT * (t_optimal(P_, st_.n) - st_.tlin);
        }
        if (value < result_.value - kTieEps && !(value >= earlier_ - kTieEps)) {
            result_.found = true;
            result_.value = value;
            result_.n = st_.n;
            double cur = sh_.sub_best[index_].load();
            while (value < cur && !sh_.sub_best[index_].compare_exchange_weak(cur, value)) {
            }
        }
    }

    void dfs(int t, int c, int r) {
        if (!tick()) return;
        if (r == 0) {
            if (t + 1 == P_.K) {
                leaf();
            } else {
                dfs(t + 1, 0, P_.count(t + 1));
            }
            return;
        }
        if (c == P_.C - 1) {
            const int i = P_.cell(t, c);
            st_.apply(P_, i, r);
            if (rows_ok(P_, st_, i)) {
                if (t + 1 == P_.K) leaf();
                else if (!prune(node_bound(P_, st_, t + 1, 0, P_.count(t + 1)))) dfs(t + 1, 0, P_.count(t + 1));
            }
            st_.apply(P_, i, -r);
            return;
        }
        const int i = P_.cell(t, c);
        for (int v = r; v >= 0; --v) {
            if (sh_.stop.load(std::memory_order_relaxed)) return;
            st_.apply(P_, i, v);
            if (v == 0 || rows_ok(P_, st_, i)) {
                const double b = node_bound(P_, st_, t, c + 1, r - v);
                if (!prune(b)) dfs(t, c + 1, r - v);
            }
            st_.apply(P_, i, -v);
        }
    }

    const Problem& P_;
    Shared& sh_;
    const detail::Clock& clock_;
    double limit_;
    State st_;
    SubResult result_;
    std::size_t index_ = 0;
    double earlier_ = kInf, later_ = kInf;
    std::int64_t local_nodes_ = 0;
};

void compositions(const Problem& P, int t, int c, int r, State& st, Prefix& cur, std::vector<Prefix>& out,
                  std::size_t cap) {
    if (out.size() > cap) return;
    if (r == 0 || c == P.C - 1) {
        const int i = P.cell(t, std::min(c, P.C - 1));
        if (r > 0) {
            st.apply(P, i, r);
            if (rows_ok(P, st, i)) {
                cur.push_back({i, r});
                out.push_back(cur);
                cur.pop_back();
            }
            st.apply(P, i, -r);
        } else {
            out.push_back(cur);
        }
        return;
    }
    const int i = P.cell(t, c);
    for (int v = r; v >= 0; --v) {
        st.apply(P, i, v);
        if (v == 0 || rows_ok(P, st, i)) {
            if (v > 0) cur.push_back({i, v});
            compositions(P, t, c + 1, r - v, st, cur, out, cap);
            if (v > 0) cur.pop_back();
        }
        st.apply(P, i, -v);
    }
}

/// Split the tree into subtrees by fixing whole kinds until there are enough for the workers.
std::pair<std::vector<Prefix>, int> split(const Problem& P, int threads) {
    std::vector<Prefix> prefixes{Prefix{}};
    int depth = 0;
    if (threads <= 1) return {prefixes, 0};
    const std::size_t want = static_cast<std::size_t>(threads) * 8;
    const std::size_t cap = 4096;
    while (depth < P.K && prefixes.size() < want) {
        std::vector<Prefix> next;
        for (const auto& pre : prefixes) {
            State st(P);
            for (auto [i, cnt] : pre) st.apply(P, i, cnt);
            Prefix cur = pre;
            compositions(P, depth, 0, P.count(depth), st, cur, next, cap);
            if (next.size() > cap) break;
        }
        if (next.size() > cap) break;
        prefixes = std::move(next);
        ++depth;
    }
    return {prefixes, depth};
}

}  // namespace

Solution solve(const ScheduleModel& m, const SolverOptions& opts) {
    opts.check();
    detail::Clock clock;
    Solution sol;
    const Problem P = make_problem(m, opts.tolerance);
    const int threads = effective_threads(opts);

    std::vector<Prefix> prefixes;
    int depth = 0;
    if (P.K == 0) {
        prefixes = {Prefix{}};
    } else {
        std::tie(prefixes, depth) = split(P, threads);
    }
    Shared sh(prefixes.size());
    std::vector<SubResult> results(prefixes.size());
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        Worker w(P, sh, clock, opts.time_limit_s);
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= prefixes.size() || sh.stop.load()) break;
            results[i] = w.run(i, prefixes[i], depth);
        }
    };
    const int nworkers = std::max(1, std::min<int>(threads, static_cast<int>(prefixes.size())));
    if (nworkers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < nworkers; ++k) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    const SubResult* best = nullptr;
    for (const auto& r : results) {
        if (r.found && (!best || r.value < best->value - kTieEps)) best = &r;
    }
    const bool timed_out = sh.stop.load();
    sol.stats.nodes = sh.nodes.load();
    sol.stats.leaves = sh.leaves.load();
    if (best) {
        const auto dec = build_schedule(P, best->n);
        sol.assignment = m.assignment(dec.placements, dec.picks);
        const auto bad = m.mip.violations(sol.assignment, opts.tolerance);
        if (!bad.empty()) {
            throw std::logic_error("solver produced an assignment violating row " +
                                   (bad.front() >= 0 ? m.mip.rows()[bad.front()].name : std::string("bounds")));
        }
        sol.objective_value = m.mip.evaluate(sol.assignment);
        sol.status = timed_out ? SolveStatus::Timeout : SolveStatus::Optimal;
    } else {
        sol.status = timed_out ? SolveStatus::Timeout : SolveStatus::Infeasible;
        if (!timed_out) sol.infeasible_rows = detail::single_row_witness(m.mip, opts.tolerance);
    }
    sol.stats.wall_seconds = clock.seconds();
    return sol;
}

}  // namespace cosa
