#include "cosa/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cosa {

const char* objective_mode_name(ObjectiveMode m) {
    switch (m) {
        case ObjectiveMode::Util: return "util";
        case ObjectiveMode::Comp: return "comp";
        case ObjectiveMode::Traffic: return "traffic";
        case ObjectiveMode::Combined: return "combined";
        case ObjectiveMode::Balance: return "balance";
    }
    return "?";
}

bool parse_objective_mode(const std::string& s, ObjectiveMode& out) {
    for (auto m : {ObjectiveMode::Util, ObjectiveMode::Comp, ObjectiveMode::Traffic,
                   ObjectiveMode::Combined, ObjectiveMode::Balance}) {
        if (s == objective_mode_name(m)) {
            out = m;
            return true;
        }
    }
    return false;
}

std::string ObjectiveWeights::check() const {
    for (double w : {w_util, w_comp, w_traffic}) {
        if (!(w >= 0.0) || !std::isfinite(w)) return "weights must be finite and non-negative";
    }
    if (mode == ObjectiveMode::Combined && w_util == 0.0 && w_comp == 0.0 && w_traffic == 0.0) {
        return "combined objective needs at least one positive weight";
    }
    if (mode == ObjectiveMode::Balance && w_comp == 0.0 && w_traffic == 0.0) {
        return "balance objective needs a positive compute or traffic weight";
    }
    return {};
}

bool ObjectiveWeights::uses_traffic() const {
    switch (mode) {
        case ObjectiveMode::Traffic:
        case ObjectiveMode::Balance: return true;
        case ObjectiveMode::Combined: return w_traffic > 0.0;
        default: return false;
    }
}

std::vector<std::pair<int, Tensor>> constrained_buffers(const ArchSpec& arch) {
    std::vector<std::pair<int, Tensor>> out;
    for (int I = 1; I + 1 < arch.num_levels(); ++I) {
        for (auto v : kAllTensors) {
            if (arch.stores(I, v)) out.emplace_back(I, v);
        }
    }
    return out;
}

std::int64_t baseline_partition_bytes(const ArchSpec& arch) {
    std::int64_t total = 0;
    for (auto [I, v] : constrained_buffers(arch)) {
        auto elems = capacity_elements(arch, I, v);
        if (elems) total += *elems * arch.precision(v);
    }
    return total;
}

int ScheduleModel::x_var(int factor, int level, int rank, Mapping m) const {
    // Options of a factor group are laid out (level, mapping, rank).
    const auto& opts = mip.groups()[factor_group[factor]].options;
    for (int var : opts) {
        const auto& xi = x_index[x_slot_of_var[var]];
        if (xi.level == level && xi.rank == rank && xi.mapping == m) return var;
    }
    return -1;
}

namespace {

std::string factor_tag(const FactorInfo& f) {
    return std::string(1, dim_letter(f.dim)) + std::to_string(f.ordinal);
}

bool relevant(const ArchSpec& arch, Dim j, Tensor v) { return arch.related(j, v); }

}  // namespace

void declare_allocation_vars(ScheduleModel& m) {
    const auto& pf = m.pf;
    for (int j = 0; j < kNumDims; ++j) {
        const auto& fs = pf.factors[j];
        for (int n = 0; n < static_cast<int>(fs.size()); ++n) {
            m.factors.push_back({static_cast<Dim>(j), n, fs[n], pf.log2_factors[j][n]});
        }
    }
    std::stable_sort(m.factors.begin(), m.factors.end(),
                     [](const FactorInfo& a, const FactorInfo& b) { return a.value > b.value; });
    m.Z = static_cast<int>(m.factors.size());
    const int H = m.arch.num_levels();

    m.x_slot_of_var.assign(m.mip.num_vars(), -1);
    for (int f = 0; f < m.Z; ++f) {
        std::vector<int> options;
        for (int I = 0; I < H; ++I) {
            for (auto k : {Mapping::Spatial, Mapping::Temporal}) {
                if (k == Mapping::Spatial && !m.spatial_allowed(I)) continue;
                for (int z = 0; z < m.Z; ++z) {
                    std::ostringstream name;
                    name << "x_" << factor_tag(m.factors[f]) << "_L" << I << "_z" << z
                         << (k == Mapping::Spatial ? "_s" : "_t");
                    int var = m.mip.add_var(name.str());
                    m.x_slot_of_var.push_back(static_cast<int>(m.x_index.size()));
                    m.x_index.push_back({f, I, z, k});
                    options.push_back(var);
                }
            }
        }
        m.factor_group.push_back(m.mip.add_group(GroupKind::Factor, std::move(options)));
    }
}

void build_assignment_constraints(ScheduleModel& m) {
    for (int f = 0; f < m.Z; ++f) {
        std::vector<Term> terms;
        for (int var : m.mip.groups()[m.factor_group[f]].options) terms.push_back({var, 1.0});
        m.mip.add_row(RowKind::Assign, std::move(terms), Sense::EQ, 1.0,
                      "assign_" + factor_tag(m.factors[f]));
    }
    const int H = m.arch.num_levels();
    // slot (I, z) -> variables
    std::vector<std::vector<Term>> slots(static_cast<std::size_t>(H) * m.Z);
    for (int var = 0; var < static_cast<int>(m.x_slot_of_var.size()); ++var) {
        const int s = m.x_slot_of_var[var];
        if (s < 0) continue;
        const auto& xi = m.x_index[s];
        slots[static_cast<std::size_t>(xi.level) * m.Z + xi.rank].push_back({var, 1.0});
    }
    if (m.Z < 2) return;  // a lone factor can never collide
    for (int I = 0; I < H; ++I) {
        for (int z = 0; z < m.Z; ++z) {
            m.mip.add_row(RowKind::Slot, std::move(slots[static_cast<std::size_t>(I) * m.Z + z]),
                          Sense::LE, 1.0, "slot_L" + std::to_string(I) + "_z" + std::to_string(z));
        }
    }
}

void build_partition_vars(ScheduleModel& m) {
    if (!m.options.partition) return;
    const auto& spec = *m.options.partition;
    if (spec.budget_bytes <= 0) throw EmptyPartitionMenu("partition budget must be positive");
    const int e_max = spec.e_max ? *spec.e_max
                                 : static_cast<int>(std::floor(std::log2(static_cast<double>(spec.budget_bytes))));
    std::vector<Term> budget;
    for (auto [I, v] : constrained_buffers(m.arch)) {
        PartitionPair pair{I, v, {}, -1, {}};
        for (int e = spec.e_min; e <= e_max; ++e) {
            const double bytes = std::ldexp(1.0, e) * static_cast<double>(m.arch.precision(v));
            if (bytes <= static_cast<double>(spec.budget_bytes)) pair.exponents.push_back(e);
        }
        if (pair.exponents.empty()) {
            throw EmptyPartitionMenu("no buffer size in [2^" + std::to_string(spec.e_min) + ", 2^" +
                                     std::to_string(e_max) + "] fits " + tensor_name(v) + " at " +
                                     m.arch.levels[I].name + " within " +
                                     std::to_string(spec.budget_bytes) + " bytes");
        }
        std::vector<Term> pick;
        for (int e : pair.exponents) {
            int var = m.mip.add_var("s_L" + std::to_string(I) + "_" + tensor_name(v) + "_e" + std::to_string(e));
            pair.vars.push_back(var);
            pick.push_back({var, 1.0});
            budget.push_back({var, std::ldexp(1.0, e) * static_cast<double>(m.arch.precision(v))});
        }
        pair.group = m.mip.add_group(GroupKind::Partition, pair.vars);
        m.mip.add_row(RowKind::PartitionPick, std::move(pick), Sense::EQ, 1.0,
                      "pick_L" + std::to_string(I) + "_" + tensor_name(v));
        m.partitions.push_back(std::move(pair));
    }
    m.budget_row = m.mip.add_row(RowKind::Budget, std::move(budget), Sense::LE,
                                 static_cast<double>(spec.budget_bytes), "budget");
}

namespace {

/// U_{I,v}: log-size of the v tile held at level I (factors at all levels below).
std::vector<Term> utilization_terms(const ScheduleModel& m, int I, Tensor v) {
    std::vector<Term> terms;
    if (!m.arch.stores(I, v)) return terms;
    for (int var = 0; var < static_cast<int>(m.x_slot_of_var.size()); ++var) {
        const int s = m.x_slot_of_var[var];
        if (s < 0) continue;
        const auto& xi = m.x_index[s];
        const auto& f = m.factors[xi.factor];
        if (xi.level < I && relevant(m.arch, f.dim, v)) terms.push_back({var, f.log2});
    }
    return terms;
}

}  // namespace

void build_buffer_constraints(ScheduleModel& m) {
    for (auto [I, v] : constrained_buffers(m.arch)) {
        auto terms = utilization_terms(m, I, v);
        const auto key = std::make_pair(I, static_cast<int>(v));
        const std::string name = "cap_L" + std::to_string(I) + "_" + tensor_name(v);
        auto over = m.options.capacity_override.find(key);
        const PartitionPair* pair = nullptr;
        for (const auto& p : m.partitions) {
            if (p.level == I && p.tensor == v) pair = &p;
        }
        if (pair) {
            auto row_terms = terms;
            for (std::size_t e = 0; e < pair->vars.size(); ++e) {
                row_terms.push_back({pair->vars[e], -static_cast<double>(pair->exponents[e])});
            }
            m.capacity_rows[key] = m.mip.add_row(RowKind::Capacity, std::move(row_terms), Sense::LE, 0.0, name);
            if (over != m.options.capacity_override.end() && !terms.empty()) {
                m.mip.add_row(RowKind::Capacity, terms, Sense::LE,
                              std::log2(static_cast<double>(over->second)), name + "_tight");
            }
            continue;
        }
        if (terms.empty()) continue;
        double rhs;
        if (over != m.options.capacity_override.end()) {
            rhs = std::log2(static_cast<double>(std::max<std::int64_t>(over->second, 1)));
        } else {
            rhs = *log2_capacity(m.arch, I, v);
        }
        m.capacity_rows[key] = m.mip.add_row(RowKind::Capacity, std::move(terms), Sense::LE, rhs, name);
    }
}

void build_spatial_constraints(ScheduleModel& m) {
    const int H = m.arch.num_levels();
    for (int I = 0; I < H; ++I) {
        if (!m.spatial_allowed(I)) continue;
        std::vector<Term> terms;
        for (int var = 0; var < static_cast<int>(m.x_slot_of_var.size()); ++var) {
            const int s = m.x_slot_of_var[var];
            if (s < 0) continue;
            const auto& xi = m.x_index[s];
            if (xi.level == I && xi.mapping == Mapping::Spatial) {
                terms.push_back({var, m.factors[xi.factor].log2});
            }
        }
        if (terms.empty()) continue;
        m.mip.add_row(RowKind::Spatial, std::move(terms), Sense::LE,
                      std::log2(static_cast<double>(m.arch.levels[I].spatial_fanout)),
                      "spatial_L" + std::to_string(I));
    }
}

void build_util_objective(ScheduleModel& m) {
    m.util = {};
    for (int I = 0; I + 1 < m.arch.num_levels(); ++I) {
        for (auto v : kAllTensors) {
            for (const auto& t : utilization_terms(m, I, v)) m.util.terms.push_back(t);
        }
    }
}

void build_comp_objective(ScheduleModel& m) {
    m.comp = {};
    for (int var = 0; var < static_cast<int>(m.x_slot_of_var.size()); ++var) {
        const int s = m.x_slot_of_var[var];
        if (s < 0) continue;
        const auto& xi = m.x_index[s];
        if (xi.mapping == Mapping::Temporal) m.comp.add(var, m.factors[xi.factor].log2);
    }
}

void build_traffic_objective(ScheduleModel& m) {
    if (m.noc < 0) throw FormulationError("traffic objective needs a NoC boundary level");
    const int H = m.arch.num_levels();
    m.has_traffic = true;
    m.positions.clear();
    for (int I = m.noc; I < H; ++I) {
        for (int z = 0; z < m.Z; ++z) m.positions.emplace_back(I, z);
    }
    const int G = static_cast<int>(m.positions.size());

    for (auto v : kAllTensors) {
        const int vi = static_cast<int>(v);
        m.D[vi] = {};
        m.L[vi] = {};
        m.T[vi] = {};
        for (int var = 0; var < static_cast<int>(m.x_slot_of_var.size()); ++var) {
            const int s = m.x_slot_of_var[var];
            if (s < 0) continue;
            const auto& xi = m.x_index[s];
            const auto& f = m.factors[xi.factor];
            if (!relevant(m.arch, f.dim, v)) continue;
            if (xi.level < m.noc) m.D[vi].add(var, f.log2);
            if (xi.level == m.noc && xi.mapping == Mapping::Spatial) m.L[vi].add(var, f.log2);
        }

        auto& ys = m.y_var[vi];
        auto& ps = m.p_var[vi];
        ys.assign(G, -1);
        ps.assign(G, std::vector<int>(m.Z, -1));
        for (int g = 0; g < G; ++g) {
            const auto [I, z] = m.positions[g];
            const std::string pos = std::to_string(g);
            ys[g] = m.mip.add_var(std::string("y_") + tensor_name(v) + "_" + pos);
            m.mip.derived_order.push_back(ys[g]);

            std::vector<Term> rel;  // relevant temporal factors at this slot
            if (m.arch.stores(I, v)) {
                for (int f = 0; f < m.Z; ++f) {
                    if (relevant(m.arch, m.factors[f].dim, v)) {
                        rel.push_back({m.x_var(f, I, z, Mapping::Temporal), 1.0});
                    }
                }
            }
            if (!rel.empty()) {
                std::vector<Term> lower{{ys[g], 1.0}};
                for (auto t : rel) lower.push_back({t.var, -1.0});
                m.mip.add_row(RowKind::YLower, std::move(lower), Sense::GE, 0.0,
                              std::string("ylo_") + tensor_name(v) + "_" + pos);
            }
            if (g > 0) {
                m.mip.add_row(RowKind::YChain, {{ys[g], 1.0}, {ys[g - 1], -1.0}}, Sense::GE, 0.0,
                              std::string("ychain_") + tensor_name(v) + "_" + pos);
            }
            std::vector<Term> upper{{ys[g], 1.0}};
            if (g > 0) upper.push_back({ys[g - 1], -1.0});
            for (auto t : rel) upper.push_back({t.var, -1.0});
            m.mip.add_row(RowKind::YUpper, std::move(upper), Sense::LE, 0.0,
                          std::string("yup_") + tensor_name(v) + "_" + pos);

            for (int f = 0; f < m.Z; ++f) {
                const int x = m.x_var(f, I, z, Mapping::Temporal);
                const int p = m.mip.add_var(std::string("p_") + tensor_name(v) + "_" + pos + "_" +
                                            factor_tag(m.factors[f]));
                ps[g][f] = p;
                m.mip.derived_order.push_back(p);
                const std::string tag = std::string(tensor_name(v)) + "_" + pos + "_" + factor_tag(m.factors[f]);
                m.mip.add_row(RowKind::PLeY, {{p, 1.0}, {ys[g], -1.0}}, Sense::LE, 0.0, "ply_" + tag);
                m.mip.add_row(RowKind::PLeX, {{p, 1.0}, {x, -1.0}}, Sense::LE, 0.0, "plx_" + tag);
                m.mip.add_row(RowKind::PGe, {{p, 1.0}, {ys[g], -1.0}, {x, -1.0}}, Sense::GE, -1.0,
                              "pge_" + tag);
                m.T[vi].add(p, m.factors[f].log2);
            }
        }
    }
    m.traffic = {};
    for (int v = 0; v < kNumTensors; ++v) {
        for (const auto* e : {&m.D[v], &m.L[v], &m.T[v]}) {
            for (const auto& t : e->terms) m.traffic.terms.push_back(t);
        }
    }
}

void compose_objective(ScheduleModel& m) {
    const auto& w = m.options.weights;
    auto& obj = m.mip.objective;
    std::fill(obj.begin(), obj.end(), 0.0);
    auto accumulate = [&obj](const LinearExpr& e, double scale) {
        for (const auto& t : e.terms) obj[t.var] += scale * t.coef;
    };
    switch (w.mode) {
        case ObjectiveMode::Util: accumulate(m.util, -1.0); break;
        case ObjectiveMode::Comp: accumulate(m.comp, 1.0); break;
        case ObjectiveMode::Traffic: accumulate(m.traffic, 1.0); break;
        case ObjectiveMode::Combined:
            if (w.w_util != 0.0) accumulate(m.util, -w.w_util);
            if (w.w_comp != 0.0) accumulate(m.comp, w.w_comp);
            if (w.w_traffic != 0.0) accumulate(m.traffic, w.w_traffic);
            break;
        case ObjectiveMode::Balance: {
            // minimize |w_T T - w_C C| through d >= e and d >= -e.
            m.balance_var = m.mip.add_var("d", VarKind::Continuous, 0.0,
                                          std::numeric_limits<double>::infinity());
            m.mip.derived_order.push_back(m.balance_var);
            std::map<int, double> e;
            for (const auto& t : m.traffic.terms) e[t.var] += w.w_traffic * t.coef;
            for (const auto& t : m.comp.terms) e[t.var] -= w.w_comp * t.coef;
            std::vector<Term> pos{{m.balance_var, 1.0}}, neg{{m.balance_var, 1.0}};
            for (auto [var, c] : e) {
                if (c == 0.0) continue;
                pos.push_back({var, -c});
                neg.push_back({var, c});
            }
            m.mip.add_row(RowKind::BalancePos, std::move(pos), Sense::GE, 0.0, "balance_pos");
            m.mip.add_row(RowKind::BalanceNeg, std::move(neg), Sense::GE, 0.0, "balance_neg");
            m.mip.objective[m.balance_var] = 1.0;
            break;
        }
    }
}

ScheduleModel build_model(const PrimeFactorization& pf, const ArchSpec& arch,
                          const FormulationOptions& options) {
    if (auto why = options.weights.check(); !why.empty()) throw FormulationError(why);
    ScheduleModel m;
    m.pf = pf;
    m.arch = arch;
    m.options = options;
    m.noc = arch.noc_level();
    build_partition_vars(m);
    declare_allocation_vars(m);
    build_assignment_constraints(m);
    build_buffer_constraints(m);
    build_spatial_constraints(m);
    build_util_objective(m);
    build_comp_objective(m);
    if (options.weights.uses_traffic()) build_traffic_objective(m);
    compose_objective(m);
    m.x_slot_of_var.resize(m.mip.num_vars(), -1);
    return m;
}

std::vector<double> ScheduleModel::assignment(const std::vector<Placement>& placements,
                                              const std::vector<int>& partition_picks) const {
    if (static_cast<int>(placements.size()) != Z) throw std::invalid_argument("one placement per factor required");
    std::vector<double> x(mip.num_vars(), 0.0);
    for (int f = 0; f < Z; ++f) {
        const auto& p = placements[f];
        const int var = x_var(f, p.level, p.rank, p.mapping);
        if (var < 0) throw std::invalid_argument("placement has no allocation variable");
        x[var] = 1.0;
    }
    if (!partitions.empty()) {
        if (partition_picks.size() != partitions.size()) throw std::invalid_argument("one pick per partition pair required");
        for (std::size_t i = 0; i < partitions.size(); ++i) x[partitions[i].vars.at(partition_picks[i])] = 1.0;
    }
    if (has_traffic) {
        for (auto v : kAllTensors) {
            const int vi = static_cast<int>(v);
            bool on = false;
            for (std::size_t g = 0; g < positions.size(); ++g) {
                const auto [I, z] = positions[g];
                for (int f = 0; f < Z; ++f) {
                    const auto& p = placements[f];
                    if (p.level == I && p.rank == z && p.mapping == Mapping::Temporal &&
                        arch.stores(I, v) && arch.related(factors[f].dim, v)) {
                        on = true;
                    }
                }
                x[y_var[vi][g]] = on ? 1.0 : 0.0;
                for (int f = 0; f < Z; ++f) {
                    const auto& p = placements[f];
                    const bool here = p.level == I && p.rank == z && p.mapping == Mapping::Temporal;
                    x[p_var[vi][g][f]] = (on && here) ? 1.0 : 0.0;
                }
            }
        }
    }
    if (balance_var >= 0) {
        const auto& w = options.weights;
        x[balance_var] = std::abs(w.w_traffic * traffic.eval(x) - w.w_comp * comp.eval(x));
    }
    return x;
}

std::vector<Placement> ScheduleModel::placements(const std::vector<double>& x) const {
    std::vector<Placement> out(Z);
    std::vector<int> seen(Z, 0);
    for (int var = 0; var < mip.num_vars(); ++var) {
        const int s = x_slot_of_var[var];
        if (s < 0 || x[var] < 0.5) continue;
        const auto& xi = x_index[s];
        out[xi.factor] = {xi.level, xi.rank, xi.mapping};
        ++seen[xi.factor];
    }
    for (int f = 0; f < Z; ++f) {
        if (seen[f] != 1) {
            throw std::runtime_error("malformed solution: factor " + std::string(1, dim_letter(factors[f].dim)) +
                                     std::to_string(factors[f].ordinal) + " has " + std::to_string(seen[f]) +
                                     " assignments");
        }
    }
    return out;
}

std::vector<int> ScheduleModel::partition_picks(const std::vector<double>& x) const {
    std::vector<int> out;
    for (const auto& p : partitions) {
        int pick = -1;
        for (std::size_t e = 0; e < p.vars.size(); ++e) {
            if (x[p.vars[e]] > 0.5) pick = static_cast<int>(e);
        }
        if (pick < 0) throw std::runtime_error("malformed solution: partition without a size");
        out.push_back(pick);
    }
    return out;
}

}  // namespace cosa
