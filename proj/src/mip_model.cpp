#include "cosa/mip_model.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace cosa {

const char* row_kind_name(RowKind k) {
    switch (k) {
        case RowKind::Assign: return "assign";
        case RowKind::Slot: return "slot";
        case RowKind::Capacity: return "capacity";
        case RowKind::Spatial: return "spatial";
        case RowKind::YLower: return "y_lower";
        case RowKind::YChain: return "y_chain";
        case RowKind::YUpper: return "y_upper";
        case RowKind::PLeY: return "p_le_y";
        case RowKind::PLeX: return "p_le_x";
        case RowKind::PGe: return "p_ge";
        case RowKind::PartitionPick: return "partition_pick";
        case RowKind::Budget: return "budget";
        case RowKind::BalancePos: return "balance_pos";
        case RowKind::BalanceNeg: return "balance_neg";
    }
    return "?";
}

double LinearExpr::eval(const std::vector<double>& x) const {
    double s = constant;
    for (const auto& t : terms) s += t.coef * x[t.var];
    return s;
}

int MipModel::add_var(std::string name, VarKind kind, double lb, double ub) {
    vars_.push_back({std::move(name), kind, lb, ub});
    objective.push_back(0.0);
    group_of_.push_back(-1);
    return static_cast<int>(vars_.size()) - 1;
}

int MipModel::add_row(RowKind kind, std::vector<Term> terms, Sense sense, double rhs,
                      std::string name) {
    for (const auto& t : terms) {
        if (t.var < 0 || t.var >= num_vars()) throw std::logic_error("row references undeclared variable");
        if (!std::isfinite(t.coef)) throw std::logic_error("non-finite coefficient in row " + name);
    }
    if (!std::isfinite(rhs)) throw std::logic_error("non-finite rhs in row " + name);
    rows_.push_back({kind, std::move(terms), sense, rhs, std::move(name)});
    return static_cast<int>(rows_.size()) - 1;
}

int MipModel::add_group(GroupKind kind, std::vector<int> options) {
    const int id = static_cast<int>(groups_.size());
    for (int v : options) {
        if (group_of_.at(v) != -1) throw std::logic_error("variable in two choice groups");
        group_of_[v] = id;
    }
    groups_.push_back({kind, std::move(options)});
    return id;
}

double MipModel::evaluate(const std::vector<double>& x) const {
    double s = objective_constant;
    for (int i = 0; i < num_vars(); ++i) {
        if (objective[i] != 0.0) s += objective[i] * x[i];
    }
    return s;
}

double MipModel::row_activity(int row, const std::vector<double>& x) const {
    double s = 0.0;
    for (const auto& t : rows_[row].terms) s += t.coef * x[t.var];
    return s;
}

bool MipModel::row_satisfied(int row, const std::vector<double>& x, double tol) const {
    const double a = row_activity(row, x);
    const auto& r = rows_[row];
    switch (r.sense) {
        case Sense::LE: return a <= r.rhs + tol;
        case Sense::GE: return a >= r.rhs - tol;
        case Sense::EQ: return std::abs(a - r.rhs) <= tol;
    }
    return false;
}

std::vector<int> MipModel::violations(const std::vector<double>& x, double tol) const {
    std::vector<int> out;
    if (static_cast<int>(x.size()) != num_vars()) throw std::invalid_argument("assignment size mismatch");
    for (int i = 0; i < num_vars(); ++i) {
        const auto& v = vars_[i];
        bool bad = x[i] < v.lb - tol || x[i] > v.ub + tol;
        if (v.kind == VarKind::Binary) bad = bad || (x[i] != 0.0 && x[i] != 1.0);
        if (bad) out.push_back(-1 - i);
    }
    for (int r = 0; r < num_rows(); ++r) {
        if (!row_satisfied(r, x, tol)) out.push_back(r);
    }
    return out;
}

std::vector<std::vector<int>> MipModel::columns() const {
    std::vector<std::vector<int>> cols(vars_.size());
    for (int r = 0; r < num_rows(); ++r) {
        for (const auto& t : rows_[r].terms) cols[t.var].push_back(r);
    }
    return cols;
}

namespace {

void write_terms(std::ostream& os, const std::vector<Term>& terms, const std::vector<Variable>& vars) {
    bool first = true;
    for (const auto& t : terms) {
        if (t.coef == 0.0) continue;
        if (t.coef < 0) os << (first ? "-" : " - ");
        else if (!first) os << " + ";
        os << std::abs(t.coef) << ' ' << vars[t.var].name;
        first = false;
    }
    if (first) os << "0 " << (vars.empty() ? "dummy" : vars.front().name);
}

}  // namespace

void MipModel::write_lp(std::ostream& os) const {
    const auto old_prec = os.precision(17);
    os << "\\ binary prime-factor allocation model\n";
    os << "Minimize\n obj: ";
    std::vector<Term> obj;
    for (int i = 0; i < num_vars(); ++i) {
        if (objective[i] != 0.0) obj.push_back({i, objective[i]});
    }
    write_terms(os, obj, vars_);
    if (objective_constant != 0.0) os << (objective_constant < 0 ? " - " : " + ") << std::abs(objective_constant);
    os << "\nSubject To\n";
    for (int r = 0; r < num_rows(); ++r) {
        const auto& row = rows_[r];
        os << ' ' << row.name << ": ";
        write_terms(os, row.terms, vars_);
        os << (row.sense == Sense::LE ? " <= " : row.sense == Sense::GE ? " >= " : " = ") << row.rhs << '\n';
    }
    os << "Bounds\n";
    for (const auto& v : vars_) {
        if (v.kind == VarKind::Continuous) os << ' ' << v.lb << " <= " << v.name << " <= " << v.ub << '\n';
    }
    os << "Binaries\n";
    for (const auto& v : vars_) {
        if (v.kind == VarKind::Binary) os << ' ' << v.name << '\n';
    }
    os << "End\n";
    os.precision(old_prec);
}

}  // namespace cosa
