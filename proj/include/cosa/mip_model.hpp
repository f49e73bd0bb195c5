#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cosa {

enum class VarKind { Binary, Continuous };
enum class Sense { LE, EQ, GE };

/// Role of a constraint row. Solvers may exploit the structure a kind implies;
/// every row is still an ordinary linear constraint.
enum class RowKind {
    Assign,      // exactly one configuration per prime factor
    Slot,        // at most one factor per (level, rank) slot
    Capacity,    // log-domain buffer capacity
    Spatial,     // log-domain spatial fanout
    YLower,      // traffic iteration indicator >= relevant temporal factor at slot
    YChain,      // indicator monotone along the rank order
    YUpper,      // indicator only switches on at a relevant factor
    PLeY,        // product <= indicator
    PLeX,        // product <= factor variable
    PGe,         // product >= indicator + factor - 1
    PartitionPick,
    Budget,
    BalancePos,  // d >= e
    BalanceNeg,  // d >= -e
};

const char* row_kind_name(RowKind k);

struct Term {
    int var;
    double coef;
};

struct Variable {
    std::string name;
    VarKind kind = VarKind::Binary;
    double lb = 0.0;
    double ub = 1.0;
};

struct Constraint {
    RowKind kind;
    std::vector<Term> terms;
    Sense sense;
    double rhs;
    std::string name;
};

enum class GroupKind { Factor, Partition };

/// Exactly-one set of binaries. Options are listed in tie-break order.
struct ChoiceGroup {
    GroupKind kind;
    std::vector<int> options;
};

/// A plain linear expression over model variables plus a constant.
struct LinearExpr {
    std::vector<Term> terms;
    double constant = 0.0;

    void add(int var, double coef) { terms.push_back({var, coef}); }
    double eval(const std::vector<double>& x) const;
};

class MipModel {
public:
    int add_var(std::string name, VarKind kind = VarKind::Binary, double lb = 0.0, double ub = 1.0);
    int add_row(RowKind kind, std::vector<Term> terms, Sense sense, double rhs, std::string name);
    int add_group(GroupKind kind, std::vector<int> options);

    const std::vector<Variable>& vars() const { return vars_; }
    const std::vector<Constraint>& rows() const { return rows_; }
    const std::vector<ChoiceGroup>& groups() const { return groups_; }
    std::vector<Constraint>& mutable_rows() { return rows_; }

    int num_vars() const { return static_cast<int>(vars_.size()); }
    int num_rows() const { return static_cast<int>(rows_.size()); }

    /// Minimized objective: constant + sum objective[i] * x[i].
    std::vector<double> objective;
    double objective_constant = 0.0;

    /// Variables not covered by a choice group, in the order in which their
    /// value is implied by the groups and the previously listed ones.
    std::vector<int> derived_order;

    /// Group index of each variable, or -1.
    const std::vector<int>& group_of() const { return group_of_; }
    int group_of(int var) const { return group_of_[var]; }

    double evaluate(const std::vector<double>& x) const;
    double row_activity(int row, const std::vector<double>& x) const;
    bool row_satisfied(int row, const std::vector<double>& x, double tol) const;
    /// Indices of violated rows (and out-of-bound / non-integral variables as -1 - var).
    std::vector<int> violations(const std::vector<double>& x, double tol) const;

    /// Column view: rows touching each variable.
    std::vector<std::vector<int>> columns() const;

    /// LP-format text for cross-checking with external solvers.
    void write_lp(std::ostream& os) const;

private:
    std::vector<Variable> vars_;
    std::vector<Constraint> rows_;
    std::vector<ChoiceGroup> groups_;
    std::vector<int> group_of_;
};

}  // namespace cosa
