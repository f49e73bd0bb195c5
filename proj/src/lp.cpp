#include "lp.hpp"

#include <cmath>
#include <limits>

namespace cosa::detail {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-10;

struct Tableau {
    int m = 0;
    int cols = 0;  // excluding rhs
    std::vector<double> a;  // m x (cols + 1)
    std::vector<double> obj;  // cols + 1; obj[cols] = -z
    std::vector<int> basis;
    std::vector<char> banned;

    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * (cols + 1) + j]; }
    double rhs(int i) const { return a[static_cast<std::size_t>(i) * (cols + 1) + cols]; }

    void pivot(int r, int e) {
        const int w = cols + 1;
        double* pr = &a[static_cast<std::size_t>(r) * w];
        const double inv = 1.0 / pr[e];
        for (int j = 0; j < w; ++j) pr[j] *= inv;
        pr[e] = 1.0;
        for (int i = 0; i < m; ++i) {
            if (i == r) continue;
            double* pi = &a[static_cast<std::size_t>(i) * w];
            const double f = pi[e];
            if (f == 0.0) continue;
            for (int j = 0; j < w; ++j) pi[j] -= f * pr[j];
            pi[e] = 0.0;
        }
        const double f = obj[e];
        if (f != 0.0) {
            for (int j = 0; j < w; ++j) obj[j] -= f * pr[j];
            obj[e] = 0.0;
        }
        basis[r] = e;
    }

    void price(const std::vector<double>& cost) {
        obj.assign(cols + 1, 0.0);
        for (int j = 0; j < cols; ++j) obj[j] = cost[j];
        for (int i = 0; i < m; ++i) {
            const double cb = cost[basis[i]];
            if (cb == 0.0) continue;
            for (int j = 0; j <= cols; ++j) obj[j] -= cb * at(i, j);
        }
    }

    /// false when unbounded
    bool run() {
        int degenerate = 0;
        for (int iter = 0; iter < 50000; ++iter) {
            const bool bland = degenerate > 30;
            int e = -1;
            double best = -kCostTol;
            for (int j = 0; j < cols; ++j) {
                if (banned[j]) continue;
                if (obj[j] < best) {
                    e = j;
                    if (bland) break;
                    best = obj[j];
                }
            }
            if (e < 0) return true;
            int r = -1;
            double ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                const double v = at(i, e);
                if (v <= kPivotTol) continue;
                const double q = rhs(i) / v;
                if (q < ratio - 1e-12 || (q <= ratio + 1e-12 && r >= 0 && basis[i] < basis[r])) {
                    ratio = q;
                    r = i;
                }
            }
            if (r < 0) return false;
            degenerate = ratio <= 1e-12 ? degenerate + 1 : 0;
            pivot(r, e);
        }
        return true;
    }
};

}  // namespace

LpResult solve_lp(const LpProblem& p) {
    const int m = static_cast<int>(p.rows.size());
    // Column layout: originals, then one slack/surplus per inequality, then artificials.
    std::vector<Sense> sense(m);
    std::vector<double> sign(m, 1.0);
    int extra = 0, arts = 0;
    for (int i = 0; i < m; ++i) {
        sense[i] = p.rows[i].sense;
        if (p.rows[i].rhs < 0) {
            sign[i] = -1.0;
            if (sense[i] == Sense::LE) sense[i] = Sense::GE;
            else if (sense[i] == Sense::GE) sense[i] = Sense::LE;
        }
        if (sense[i] != Sense::EQ) ++extra;
        if (sense[i] != Sense::LE) ++arts;
    }
    Tableau t;
    t.m = m;
    t.cols = p.n + extra + arts;
    t.a.assign(static_cast<std::size_t>(m) * (t.cols + 1), 0.0);
    t.basis.assign(m, -1);
    t.banned.assign(t.cols, 0);
    int next_extra = p.n, next_art = p.n + extra;
    for (int i = 0; i < m; ++i) {
        for (auto [j, v] : p.rows[i].a) t.at(i, j) += sign[i] * v;
        t.at(i, t.cols) = sign[i] * p.rows[i].rhs;
        if (sense[i] == Sense::LE) {
            t.at(i, next_extra) = 1.0;
            t.basis[i] = next_extra++;
        } else {
            if (sense[i] == Sense::GE) t.at(i, next_extra++) = -1.0;
            t.at(i, next_art) = 1.0;
            t.basis[i] = next_art++;
        }
    }

    LpResult res;
    if (arts > 0) {
        std::vector<double> c1(t.cols, 0.0);
        for (int j = p.n + extra; j < t.cols; ++j) c1[j] = 1.0;
        t.price(c1);
        t.run();
        if (-t.obj[t.cols] > 1e-7) {
            res.status = LpResult::Infeasible;
            return res;
        }
        for (int i = 0; i < m; ++i) {
            if (t.basis[i] < p.n + extra) continue;
            for (int j = 0; j < p.n + extra; ++j) {
                if (std::abs(t.at(i, j)) > kPivotTol) {
                    t.pivot(i, j);
                    break;
                }
            }
        }
        for (int j = p.n + extra; j < t.cols; ++j) t.banned[j] = 1;
    }
    std::vector<double> c2(t.cols, 0.0);
    for (int j = 0; j < p.n; ++j) c2[j] = p.c[j];
    t.price(c2);
    if (!t.run()) {
        res.status = LpResult::Unbounded;
        return res;
    }
    res.status = LpResult::Optimal;
    res.value = -t.obj[t.cols];
    res.x.assign(p.n, 0.0);
    for (int i = 0; i < m; ++i) {
        if (t.basis[i] < p.n) res.x[t.basis[i]] = t.rhs(i);
    }
    return res;
}

}  // namespace cosa::detail
