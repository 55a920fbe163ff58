#include "bfmpc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bfmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class CoreStatus { Optimal, Infeasible, Unbounded, MaxIter };

// Tableau simplex on   min c^T w   s.t.  T w = b (b >= 0),  w >= 0.
// Dantzig pricing with lowest-index ties; switches to Bland's rule after a
// stall to protect against cycling. Returns the basic solution and the
// simplex prices pi = c_B^T B^{-1} (read off the artificial columns).
struct CoreResult {
    CoreStatus status = CoreStatus::MaxIter;
    Vector w;
    double objective = 0.0;
    Vector prices;
    int iterations = 0;
};

CoreResult simplex_core(const Matrix& A, const Vector& b, const Vector& c, int max_iter) {
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    // columns: n structural + m artificial, then rhs
    Matrix T(m, n + m + 1);
    T.leftCols(n) = A;
    T.middleCols(n, m).setIdentity();
    T.col(n + m) = b;
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) basis[i] = n + i;

    CoreResult res;
    res.iterations = 0;

    auto pivot = [&](int row, int col) {
        T.row(row) /= T(row, col);
        for (int i = 0; i < m; ++i) {
            if (i == row) continue;
            const double factor = T(i, col);
            if (factor != 0.0) T.row(i) -= factor * T.row(row);
        }
        basis[row] = col;
    };

    // reduced-cost row maintained explicitly
    Eigen::RowVectorXd cost(n + m + 1);

    auto run_phase = [&](const Eigen::RowVectorXd& obj, int allowed_cols) -> CoreStatus {
        cost = obj;
        for (int i = 0; i < m; ++i) {
            if (cost(basis[i]) != 0.0) cost -= cost(basis[i]) * T.row(i).eval();
        }
        int stall = 0;
        double last_obj = -cost(n + m);
        bool bland = false;
        while (true) {
            if (++res.iterations > max_iter) return CoreStatus::MaxIter;
            int col = -1;
            if (!bland) {
                double best = -1e-9;
                for (int j = 0; j < allowed_cols; ++j)
                    if (cost(j) < best) { best = cost(j); col = j; }
            } else {
                for (int j = 0; j < allowed_cols; ++j)
                    if (cost(j) < -1e-9) { col = j; break; }
            }
            if (col < 0) return CoreStatus::Optimal;
            int row = -1;
            double best_ratio = kInf;
            for (int i = 0; i < m; ++i) {
                if (T(i, col) > 1e-11) {
                    const double ratio = T(i, n + m) / T(i, col);
                    if (ratio < best_ratio - 1e-12 ||
                        (ratio < best_ratio + 1e-12 && (row < 0 || basis[i] < basis[row]))) {
                        best_ratio = ratio;
                        row = i;
                    }
                }
            }
            if (row < 0) return CoreStatus::Unbounded;
            const double piv = T(row, col);
            cost -= (cost(col) / piv) * T.row(row).eval();
            cost(col) = 0.0;
            pivot(row, col);
            const double cur = -cost(n + m);
            if (cur >= last_obj - 1e-13) {
                if (++stall > 2 * (m + n)) bland = true;
            } else {
                stall = 0;
                last_obj = cur;
            }
        }
    };

    // phase 1: drive artificials out
    Eigen::RowVectorXd phase1 = Eigen::RowVectorXd::Zero(n + m + 1);
    phase1.segment(n, m).setOnes();
    CoreStatus st = run_phase(phase1, n + m);
    if (st != CoreStatus::Optimal) {
        res.status = st == CoreStatus::Unbounded ? CoreStatus::Infeasible : st;
        return res;
    }
    const double art_sum = -cost(n + m);
    if (art_sum > 1e-7 * (1.0 + b.cwiseAbs().maxCoeff())) {
        res.status = CoreStatus::Infeasible;
        return res;
    }
    // pivot lingering artificials out of the basis where possible
    for (int i = 0; i < m; ++i) {
        if (basis[i] < n) continue;
        int col = -1;
        for (int j = 0; j < n; ++j)
            if (std::abs(T(i, j)) > 1e-9) { col = j; break; }
        if (col >= 0) pivot(i, col);
        // else: redundant row, leave the artificial at zero level
    }

    // phase 2
    Eigen::RowVectorXd phase2 = Eigen::RowVectorXd::Zero(n + m + 1);
    phase2.head(n) = c.transpose();
    st = run_phase(phase2, n);
    res.status = st;
    if (st != CoreStatus::Optimal && st != CoreStatus::MaxIter) return res;

    res.w = Vector::Zero(n);
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) res.w(basis[i]) = T(i, n + m);
    res.objective = c.dot(res.w);
    // prices: pi^T = c_B^T B^{-1}; artificial column j of the final tableau
    // holds B^{-1} e_j, so its phase-2 reduced cost is 0 - pi_j.
    res.prices = -cost.segment(n, m).transpose();
    return res;
}

SolveStatus map_status(CoreStatus s) {
    switch (s) {
        case CoreStatus::Optimal: return SolveStatus::Optimal;
        case CoreStatus::Infeasible: return SolveStatus::Infeasible;
        case CoreStatus::Unbounded: return SolveStatus::Unbounded;
        case CoreStatus::MaxIter: return SolveStatus::MaxIter;
    }
    return SolveStatus::MaxIter;
}

// Solve max f^T z s.t. Ain z <= bin through the dual
//   min bin^T y  s.t.  Ain^T y = f,  y >= 0.
// Dual infeasibility certifies an unbounded primal when the primal is
// feasible (callers check bin >= 0 => z = 0 feasible).
QpSolution solve_tall_inequality(const Vector& f, const Matrix& Ain, const Vector& bin,
                                 SolveTolerances tol) {
    const int rows = static_cast<int>(Ain.rows());
    Matrix A = Ain.transpose();
    Vector b = f;
    // flip rows so the rhs is nonnegative
    std::vector<double> sign(A.rows(), 1.0);
    for (int i = 0; i < A.rows(); ++i) {
        if (b(i) < 0.0) {
            A.row(i) *= -1.0;
            b(i) = -b(i);
            sign[i] = -1.0;
        }
    }
    const int max_iter = tol.max_iterations > 0 ? tol.max_iterations
                                                : 200 * (rows + A.rows() + 10);
    CoreResult core = simplex_core(A, b, bin, max_iter);

    QpSolution sol;
    sol.iterations = core.iterations;
    if (core.status == CoreStatus::Infeasible) {
        sol.status = SolveStatus::Unbounded;  // primal feasible by precondition
        return sol;
    }
    if (core.status == CoreStatus::Unbounded) {
        sol.status = SolveStatus::Infeasible;  // dual unbounded => primal infeasible
        return sol;
    }
    sol.status = map_status(core.status);
    if (sol.status != SolveStatus::Optimal) return sol;
    sol.in_multipliers = core.w;
    sol.objective = core.objective;
    // primal solution from the dual prices (sign-adjusted for flipped rows)
    sol.z = Vector(core.prices.size());
    for (int i = 0; i < sol.z.size(); ++i) sol.z(i) = sign[i] * core.prices(i);
    for (int i = 0; i < rows; ++i)
        if (sol.in_multipliers(i) > 0.0) sol.active_set.push_back(i);
    return sol;
}

}  // namespace

QpSolution solve_lp(const Vector& f, const Matrix& Aeq, const Vector& beq,
                    const Matrix& Ain, const Vector& bin, SolveTolerances tol) {
    const int n = static_cast<int>(f.size());
    if ((Aeq.rows() > 0 && Aeq.cols() != n) || (Ain.rows() > 0 && Ain.cols() != n) ||
        Aeq.rows() != beq.size() || Ain.rows() != bin.size())
        throw std::invalid_argument("solve_lp: dimension mismatch");

    // compress variables that appear in no constraint
    std::vector<int> keep;
    keep.reserve(n);
    for (int j = 0; j < n; ++j) {
        const bool used = (Aeq.rows() > 0 && Aeq.col(j).cwiseAbs().maxCoeff() > 0.0) ||
                          (Ain.rows() > 0 && Ain.col(j).cwiseAbs().maxCoeff() > 0.0);
        if (used) {
            keep.push_back(j);
        } else if (f(j) != 0.0) {
            QpSolution sol;  // free direction with nonzero cost
            sol.status = SolveStatus::Unbounded;
            return sol;
        }
    }
    auto expand = [&](QpSolution sol) {
        if (sol.status == SolveStatus::Optimal && static_cast<int>(keep.size()) < n) {
            Vector full = Vector::Zero(n);
            for (size_t i = 0; i < keep.size(); ++i) full(keep[i]) = sol.z(i);
            sol.z = full;
        }
        return sol;
    };
    Matrix Ae = Matrix(Aeq.rows(), keep.size());
    Matrix Ai = Matrix(Ain.rows(), keep.size());
    Vector fc(keep.size());
    for (size_t i = 0; i < keep.size(); ++i) {
        if (Aeq.rows() > 0) Ae.col(i) = Aeq.col(keep[i]);
        if (Ain.rows() > 0) Ai.col(i) = Ain.col(keep[i]);
        fc(i) = f(keep[i]);
    }
    const int nc = static_cast<int>(keep.size());
    if (nc == 0) {
        QpSolution sol;
        // constant objective; feasibility of the constraint rows alone
        const bool eq_ok = Aeq.rows() == 0 || beq.cwiseAbs().maxCoeff() <= 1e-9;
        const bool in_ok = Ain.rows() == 0 || bin.minCoeff() >= -1e-9;
        sol.status = (eq_ok && in_ok) ? SolveStatus::Optimal : SolveStatus::Infeasible;
        sol.z = Vector::Zero(n);
        sol.in_multipliers = Vector::Zero(Ain.rows());
        sol.objective = 0.0;
        return sol;
    }

    // tall inequality-only problems with an obvious feasible point go dual
    if (Aeq.rows() == 0 && Ain.rows() >= 2 * nc && bin.size() > 0 && bin.minCoeff() >= 0.0)
        return expand(solve_tall_inequality(fc, Ai, bin, tol));

    // primal path: split z = zp - zn, add slacks for inequality rows
    const int me = static_cast<int>(Aeq.rows());
    const int mi = static_cast<int>(Ain.rows());
    const int nw = 2 * nc + mi;
    Matrix A(me + mi, nw);
    Vector b(me + mi);
    A.setZero();
    if (me > 0) {
        A.topLeftCorner(me, nc) = Ae;
        A.block(0, nc, me, nc) = -Ae;
        b.head(me) = beq;
    }
    if (mi > 0) {
        A.block(me, 0, mi, nc) = Ai;
        A.block(me, nc, mi, nc) = -Ai;
        A.block(me, 2 * nc, mi, mi).setIdentity();
        b.tail(mi) = bin;
    }
    std::vector<double> flip(A.rows(), 1.0);
    for (int i = 0; i < A.rows(); ++i) {
        if (b(i) < 0.0) {
            A.row(i) *= -1.0;
            b(i) = -b(i);
            flip[i] = -1.0;
        }
    }
    Vector c = Vector::Zero(nw);
    c.head(nc) = -fc;  // maximize f <=> minimize -f
    c.segment(nc, nc) = fc;
    const int max_iter = tol.max_iterations > 0 ? tol.max_iterations
                                                : 200 * (static_cast<int>(A.rows()) + nw + 10);
    CoreResult core = simplex_core(A, b, c, max_iter);
    QpSolution sol;
    sol.iterations = core.iterations;
    sol.status = map_status(core.status);
    if (sol.status != SolveStatus::Optimal) return sol;
    sol.z = core.w.head(nc) - core.w.segment(nc, nc);
    sol.objective = fc.dot(sol.z);
    // stationarity for max f^T z reads f = Aeq^T lambda + Ain^T mu, mu >= 0;
    // the simplex ran min -f^T z on sign-flipped rows, so negate and unflip.
    if (me > 0) {
        sol.eq_multipliers = Vector(me);
        for (int i = 0; i < me; ++i) sol.eq_multipliers(i) = -flip[i] * core.prices(i);
    }
    sol.in_multipliers = Vector::Zero(mi);
    for (int i = 0; i < mi; ++i) {
        sol.in_multipliers(i) = std::max(0.0, -flip[me + i] * core.prices(me + i));
        const double slack = core.w(2 * nc + i);
        if (slack <= 1e-9) sol.active_set.push_back(i);
    }
    return expand(sol);
}

QpSolution solve_lp(const Vector& f, const Matrix& Ain, const Vector& bin,
                    SolveTolerances tol) {
    return solve_lp(f, Matrix(0, f.size()), Vector(), Ain, bin, tol);
}

}  // namespace bfmpc
