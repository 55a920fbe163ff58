#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "bfmpc/basis.hpp"

namespace bfmpc {

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter };

const char* to_string(SolveStatus s);

struct SolveTolerances {
    double primal = 1e-8;
    double dual = 1e-8;
    int max_iterations = 0;  // 0 = automatic from problem size
};

/// Dense convex QP
///   min  z^T H z + f^T z
///   s.t. Aeq z = beq,  Ain z <= bin
/// Stationarity convention: 2 H z + f + Aeq^T lambda + Ain^T mu = 0, mu >= 0.
struct QpProblem {
    Matrix H;
    Vector f;
    Matrix Aeq;
    Vector beq;
    Matrix Ain;
    Vector bin;

    int num_vars() const { return static_cast<int>(H.rows()); }
    void validate() const;  // throws on dimension mismatch or asymmetric H
    void dump(std::ostream& os) const;  // plain-text matrices for cross-checking
};

struct QpSolution {
    Vector z;
    SolveStatus status = SolveStatus::MaxIter;
    double objective = 0.0;
    Vector eq_multipliers;
    Vector in_multipliers;
    std::vector<int> active_set;
    int iterations = 0;
    bool regularized = false;     // reduced Hessian needed +1e-10*I
    double kkt_primal = 0.0;      // max equality/inequality violation at exit
    double kkt_stationarity = 0.0;
};

/// Previous solution used to seed the active-set search. Only the active
/// set influences the path; the optimum is unchanged.
struct WarmStart {
    std::vector<int> active_set;
};

/// Owns the factorizations for one problem structure. beq may be rebound
/// between solves (receding-horizon use); H, Aeq, Ain stay fixed.
class QpSolver {
  public:
    explicit QpSolver(QpProblem p, SolveTolerances tol = {});
    ~QpSolver();
    QpSolver(QpSolver&&) noexcept;
    QpSolver& operator=(QpSolver&&) noexcept;

    void set_beq(const Vector& beq);
    QpSolution solve(const std::optional<WarmStart>& warm = std::nullopt);

    const QpProblem& problem() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper.
QpSolution solve_qp(const QpProblem& p, const std::optional<WarmStart>& warm = std::nullopt,
                    SolveTolerances tol = {});

}  // namespace bfmpc
