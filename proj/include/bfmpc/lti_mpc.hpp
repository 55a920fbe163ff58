#pragma once

#include <memory>

#include "bfmpc/admissible.hpp"
#include "bfmpc/basis.hpp"
#include "bfmpc/qp.hpp"

namespace bfmpc {

/// LTI regulation problem: x+ = A x + B u, running cost x^T Q x + u^T R u,
/// affine constraints, sampling time ts. Q must be positive definite and R
/// positive semidefinite for the stability guarantees to apply.
struct LtiProblem {
    Matrix A;
    Matrix B;
    Matrix Q;
    Matrix R;
    AffineConstraintSet cons;
    double ts = 0.0;

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }
    void validate() const;
};

/// Parametrized infinite-horizon problem as a dense QP over z = (eta_x, eta_u):
///   min  eta_x^T (Q kron Jbar) eta_x + eta_u^T (R kron Jbar) eta_u
///   s.t. (I kron M^T - A kron I) eta_x - (B kron I) eta_u = 0
///        (I kron tau0^T) eta_x = x0          (x0 bound at solve time)
///        (Cx kron tau_k^T) eta_x + (Cu kron tau_k^T) eta_u <= b,  k = 0..nmax
struct AssembledQp {
    QpProblem qp;
    int n = 0, m = 0, s = 0, nmax = 0;

    void bind_x0(const Vector& x0);  // rewrites the trailing n equality rhs
};

AssembledQp assemble(const LtiProblem& problem, const BasisFamily& family, int nmax);

struct RegularityReport {
    bool regular = false;
    int required_rank = 0;
    int numerical_rank = 0;
    double smallest_singular_value = 0.0;
    double largest_singular_value = 0.0;
};

/// The dynamics + initial-condition equalities are regular when they are
/// solvable for every x0, i.e. the stacked equality matrix has full row rank.
RegularityReport check_regularity(const LtiProblem& problem, const BasisFamily& family);

struct MpcStepResult {
    ParamVector eta_x;
    ParamVector eta_u;
    Vector u0;
    double cost = 0.0;  // J(x0)
    SolveStatus status = SolveStatus::Infeasible;
    int iterations = 0;
    bool warm_started = false;
};

/// Receding-horizon controller; step() rebinds x0, warm-starts from the
/// time-shifted previous active set, and returns the minimizer.
class LtiController {
  public:
    LtiController(LtiProblem problem, BasisFamily family, int nmax,
                  SolveTolerances tol = {});
    ~LtiController();
    LtiController(LtiController&&) noexcept;

    MpcStepResult step(const Vector& x0);
    void reset();  // forget warm-start state
    void set_warm_start_enabled(bool on);

    const BasisFamily& family() const;
    const LtiProblem& problem() const;
    int nmax() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Exact zero-order-hold discretization via the augmented matrix exponential.
std::pair<Matrix, Matrix> zoh_discretize(const Matrix& Ac, const Matrix& Bc, double ts);

/// Stabilizing solution of the discrete algebraic Riccati equation by
/// fixed-point iteration; returns P. K = -(R + B'PB)^{-1} B'PA stabilizes.
Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  double tol = 1e-12, int max_iter = 100000);
Matrix dare_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R);

}  // namespace bfmpc
