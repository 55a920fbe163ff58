#pragma once

#include <functional>
#include <optional>

#include "bfmpc/admissible.hpp"
#include "bfmpc/basis.hpp"
#include "bfmpc/qp.hpp"

namespace bfmpc {

/// Discrete-time plant x+ = f(k, x, u) with (0, 0) an equilibrium.
/// Analytic Jacobians are optional; central finite differences are used
/// when absent.
struct NonlinearPlant {
    int n = 0;
    int m = 0;
    std::function<Vector(int, const Vector&, const Vector&)> f;
    std::function<void(int, const Vector&, const Vector&, Matrix&, Matrix&)> jacobians;

    void eval_jacobians(int k, const Vector& x, const Vector& u, Matrix& fx,
                        Matrix& fu) const;  // falls back to finite differences
};

/// Truncated Galerkin encoding of the dynamics:
///   r = sum_{k=0}^{K} (I_n kron tau(k)) (x~(k+1) - f(k, x~(k), u~(k)))
Vector galerkin_residual(const ParamVector& eta_x, const ParamVector& eta_u,
                         const NonlinearPlant& plant, const BasisFamily& family,
                         int k_trunc);

void residual_jacobian(const ParamVector& eta_x, const ParamVector& eta_u,
                       const NonlinearPlant& plant, const BasisFamily& family,
                       int k_trunc, Matrix& d_eta_x, Matrix& d_eta_u);

struct NlpOptions {
    int max_iterations = 50;
    double kkt_tol = 1e-6;
    int k_trunc = 150;
    double backtrack_factor = 0.5;
    int max_backtracks = 20;
    SolveTolerances qp_tol{};
    std::vector<int> warm_active;  // QP active set carried across MPC steps
};

struct NlpStepResult {
    ParamVector eta_x;
    ParamVector eta_u;
    Vector u0;
    double cost = 0.0;            // eta^T H eta (infinite-horizon quadratic cost)
    double merit = 0.0;
    double kkt_residual = 0.0;
    double galerkin_norm = 0.0;   // max-norm of the residual at exit
    int iterations = 0;
    bool converged = false;
    SolveStatus qp_status = SolveStatus::Optimal;
    std::vector<int> warm_active;
};

/// Gauss-Newton SQP for the parametrized problem with quadratic cost
/// (exact Hessian blkdiag(Q kron Jbar, R kron Jbar)), linearized Galerkin
/// equality, and the exact affine inequality rows for k = 0..nmax. Each
/// subproblem is a strictly convex QP; steps are globalized by a
/// backtracking line search on an l1 merit function.
NlpStepResult solve_nlp(const NonlinearPlant& plant, const BasisFamily& family,
                        const Matrix& Q, const Matrix& R, const AffineConstraintSet& cons,
                        int nmax, const Vector& x0, const ParamVector& guess_x,
                        const ParamVector& guess_u, const NlpOptions& opts = {});

/// Least-squares representation of a sampled trajectory:
/// eta_c = Jbar^{-1} sum_k tau(k) sample_c(k); for orthonormal families this
/// is the plain truncated projection.
ParamVector project_trajectory(const std::vector<Vector>& samples,
                               const BasisFamily& family);

/// CSV rows "u[,x1..xn]" -> per-step samples (used for initial guesses).
std::vector<Vector> load_trajectory_csv(const std::string& path);

}  // namespace bfmpc
