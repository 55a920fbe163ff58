#pragma once

#include <optional>

#include "bfmpc/basis.hpp"
#include "bfmpc/qp.hpp"

namespace bfmpc {

/// Affine constraints g(x, u) = Cx x + Cu u - b <= 0 (rowwise).
/// The origin must be strictly feasible: b > 0.
struct AffineConstraintSet {
    Matrix Cx;  // n_c x n
    Matrix Cu;  // n_c x m
    Vector b;

    int num_rows() const { return static_cast<int>(b.size()); }
    int state_dim() const { return static_cast<int>(Cx.cols()); }
    int input_dim() const { return static_cast<int>(Cu.cols()); }
    void validate() const;

    /// Symmetric box sugar: |x_i| <= xmax_i (skip non-finite), |u_j| <= umax_j.
    static AffineConstraintSet box(const Vector& xmax, const Vector& umax);
};

struct NmaxOptions {
    int start_index = -1;        // -1: (n+m)*s, the printed start of the recursion
    int j_cap = -1;              // -1: 50*(n+m)*s
    double tol_rel = 1e-9;       // J_i <= tol_rel * max(1, |b|_inf) terminates
    bool include_dynamics = false;  // couple eta_x/eta_u through x+ = A x + B u
    Matrix A;                    // used when include_dynamics
    Matrix B;
};

struct NmaxResult {
    int nmax = -1;
    int iterations = 0;
    bool cap_reached = false;
    Vector certificates;                          // final J_i
    std::vector<std::pair<int, Vector>> history;  // (j, J) per iteration; +inf = unbounded LP
    std::vector<int> unbounded_rows;              // rows that were ever unbounded

    nlohmann::json certificate_json(const BasisFamily& family,
                                    const AffineConstraintSet& cons) const;
};

/// Horizon after which the affine constraints are implied for all time:
/// any eta_z feasible for k <= nmax is feasible for every k (time-shift
/// induction). Each iteration solves n_c LPs
///   J_i = sup g_i(x~(j+1), u~(j+1))  s.t.  g(x~(k), u~(k)) <= 0, k = 0..j
/// and stops once every J_i <= tol. Unbounded inner LPs count as J_i = +inf
/// and the recursion keeps extending j until j_cap.
NmaxResult compute_nmax(const BasisFamily& family, const AffineConstraintSet& cons,
                        int n, int m, const NmaxOptions& opts = {});

/// Companion-form lift of the autonomous trajectory recursion: the stacked
/// window (z(k), ..., z(k+s-1)) evolves by companion(char poly of M) kron I_d.
/// Diagnostic only; compute_nmax works on (M, tau) directly.
Matrix companion_form(const BasisFamily& family, int channels);

}  // namespace bfmpc
