#include "bfmpc/lti_mpc.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace bfmpc {

void LtiProblem::validate() const {
    if (A.rows() != A.cols() || B.rows() != A.rows())
        throw std::invalid_argument("LtiProblem: A/B dimensions inconsistent");
    if (Q.rows() != n() || Q.cols() != n() || R.rows() != m() || R.cols() != m())
        throw std::invalid_argument("LtiProblem: cost dimensions inconsistent");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("LtiProblem: Q not symmetric");
    Eigen::LLT<Matrix> llt(Q);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("LtiProblem: Q must be positive definite");
    cons.validate();
    if (cons.state_dim() != n() || cons.input_dim() != m())
        throw std::invalid_argument("LtiProblem: constraint dimensions inconsistent");
}

namespace {

Matrix kron(const Matrix& A, const Matrix& B) {
    Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j)
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

Matrix dynamics_equalities(const Matrix& A, const Matrix& B, const BasisFamily& family) {
    const int n = static_cast<int>(A.rows());
    const int m = static_cast<int>(B.cols());
    const int s = family.size();
    Matrix E = Matrix::Zero(n * s, (n + m) * s);
    for (int i = 0; i < n; ++i) {
        E.block(i * s, i * s, s, s) += family.M.transpose();
        for (int j = 0; j < n; ++j)
            E.block(i * s, j * s, s, s) -= A(i, j) * Matrix::Identity(s, s);
        for (int j = 0; j < m; ++j)
            E.block(i * s, (n + j) * s, s, s) -= B(i, j) * Matrix::Identity(s, s);
    }
    return E;
}

}  // namespace

void AssembledQp::bind_x0(const Vector& x0) {
    if (x0.size() != n) throw std::invalid_argument("bind_x0: wrong state dimension");
    qp.beq.tail(n) = x0;
}

AssembledQp assemble(const LtiProblem& problem, const BasisFamily& family, int nmax) {
    problem.validate();
    if (nmax < 0) throw std::invalid_argument("assemble: nmax must be >= 0");
    const int n = problem.n();
    const int m = problem.m();
    const int s = family.size();
    const int N = (n + m) * s;
    const Matrix Jbar = gram(family);

    AssembledQp out;
    out.n = n;
    out.m = m;
    out.s = s;
    out.nmax = nmax;
    out.qp.H = Matrix::Zero(N, N);
    out.qp.H.topLeftCorner(n * s, n * s) = kron(problem.Q, Jbar);
    out.qp.H.bottomRightCorner(m * s, m * s) = kron(problem.R, Jbar);
    out.qp.f = Vector::Zero(N);

    out.qp.Aeq = Matrix::Zero(n * s + n, N);
    out.qp.Aeq.topRows(n * s) = dynamics_equalities(problem.A, problem.B, family);
    for (int i = 0; i < n; ++i)
        out.qp.Aeq.row(n * s + i).segment(i * s, s) = family.tau0.transpose();
    out.qp.beq = Vector::Zero(n * s + n);

    const int nc = problem.cons.num_rows();
    Matrix taus = tau_table(family, nmax);
    out.qp.Ain = Matrix::Zero(nc * (nmax + 1), N);
    out.qp.bin = Vector::Zero(nc * (nmax + 1));
    for (int k = 0; k <= nmax; ++k) {
        for (int i = 0; i < nc; ++i) {
            const int r = k * nc + i;
            for (int c = 0; c < n; ++c)
                if (problem.cons.Cx(i, c) != 0.0)
                    out.qp.Ain.row(r).segment(c * s, s) =
                        problem.cons.Cx(i, c) * taus.row(k);
            for (int c = 0; c < m; ++c)
                if (problem.cons.Cu(i, c) != 0.0)
                    out.qp.Ain.row(r).segment((n + c) * s, s) =
                        problem.cons.Cu(i, c) * taus.row(k);
            out.qp.bin(r) = problem.cons.b(i);
        }
    }
    return out;
}

RegularityReport check_regularity(const LtiProblem& problem, const BasisFamily& family) {
    const int n = problem.n();
    const int s = family.size();
    Matrix E(n * s + n, (n + problem.m()) * s);
    E.topRows(n * s) = dynamics_equalities(problem.A, problem.B, family);
    E.bottomRows(n).setZero();
    for (int i = 0; i < n; ++i)
        E.row(n * s + i).segment(i * s, s) = family.tau0.transpose();
    Eigen::BDCSVD<Matrix> svd(E);
    const auto& sv = svd.singularValues();
    RegularityReport rep;
    rep.required_rank = n * s + n;
    rep.largest_singular_value = sv(0);
    rep.smallest_singular_value = sv(sv.size() - 1);
    const double thresh = 1e-10 * sv(0) * std::max(E.rows(), E.cols());
    rep.numerical_rank = static_cast<int>((sv.array() > thresh).count());
    rep.regular = rep.numerical_rank == rep.required_rank;
    return rep;
}

// ---------------------------------------------------------------------------

struct LtiController::Impl {
    LtiProblem problem;
    BasisFamily family;
    AssembledQp assembled;
    QpSolver solver;
    bool warm_enabled = true;
    bool have_warm = false;
    std::vector<int> warm_active;
    int nc = 0;

    Impl(LtiProblem p, BasisFamily f, int nmax, SolveTolerances tol)
        : problem(std::move(p)),
          family(std::move(f)),
          assembled(assemble(problem, family, nmax)),
          solver(assembled.qp, tol),
          nc(problem.cons.num_rows()) {}

    MpcStepResult step(const Vector& x0) {
        if (x0.size() != problem.n() || !x0.allFinite())
            throw std::invalid_argument("step: x0 must be a finite n-vector");
        Vector beq = assembled.qp.beq;
        beq.tail(problem.n()) = x0;
        solver.set_beq(beq);
        std::optional<WarmStart> warm;
        if (warm_enabled && have_warm) warm = WarmStart{warm_active};
        QpSolution sol = solver.solve(warm);

        MpcStepResult res;
        res.status = sol.status;
        res.iterations = sol.iterations;
        res.warm_started = warm.has_value();
        const int n = problem.n(), m = problem.m(), s = family.size();
        if (sol.status == SolveStatus::Optimal) {
            res.eta_x = ParamVector{sol.z.head(n * s), n};
            res.eta_u = ParamVector{sol.z.tail(m * s), m};
            res.u0 = eval(res.eta_u, family, 0);
            res.cost = sol.objective;
            // shift the active set one sample toward the present
            warm_active.clear();
            for (int r : sol.active_set) {
                const int k = r / nc;
                if (k >= 1) warm_active.push_back(r - nc);
                warm_active.push_back(r);
            }
            std::sort(warm_active.begin(), warm_active.end());
            warm_active.erase(std::unique(warm_active.begin(), warm_active.end()),
                              warm_active.end());
            have_warm = true;
        } else {
            have_warm = false;
            res.u0 = Vector::Zero(m);
        }
        return res;
    }
};

LtiController::LtiController(LtiProblem problem, BasisFamily family, int nmax,
                             SolveTolerances tol)
    : impl_(std::make_unique<Impl>(std::move(problem), std::move(family), nmax, tol)) {}
LtiController::~LtiController() = default;
LtiController::LtiController(LtiController&&) noexcept = default;

MpcStepResult LtiController::step(const Vector& x0) { return impl_->step(x0); }
void LtiController::reset() { impl_->have_warm = false; }
void LtiController::set_warm_start_enabled(bool on) { impl_->warm_enabled = on; }
const BasisFamily& LtiController::family() const { return impl_->family; }
const LtiProblem& LtiController::problem() const { return impl_->problem; }
int LtiController::nmax() const { return impl_->assembled.nmax; }

std::pair<Matrix, Matrix> zoh_discretize(const Matrix& Ac, const Matrix& Bc, double ts) {
    if (!(ts > 0.0)) throw std::invalid_argument("zoh_discretize: ts must be > 0");
    const int n = static_cast<int>(Ac.rows());
    const int m = static_cast<int>(Bc.cols());
    Matrix aug = Matrix::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = Ac;
    aug.topRightCorner(n, m) = Bc;
    Matrix E = (aug * ts).exp();
    return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  double tol, int max_iter) {
    Matrix P = Q;
    for (int it = 0; it < max_iter; ++it) {
        Matrix G = (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
        Matrix Pn = A.transpose() * P * (A - B * G) + Q;
        Pn = 0.5 * (Pn + Pn.transpose()).eval();
        const double diff = (Pn - P).cwiseAbs().maxCoeff();
        P = Pn;
        if (diff <= tol * (1.0 + P.cwiseAbs().maxCoeff())) return P;
    }
    throw std::runtime_error("solve_dare: fixed-point iteration did not converge");
}

Matrix dare_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
    Matrix P = solve_dare(A, B, Q, R);
    return -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
}

}  // namespace bfmpc
