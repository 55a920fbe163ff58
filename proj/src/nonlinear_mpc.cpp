#include "bfmpc/nonlinear_mpc.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bfmpc {

void NonlinearPlant::eval_jacobians(int k, const Vector& x, const Vector& u, Matrix& fx,
                                    Matrix& fu) const {
    if (jacobians) {
        jacobians(k, x, u, fx, fu);
        return;
    }
    const double h = 1e-6;
    fx.resize(n, n);
    fu.resize(n, m);
    for (int j = 0; j < n; ++j) {
        Vector xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        fx.col(j) = (f(k, xp, u) - f(k, xm, u)) / (2 * h);
    }
    for (int j = 0; j < m; ++j) {
        Vector up = u, um = u;
        up(j) += h;
        um(j) -= h;
        fu.col(j) = (f(k, x, up) - f(k, x, um)) / (2 * h);
    }
}

namespace {

struct Reshaped {
    Matrix X;  // (K+2) x n trajectory samples
    Matrix U;  // (K+2) x m
};

Reshaped trajectories(const ParamVector& eta_x, const ParamVector& eta_u,
                      const Matrix& taus) {
    const int s = static_cast<int>(taus.cols());
    const int n = eta_x.channels;
    const int m = eta_u.channels;
    Matrix Ex(s, n), Eu(s, m);
    for (int c = 0; c < n; ++c) Ex.col(c) = eta_x.data.segment(c * s, s);
    for (int c = 0; c < m; ++c) Eu.col(c) = eta_u.data.segment(c * s, s);
    return {taus * Ex, taus * Eu};
}

}  // namespace

Vector galerkin_residual(const ParamVector& eta_x, const ParamVector& eta_u,
                         const NonlinearPlant& plant, const BasisFamily& family,
                         int k_trunc) {
    const int s = family.size();
    const int n = plant.n;
    if (eta_x.channels != n || eta_u.channels != plant.m)
        throw std::invalid_argument("galerkin_residual: channel mismatch");
    Matrix taus = tau_table(family, k_trunc + 1);
    auto [X, U] = trajectories(eta_x, eta_u, taus);
    Matrix W(k_trunc + 1, n);  // defect x~(k+1) - f(k, x~(k), u~(k))
    for (int k = 0; k <= k_trunc; ++k) {
        Vector fx = plant.f(k, X.row(k).transpose(), U.row(k).transpose());
        if (!fx.allFinite())
            throw std::runtime_error("galerkin_residual: non-finite plant output at k=" +
                                     std::to_string(k));
        W.row(k) = X.row(k + 1) - fx.transpose();
    }
    Matrix R = taus.topRows(k_trunc + 1).transpose() * W;  // s x n
    Vector r(n * s);
    for (int c = 0; c < n; ++c) r.segment(c * s, s) = R.col(c);
    return r;
}

void residual_jacobian(const ParamVector& eta_x, const ParamVector& eta_u,
                       const NonlinearPlant& plant, const BasisFamily& family,
                       int k_trunc, Matrix& d_eta_x, Matrix& d_eta_u) {
    const int s = family.size();
    const int n = plant.n;
    const int m = plant.m;
    Matrix taus = tau_table(family, k_trunc + 1);
    auto [X, U] = trajectories(eta_x, eta_u, taus);

    // sum_k tau(k) tau(k+1)^T and the A_k/B_k weighted outer-product sums
    Matrix Tshift = taus.topRows(k_trunc + 1).transpose() * taus.bottomRows(k_trunc + 1);
    std::vector<Matrix> SA(n * n, Matrix::Zero(s, s));
    std::vector<Matrix> SB(n * m, Matrix::Zero(s, s));
    Matrix fx(n, n), fu(n, m);
    for (int k = 0; k <= k_trunc; ++k) {
        plant.eval_jacobians(k, X.row(k).transpose(), U.row(k).transpose(), fx, fu);
        const Matrix outer = taus.row(k).transpose() * taus.row(k);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                if (fx(i, j) != 0.0) SA[i * n + j] += fx(i, j) * outer;
            for (int j = 0; j < m; ++j)
                if (fu(i, j) != 0.0) SB[i * m + j] += fu(i, j) * outer;
        }
    }
    d_eta_x = Matrix::Zero(n * s, n * s);
    d_eta_u = Matrix::Zero(n * s, m * s);
    for (int i = 0; i < n; ++i) {
        d_eta_x.block(i * s, i * s, s, s) += Tshift;
        for (int j = 0; j < n; ++j) d_eta_x.block(i * s, j * s, s, s) -= SA[i * n + j];
        for (int j = 0; j < m; ++j) d_eta_u.block(i * s, j * s, s, s) = -SB[i * m + j];
    }
}

namespace {

Matrix kron(const Matrix& A, const Matrix& B) {
    Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j)
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return out;
}

}  // namespace

NlpStepResult solve_nlp(const NonlinearPlant& plant, const BasisFamily& family,
                        const Matrix& Q, const Matrix& R, const AffineConstraintSet& cons,
                        int nmax, const Vector& x0, const ParamVector& guess_x,
                        const ParamVector& guess_u, const NlpOptions& opts) {
    const int n = plant.n, m = plant.m, s = family.size();
    const int N = (n + m) * s;
    if (guess_x.data.size() != n * s || guess_u.data.size() != m * s)
        throw std::invalid_argument("solve_nlp: guess dimensions mismatch");
    const Matrix Jbar = gram(family);
    Matrix H = Matrix::Zero(N, N);
    H.topLeftCorner(n * s, n * s) = kron(Q, Jbar);
    H.bottomRightCorner(m * s, m * s) = kron(R, Jbar);

    // inequality rows are exact (affine in eta)
    const int nc = cons.num_rows();
    Matrix taus = tau_table(family, nmax);
    Matrix Ain = Matrix::Zero(nc * (nmax + 1), N);
    Vector bin(nc * (nmax + 1));
    for (int k = 0; k <= nmax; ++k)
        for (int i = 0; i < nc; ++i) {
            const int r = k * nc + i;
            for (int c = 0; c < n; ++c)
                if (cons.Cx(i, c) != 0.0)
                    Ain.row(r).segment(c * s, s) = cons.Cx(i, c) * taus.row(k);
            for (int c = 0; c < m; ++c)
                if (cons.Cu(i, c) != 0.0)
                    Ain.row(r).segment((n + c) * s, s) = cons.Cu(i, c) * taus.row(k);
            bin(r) = cons.b(i);
        }
    Matrix IC = Matrix::Zero(n, N);
    for (int i = 0; i < n; ++i) IC.row(i).segment(i * s, s) = family.tau0.transpose();

    Vector eta(N);
    eta.head(n * s) = guess_x.data;
    eta.tail(m * s) = guess_u.data;

    auto merit = [&](const Vector& e, double mu) {
        ParamVector ex{e.head(n * s), n}, eu{e.tail(m * s), m};
        const Vector r = galerkin_residual(ex, eu, plant, family, opts.k_trunc);
        double viol = r.cwiseAbs().sum() + (IC * e - x0).cwiseAbs().sum();
        viol += (Ain * e - bin).cwiseMax(0.0).sum();
        return std::make_pair(e.dot(H * e) + mu * viol, r);
    };

    NlpStepResult out;
    out.warm_active = opts.warm_active;
    double mu = 1.0;
    Vector r = galerkin_residual({eta.head(n * s), n}, {eta.tail(m * s), m}, plant,
                                 family, opts.k_trunc);
    Matrix Jx, Ju;
    for (int it = 0; it < opts.max_iterations; ++it) {
        ++out.iterations;
        residual_jacobian({eta.head(n * s), n}, {eta.tail(m * s), m}, plant, family,
                          opts.k_trunc, Jx, Ju);
        QpProblem qp;
        qp.H = H;
        qp.f = Vector::Zero(N);
        qp.Aeq = Matrix(n * s + n, N);
        qp.Aeq.topRows(n * s) << Jx, Ju;
        qp.Aeq.bottomRows(n) = IC;
        qp.beq = Vector(n * s + n);
        qp.beq.head(n * s) = Jx * eta.head(n * s) + Ju * eta.tail(m * s) - r;
        qp.beq.tail(n) = x0;
        qp.Ain = Ain;
        qp.bin = bin;
        QpSolution sol = solve_qp(qp, WarmStart{out.warm_active}, opts.qp_tol);
        out.qp_status = sol.status;
        if (sol.status != SolveStatus::Optimal) break;
        out.warm_active = sol.active_set;

        const Vector step = sol.z - eta;
        const double step_norm = step.cwiseAbs().maxCoeff();
        double lam_max = 1.0;
        if (sol.eq_multipliers.size() > 0)
            lam_max = sol.eq_multipliers.cwiseAbs().maxCoeff();
        mu = std::max(mu, 10.0 * lam_max);

        auto [phi0, r0] = merit(eta, mu);
        double alpha = 1.0;
        Vector cand = sol.z;
        bool accepted = false;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            auto [phi, rc] = merit(cand, mu);
            if (phi <= phi0 - 1e-8 * alpha * std::abs(phi0) || phi < phi0) {
                eta = cand;
                r = rc;
                out.merit = phi;
                accepted = true;
                break;
            }
            alpha *= opts.backtrack_factor;
            cand = eta + alpha * step;
        }
        if (!accepted) break;

        const double r_norm = r.cwiseAbs().maxCoeff();
        const double ic_norm = (IC * eta - x0).cwiseAbs().maxCoeff();
        out.galerkin_norm = r_norm;
        out.kkt_residual = std::max(r_norm, ic_norm);
        if (out.kkt_residual <= opts.kkt_tol &&
            step_norm <= std::sqrt(opts.kkt_tol) * (1.0 + eta.cwiseAbs().maxCoeff())) {
            out.converged = true;
            break;
        }
    }
    out.eta_x = ParamVector{eta.head(n * s), n};
    out.eta_u = ParamVector{eta.tail(m * s), m};
    out.u0 = eval(out.eta_u, family, 0);
    out.cost = eta.dot(H * eta);
    out.galerkin_norm = r.cwiseAbs().maxCoeff();
    return out;
}

ParamVector project_trajectory(const std::vector<Vector>& samples,
                               const BasisFamily& family) {
    if (samples.empty()) throw std::invalid_argument("project_trajectory: no samples");
    const int d = static_cast<int>(samples.front().size());
    const int s = family.size();
    Matrix taus = tau_table(family, static_cast<int>(samples.size()) - 1);
    Matrix acc = Matrix::Zero(s, d);
    for (size_t k = 0; k < samples.size(); ++k)
        acc += taus.row(k).transpose() * samples[k].transpose();
    const Matrix Jbar = gram(family);
    Matrix sol = Jbar.ldlt().solve(acc);
    ParamVector eta{Vector(d * s), d};
    for (int c = 0; c < d; ++c) eta.data.segment(c * s, s) = sol.col(c);
    return eta;
}

std::vector<Vector> load_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_trajectory_csv: cannot open " + path);
    std::vector<Vector> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::vector<double> vals;
        std::string cell;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        rows.push_back(Eigen::Map<Vector>(vals.data(), vals.size()));
    }
    return rows;
}

}  // namespace bfmpc
