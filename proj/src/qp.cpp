#include "bfmpc/qp.hpp"

#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace bfmpc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::Unbounded: return "Unbounded";
        case SolveStatus::MaxIter: return "MaxIter";
    }
    return "?";
}

void QpProblem::validate() const {
    const int n = num_vars();
    if (H.rows() != H.cols()) throw std::invalid_argument("QpProblem: H not square");
    if (f.size() != n) throw std::invalid_argument("QpProblem: f length mismatch");
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + H.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("QpProblem: H not symmetric");
    if (Aeq.rows() != beq.size() || (Aeq.rows() > 0 && Aeq.cols() != n))
        throw std::invalid_argument("QpProblem: equality dimensions mismatch");
    if (Ain.rows() != bin.size() || (Ain.rows() > 0 && Ain.cols() != n))
        throw std::invalid_argument("QpProblem: inequality dimensions mismatch");
}

void QpProblem::dump(std::ostream& os) const {
    Eigen::IOFormat fmt(Eigen::FullPrecision, 0, " ", "\n", "", "");
    os << "# qp num_vars " << num_vars() << " num_eq " << Aeq.rows() << " num_in "
       << Ain.rows() << "\n";
    os << "H\n" << H.format(fmt) << "\nf\n" << f.transpose().format(fmt) << "\n";
    os << "Aeq\n" << Aeq.format(fmt) << "\nbeq\n" << beq.transpose().format(fmt) << "\n";
    os << "Ain\n" << Ain.format(fmt) << "\nbin\n" << bin.transpose().format(fmt) << "\n";
}

// ---------------------------------------------------------------------------
// Goldfarb-Idnani dual active set for
//   min 1/2 y^T G y + a^T y   s.t.  C y <= d,   G symmetric positive definite.
// Constraints are handled in the form n_i^T y + b_i >= 0 with n_i = -C_i,
// b_i = d_i. Factor updates follow the QuadProg++ realization of the method.
// ---------------------------------------------------------------------------
namespace {

struct GiResult {
    Vector y;
    Vector mult;      // per-row multipliers (size = rows of C)
    std::vector<int> active;
    SolveStatus status = SolveStatus::MaxIter;
    int iterations = 0;
};

class GiSolver {
  public:
    GiSolver(const Eigen::LLT<Matrix>& llt, const Matrix& C, SolveTolerances tol)
        : C_(C), tol_(tol), n_(static_cast<int>(llt.matrixL().rows())),
          m_(static_cast<int>(C.rows())) {
        Matrix L = llt.matrixL();
        J0_ = L.triangularView<Eigen::Lower>().transpose().solve(
            Matrix::Identity(n_, n_));
        llt_ = &llt;
    }

    GiResult solve(const Vector& a, const Vector& d, const std::vector<int>& warm) {
        GiResult res;
        Matrix J = J0_;
        Matrix R = Matrix::Zero(n_, n_);
        double R_norm = 1.0;
        std::vector<int> A;  // active rows of C
        A.reserve(n_);
        Vector u = Vector::Zero(n_ + 1);
        Vector y = -llt_->solve(a);
        Vector dvec(n_), z(n_), r(n_);
        std::vector<char> in_active(m_, 0);
        std::vector<char> excluded(m_, 0);  // degenerate normals, skipped this solve
        std::vector<char> in_warm(m_, 0);
        for (int w : warm)
            if (w >= 0 && w < m_) in_warm[w] = 1;

        const int max_iter =
            tol_.max_iterations > 0 ? tol_.max_iterations : 100 * (n_ + m_ + 10);
        int iter = 0;
        int ip = -1;
        double s_ip = 0.0;
        Vector np;

        enum class Step { ChooseViolated, StepLoop } state = Step::ChooseViolated;
        while (true) {
            if (++iter > max_iter) {
                res.status = SolveStatus::MaxIter;
                break;
            }
            if (state == Step::ChooseViolated) {
                // violation s_i = C_i y - d_i > tol; prefer the warm set.
                int best = -1, best_warm = -1;
                double worst = 0.0, worst_warm = 0.0;
                for (int i = 0; i < m_; ++i) {
                    if (in_active[i] || excluded[i]) continue;
                    const double s = C_.row(i).dot(y) - d(i);
                    const double th = tol_.primal * (1.0 + std::abs(d(i)));
                    if (s <= th) continue;
                    if (in_warm[i] && s > worst_warm) { worst_warm = s; best_warm = i; }
                    if (s > worst) { worst = s; best = i; }
                }
                ip = best_warm >= 0 ? best_warm : best;
                if (ip < 0) {
                    res.status = SolveStatus::Optimal;
                    break;
                }
                np = -C_.row(ip).transpose();
                s_ip = -(C_.row(ip).dot(y) - d(ip));  // n^T y + b, negative here
                u(A.size()) = 0.0;
                state = Step::StepLoop;
                continue;
            }
            // Step directions in primal and dual space.
            const int q = static_cast<int>(A.size());
            dvec.noalias() = J.transpose() * np;
            z.setZero();
            if (q < n_) z.noalias() = J.rightCols(n_ - q) * dvec.tail(n_ - q);
            if (q > 0)
                r.head(q) = R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(
                    dvec.head(q));
            // partial step: first blocking active constraint
            double t1 = kInf;
            int l = -1;
            for (int k = 0; k < q; ++k) {
                if (r(k) > 0.0) {
                    const double cand = u(k) / r(k);
                    if (cand < t1) { t1 = cand; l = k; }
                }
            }
            // full step restores feasibility of ip
            const double ztnp = z.dot(np);
            const double t2 = (std::abs(ztnp) > 1e-14) ? -s_ip / ztnp : kInf;
            const double t = std::min(t1, t2);
            if (t >= kInf) {
                res.status = SolveStatus::Infeasible;
                break;
            }
            if (t2 >= kInf) {
                // dual-only step; drop blocking constraint l
                for (int k = 0; k < q; ++k) u(k) -= t * r(k);
                u(q) += t;
                drop_constraint(R, J, A, u, l);
                rebuild_active_flags(A, in_active);
                continue;
            }
            y += t * z;
            for (int k = 0; k < q; ++k) u(k) -= t * r(k);
            u(q) += t;
            s_ip = -(C_.row(ip).dot(y) - d(ip));
            if (t == t2) {
                if (!add_constraint(R, J, dvec, static_cast<int>(A.size()), R_norm)) {
                    // normal is linearly dependent on the active set; exclude it
                    excluded[ip] = 1;
                    u(static_cast<int>(A.size())) = 0.0;
                    state = Step::ChooseViolated;
                    continue;
                }
                A.push_back(ip);
                in_active[ip] = 1;
                state = Step::ChooseViolated;
            } else {
                drop_constraint(R, J, A, u, l);
                rebuild_active_flags(A, in_active);
                // stay in StepLoop with same ip
            }
        }
        res.y = y;
        res.iterations = iter;
        res.mult = Vector::Zero(m_);
        for (size_t k = 0; k < A.size(); ++k) res.mult(A[k]) = std::max(0.0, u(k));
        res.active = A;
        return res;
    }

  private:
    static void rebuild_active_flags(const std::vector<int>& A, std::vector<char>& flags) {
        std::fill(flags.begin(), flags.end(), 0);
        for (int i : A) flags[i] = 1;
    }

    static bool add_constraint(Matrix& R, Matrix& J, Vector& d, int iq, double& R_norm) {
        const int n = static_cast<int>(J.rows());
        for (int j = n - 1; j >= iq + 1; --j) {
            double cc = d(j - 1), ss = d(j);
            const double h = std::hypot(cc, ss);
            if (h == 0.0) continue;
            d(j) = 0.0;
            ss /= h;
            cc /= h;
            if (cc < 0.0) { cc = -cc; ss = -ss; d(j - 1) = -h; }
            else d(j - 1) = h;
            const double xny = ss / (1.0 + cc);
            for (int k = 0; k < n; ++k) {
                const double t1 = J(k, j - 1), t2 = J(k, j);
                J(k, j - 1) = t1 * cc + t2 * ss;
                J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
            }
        }
        R.col(iq).head(iq + 1) = d.head(iq + 1);
        if (std::abs(d(iq)) <= 1e-13 * R_norm) return false;
        R_norm = std::max(R_norm, std::abs(d(iq)));
        return true;
    }

    static void drop_constraint(Matrix& R, Matrix& J, std::vector<int>& A, Vector& u,
                                int l) {
        int iq = static_cast<int>(A.size());
        for (int j = l; j < iq - 1; ++j) {
            A[j] = A[j + 1];
            u(j) = u(j + 1);
            R.col(j) = R.col(j + 1);
        }
        u(iq - 1) = u(iq);
        A.pop_back();
        --iq;
        for (int j = l; j < iq; ++j) {
            double cc = R(j, j), ss = R(j + 1, j);
            const double h = std::hypot(cc, ss);
            if (h == 0.0) continue;
            cc /= h;
            ss /= h;
            R(j + 1, j) = 0.0;
            if (cc < 0.0) { R(j, j) = -h; cc = -cc; ss = -ss; }
            else R(j, j) = h;
            const double xny = ss / (1.0 + cc);
            for (int k = j + 1; k < iq; ++k) {
                const double t1 = R(j, k), t2 = R(j + 1, k);
                R(j, k) = t1 * cc + t2 * ss;
                R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
            }
            const int n = static_cast<int>(J.rows());
            for (int k = 0; k < n; ++k) {
                const double t1 = J(k, j), t2 = J(k, j + 1);
                J(k, j) = t1 * cc + t2 * ss;
                J(k, j + 1) = xny * (J(k, j) + t1) - t2;
            }
        }
    }

    const Matrix& C_;
    const Eigen::LLT<Matrix>* llt_ = nullptr;
    Matrix J0_;
    SolveTolerances tol_;
    int n_, m_;
};

}  // namespace

// ---------------------------------------------------------------------------
// QpSolver: nullspace elimination of equalities around the GI core.
// ---------------------------------------------------------------------------

struct QpSolver::Impl {
    QpProblem p;
    SolveTolerances tol;

    Eigen::ColPivHouseholderQR<Matrix> qr;  // of Aeq^T
    int rank_eq = 0;
    Matrix Z;       // nullspace basis (orthonormal), N x nr
    Matrix Cred;    // Ain * Z
    Matrix Gred;    // 2 Z^T H Z (+ regularization)
    Eigen::LLT<Matrix> llt;
    std::unique_ptr<GiSolver> gi;
    bool regularized = false;
    Vector z_part;  // min-norm particular solution for current beq
    bool eq_consistent = true;

    Impl(QpProblem prob, SolveTolerances t) : p(std::move(prob)), tol(t) {
        p.validate();
        const int N = p.num_vars();
        const int peq = static_cast<int>(p.Aeq.rows());
        if (peq > 0) {
            qr.compute(p.Aeq.transpose());
            rank_eq = static_cast<int>(qr.rank());
            Matrix Qfull = qr.householderQ() * Matrix::Identity(N, N);
            Z = Qfull.rightCols(N - rank_eq);
        } else {
            rank_eq = 0;
            Z = Matrix::Identity(N, N);
        }
        const int nr = static_cast<int>(Z.cols());
        if (nr > 0) {
            Gred = 2.0 * Z.transpose() * p.H * Z;
            Gred = 0.5 * (Gred + Gred.transpose()).eval();
            llt.compute(Gred);
            if (llt.info() != Eigen::Success) {
                regularized = true;
                Gred += 1e-10 * Matrix::Identity(nr, nr);
                llt.compute(Gred);
                if (llt.info() != Eigen::Success)
                    throw std::invalid_argument(
                        "solve_qp: H not positive semidefinite on the equality nullspace");
            }
            if (p.Ain.rows() > 0) Cred = p.Ain * Z;
            else Cred = Matrix::Zero(0, nr);
            gi = std::make_unique<GiSolver>(llt, Cred, tol);
        }
        bind_beq(p.beq);
    }

    void bind_beq(const Vector& beq) {
        const int N = p.num_vars();
        const int peq = static_cast<int>(p.Aeq.rows());
        p.beq = beq;
        if (peq == 0) {
            z_part = Vector::Zero(N);
            eq_consistent = true;
            return;
        }
        Vector bp = qr.colsPermutation().inverse() * beq;
        Vector w = Vector::Zero(N);
        w.head(rank_eq) = qr.matrixR()
                              .topLeftCorner(rank_eq, rank_eq)
                              .triangularView<Eigen::Upper>()
                              .transpose()
                              .solve(bp.head(rank_eq));
        z_part = qr.householderQ() * w;
        eq_consistent = (p.Aeq * z_part - beq).cwiseAbs().maxCoeff() <=
                        1e-8 * (1.0 + beq.cwiseAbs().maxCoeff());
    }

    QpSolution finish(const Vector& z, SolveStatus status, const Vector& mult,
                      std::vector<int> active, int iterations) const {
        QpSolution sol;
        sol.z = z;
        sol.status = status;
        sol.iterations = iterations;
        sol.regularized = regularized;
        sol.active_set = std::move(active);
        sol.in_multipliers = mult;
        sol.objective = z.dot(p.H * z) + p.f.dot(z);
        Vector g = 2.0 * p.H * z + p.f;
        if (p.Ain.rows() > 0) g += p.Ain.transpose() * mult;
        if (p.Aeq.rows() > 0) {
            sol.eq_multipliers = qr.solve(-g);
            g += p.Aeq.transpose() * sol.eq_multipliers;
        } else {
            sol.eq_multipliers = Vector();
        }
        sol.kkt_stationarity = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
        double prim = 0.0;
        if (p.Aeq.rows() > 0)
            prim = (p.Aeq * z - p.beq).cwiseAbs().maxCoeff();
        if (p.Ain.rows() > 0)
            prim = std::max(prim, (p.Ain * z - p.bin).maxCoeff());
        sol.kkt_primal = std::max(0.0, prim);
        return sol;
    }

    QpSolution run(const std::optional<WarmStart>& warm) {
        const int N = p.num_vars();
        if (!eq_consistent) {
            QpSolution sol;
            sol.status = SolveStatus::Infeasible;
            sol.z = Vector::Zero(N);
            sol.in_multipliers = Vector::Zero(p.Ain.rows());
            return sol;
        }
        const int nr = static_cast<int>(Z.cols());
        if (nr == 0) {
            // fully determined by the equalities
            const bool ok = p.Ain.rows() == 0 ||
                            ((p.Ain * z_part - p.bin).maxCoeff() <=
                             tol.primal * (1.0 + p.bin.cwiseAbs().maxCoeff()));
            return finish(z_part, ok ? SolveStatus::Optimal : SolveStatus::Infeasible,
                          Vector::Zero(p.Ain.rows()), {}, 0);
        }
        Vector a = Z.transpose() * (2.0 * p.H * z_part + p.f);
        Vector d = p.bin - p.Ain * z_part;
        GiResult g = gi->solve(a, d, warm ? warm->active_set : std::vector<int>{});
        Vector z = z_part + Z * g.y;
        return finish(z, g.status, g.mult, std::move(g.active), g.iterations);
    }
};

QpSolver::QpSolver(QpProblem p, SolveTolerances tol)
    : impl_(std::make_unique<Impl>(std::move(p), tol)) {}
QpSolver::~QpSolver() = default;
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;

void QpSolver::set_beq(const Vector& beq) {
    if (beq.size() != impl_->p.beq.size())
        throw std::invalid_argument("set_beq: length mismatch");
    impl_->bind_beq(beq);
}

QpSolution QpSolver::solve(const std::optional<WarmStart>& warm) { return impl_->run(warm); }

const QpProblem& QpSolver::problem() const { return impl_->p; }

QpSolution solve_qp(const QpProblem& p, const std::optional<WarmStart>& warm,
                    SolveTolerances tol) {
    QpSolver solver(p, tol);
    return solver.solve(warm);
}

}  // namespace bfmpc
