#include "bfmpc/admissible.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bfmpc/lp.hpp"

namespace bfmpc {

using nlohmann::json;

void AffineConstraintSet::validate() const {
    if (Cx.rows() != Cu.rows() || Cx.rows() != b.size())
        throw std::invalid_argument("AffineConstraintSet: row count mismatch");
    if (b.size() == 0) throw std::invalid_argument("AffineConstraintSet: empty");
    if (b.minCoeff() <= 0.0)
        throw std::invalid_argument(
            "AffineConstraintSet: b must be > 0 (origin strictly feasible)");
}

AffineConstraintSet AffineConstraintSet::box(const Vector& xmax, const Vector& umax) {
    const int n = static_cast<int>(xmax.size());
    const int m = static_cast<int>(umax.size());
    std::vector<std::pair<int, double>> xrows, urows;
    for (int i = 0; i < n; ++i)
        if (std::isfinite(xmax(i))) xrows.emplace_back(i, xmax(i));
    for (int j = 0; j < m; ++j)
        if (std::isfinite(umax(j))) urows.emplace_back(j, umax(j));
    const int rows = 2 * static_cast<int>(xrows.size() + urows.size());
    AffineConstraintSet cons;
    cons.Cx = Matrix::Zero(rows, n);
    cons.Cu = Matrix::Zero(rows, m);
    cons.b = Vector::Zero(rows);
    int r = 0;
    for (auto [i, lim] : xrows) {
        cons.Cx(r, i) = 1.0;
        cons.b(r++) = lim;
        cons.Cx(r, i) = -1.0;
        cons.b(r++) = lim;
    }
    for (auto [j, lim] : urows) {
        cons.Cu(r, j) = 1.0;
        cons.b(r++) = lim;
        cons.Cu(r, j) = -1.0;
        cons.b(r++) = lim;
    }
    return cons;
}

namespace {

// row of the stacked constraint for time k: (Cx kron tau^T, Cu kron tau^T)
Matrix constraint_rows(const AffineConstraintSet& cons, const Eigen::RowVectorXd& tau,
                       int n, int m) {
    const int s = static_cast<int>(tau.size());
    const int nc = cons.num_rows();
    Matrix rows = Matrix::Zero(nc, (n + m) * s);
    for (int i = 0; i < nc; ++i) {
        for (int c = 0; c < n; ++c)
            if (cons.Cx(i, c) != 0.0) rows.row(i).segment(c * s, s) = cons.Cx(i, c) * tau;
        for (int c = 0; c < m; ++c)
            if (cons.Cu(i, c) != 0.0)
                rows.row(i).segment((n + c) * s, s) = cons.Cu(i, c) * tau;
    }
    return rows;
}

}  // namespace

NmaxResult compute_nmax(const BasisFamily& family, const AffineConstraintSet& cons,
                        int n, int m, const NmaxOptions& opts) {
    cons.validate();
    if (cons.state_dim() != n || cons.input_dim() != m)
        throw std::invalid_argument("compute_nmax: constraint dims disagree with n, m");
    const int s = family.size();
    const double rho = spectral_radius(family.M);
    if (!(rho < 1.0))
        throw std::invalid_argument("compute_nmax: basis violates A2 (rho >= 1)");
    const int start = opts.start_index >= 0 ? opts.start_index : (n + m) * s;
    const int cap = opts.j_cap > 0 ? opts.j_cap : 50 * (n + m) * s;
    const double tol = opts.tol_rel * std::max(1.0, cons.b.cwiseAbs().maxCoeff());
    const int nc = cons.num_rows();

    Matrix Aeq(0, (n + m) * s);
    Vector beq;
    if (opts.include_dynamics) {
        if (opts.A.rows() != n || opts.A.cols() != n || opts.B.rows() != n ||
            opts.B.cols() != m)
            throw std::invalid_argument("compute_nmax: dynamics matrices have wrong shape");
        Aeq = Matrix::Zero(n * s, (n + m) * s);
        for (int i = 0; i < n; ++i) {
            Aeq.block(i * s, i * s, s, s) = family.M.transpose();
            for (int j = 0; j < n; ++j)
                Aeq.block(i * s, j * s, s, s) -= opts.A(i, j) * Matrix::Identity(s, s);
            for (int j = 0; j < m; ++j)
                Aeq.block(i * s, (n + j) * s, s, s) =
                    -opts.B(i, j) * Matrix::Identity(s, s);
        }
        beq = Vector::Zero(n * s);
    }

    Matrix taus = tau_table(family, cap + 2);
    NmaxResult res;
    std::vector<Matrix> rows;
    rows.reserve(cap + 2);
    for (int k = 0; k <= start + 1; ++k)
        rows.push_back(constraint_rows(cons, taus.row(k), n, m));

    Matrix Ain(0, (n + m) * s);
    Vector bin;
    auto grow_to = [&](int j) {
        while (static_cast<int>(rows.size()) < j + 2)
            rows.push_back(constraint_rows(cons, taus.row(rows.size()), n, m));
        const int old = static_cast<int>(Ain.rows());
        const int want = nc * (j + 1);
        if (old < want) {
            Ain.conservativeResize(want, Eigen::NoChange);
            bin.conservativeResize(want);
            for (int k = old / nc; k <= j; ++k) {
                Ain.middleRows(k * nc, nc) = rows[k];
                bin.segment(k * nc, nc) = cons.b;
            }
        }
    };

    std::vector<char> ever_unbounded(nc, 0);
    for (int j = start; j <= cap; ++j) {
        grow_to(j);
        Vector J(nc);
        bool all_ok = true;
        for (int i = 0; i < nc; ++i) {
            QpSolution lp = solve_lp(rows[j + 1].row(i).transpose(), Aeq, beq, Ain, bin);
            if (lp.status == SolveStatus::Unbounded) {
                J(i) = std::numeric_limits<double>::infinity();
                ever_unbounded[i] = 1;
                all_ok = false;
            } else if (lp.status == SolveStatus::Optimal) {
                J(i) = lp.objective - cons.b(i);
                if (J(i) > tol) all_ok = false;
            } else {
                throw std::runtime_error(std::string("compute_nmax: inner LP ") +
                                         to_string(lp.status) + " at j=" +
                                         std::to_string(j));
            }
        }
        res.history.emplace_back(j, J);
        ++res.iterations;
        if (all_ok) {
            res.nmax = j;
            res.certificates = J;
            for (int i = 0; i < nc; ++i)
                if (ever_unbounded[i]) res.unbounded_rows.push_back(i);
            return res;
        }
    }
    res.cap_reached = true;
    for (int i = 0; i < nc; ++i)
        if (ever_unbounded[i]) res.unbounded_rows.push_back(i);
    return res;
}

json NmaxResult::certificate_json(const BasisFamily& family,
                                  const AffineConstraintSet& cons) const {
    json hist = json::array();
    for (const auto& [j, J] : history) {
        json row = json::array();
        for (int i = 0; i < J.size(); ++i)
            row.push_back(std::isfinite(J(i)) ? json(J(i)) : json("unbounded"));
        hist.push_back({{"j", j}, {"J", row}});
    }
    json cert = json::array();
    for (int i = 0; i < certificates.size(); ++i) cert.push_back(certificates(i));
    json cons_j;
    cons_j["b"] = std::vector<double>(cons.b.data(), cons.b.data() + cons.b.size());
    cons_j["rows"] = cons.num_rows();
    return json{{"schema_version", 1},
                {"family_hash", family_hash(family)},
                {"nmax", nmax},
                {"iterations", iterations},
                {"cap_reached", cap_reached},
                {"certificates", cert},
                {"constraints", cons_j},
                {"history", hist}};
}

Matrix companion_form(const BasisFamily& family, int channels) {
    const int s = family.size();
    // characteristic polynomial by Faddeev-LeVerrier:
    //   p(l) = l^s + a_{s-1} l^{s-1} + ... + a_0,  M^s = sum_j c_j M^j, c_j = -a_j
    Matrix Mk = Matrix::Identity(s, s);
    std::vector<double> a(s + 1);
    a[s] = 1.0;
    Matrix N = Matrix::Identity(s, s);
    for (int k = 1; k <= s; ++k) {
        Mk = family.M * N;
        a[s - k] = -Mk.trace() / k;
        N = Mk + a[s - k] * Matrix::Identity(s, s);
    }
    Matrix comp = Matrix::Zero(s, s);
    for (int i = 0; i + 1 < s; ++i) comp(i, i + 1) = 1.0;
    for (int j = 0; j < s; ++j) comp(s - 1, j) = -a[j];
    Matrix lift = Matrix::Zero(s * channels, s * channels);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j)
            if (comp(i, j) != 0.0)
                lift.block(i * channels, j * channels, channels, channels) =
                    comp(i, j) * Matrix::Identity(channels, channels);
    return lift;
}

}  // namespace bfmpc
