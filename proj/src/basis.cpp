#include "bfmpc/basis.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>

namespace bfmpc {

using nlohmann::json;

double spectral_radius(const Matrix& M) {
    return M.eigenvalues().cwiseAbs().maxCoeff();
}

BasisFamily make_classic(int s) {
    if (s < 1) throw std::invalid_argument("make_classic: s must be >= 1");
    Matrix M = Matrix::Zero(s, s);
    for (int i = 1; i < s; ++i) M(i, i - 1) = 1.0;
    Vector tau0 = Vector::Zero(s);
    tau0(0) = 1.0;
    return {M, tau0};
}

BasisFamily make_laguerre(int s, double nu, double ts) {
    if (s < 1) throw std::invalid_argument("make_laguerre: s must be >= 1");
    if (!(nu > 0.0)) throw std::invalid_argument("make_laguerre: nu must be > 0");
    if (!(ts > 0.0)) throw std::invalid_argument("make_laguerre: ts must be > 0");
    // M_c = -nu*I + N with N strictly lower triangular (-2nu entries).
    // N is nilpotent and commutes with -nu*I, so
    //   exp(M_c Ts) = exp(-nu Ts) * sum_{j<s} (N Ts)^j / j!   (exact).
    Matrix N = Matrix::Zero(s, s);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < i; ++j) N(i, j) = -2.0 * nu;
    Matrix term = Matrix::Identity(s, s);
    Matrix series = Matrix::Identity(s, s);
    for (int j = 1; j < s; ++j) {
        term = (term * N * ts / static_cast<double>(j)).eval();
        series += term;
    }
    Matrix M = std::exp(-nu * ts) * series;
    Vector tau0 = Vector::Constant(s, std::sqrt(2.0 * nu));
    return {M, tau0};
}

BasisFamily make_damped_fourier(int s, double nu, double omega, double ts) {
    if (s < 1 || s % 2 == 0)
        throw std::invalid_argument("make_damped_fourier: s must be odd and >= 1");
    if (!(nu > 0.0)) throw std::invalid_argument("make_damped_fourier: nu must be > 0");
    if (!(omega > 0.0)) throw std::invalid_argument("make_damped_fourier: omega must be > 0");
    const double decay = std::exp(-nu * ts);
    Matrix M = Matrix::Zero(s, s);
    Vector tau0 = Vector::Zero(s);
    M(0, 0) = decay;  // constant (zero-frequency) component
    tau0(0) = 1.0;
    for (int p = 0; p < (s - 1) / 2; ++p) {
        const int i = 1 + 2 * p;
        const double th = (p + 1) * omega * ts;
        M(i, i) = decay * std::cos(th);
        M(i, i + 1) = -decay * std::sin(th);
        M(i + 1, i) = decay * std::sin(th);
        M(i + 1, i + 1) = decay * std::cos(th);
        tau0(i) = 1.0;  // pair spans cos(j w k Ts) and sin(j w k Ts)
    }
    return {M, tau0};
}

BasisFamily make_lqr_family(const Matrix& A, const Matrix& B, const Matrix& K,
                            const Vector& tau0) {
    if (A.rows() != A.cols() || B.rows() != A.rows() || K.cols() != A.cols() ||
        K.rows() != B.cols())
        throw std::invalid_argument("make_lqr_family: inconsistent dimensions");
    if (tau0.size() != A.rows())
        throw std::invalid_argument("make_lqr_family: tau0 must have length n");
    Matrix M = A + B * K;
    const double rho = spectral_radius(M);
    if (!(rho < 1.0))
        throw std::invalid_argument("make_lqr_family: A+BK unstable, spectral radius " +
                                    std::to_string(rho));
    return {M, tau0};
}

BasisFamily block_union(const std::vector<BasisFamily>& members) {
    if (members.empty()) throw std::invalid_argument("block_union: empty list");
    int s = 0;
    for (const auto& f : members) s += f.size();
    Matrix M = Matrix::Zero(s, s);
    Vector tau0 = Vector::Zero(s);
    int at = 0;
    for (const auto& f : members) {
        const int k = f.size();
        M.block(at, at, k, k) = f.M;
        tau0.segment(at, k) = f.tau0;
        at += k;
    }
    return {M, tau0};
}

namespace {

Matrix gram_truncated(const BasisFamily& family, double rho) {
    // Sum tau(k) tau(k)^T until rho^k * |tau0|^2 < 1e-14.
    const double t2 = family.tau0.squaredNorm();
    Matrix J = Matrix::Zero(family.size(), family.size());
    Vector t = family.tau0;
    double envelope = t2;
    int k = 0;
    while (envelope >= 1e-14 || k < family.size()) {
        J += t * t.transpose();
        t = (family.M * t).eval();
        envelope *= rho;
        if (++k > 2'000'000)
            throw std::runtime_error("gram: truncated sum did not converge");
    }
    return J;
}

}  // namespace

Matrix gram(const BasisFamily& family) {
    const double rho = spectral_radius(family.M);
    if (!(rho < 1.0))
        throw std::invalid_argument("gram: spectral radius " + std::to_string(rho) +
                                    " >= 1 (violates A2)");
    const int s = family.size();
    if (s > 64) return gram_truncated(family, rho);
    // vec(J) = (I - M kron M)^{-1} vec(tau0 tau0^T)
    Matrix lhs = Matrix::Identity(s * s, s * s);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j)
            lhs.block(i * s, j * s, s, s) -= family.M(i, j) * family.M;
    Matrix rhs_m = family.tau0 * family.tau0.transpose();
    Eigen::Map<Vector> rhs(rhs_m.data(), s * s);
    Vector v = lhs.partialPivLu().solve(rhs);
    Matrix J = Eigen::Map<Matrix>(v.data(), s, s);
    return 0.5 * (J + J.transpose());  // symmetrize roundoff
}

BasisFamily orthonormalize(const BasisFamily& family) {
    Matrix J = gram(family);
    Eigen::LLT<Matrix> llt(J);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument(
            "orthonormalize: Gram matrix not positive definite (violates A1)");
    Matrix L = llt.matrixL();
    auto solveL = [&](const Matrix& X) { return L.triangularView<Eigen::Lower>().solve(X); };
    Matrix Mp = solveL(family.M * L);
    Vector tau0p = solveL(family.tau0);
    return {Mp, tau0p};
}

ParamVector shift(const ParamVector& eta, const BasisFamily& family) {
    const int s = family.size();
    if (eta.channels < 1 || eta.data.size() != int64_t(eta.channels) * s)
        throw std::invalid_argument("shift: parameter length does not match channels * s");
    ParamVector out{Vector(eta.data.size()), eta.channels};
    for (int c = 0; c < eta.channels; ++c)
        out.data.segment(c * s, s) = family.M.transpose() * eta.data.segment(c * s, s);
    return out;
}

Vector eval(const ParamVector& eta, const BasisFamily& family, int k) {
    const int s = family.size();
    if (eta.channels < 1 || eta.data.size() != int64_t(eta.channels) * s)
        throw std::invalid_argument("eval: parameter length does not match channels * s");
    if (k < 0) throw std::invalid_argument("eval: k must be >= 0");
    Vector t = family.tau0;
    for (int i = 0; i < k; ++i) t = (family.M * t).eval();
    Vector out(eta.channels);
    for (int c = 0; c < eta.channels; ++c) out(c) = t.dot(eta.data.segment(c * s, s));
    return out;
}

Matrix tau_table(const BasisFamily& family, int K) {
    const int s = family.size();
    Matrix T(K + 1, s);
    Vector t = family.tau0;
    for (int k = 0; k <= K; ++k) {
        T.row(k) = t.transpose();
        t = (family.M * t).eval();
    }
    return T;
}

json to_json(const BasisFamily& family) {
    json m = json::array();
    for (int i = 0; i < family.size(); ++i) {
        json row = json::array();
        for (int j = 0; j < family.size(); ++j) row.push_back(family.M(i, j));
        m.push_back(row);
    }
    json t = json::array();
    for (int i = 0; i < family.size(); ++i) t.push_back(family.tau0(i));
    return json{{"type", "raw"}, {"M", m}, {"tau0", t}};
}

BasisFamily family_from_json(const json& spec) {
    const std::string type = spec.at("type").get<std::string>();
    if (type == "classic") return make_classic(spec.at("s").get<int>());
    if (type == "laguerre")
        return make_laguerre(spec.at("s").get<int>(), spec.at("nu").get<double>(),
                             spec.at("ts").get<double>());
    if (type == "damped_fourier")
        return make_damped_fourier(spec.at("s").get<int>(), spec.at("nu").get<double>(),
                                   spec.at("omega").get<double>(), spec.at("ts").get<double>());
    if (type == "union") {
        std::vector<BasisFamily> members;
        for (const auto& m : spec.at("members")) members.push_back(family_from_json(m));
        return block_union(members);
    }
    if (type == "raw") {
        const auto& m = spec.at("M");
        const int s = static_cast<int>(m.size());
        Matrix M(s, s);
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < s; ++j) M(i, j) = m.at(i).at(j).get<double>();
        Vector tau0(s);
        for (int i = 0; i < s; ++i) tau0(i) = spec.at("tau0").at(i).get<double>();
        return {M, tau0};
    }
    throw std::invalid_argument("family_from_json: unknown type '" + type + "'");
}

std::string family_hash(const BasisFamily& family) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    const int64_t s = family.size();
    mix(&s, sizeof(s));
    mix(family.M.data(), sizeof(double) * family.M.size());
    mix(family.tau0.data(), sizeof(double) * family.tau0.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace bfmpc
