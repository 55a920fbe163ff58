#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "json.hpp"

namespace bfmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A family of s basis functions generated by tau(k+1) = M tau(k).
///
/// Valid families have rho(M) < 1 and linearly independent trajectories
/// (positive definite Gram matrix); the classic impulse family is the
/// nilpotent special case.
struct BasisFamily {
    Matrix M;      // s x s shift matrix
    Vector tau0;   // tau(0)

    int size() const { return static_cast<int>(M.rows()); }
};

/// Stacked coefficients for a d-channel trajectory, channel-major:
/// data = (eta_1, ..., eta_d), each block of length s.
struct ParamVector {
    Vector data;
    int channels = 1;

    int block_size() const { return static_cast<int>(data.size()) / channels; }
};

double spectral_radius(const Matrix& M);

// Family constructors
BasisFamily make_classic(int s);
BasisFamily make_laguerre(int s, double nu, double ts);
BasisFamily make_damped_fourier(int s, double nu, double omega, double ts);
BasisFamily make_lqr_family(const Matrix& A, const Matrix& B, const Matrix& K,
                            const Vector& tau0);
BasisFamily block_union(const std::vector<BasisFamily>& members);

/// Gram matrix sum_k tau(k) tau(k)^T, solved from the discrete Lyapunov
/// identity J = M J M^T + tau0 tau0^T (Kronecker solve up to s <= 64,
/// truncated summation above).
Matrix gram(const BasisFamily& family);

/// Rescale so that gram(result) = I while spanning the same trajectories.
BasisFamily orthonormalize(const BasisFamily& family);

/// One-step time shift in coefficient space: eta_hat = (I_d kron M^T) eta.
ParamVector shift(const ParamVector& eta, const BasisFamily& family);

/// Trajectory sample (I_d kron tau(k))^T eta.
Vector eval(const ParamVector& eta, const BasisFamily& family, int k);

/// tau(0..K) precomputed; row k holds tau(k)^T.
Matrix tau_table(const BasisFamily& family, int K);

// Serialization (named constructor + parameters, or raw M/tau0).
// Raw-matrix form round-trips bit-faithfully.
nlohmann::json to_json(const BasisFamily& family);
BasisFamily family_from_json(const nlohmann::json& spec);

/// FNV-1a over the canonical little-endian bytes of (s, M, tau0).
std::string family_hash(const BasisFamily& family);

}  // namespace bfmpc
