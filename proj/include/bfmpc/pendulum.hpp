#pragma once

#include "bfmpc/nonlinear_mpc.hpp"

namespace bfmpc {

/// First-principles pendulum-on-a-cart parameters. State (xc, dxc, phi, dphi)
/// with phi = 0 at the upright equilibrium; input is the motor voltage.
struct PendulumParams {
    double m = 0.17;     // pendulum mass [kg]
    double M = 0.74;     // cart mass, lumped [kg]
    double l = 0.30;     // pendulum length [m]
    double km = 0.011;   // torque constant [Nm/A]
    double kn = 20.62;   // speed constant [V/s]
    double Rm = 0.30;    // resistance [Ohm]
    double rzr = 0.018;  // belt wheel radius [m]
    double g = 9.81;     // gravity [m/s^2]

    void validate() const;
};

/// Continuous-time dynamics and its Jacobians.
Vector pendulum_rhs(const PendulumParams& p, const Vector& x, double u);
void pendulum_rhs_jacobian(const PendulumParams& p, const Vector& x, double u,
                           Matrix& fx, Vector& fu);

/// RK4-discretized plant with analytic sensitivities.
NonlinearPlant pendulum_plant(const PendulumParams& params, double ts);

/// Continuous-time linearization at the upright equilibrium.
void pendulum_upright_linearization(const PendulumParams& p, Matrix& Ac, Matrix& Bc);

/// Swing-up initial guess: energy-pumping step inputs followed by an LQR
/// catch, simulated on the nominal plant. Returns per-step (u, x) samples;
/// the rail constraint is not enforced here.
struct SwingUpGuess {
    std::vector<Vector> u_samples;  // 1-vectors
    std::vector<Vector> x_samples;  // n-vectors
};
SwingUpGuess pendulum_swingup_guess(const PendulumParams& p, double ts, int steps,
                                    const Matrix& Q, const Matrix& R, double u_amplitude);

}  // namespace bfmpc
