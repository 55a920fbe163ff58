#include "bfmpc/pendulum.hpp"

#include <cmath>
#include <stdexcept>

#include "bfmpc/lti_mpc.hpp"

namespace bfmpc {

void PendulumParams::validate() const {
    for (double v : {m, M, l, km, kn, Rm, rzr, g})
        if (!(v > 0.0)) throw std::invalid_argument("PendulumParams: values must be > 0");
}

Vector pendulum_rhs(const PendulumParams& p, const Vector& x, double u) {
    const double dxc = x(1), phi = x(2), dphi = x(3);
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double Fu = p.km / (p.rzr * p.Rm) * (u - dxc / (p.kn * p.rzr));
    const double den = p.M / p.m + sp * sp;
    Vector dx(4);
    dx(0) = dxc;
    dx(1) = (Fu / p.m - p.g * sp * cp + p.l * dphi * dphi * sp) / den;
    dx(2) = dphi;
    dx(3) = (-Fu / (p.m * p.l) * cp + (p.M + p.m) / (p.m * p.l) * p.g * sp -
             dphi * dphi * sp * cp) / den;
    return dx;
}

void pendulum_rhs_jacobian(const PendulumParams& p, const Vector& x, double u,
                           Matrix& fx, Vector& fu) {
    const double dxc = x(1), phi = x(2), dphi = x(3);
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double s2 = std::sin(2 * phi), c2 = std::cos(2 * phi);
    const double c1 = p.km / (p.rzr * p.Rm);
    const double Fu = c1 * (u - dxc / (p.kn * p.rzr));
    const double dFu_dv = -c1 / (p.kn * p.rzr);
    const double den = p.M / p.m + sp * sp;
    const double num_x = Fu / p.m - p.g * sp * cp + p.l * dphi * dphi * sp;
    const double num_p = -Fu / (p.m * p.l) * cp + (p.M + p.m) / (p.m * p.l) * p.g * sp -
                         dphi * dphi * sp * cp;

    fx = Matrix::Zero(4, 4);
    fu = Vector::Zero(4);
    fx(0, 1) = 1.0;
    fx(2, 3) = 1.0;

    fx(1, 1) = (dFu_dv / p.m) / den;
    fx(1, 2) = ((-p.g * c2 + p.l * dphi * dphi * cp) * den - num_x * s2) / (den * den);
    fx(1, 3) = 2.0 * p.l * dphi * sp / den;
    fu(1) = (c1 / p.m) / den;

    fx(3, 1) = (-dFu_dv / (p.m * p.l) * cp) / den;
    fx(3, 2) = ((Fu / (p.m * p.l) * sp + (p.M + p.m) / (p.m * p.l) * p.g * cp -
                 dphi * dphi * c2) * den - num_p * s2) / (den * den);
    fx(3, 3) = -2.0 * dphi * sp * cp / den;
    fu(3) = (-c1 / (p.m * p.l) * cp) / den;
}

NonlinearPlant pendulum_plant(const PendulumParams& params, double ts) {
    params.validate();
    if (!(ts > 0.0)) throw std::invalid_argument("pendulum_plant: ts must be > 0");
    NonlinearPlant plant;
    plant.n = 4;
    plant.m = 1;
    plant.f = [params, ts](int, const Vector& x, const Vector& u) {
        const double uv = u(0);
        Vector k1 = pendulum_rhs(params, x, uv);
        Vector k2 = pendulum_rhs(params, x + 0.5 * ts * k1, uv);
        Vector k3 = pendulum_rhs(params, x + 0.5 * ts * k2, uv);
        Vector k4 = pendulum_rhs(params, x + ts * k3, uv);
        return (x + ts / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)).eval();
    };
    plant.jacobians = [params, ts](int, const Vector& x, const Vector& u, Matrix& fx,
                                   Matrix& fu) {
        const double uv = u(0);
        const Matrix I = Matrix::Identity(4, 4);
        Matrix J1, J2, J3, J4;
        Vector g1, g2, g3, g4;
        Vector k1 = pendulum_rhs(params, x, uv);
        pendulum_rhs_jacobian(params, x, uv, J1, g1);
        Vector x2 = x + 0.5 * ts * k1;
        Vector k2 = pendulum_rhs(params, x2, uv);
        pendulum_rhs_jacobian(params, x2, uv, J2, g2);
        Vector x3 = x + 0.5 * ts * k2;
        Vector k3 = pendulum_rhs(params, x3, uv);
        pendulum_rhs_jacobian(params, x3, uv, J3, g3);
        Vector x4 = x + ts * k3;
        pendulum_rhs_jacobian(params, x4, uv, J4, g4);

        Matrix K1 = J1;
        Matrix K2 = J2 * (I + 0.5 * ts * K1);
        Matrix K3 = J3 * (I + 0.5 * ts * K2);
        Matrix K4 = J4 * (I + ts * K3);
        fx = I + ts / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4);

        Vector b1 = g1;
        Vector b2 = g2 + J2 * (0.5 * ts * b1);
        Vector b3 = g3 + J3 * (0.5 * ts * b2);
        Vector b4 = g4 + J4 * (ts * b3);
        fu = ts / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4);
    };
    return plant;
}

void pendulum_upright_linearization(const PendulumParams& p, Matrix& Ac, Matrix& Bc) {
    Vector fu;
    pendulum_rhs_jacobian(p, Vector::Zero(4), 0.0, Ac, fu);
    Bc = fu;
}

SwingUpGuess pendulum_swingup_guess(const PendulumParams& p, double ts, int steps,
                                    const Matrix& Q, const Matrix& R, double u_amplitude) {
    NonlinearPlant plant = pendulum_plant(p, ts);
    Matrix Ac, Bc;
    pendulum_upright_linearization(p, Ac, Bc);
    auto [Ad, Bd] = zoh_discretize(Ac, Bc, ts);
    Matrix K = dare_gain(Ad, Bd, Q, R);

    SwingUpGuess guess;
    Vector x(4);
    x << 0.0, 0.0, M_PI, 0.0;
    bool caught = false;
    for (int k = 0; k < steps; ++k) {
        double u;
        if (!caught && std::abs(x(2)) < 0.9 && std::abs(x(3)) < 8.0) caught = true;
        if (caught) {
            u = (K * x)(0);
        } else {
            // energy pumping: accelerate the cart against the pendulum swing
            const double dir = (x(3) * std::cos(x(2)) < 0.0) ? 1.0 : -1.0;
            u = dir * u_amplitude;
        }
        u = std::clamp(u, -24.0, 24.0);
        guess.x_samples.push_back(x);
        guess.u_samples.push_back(Vector::Constant(1, u));
        x = plant.f(k, x, Vector::Constant(1, u));
    }
    return guess;
}

}  // namespace bfmpc
