#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "bfmpc/lti_mpc.hpp"
#include "bfmpc/nonlinear_mpc.hpp"

namespace bfmpc {

// Portable deterministic RNG: splitmix64 streams, uniform doubles built from
// the top 53 bits. Streams are split per (seed, label, index) so sweep
// workers draw identical numbers regardless of scheduling.
struct Rng {
    uint64_t state;

    explicit Rng(uint64_t seed) : state(seed) {}
    static Rng stream(uint64_t seed, const std::string& label, uint64_t index);

    uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
};

struct DisturbanceSpec {
    Vector scale;        // per-state direction, e.g. (0.02 m, 0.005 m/s, 1 deg, 0.5 deg/s)
    double n_max = 0.0;  // scalar disturbance n(k) ~ U[-n_max, n_max]
    uint64_t seed = 0;
};

struct ClosedLoopRecord {
    int k = 0;
    Vector x;
    Vector u;
    double cost_to_go = 0.0;   // J(x(k)) reported by the controller
    double running_cost = 0.0; // l(x(k), u(k))
    bool feasible = true;
    int iterations = 0;
    double wall_ms = 0.0;
};

struct ClosedLoopLog {
    std::vector<ClosedLoopRecord> records;
    double total_cost = 0.0;     // sum of running costs over the run
    bool completed = false;      // controller stayed feasible for all steps
    bool converged = false;      // |x| below threshold at the end
    bool success = false;        // scenario criterion (see run options)
    double max_violation = 0.0;  // constraint violation over the true states
    int steps_requested = 0;

    void write_csv(const std::string& path) const;
    nlohmann::json summary_json() const;
};

/// One controller step: given x, return (u, cost-to-go, feasible, iterations).
struct ControllerStep {
    Vector u;
    double cost = 0.0;
    bool feasible = false;
    int iterations = 0;
};
using Controller = std::function<ControllerStep(int k, const Vector& x)>;
using PlantMap = std::function<Vector(int k, const Vector& x, const Vector& u)>;
using RunningCost = std::function<double(const Vector& x, const Vector& u)>;

struct RunOptions {
    int steps = 2000;
    std::optional<DisturbanceSpec> disturbance;
    RunningCost running_cost;
    std::function<double(const Vector&, const Vector&)> violation;  // optional monitor
    // success criterion (swing-up): |phi| < phi_tol and |dphi| < dphi_tol
    // sustained for hold_steps, constraints respected throughout.
    std::function<bool(const Vector&)> in_success_region;
    int success_hold_steps = 0;
    double converged_norm = 1e-3;
};

ClosedLoopLog run_closed_loop(const PlantMap& plant, const Controller& controller,
                              const Vector& x0, const RunOptions& opts);

/// LTI controller wrapper for run_closed_loop.
Controller make_lti_controller(LtiController& ctrl);

// ---------------------------------------------------------------------------
// Batch experiments
// ---------------------------------------------------------------------------

struct SweepRow {
    double parameter = 0.0;   // nu or s or n_max
    int nmax = 0;
    double mean_cost = 0.0;   // over feasible/successful runs
    int infeasible = 0;       // runs that failed (step 0 or mid-run)
    int runs = 0;
    double success_rate = 1.0;
    double mean_max_wall_ms = 0.0;
};

struct SweepTable {
    std::string parameter_name;
    std::vector<SweepRow> rows;
    void write_csv(const std::string& path) const;
};

/// Initial conditions uniform on a centered box, one stream per index.
std::vector<Vector> draw_initial_conditions(int count, int dim, double half_width,
                                            uint64_t seed);

}  // namespace bfmpc
