#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "bfmpc/pendulum.hpp"
#include "bfmpc/sim.hpp"

namespace bfmpc {

/// Experiment configuration. Parsed from JSON against a strict schema:
/// unknown keys are rejected with the offending path. See
/// docs/config_schema.json for the published field list.
struct ExperimentConfig {
    nlohmann::json raw;       // the resolved document (defaults filled in)
    std::string plant_type;   // "lti" | "quadruple_integrator" | "pendulum"
    double ts = 0.02;

    Matrix A, B;              // discrete-time (lti / integrator)
    PendulumParams pendulum;  // when plant_type == "pendulum"

    Matrix Q, R;
    AffineConstraintSet cons;
    nlohmann::json basis_spec;
    bool basis_orthonormalize = false;

    std::optional<int> nmax_override;
    std::optional<double> nmax_window_time_constants;  // horizon = round(w / (nu ts))
    NmaxOptions nmax_options;

    // sim / sweep settings
    int steps = 2000;
    Vector x0;
    std::optional<DisturbanceSpec> disturbance;
    std::vector<double> nu_grid;
    std::vector<int> s_grid;
    std::vector<double> n_max_grid;
    int num_ics = 100;
    double ic_half_width = 0.5;
    int runs_per_point = 8;  // robustness sweep repetitions per amplitude
    uint64_t seed = 0;
    int workers = 0;  // 0 = hardware concurrency

    // nonlinear solver settings
    NlpOptions nlp;
    int cold_start_iterations = 60;
    double guess_u_amplitude = 15.0;

    BasisFamily make_family() const;
    BasisFamily make_family_with_nu(double nu) const;  // nu substituted into laguerre specs
    BasisFamily make_family_with_s(int s) const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Output directory resolution: explicit --out wins, otherwise a timestamped
/// directory under ./runs. The resolved config is always copied inside.
std::filesystem::path prepare_run_dir(const std::optional<std::string>& out,
                                      const std::string& command);

// ---------------------------------------------------------------------------
// Experiment drivers (used by the CLI and the acceptance suite)
// ---------------------------------------------------------------------------

struct NmaxExperimentResult {
    NmaxResult result;
    BasisFamily family;
    nlohmann::json certificate;
};
NmaxExperimentResult run_nmax_experiment(const ExperimentConfig& cfg);

/// Closed loop for the configured plant; LTI plants use LtiController, the
/// pendulum runs the SQP controller with the built-in swing-up guess.
ClosedLoopLog run_single_experiment(const ExperimentConfig& cfg,
                                    const std::filesystem::path& out_dir);

SweepTable run_nu_sweep(const ExperimentConfig& cfg);
SweepTable run_s_sweep(const ExperimentConfig& cfg);
SweepTable run_robustness_sweep(const ExperimentConfig& cfg);

nlohmann::json basis_inspect(const ExperimentConfig& cfg);

}  // namespace bfmpc
