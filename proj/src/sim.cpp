#include "bfmpc/sim.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace bfmpc {

namespace {
uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}
}  // namespace

Rng Rng::stream(uint64_t seed, const std::string& label, uint64_t index) {
    uint64_t mix = seed;
    mix = splitmix64(mix) ^ fnv1a(label);
    mix = splitmix64(mix) ^ index;
    splitmix64(mix);
    return Rng(mix);
}

uint64_t Rng::next_u64() { return splitmix64(state); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

ClosedLoopLog run_closed_loop(const PlantMap& plant, const Controller& controller,
                              const Vector& x0, const RunOptions& opts) {
    if (opts.steps < 1) throw std::invalid_argument("run_closed_loop: steps must be >= 1");
    ClosedLoopLog log;
    log.steps_requested = opts.steps;
    log.records.reserve(opts.steps);

    std::optional<Rng> noise;
    if (opts.disturbance && opts.disturbance->n_max > 0.0)
        noise = Rng::stream(opts.disturbance->seed, "disturbance", 0);

    Vector x = x0;
    int success_run = 0;
    bool constraints_ok = true;
    for (int k = 0; k < opts.steps; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        ControllerStep step = controller(k, x);
        const auto t1 = std::chrono::steady_clock::now();

        ClosedLoopRecord rec;
        rec.k = k;
        rec.x = x;
        rec.u = step.u;
        rec.cost_to_go = step.cost;
        rec.feasible = step.feasible;
        rec.iterations = step.iterations;
        rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (!step.feasible) {
            log.records.push_back(rec);
            log.completed = false;
            return log;
        }
        rec.running_cost = opts.running_cost ? opts.running_cost(x, step.u) : 0.0;
        log.total_cost += rec.running_cost;
        if (opts.violation)
            log.max_violation = std::max(log.max_violation, opts.violation(x, step.u));
        log.records.push_back(rec);

        Vector xn = plant(k, x, step.u);
        if (!xn.allFinite())
            throw std::runtime_error("run_closed_loop: plant produced non-finite state at k=" +
                                     std::to_string(k));
        if (noise) {
            const double nk = noise->uniform(-opts.disturbance->n_max,
                                             opts.disturbance->n_max);
            xn += opts.disturbance->scale * nk;
        }
        x = xn;

        if (opts.in_success_region) {
            if (opts.in_success_region(x)) ++success_run;
            else success_run = 0;
        }
    }
    log.completed = true;
    log.converged = x.cwiseAbs().maxCoeff() < opts.converged_norm;
    if (opts.violation && log.max_violation > 1e-9) constraints_ok = false;
    if (opts.in_success_region)
        log.success = constraints_ok && success_run >= opts.success_hold_steps;
    else
        log.success = log.completed;
    return log;
}

Controller make_lti_controller(LtiController& ctrl) {
    return [&ctrl](int, const Vector& x) {
        MpcStepResult r = ctrl.step(x);
        ControllerStep out;
        out.feasible = r.status == SolveStatus::Optimal;
        out.u = out.feasible ? r.u0 : Vector::Zero(ctrl.problem().m());
        out.cost = r.cost;
        out.iterations = r.iterations;
        return out;
    };
}

void ClosedLoopLog::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    if (records.empty()) return;
    const int n = static_cast<int>(records.front().x.size());
    const int m = static_cast<int>(records.front().u.size());
    out << "k";
    for (int i = 0; i < n; ++i) out << ",x" << i;
    for (int i = 0; i < m; ++i) out << ",u" << i;
    out << ",cost_to_go,running_cost,feasible,iterations,wall_ms\n";
    out.precision(17);
    for (const auto& r : records) {
        out << r.k;
        for (int i = 0; i < n; ++i) out << ',' << r.x(i);
        for (int i = 0; i < m; ++i) out << ',' << (r.u.size() ? r.u(i) : 0.0);
        out << ',' << r.cost_to_go << ',' << r.running_cost << ',' << (r.feasible ? 1 : 0)
            << ',' << r.iterations << ',' << r.wall_ms << '\n';
    }
}

nlohmann::json ClosedLoopLog::summary_json() const {
    return nlohmann::json{{"schema_version", 1},
                          {"steps_requested", steps_requested},
                          {"steps_completed", records.size()},
                          {"total_cost", total_cost},
                          {"completed", completed},
                          {"converged", converged},
                          {"success", success},
                          {"max_violation", max_violation}};
}

void SweepTable::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << parameter_name << ",nmax,mean_cost,infeasible,runs,success_rate,mean_max_wall_ms\n";
    out.precision(17);
    for (const auto& r : rows)
        out << r.parameter << ',' << r.nmax << ',' << r.mean_cost << ',' << r.infeasible
            << ',' << r.runs << ',' << r.success_rate << ',' << r.mean_max_wall_ms << '\n';
}

std::vector<Vector> draw_initial_conditions(int count, int dim, double half_width,
                                            uint64_t seed) {
    std::vector<Vector> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng = Rng::stream(seed, "ics", i);
        Vector x(dim);
        for (int j = 0; j < dim; ++j) x(j) = rng.uniform(-half_width, half_width);
        out.push_back(x);
    }
    return out;
}

}  // namespace bfmpc
