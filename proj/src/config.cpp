#include "bfmpc/config.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "bfmpc/pendulum.hpp"

namespace bfmpc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + ": " + what);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) schema_error(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) { ok = true; break; }
        if (!ok) schema_error(path + "." + key, "unknown key");
    }
}

Matrix parse_matrix(const json& j, const std::string& path) {
    if (j.is_object() && j.contains("diag")) {
        const auto& d = j.at("diag");
        Matrix M = Matrix::Zero(d.size(), d.size());
        for (size_t i = 0; i < d.size(); ++i) M(i, i) = d.at(i).get<double>();
        return M;
    }
    if (!j.is_array() || j.empty()) schema_error(path, "expected a matrix");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j.at(0).size());
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j.at(i).size()) != cols)
            schema_error(path, "ragged matrix");
        for (int c = 0; c < cols; ++c) M(i, c) = j.at(i).at(c).get<double>();
    }
    return M;
}

Vector parse_vector(const json& j, const std::string& path) {
    if (!j.is_array()) schema_error(path, "expected an array");
    Vector v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v(i) = j.at(i).get<double>();
    return v;
}

Vector parse_limits(const json& j) {
    // null entries mean "unconstrained"
    Vector v(j.size());
    for (size_t i = 0; i < j.size(); ++i)
        v(i) = j.at(i).is_null() ? std::numeric_limits<double>::infinity()
                                 : j.at(i).get<double>();
    return v;
}

json basis_defaulted(const json& spec) {
    json out = spec;
    out.erase("orthonormalize");
    return out;
}

}  // namespace

BasisFamily ExperimentConfig::make_family() const {
    BasisFamily f = family_from_json(basis_defaulted(basis_spec));
    return basis_orthonormalize ? orthonormalize(f) : f;
}

namespace {
json substitute(const json& spec, const std::string& key, const json& value) {
    json out = spec;
    if (out.contains(key)) out[key] = value;
    if (out.contains("members"))
        for (auto& m : out["members"]) m = substitute(m, key, value);
    return out;
}
}  // namespace

BasisFamily ExperimentConfig::make_family_with_nu(double nu) const {
    BasisFamily f = family_from_json(substitute(basis_defaulted(basis_spec), "nu", nu));
    return basis_orthonormalize ? orthonormalize(f) : f;
}

BasisFamily ExperimentConfig::make_family_with_s(int s) const {
    BasisFamily f = family_from_json(substitute(basis_defaulted(basis_spec), "s", s));
    return basis_orthonormalize ? orthonormalize(f) : f;
}

ExperimentConfig parse_config(const json& doc) {
    check_keys(doc, "$", {"schema_version", "seed", "workers", "plant", "cost",
                          "constraints", "basis", "nmax", "sim", "sweep", "solver"});
    if (!doc.contains("schema_version") || doc.at("schema_version").get<int>() != 1)
        schema_error("$.schema_version", "must be 1");

    ExperimentConfig cfg;
    cfg.raw = doc;
    cfg.seed = doc.value("seed", uint64_t{0});
    cfg.workers = doc.value("workers", 0);

    // plant
    const json& plant = doc.at("plant");
    check_keys(plant, "$.plant", {"type", "ts", "A", "B", "params"});
    cfg.plant_type = plant.at("type").get<std::string>();
    cfg.ts = plant.value("ts", 0.02);
    if (cfg.plant_type == "quadruple_integrator") {
        Matrix Ac = Matrix::Zero(4, 4);
        Ac(0, 1) = Ac(1, 2) = Ac(2, 3) = 1.0;
        Matrix Bc = Matrix::Zero(4, 1);
        Bc(3, 0) = 1.0;
        std::tie(cfg.A, cfg.B) = zoh_discretize(Ac, Bc, cfg.ts);
    } else if (cfg.plant_type == "lti") {
        cfg.A = parse_matrix(plant.at("A"), "$.plant.A");
        cfg.B = parse_matrix(plant.at("B"), "$.plant.B");
    } else if (cfg.plant_type == "pendulum") {
        if (plant.contains("params")) {
            const json& p = plant.at("params");
            check_keys(p, "$.plant.params", {"m", "M", "l", "km", "kn", "Rm", "rzr", "g"});
            cfg.pendulum.m = p.value("m", cfg.pendulum.m);
            cfg.pendulum.M = p.value("M", cfg.pendulum.M);
            cfg.pendulum.l = p.value("l", cfg.pendulum.l);
            cfg.pendulum.km = p.value("km", cfg.pendulum.km);
            cfg.pendulum.kn = p.value("kn", cfg.pendulum.kn);
            cfg.pendulum.Rm = p.value("Rm", cfg.pendulum.Rm);
            cfg.pendulum.rzr = p.value("rzr", cfg.pendulum.rzr);
            cfg.pendulum.g = p.value("g", cfg.pendulum.g);
        }
        Matrix Ac, Bc;
        pendulum_upright_linearization(cfg.pendulum, Ac, Bc);
        std::tie(cfg.A, cfg.B) = zoh_discretize(Ac, Bc, cfg.ts);
    } else {
        schema_error("$.plant.type", "unknown plant '" + cfg.plant_type + "'");
    }

    // cost
    const json& cost = doc.at("cost");
    check_keys(cost, "$.cost", {"Q", "R"});
    cfg.Q = parse_matrix(cost.at("Q"), "$.cost.Q");
    cfg.R = parse_matrix(cost.at("R"), "$.cost.R");

    // constraints
    const json& cons = doc.at("constraints");
    check_keys(cons, "$.constraints", {"rows", "x_abs", "u_abs"});
    if (cons.contains("rows")) {
        const auto& rows = cons.at("rows");
        const int nc = static_cast<int>(rows.size());
        const int n = static_cast<int>(cfg.A.rows());
        const int m = static_cast<int>(cfg.B.cols());
        cfg.cons.Cx = Matrix::Zero(nc, n);
        cfg.cons.Cu = Matrix::Zero(nc, m);
        cfg.cons.b = Vector::Zero(nc);
        for (int i = 0; i < nc; ++i) {
            check_keys(rows.at(i), "$.constraints.rows[i]", {"cx", "cu", "b"});
            if (rows.at(i).contains("cx"))
                cfg.cons.Cx.row(i) = parse_vector(rows.at(i).at("cx"), "cx").transpose();
            if (rows.at(i).contains("cu"))
                cfg.cons.Cu.row(i) = parse_vector(rows.at(i).at("cu"), "cu").transpose();
            cfg.cons.b(i) = rows.at(i).at("b").get<double>();
        }
    } else {
        Vector xa = cons.contains("x_abs")
                        ? parse_limits(cons.at("x_abs"))
                        : Vector::Constant(cfg.A.rows(),
                                           std::numeric_limits<double>::infinity());
        Vector ua = cons.contains("u_abs")
                        ? parse_limits(cons.at("u_abs"))
                        : Vector::Constant(cfg.B.cols(),
                                           std::numeric_limits<double>::infinity());
        cfg.cons = AffineConstraintSet::box(xa, ua);
    }

    // basis
    cfg.basis_spec = doc.at("basis");
    cfg.basis_orthonormalize = cfg.basis_spec.value("orthonormalize", false);

    // nmax
    if (doc.contains("nmax")) {
        const json& nm = doc.at("nmax");
        check_keys(nm, "$.nmax", {"override", "window_time_constants", "start_index",
                                  "j_cap", "tol_rel", "include_dynamics"});
        if (nm.contains("override") && !nm.at("override").is_null())
            cfg.nmax_override = nm.at("override").get<int>();
        if (nm.contains("window_time_constants"))
            cfg.nmax_window_time_constants = nm.at("window_time_constants").get<double>();
        cfg.nmax_options.start_index = nm.value("start_index", -1);
        cfg.nmax_options.j_cap = nm.value("j_cap", -1);
        cfg.nmax_options.tol_rel = nm.value("tol_rel", 1e-9);
        cfg.nmax_options.include_dynamics = nm.value("include_dynamics", false);
        if (cfg.nmax_options.include_dynamics) {
            cfg.nmax_options.A = cfg.A;
            cfg.nmax_options.B = cfg.B;
        }
    }

    // sim
    if (doc.contains("sim")) {
        const json& sim = doc.at("sim");
        check_keys(sim, "$.sim", {"steps", "x0", "disturbance"});
        cfg.steps = sim.value("steps", 2000);
        if (sim.contains("x0")) cfg.x0 = parse_vector(sim.at("x0"), "$.sim.x0");
        if (sim.contains("disturbance")) {
            const json& d = sim.at("disturbance");
            check_keys(d, "$.sim.disturbance", {"scale", "n_max", "seed"});
            DisturbanceSpec spec;
            spec.scale = parse_vector(d.at("scale"), "$.sim.disturbance.scale");
            spec.n_max = d.value("n_max", 0.0);
            spec.seed = d.value("seed", cfg.seed);
            cfg.disturbance = spec;
        }
    }
    if (cfg.x0.size() == 0) cfg.x0 = Vector::Zero(cfg.A.rows());

    // sweep
    if (doc.contains("sweep")) {
        const json& sw = doc.at("sweep");
        check_keys(sw, "$.sweep", {"nu_from", "nu_to", "nu_step", "s_grid", "n_max_grid",
                                   "num_ics", "ic_half_width", "runs_per_point"});
        if (sw.contains("nu_from")) {
            const double from = sw.at("nu_from").get<double>();
            const double to = sw.value("nu_to", from);
            const double step = sw.value("nu_step", 0.1);
            for (double nu = from; nu <= to + 1e-9; nu += step)
                cfg.nu_grid.push_back(std::round(nu * 1e6) / 1e6);
        }
        if (sw.contains("s_grid"))
            for (const auto& v : sw.at("s_grid")) cfg.s_grid.push_back(v.get<int>());
        if (sw.contains("n_max_grid"))
            for (const auto& v : sw.at("n_max_grid"))
                cfg.n_max_grid.push_back(v.get<double>());
        cfg.num_ics = sw.value("num_ics", 100);
        cfg.ic_half_width = sw.value("ic_half_width", 0.5);
        cfg.runs_per_point = sw.value("runs_per_point", 8);
    }

    // solver
    if (doc.contains("solver")) {
        const json& so = doc.at("solver");
        check_keys(so, "$.solver", {"kkt_tol", "max_iterations", "k_trunc",
                                    "cold_start_iterations", "guess_u_amplitude",
                                    "qp_primal_tol"});
        cfg.nlp.kkt_tol = so.value("kkt_tol", 1e-6);
        cfg.nlp.max_iterations = so.value("max_iterations", 8);
        cfg.nlp.k_trunc = so.value("k_trunc", 150);
        cfg.cold_start_iterations = so.value("cold_start_iterations", 60);
        cfg.guess_u_amplitude = so.value("guess_u_amplitude", 15.0);
        cfg.nlp.qp_tol.primal = so.value("qp_primal_tol", 1e-8);
    }

    // resolved document (defaults made explicit)
    cfg.raw["seed"] = cfg.seed;
    cfg.raw["workers"] = cfg.workers;
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    json doc = json::parse(in);
    return parse_config(doc);
}

fs::path prepare_run_dir(const std::optional<std::string>& out, const std::string& command) {
    fs::path dir;
    if (out) {
        dir = *out;
    } else {
        const auto now = std::chrono::system_clock::now();
        const auto t = std::chrono::system_clock::to_time_t(now);
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
        dir = fs::path("runs") / (std::string(buf) + "_" + command);
    }
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------

namespace {

int resolve_nmax(const ExperimentConfig& cfg, const BasisFamily& family, double nu,
                 int* computed_flag = nullptr) {
    if (cfg.nmax_override) return *cfg.nmax_override;
    if (cfg.nmax_window_time_constants && nu > 0.0)
        return static_cast<int>(std::lround(*cfg.nmax_window_time_constants /
                                            (nu * cfg.ts)));
    NmaxOptions opts = cfg.nmax_options;
    if (opts.start_index < 0) opts.start_index = 0;  // sound everywhere
    NmaxResult r = compute_nmax(family, cfg.cons, static_cast<int>(cfg.A.rows()),
                                static_cast<int>(cfg.B.cols()), opts);
    if (r.cap_reached)
        throw std::runtime_error("nmax recursion hit the cap; no horizon established");
    if (computed_flag) *computed_flag = 1;
    return r.nmax;
}

double laguerre_nu(const json& spec) {
    if (spec.contains("nu")) return spec.at("nu").get<double>();
    if (spec.contains("members"))
        for (const auto& m : spec.at("members"))
            if (m.contains("nu")) return m.at("nu").get<double>();
    return 0.0;
}

struct PendulumController {
    const ExperimentConfig& cfg;
    NonlinearPlant plant;
    BasisFamily family;
    int nmax;
    ParamVector eta_x{Vector(), 4};
    ParamVector eta_u{Vector(), 1};
    std::vector<int> warm_active;
    bool first = true;
    bool failed = false;

    PendulumController(const ExperimentConfig& c, BasisFamily f, int nm)
        : cfg(c), plant(pendulum_plant(c.pendulum, c.ts)), family(std::move(f)), nmax(nm) {}

    void build_guess() {
        SwingUpGuess g = pendulum_swingup_guess(cfg.pendulum, cfg.ts, 240, cfg.Q, cfg.R,
                                                cfg.guess_u_amplitude);
        eta_u = project_trajectory(g.u_samples, family);
        eta_x = project_trajectory(g.x_samples, family);
    }

    ControllerStep operator()(int, const Vector& x) {
        ControllerStep out;
        if (failed) return out;
        NlpOptions opts = cfg.nlp;
        if (first) {
            build_guess();
            opts.max_iterations = cfg.cold_start_iterations;
        } else {
            opts.warm_active = warm_active;
        }
        NlpStepResult r = solve_nlp(plant, family, cfg.Q, cfg.R, cfg.cons, nmax, x,
                                    eta_x, eta_u, opts);
        if (r.qp_status != SolveStatus::Optimal && r.iterations <= 1) {
            failed = true;
            return out;
        }
        first = false;
        eta_x = shift(r.eta_x, family);
        eta_u = shift(r.eta_u, family);
        warm_active = r.warm_active;
        out.feasible = true;
        out.u = r.u0;
        out.cost = r.cost;
        out.iterations = r.iterations;
        return out;
    }
};

RunOptions pendulum_run_options(const ExperimentConfig& cfg) {
    RunOptions opts;
    opts.steps = cfg.steps;
    opts.disturbance = cfg.disturbance;
    const Matrix Q = cfg.Q;
    const Matrix R = cfg.R;
    opts.running_cost = [Q, R](const Vector& x, const Vector& u) {
        return x.dot(Q * x) + u.dot(R * u);
    };
    opts.violation = [](const Vector& x, const Vector& u) {
        return std::max(std::abs(x(0)) - 0.45, std::abs(u(0)) - 24.0);
    };
    const double phi_tol = 5.0 * M_PI / 180.0;
    const double dphi_tol = 30.0 * M_PI / 180.0;
    opts.in_success_region = [phi_tol, dphi_tol](const Vector& x) {
        return std::abs(x(2)) < phi_tol && std::abs(x(3)) < dphi_tol;
    };
    opts.success_hold_steps = static_cast<int>(std::round(0.5 / cfg.ts));
    return opts;
}

template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

NmaxExperimentResult run_nmax_experiment(const ExperimentConfig& cfg) {
    NmaxExperimentResult out;
    out.family = cfg.make_family();
    NmaxOptions opts = cfg.nmax_options;
    out.result = compute_nmax(out.family, cfg.cons, static_cast<int>(cfg.A.rows()),
                              static_cast<int>(cfg.B.cols()), opts);
    out.certificate = out.result.certificate_json(out.family, cfg.cons);
    return out;
}

ClosedLoopLog run_single_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
    ClosedLoopLog log;
    if (cfg.plant_type == "pendulum") {
        BasisFamily family = cfg.make_family();
        const int nmax = resolve_nmax(cfg, family, laguerre_nu(cfg.basis_spec));
        PendulumController ctrl(cfg, family, nmax);
        NonlinearPlant plant = pendulum_plant(cfg.pendulum, cfg.ts);
        PlantMap pm = [&plant](int k, const Vector& x, const Vector& u) {
            return plant.f(k, x, u);
        };
        Controller c = [&ctrl](int k, const Vector& x) { return ctrl(k, x); };
        log = run_closed_loop(pm, c, cfg.x0, pendulum_run_options(cfg));
    } else {
        BasisFamily family = cfg.make_family();
        const int nmax = resolve_nmax(cfg, family, laguerre_nu(cfg.basis_spec));
        LtiProblem prob{cfg.A, cfg.B, cfg.Q, cfg.R, cfg.cons, cfg.ts};
        LtiController ctrl(prob, family, nmax);
        RunOptions opts;
        opts.steps = cfg.steps;
        opts.disturbance = cfg.disturbance;
        const Matrix Q = cfg.Q;
        const Matrix R = cfg.R;
        opts.running_cost = [Q, R](const Vector& x, const Vector& u) {
            return x.dot(Q * x) + u.dot(R * u);
        };
        PlantMap pm = [&cfg](int, const Vector& x, const Vector& u) {
            return (cfg.A * x + cfg.B * u).eval();
        };
        log = run_closed_loop(pm, make_lti_controller(ctrl), cfg.x0, opts);
    }
    if (!out_dir.empty()) {
        log.write_csv((out_dir / "log.csv").string());
        std::ofstream((out_dir / "summary.json").string()) << log.summary_json().dump(2)
                                                           << "\n";
    }
    return log;
}

SweepTable run_nu_sweep(const ExperimentConfig& cfg) {
    if (cfg.nu_grid.empty()) throw std::invalid_argument("nu sweep: empty grid");
    const auto ics = draw_initial_conditions(cfg.num_ics, static_cast<int>(cfg.A.rows()),
                                             cfg.ic_half_width, cfg.seed);
    SweepTable table;
    table.parameter_name = "nu";
    table.rows.resize(cfg.nu_grid.size());
    const Matrix Q = cfg.Q, R = cfg.R;

    for (size_t gi = 0; gi < cfg.nu_grid.size(); ++gi) {
        const double nu = cfg.nu_grid[gi];
        BasisFamily family = cfg.make_family_with_nu(nu);
        const int nmax = resolve_nmax(cfg, family, nu);
        LtiProblem prob{cfg.A, cfg.B, cfg.Q, cfg.R, cfg.cons, cfg.ts};

        std::vector<double> costs(ics.size(), 0.0);
        std::vector<char> ok(ics.size(), 0);
        std::vector<double> maxwall(ics.size(), 0.0);
        parallel_for(static_cast<int>(ics.size()), cfg.workers, [&](int i) {
            LtiController ctrl(prob, family, nmax);
            RunOptions opts;
            opts.steps = cfg.steps;
            opts.running_cost = [&Q, &R](const Vector& x, const Vector& u) {
                return x.dot(Q * x) + u.dot(R * u);
            };
            PlantMap pm = [&cfg](int, const Vector& x, const Vector& u) {
                return (cfg.A * x + cfg.B * u).eval();
            };
            ClosedLoopLog log = run_closed_loop(pm, make_lti_controller(ctrl), ics[i], opts);
            ok[i] = log.completed ? 1 : 0;
            costs[i] = log.total_cost;
            for (const auto& r : log.records) maxwall[i] = std::max(maxwall[i], r.wall_ms);
        });
        SweepRow row;
        row.parameter = nu;
        row.nmax = nmax;
        row.runs = static_cast<int>(ics.size());
        double sum = 0.0, wall = 0.0;
        int good = 0;
        for (size_t i = 0; i < ics.size(); ++i) {
            if (ok[i]) { sum += costs[i]; ++good; }
            wall += maxwall[i];
        }
        row.infeasible = row.runs - good;
        row.mean_cost = good ? sum / good : 0.0;
        row.success_rate = static_cast<double>(good) / row.runs;
        row.mean_max_wall_ms = wall / row.runs;
        table.rows[gi] = row;
    }
    return table;
}

SweepTable run_s_sweep(const ExperimentConfig& cfg) {
    if (cfg.s_grid.empty()) throw std::invalid_argument("s sweep: empty grid");
    const auto ics = draw_initial_conditions(cfg.num_ics, static_cast<int>(cfg.A.rows()),
                                             cfg.ic_half_width, cfg.seed);
    SweepTable table;
    table.parameter_name = "s";
    const Matrix Q = cfg.Q, R = cfg.R;
    for (int s : cfg.s_grid) {
        BasisFamily family = cfg.make_family_with_s(s);
        const int nmax = resolve_nmax(cfg, family, laguerre_nu(cfg.basis_spec));
        LtiProblem prob{cfg.A, cfg.B, cfg.Q, cfg.R, cfg.cons, cfg.ts};
        std::vector<double> costs(ics.size(), 0.0);
        std::vector<char> ok(ics.size(), 0);
        std::vector<double> maxwall(ics.size(), 0.0);
        parallel_for(static_cast<int>(ics.size()), cfg.workers, [&](int i) {
            LtiController ctrl(prob, family, nmax);
            RunOptions opts;
            opts.steps = cfg.steps;
            opts.running_cost = [&Q, &R](const Vector& x, const Vector& u) {
                return x.dot(Q * x) + u.dot(R * u);
            };
            PlantMap pm = [&cfg](int, const Vector& x, const Vector& u) {
                return (cfg.A * x + cfg.B * u).eval();
            };
            ClosedLoopLog log = run_closed_loop(pm, make_lti_controller(ctrl), ics[i], opts);
            ok[i] = log.completed ? 1 : 0;
            costs[i] = log.total_cost;
            for (const auto& r : log.records) maxwall[i] = std::max(maxwall[i], r.wall_ms);
        });
        SweepRow row;
        row.parameter = s;
        row.nmax = nmax;
        row.runs = static_cast<int>(ics.size());
        double sum = 0.0, wall = 0.0;
        int good = 0;
        for (size_t i = 0; i < ics.size(); ++i) {
            if (ok[i]) { sum += costs[i]; ++good; }
            wall += maxwall[i];
        }
        row.infeasible = row.runs - good;
        row.mean_cost = good ? sum / good : 0.0;
        row.success_rate = static_cast<double>(good) / row.runs;
        row.mean_max_wall_ms = wall / row.runs;
        table.rows.push_back(row);
    }
    return table;
}

SweepTable run_robustness_sweep(const ExperimentConfig& cfg) {
    if (cfg.n_max_grid.empty()) throw std::invalid_argument("robustness sweep: empty grid");
    if (cfg.plant_type != "pendulum")
        throw std::invalid_argument("robustness sweep requires the pendulum plant");
    BasisFamily family = cfg.make_family();
    const int nmax = resolve_nmax(cfg, family, laguerre_nu(cfg.basis_spec));
    Vector scale(4);
    scale << 0.02, 0.005, 1.0 * M_PI / 180.0, 0.5 * M_PI / 180.0;
    if (cfg.disturbance) scale = cfg.disturbance->scale;

    SweepTable table;
    table.parameter_name = "n_max";
    table.rows.resize(cfg.n_max_grid.size());
    NonlinearPlant plant = pendulum_plant(cfg.pendulum, cfg.ts);
    const int runs = cfg.runs_per_point;

    for (size_t gi = 0; gi < cfg.n_max_grid.size(); ++gi) {
        const double amp = cfg.n_max_grid[gi];
        std::vector<double> costs(runs, 0.0);
        std::vector<char> good(runs, 0);
        parallel_for(runs, cfg.workers, [&](int r) {
            ExperimentConfig local = cfg;
            DisturbanceSpec spec;
            spec.scale = scale;
            spec.n_max = amp;
            spec.seed = Rng::stream(cfg.seed, "robustness", gi * 1000 + r).next_u64();
            local.disturbance = amp > 0.0 ? std::optional<DisturbanceSpec>(spec)
                                          : std::nullopt;
            PendulumController ctrl(local, family, nmax);
            PlantMap pm = [&plant](int k, const Vector& x, const Vector& u) {
                return plant.f(k, x, u);
            };
            Controller c = [&ctrl](int k, const Vector& x) { return ctrl(k, x); };
            ClosedLoopLog log = run_closed_loop(pm, c, local.x0, pendulum_run_options(local));
            good[r] = log.success ? 1 : 0;
            costs[r] = log.total_cost;
        });
        SweepRow row;
        row.parameter = amp;
        row.nmax = nmax;
        row.runs = runs;
        double sum = 0.0;
        int ok = 0;
        for (int r = 0; r < runs; ++r) {
            if (good[r]) { sum += costs[r]; ++ok; }
        }
        row.success_rate = static_cast<double>(ok) / runs;
        row.infeasible = runs - ok;
        row.mean_cost = ok ? sum / ok : 0.0;
        table.rows[gi] = row;
    }
    return table;
}

json basis_inspect(const ExperimentConfig& cfg) {
    BasisFamily family = cfg.make_family();
    const double rho = spectral_radius(family.M);
    json out;
    out["s"] = family.size();
    out["spectral_radius"] = rho;
    out["a2_satisfied"] = rho < 1.0;
    if (rho < 1.0) {
        Matrix J = gram(family);
        Eigen::SelfAdjointEigenSolver<Matrix> es(J);
        const double lmin = es.eigenvalues().minCoeff();
        const double lmax = es.eigenvalues().maxCoeff();
        out["gram_min_eigenvalue"] = lmin;
        out["gram_condition"] = lmin > 0.0 ? lmax / lmin
                                           : std::numeric_limits<double>::infinity();
        out["a1_satisfied"] = lmin > 0.0;
        json env = json::array();
        Matrix taus = tau_table(family, 20);
        for (int k = 0; k <= 20; ++k) env.push_back(taus.row(k).norm());
        out["decay_envelope"] = env;
    }
    out["family_hash"] = family_hash(family);
    return out;
}

}  // namespace bfmpc
