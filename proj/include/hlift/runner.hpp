#pragma once

// Batch front door: builds the configured problem, runs lift / check / validate,
// and writes trace CSV plus JSON reports atomically under an output directory.

#include "hlift/config.hpp"
#include "hlift/endpoint_map.hpp"
#include "hlift/hypothesis.hpp"
#include "hlift/ple_solver.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace hlift {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kSetup = 1;
inline constexpr int kSingularTerminal = 2;
inline constexpr int kOtherTermination = 3;
inline constexpr int kFalsified = 4;
inline constexpr int kValidationFailed = 5;
}  // namespace exit_code

struct ProblemEntry {
    std::string kind;
    std::string name;
    std::string description;
};

[[nodiscard]] inline const std::vector<ProblemEntry>& problem_registry() {
    static const std::vector<ProblemEntry> entries{
        {"builtin", "sphere", "F(u) = |u|_X^2, n = 1; 0 is the only critical value"},
        {"builtin", "fold", "F(u) = (u1^2, u2); singular on u1 = 0"},
        {"builtin", "linear", "F(u) = A u with problem.matrix"},
        {"linear", "linear", "F(u) = A u with problem.matrix"},
        {"endpoint", "single_integrator", "x' = u, state dimension problem.dim"},
        {"endpoint", "lti", "x' = A x + B u with problem.A, problem.B"},
        {"endpoint", "brockett", "x1' = u1, x2' = u2, x3' = x1 u2"},
        {"endpoint", "unicycle", "x' = u1 cos th, y' = u1 sin th, th' = u2"},
    };
    return entries;
}

[[nodiscard]] inline SystemPtr make_system(const ProblemConfig& p) {
    if (p.system == "single_integrator") return std::make_shared<SingleIntegrator>(p.dim);
    if (p.system == "lti") return std::make_shared<LtiSystem>(p.A, p.B);
    if (p.system == "brockett") return std::make_shared<BrockettIntegrator>();
    if (p.system == "unicycle") return std::make_shared<Unicycle>();
    throw Error(ErrorKind::Configuration, "problem.system: unknown system '" + p.system + "'");
}

[[nodiscard]] inline MapPtr make_map(const ProblemConfig& p) {
    auto weights_or = [&](Eigen::Index N) -> Vector {
        if (!p.weights) return Vector::Ones(N);
        require_dim(p.weights->size(), N, "problem.weights");
        return *p.weights;
    };
    switch (p.kind) {
        case ProblemKind::Linear:
            return std::make_shared<LinearMap>(p.matrix, weights_or(p.matrix.cols()));
        case ProblemKind::Builtin:
            if (p.map == "sphere") return std::make_shared<SphereMap>(weights_or(p.dim));
            if (p.map == "fold") return std::make_shared<FoldMap>(weights_or(2));
            return std::make_shared<LinearMap>(p.matrix, weights_or(p.matrix.cols()));
        case ProblemKind::Endpoint: {
            SystemPtr sys = make_system(p);
            ControlGrid grid{p.T, p.segments, sys->control_dim()};
            require(!p.weights.has_value(), ErrorKind::Configuration,
                    "problem.weights: endpoint weights are fixed by the control grid (T / segments)");
            return std::make_shared<EndpointProblem>(sys, p.x0, grid, p.nodes_per_segment);
        }
    }
    throw Error(ErrorKind::Configuration, "problem.kind: unsupported");
}

/// Anchor u0: as configured (an endpoint u0 of length m is held constant on every segment),
/// otherwise e_1 for builtin curved maps, 0 for linear maps, u = 1 for endpoint problems.
[[nodiscard]] inline Vector anchor(const ProblemConfig& p, const MapOracle& map) {
    const Eigen::Index N = map.dim_domain();
    if (p.u0) {
        if (p.kind == ProblemKind::Endpoint) {
            const auto& ep = dynamic_cast<const EndpointProblem&>(map);
            if (p.u0->size() == ep.grid().control_dim && p.u0->size() != N) return ep.grid().constant(*p.u0);
        }
        require(p.u0->size() == N, ErrorKind::Configuration, "problem.u0: expected length " + std::to_string(N));
        return *p.u0;
    }
    if (p.kind == ProblemKind::Endpoint) return Vector::Ones(N);
    if (p.kind == ProblemKind::Linear || p.map == "linear") return Vector::Zero(N);
    return Vector::Unit(N, 0);
}

[[nodiscard]] inline TargetPath make_path(const PathConfig& pc, const Vector& start) {
    require(pc.target.has_value(), ErrorKind::Configuration, "path.target: missing required key");
    if (pc.kind == PathKind::Line) return TargetPath::line(start, *pc.target);
    std::vector<Vector> pts{start};
    pts.insert(pts.end(), pc.waypoints.begin(), pc.waypoints.end());
    pts.push_back(*pc.target);
    return TargetPath::polyline(std::move(pts));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[nodiscard]] inline std::string trace_header(Eigen::Index n) {
    std::string h = "s";
    for (Eigen::Index i = 1; i <= n; ++i) h += ",lambda_" + std::to_string(i);
    h += ",a_1,h,f,g,norm_u,norm_dudS,residual,step_size,flags";
    return h;
}

[[nodiscard]] inline std::string trace_csv(const ContinuationReport& rep, Eigen::Index n) {
    std::ostringstream out;
    out << trace_header(n) << '\n';
    for (const auto& st : rep.trace) {
        out << format_number(st.s);
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_number(st.spectrum.lambdas[i]);
        const auto& d = st.diagnostics;
        out << ',' << format_number(d.a[0]) << ',' << format_number(d.h) << ',' << format_number(d.f) << ',';
        if (!(st.flag_bits & flags::kSingular) && d.g) out << format_number(*d.g);
        out << ',' << format_number(st.norm_u) << ',' << format_number(st.norm_du_ds) << ','
            << format_number(st.residual) << ',' << format_number(st.step_size) << ',' << flags::to_string(st.flag_bits)
            << '\n';
    }
    return out.str();
}

/// JSON number, or null for non-finite values.
[[nodiscard]] inline nlohmann::json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

[[nodiscard]] inline nlohmann::json json_vector(const Vector& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v[i]));
    return a;
}

[[nodiscard]] inline nlohmann::json lift_report_json(const ContinuationReport& rep, const MapOracle& map) {
    nlohmann::json j;
    j["problem"] = map.name();
    j["status"] = to_string(rep.status);
    j["message"] = rep.message;
    j["final_s"] = json_number(rep.final_s);
    j["final_residual"] = json_number(rep.final_residual);
    j["final_u"] = json_vector(rep.final_u);
    j["final_norm_u"] = json_number(map.norm(rep.final_u));
    j["integral_abs_g"] = json_number(rep.integral_abs_g);
    j["bound_check_max"] = json_number(rep.bound_check_max);
    j["total_variation_norm_u"] = json_number(rep.total_variation_norm_u);
    j["lambda0_measured"] = json_number(rep.lambda0_measured);
    j["cbar"] = json_number(rep.cbar);
    j["max_least_squares_defect"] = json_number(rep.max_least_squares_defect);
    j["accepted_steps"] = rep.accepted_steps;
    j["rejected_steps"] = rep.rejected_steps;
    j["warnings"] = rep.warnings;
    return j;
}

[[nodiscard]] inline nlohmann::json check_report_json(const HypothesisReport& rep, const MapOracle& map) {
    nlohmann::json j;
    j["problem"] = map.name();
    j["note"] = "sampled estimates: conditions are at most not falsified on this sample";
    j["seed"] = rep.seed;
    j["u_samples"] = rep.u_samples;
    j["z_samples_per_u"] = rep.z_samples_per_u;
    j["v_samples"] = rep.v_samples;
    j["coercivity_samples"] = rep.coercivity_samples;
    j["skipped_degenerate_phi"] = rep.skipped_degenerate_phi;
    j["singular_samples"] = rep.singular_samples;
    j["C_est"] = json_number(rep.C_est);
    j["K_est"] = json_number(rep.K_est);
    j["xi_margin"] = json_number(rep.xi_margin);
    j["xi_split"] = {{"K1", json_number(rep.xi_split.K1)},
                         {"K2", json_number(rep.xi_split.K2)},
                         {"alpha", rep.xi_split.alpha},
                         {"holds_on_sample", rep.xi_split.holds}};
    j["assumptionA"] = {{"pass", rep.assumptionA_pass}, {"worst_margin", json_number(rep.assumptionA_margin)}};
    j["growth"] = {{"slope", json_number(rep.growth.slope)},
                   {"intercept", json_number(rep.growth.intercept)},
                   {"pass", rep.growth.pass},
                   {"singular_samples", rep.growth.singular_samples}};
    nlohmann::json verdicts = nlohmann::json::object();
    for (const auto& [name, v] : rep.verdicts) {
        verdicts[name] = {{"checked", v.checked},
                          {"falsified", v.falsified},
                          {"result", !v.checked ? "not requested" : v.falsified ? "falsified" : "not falsified"},
                          {"detail", v.detail}};
    }
    j["conditions"] = verdicts;
    j["any_falsified"] = rep.any_falsified();
    return j;
}

[[nodiscard]] inline std::string shells_csv(const HypothesisReport& rep) {
    std::ostringstream out;
    out << "radius,samples,singular,degenerate_phi,C_max,K_min,xi_margin_min,lambda2_min,max_inverse_gramian\n";
    for (const auto& r : rep.shells) {
        out << format_number(r.radius) << ',' << r.samples << ',' << r.singular << ',' << r.degenerate_phi << ','
            << format_number(r.C_max) << ',' << format_number(r.K_min) << ',' << format_number(r.xi_margin_min) << ','
            << format_number(r.lambda2_min) << ',' << format_number(r.max_inverse_gramian) << '\n';
    }
    return out.str();
}

/// Writes through a sibling temporary and renames, so readers never see a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Configuration, "cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw Error(ErrorKind::Configuration, "failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct RunContext {
    std::filesystem::path out_dir = ".";
    std::ostream* log = &std::cerr;   // progress and diagnostics
    bool verbose = false;
};

[[nodiscard]] inline int lift_exit_code(LiftStatus s) {
    if (s == LiftStatus::Reached) return exit_code::kOk;
    if (s == LiftStatus::SingularTerminal) return exit_code::kSingularTerminal;
    return exit_code::kOtherTermination;
}

struct LiftRun {
    MapPtr map;
    ContinuationReport report;
    int exit = exit_code::kSetup;
};

/// Runs the lift without touching the filesystem.
[[nodiscard]] inline LiftRun execute_lift(const RunConfig& cfg) {
    LiftRun run;
    run.map = make_map(cfg.problem);
    const Vector u0 = anchor(cfg.problem, *run.map);
    const TargetPath path = make_path(cfg.path, run.map->eval(u0));
    PathLifter lifter(*run.map, path, cfg.solver);
    run.report = lifter.lift(u0);
    run.exit = lift_exit_code(run.report.status);
    return run;
}

inline int run_lift(const RunConfig& cfg, const RunContext& ctx) {
    LiftRun run;
    try {
        run = execute_lift(cfg);
    } catch (const Error& e) {
        *ctx.log << "error: " << e.what() << '\n';
        return exit_code::kSetup;
    }
    write_atomic(ctx.out_dir / cfg.output.csv, trace_csv(run.report, run.map->dim_codomain()));
    write_atomic(ctx.out_dir / cfg.output.report, lift_report_json(run.report, *run.map).dump(2) + "\n");
    *ctx.log << "lift: " << to_string(run.report.status) << " at s = " << format_number(run.report.final_s)
             << ", residual " << format_number(run.report.final_residual) << ", " << run.report.accepted_steps
             << " steps\n";
    for (const auto& w : run.report.warnings) *ctx.log << "warning: " << w << '\n';
    return run.exit;
}

inline int run_check(const RunConfig& cfg, const RunContext& ctx) {
    MapPtr map;
    HypothesisReport rep;
    try {
        map = make_map(cfg.problem);
        rep = check_report(*map, cfg.plan, cfg.check);
    } catch (const Error& e) {
        *ctx.log << "error: " << e.what() << '\n';
        return exit_code::kSetup;
    }
    write_atomic(ctx.out_dir / cfg.output.check_report, check_report_json(rep, *map).dump(2) + "\n");
    write_atomic(ctx.out_dir / cfg.output.check_csv, shells_csv(rep));
    for (const auto& [name, v] : rep.verdicts) {
        if (v.checked) *ctx.log << "check " << name << ": " << (v.falsified ? "falsified" : "not falsified") << " (" << v.detail << ")\n";
    }
    return rep.any_falsified() ? exit_code::kFalsified : exit_code::kOk;
}

// ---------------------------------------------------------------------------
// Oracle self-tests
// ---------------------------------------------------------------------------

struct ValidationResult {
    bool pass = true;
    std::string first_failure;
    std::vector<std::string> lines;
};

/// Adjoint identity, FD Jacobian agreement, d^2F symmetry, and analytic-vs-FD second differential
/// at `points` seeded random points around u0.
[[nodiscard]] inline ValidationResult validate_oracle(const MapOracle& map, const Vector& u0, std::uint64_t seed,
                                                      int points = 5, int triples = 50) {
    ValidationResult res;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    auto random_vec = [&](Eigen::Index len) {
        Vector v(len);
        for (Eigen::Index i = 0; i < len; ++i) v[i] = nd(rng);
        return v;
    };
    const Eigen::Index N = map.dim_domain();
    const Eigen::Index n = map.dim_codomain();
    auto record = [&](const std::string& what, double err, double tol) {
        std::ostringstream line;
        line << what << ": " << format_number(err) << " (tol " << format_number(tol) << ")";
        const bool ok = err <= tol;
        res.lines.push_back((ok ? "ok   " : "FAIL ") + line.str());
        if (!ok && res.pass) {
            res.pass = false;
            res.first_failure = line.str();
        }
    };
    double adj = 0.0, jac = 0.0, sym = 0.0, second = 0.0;
    for (int p = 0; p < points; ++p) {
        const Vector u = u0 + 0.25 * random_vec(N).cwiseQuotient(map.weights().cwiseSqrt());
        const Matrix J = map.jacobian(u);
        const Matrix Jfd = fd_jacobian(map, u);
        jac = std::max(jac, (J - Jfd).norm() / std::max(1.0, J.norm()));
        const int per_point = std::max(1, triples / points);
        for (int t = 0; t < per_point; ++t) {
            const Vector v = random_vec(N);
            const Vector w = random_vec(N);
            const Vector z = random_vec(n);
            const double lhs = (J * v).dot(z);
            const double rhs = map.inner(v, map.adjoint_from_jacobian(J, z));
            adj = std::max(adj, std::abs(lhs - rhs) / (1.0 + map.norm(v) * z.norm()));
            const double bvw = map.bilinear_second(u, z, v, w);
            const double bwv = map.bilinear_second(u, z, w, v);
            sym = std::max(sym, std::abs(bvw - bwv) / std::max(1.0, std::abs(bvw)));
            if (map.has_analytic_second()) {
                const double fd = map.inner(map.fd_second_directional(u, z, v), w);
                second = std::max(second, std::abs(fd - bvw) / (1.0 + std::abs(bvw)));
            }
        }
    }
    record("adjoint identity |<dF v, z> - <v, phi_z>_X| / (1 + |v||z|)", adj, 1e-6);
    record("Jacobian vs central differences, relative", jac, 1e-5);
    record("second differential symmetry, relative", sym, 1e-6);
    if (map.has_analytic_second()) record("analytic vs FD second differential, relative", second, 1e-5);
    return res;
}

inline int run_validate(const RunConfig& cfg, const RunContext& ctx, std::uint64_t seed) {
    MapPtr map;
    Vector u0;
    try {
        map = make_map(cfg.problem);
        u0 = anchor(cfg.problem, *map);
    } catch (const Error& e) {
        *ctx.log << "error: " << e.what() << '\n';
        return exit_code::kSetup;
    }
    ValidationResult res;
    try {
        res = validate_oracle(*map, u0, seed);
    } catch (const Error& e) {
        std::cout << "FAIL " << map->name() << ": " << e.what() << '\n';
        return exit_code::kValidationFailed;
    }
    for (const auto& l : res.lines) *ctx.log << l << '\n';
    if (!res.pass) {
        std::cout << "FAIL " << map->name() << ": " << res.first_failure << '\n';
        return exit_code::kValidationFailed;
    }
    std::cout << "ok " << map->name() << '\n';
    return exit_code::kOk;
}

enum class Subcommand { Lift, Check, Validate };

/// Loads `config_path` and dispatches; configuration errors exit 1 before anything is written.
inline int run_from_file(Subcommand cmd, const std::string& config_path, const RunContext& ctx,
                         std::optional<std::uint64_t> seed = std::nullopt) {
    RunConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const Error& e) {
        *ctx.log << "error: " << e.what() << '\n';
        return exit_code::kSetup;
    }
    if (seed) cfg.plan.seed = *seed;
    switch (cmd) {
        case Subcommand::Lift: return run_lift(cfg, ctx);
        case Subcommand::Check: return run_check(cfg, ctx);
        case Subcommand::Validate: return run_validate(cfg, ctx, cfg.plan.seed);
    }
    return exit_code::kSetup;
}

inline void list_problems(std::ostream& out) {
    for (const auto& e : problem_registry()) out << e.kind << '\t' << e.name << '\t' << e.description << '\n';
}

}  // namespace hlift
