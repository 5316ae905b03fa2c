// End-to-end acceptance criteria; prints one PASS/FAIL line each and exits nonzero on any failure.

#include "hlift/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

using namespace hlift;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void run(const char* id, const char* title, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && secs >= limit_s) {
        o.pass = false;
        o.detail += " (over time limit)";
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s -- %s [%.3f s%s]\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs,
                limit_s > 0 ? (", limit " + format_number(limit_s) + " s").c_str() : "");
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

RunConfig shipped(const std::string& name) { return load_config(std::string(HLIFT_CONFIG_DIR) + "/" + name + ".ini"); }

double lambda1(const MapOracle& map, const Vector& u) { return spectral_decompose(gramian(map, u)).lambdas[0]; }

/// Classical RK4 on the lifting equation with a constant path velocity.
Vector rk4(const MapOracle& map, Vector u, const Vector& gd, double h, int steps) {
    for (int k = 0; k < steps; ++k) {
        const Vector k1 = ple_rhs(map, u, gd);
        const Vector k2 = ple_rhs(map, u + 0.5 * h * k1, gd);
        const Vector k3 = ple_rhs(map, u + 0.5 * h * k2, gd);
        const Vector k4 = ple_rhs(map, u + h * k3, gd);
        u += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return u;
}

struct RateCheck {
    int samples = 0;
    double worst = 0.0;
};

/// dlambda_1/ds from the diagnostics against a central difference of lambda_1 along the lift.
RateCheck rate_check(const MapOracle& map, const TargetPath& path, const ContinuationReport& rep) {
    const double delta = 1e-4;
    RateCheck rc;
    for (const auto& st : rep.trace) {
        if (st.diagnostics.singular || !std::isfinite(st.diagnostics.dlambda1_ds)) continue;
        if (st.s - delta < path.piece_start(st.piece) || st.s + delta > path.piece_end(st.piece)) continue;
        const Vector up = rk4(map, st.u, st.gamma_dot, delta / 4, 4);
        const Vector um = rk4(map, st.u, st.gamma_dot, -delta / 4, 4);
        const double fd = (lambda1(map, up) - lambda1(map, um)) / (2 * delta);
        rc.worst = std::max(rc.worst, std::abs(st.diagnostics.dlambda1_ds - fd) / (1 + std::abs(fd)));
        ++rc.samples;
    }
    return rc;
}

}  // namespace

int main() {
    run("AC1", "linear map lifts exactly to the minimum-norm displacement", 1.0, [] {
        std::mt19937_64 rng(2024);
        std::normal_distribution<double> nd;
        Matrix a(3, 6);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
        Vector u0(6), dy(3);
        for (auto& x : u0) x = nd(rng);
        for (auto& x : dy) x = nd(rng);
        const LinearMap lin(a);
        const Vector y0 = lin.eval(u0);
        const ContinuationReport rep = lift(lin, TargetPath::line(y0, y0 + dy), u0);
        const Vector expected = u0 + a.completeOrthogonalDecomposition().pseudoInverse() * dy;
        const double err = (rep.final_u - expected).norm();
        return Outcome{rep.status == LiftStatus::Reached && err <= 1e-8 && rep.final_residual <= 1e-10,
                       std::string(to_string(rep.status)) + ", |u - u*| = " + fmt(err) + ", residual " +
                           fmt(rep.final_residual)};
    });

    run("AC2", "dlambda_1/ds formula matches a central difference along the lift", 10.0, [] {
        const FoldMap fold;
        const TargetPath fold_path = TargetPath::line(Vector::Map(std::array{0.16, 0.0}.data(), 2),
                                                      Vector::Map(std::array{0.04, 0.5}.data(), 2));
        SolverOptions opt;
        opt.ds_max = 0.02;
        const Vector u_fold = Vector::Map(std::array{0.4, 0.0}.data(), 2);
        const ContinuationReport fold_rep = lift(fold, fold_path, u_fold, opt);
        const RateCheck a = rate_check(fold, fold_path, fold_rep);

        RunConfig uni = shipped("unicycle");
        uni.solver.ds_max = 0.02;
        const MapPtr map = make_map(uni.problem);
        const Vector u0 = anchor(uni.problem, *map);
        const TargetPath uni_path = make_path(uni.path, map->eval(u0));
        const ContinuationReport uni_rep = lift(*map, uni_path, u0, uni.solver);
        const RateCheck b = rate_check(*map, uni_path, uni_rep);
        const bool ok = fold_rep.status == LiftStatus::Reached && uni_rep.status == LiftStatus::Reached &&
                        a.samples >= 20 && b.samples >= 20 && a.worst <= 1e-3 && b.worst <= 1e-3;
        return Outcome{ok, "fold: " + std::to_string(a.samples) + " samples, worst " + fmt(a.worst) + "; unicycle: " +
                               std::to_string(b.samples) + " samples, worst " + fmt(b.worst)};
    });

    run("AC3", "sphere lift ends singular-terminal with |u| = sqrt(1 - s) and finite g-integral", 5.0, [] {
        const SphereMap sph(2);
        const ContinuationReport rep = lift(sph, TargetPath::line(Vector::Ones(1), Vector::Zero(1)),
                                            Vector::Unit(2, 0));
        double worst = 0.0;
        for (const auto& st : rep.trace)
            if (st.s <= 0.99) worst = std::max(worst, std::abs(st.norm_u - std::sqrt(1 - st.s)));
        const bool ok = rep.status == LiftStatus::SingularTerminal && worst <= 1e-4 && rep.integral_abs_g >= 0.95 &&
                        rep.integral_abs_g <= 1.05;
        return Outcome{ok, std::string(to_string(rep.status)) + " at s = " + format_number(rep.final_s) +
                               ", max | |u| - sqrt(1-s) | = " + fmt(worst) + ", int |g| = " + fmt(rep.integral_abs_g)};
    });

    run("AC4", "least-norm bound check holds on every shipped scenario", 0.0, [] {
        double worst = 0.0;
        std::string detail;
        bool ok = true;
        for (const char* name : {"linear", "sphere", "fold", "brockett", "unicycle"}) {
            const LiftRun r = execute_lift(shipped(name));
            worst = std::max(worst, r.report.bound_check_max);
            ok = ok && r.report.bound_check_max <= 1e-8;
            detail += std::string(name) + " " + fmt(r.report.bound_check_max) + "; ";
        }
        return Outcome{ok, detail + "worst " + fmt(worst)};
    });

    run("AC5", "Brockett motion planning reaches the target on a refined re-integration", 30.0, [] {
        const RunConfig cfg = shipped("brockett");
        const LiftRun r = execute_lift(cfg);
        const auto& coarse = dynamic_cast<const EndpointProblem&>(*r.map);
        const EndpointProblem fine(coarse.system_ptr(), coarse.x0(), coarse.grid(), 32);
        const double err = (fine.eval(r.report.final_u) - *cfg.path.target).norm();
        return Outcome{r.report.status == LiftStatus::Reached && coarse.grid().segments == 20 && err <= 1e-6,
                       std::string(to_string(r.report.status)) + ", |E_32(u) - target| = " + fmt(err)};
    });

    run("AC6", "zero control is singular for Brockett with z_1 = e_3", 0.0, [] {
        const EndpointProblem ep(std::make_shared<BrockettIntegrator>(), Vector::Zero(3), ControlGrid{1.0, 20, 2});
        const GramianSpectrum s = spectral_decompose(gramian(ep, Vector::Zero(ep.dim_domain())));
        const double align = std::abs(s.z(0)[2]);
        return Outcome{s.lambdas[0] <= 1e-10 && align >= 1 - 1e-8,
                       "lambda_1 = " + fmt(s.lambdas[0]) + ", |<z_1, e_3>| = " + format_number(align)};
    });

    run("AC7", "hypothesis checker on the sphere and the linear map", 0.0, [] {
        const RunConfig sph = shipped("sphere");
        const MapPtr sm = make_map(sph.problem);
        const HypothesisReport a = check_report(*sm, sph.plan, sph.check);
        const RunConfig lin = shipped("linear");
        const MapPtr lm = make_map(lin.problem);
        const HypothesisReport b = check_report(*lm, lin.plan, lin.check);
        const bool eq12_only = lin.check.conditions == std::set<std::string>{"eq1_2"};
        const bool ok = std::abs(a.C_est - 2) <= 1e-3 && std::abs(a.K_est - 2) <= 1e-3 && a.growth.slope <= 0 &&
                        a.growth.pass && !a.any_falsified() && b.K_est == 0.0 && eq12_only &&
                        b.verdicts.at("eq1_2").falsified && b.any_falsified();
        return Outcome{ok, "sphere C = " + format_number(a.C_est) + ", K = " + format_number(a.K_est) + ", slope " +
                               fmt(a.growth.slope) + "; linear K = " + fmt(b.K_est) + ", eq1_2 " +
                               (b.verdicts.at("eq1_2").falsified ? "falsified" : "not falsified")};
    });

    run("AC8", "oracle self-tests pass on every builtin map and control system", 20.0, [] {
        std::vector<std::pair<std::string, MapPtr>> maps;
        std::vector<Vector> anchors;
        auto add = [&](std::string name, MapPtr m, Vector u) {
            maps.emplace_back(std::move(name), std::move(m));
            anchors.push_back(std::move(u));
        };
        Matrix a(3, 6);
        std::mt19937_64 rng(5);
        std::normal_distribution<double> nd;
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
        add("sphere", std::make_shared<SphereMap>(Vector::Map(std::array{0.5, 2.0, 1.0}.data(), 3)),
            Vector::Unit(3, 0));
        add("fold", std::make_shared<FoldMap>(), Vector::Ones(2));
        add("linear", std::make_shared<LinearMap>(a), Vector::Zero(6));
        Matrix la(2, 2), lb(2, 1);
        la << 0, 1, -1, -0.2;
        lb << 0, 1;
        const std::vector<std::pair<SystemPtr, Vector>> systems{
            {std::make_shared<SingleIntegrator>(2), Vector::Zero(2)},
            {std::make_shared<LtiSystem>(la, lb), Vector::Unit(2, 0)},
            {std::make_shared<BrockettIntegrator>(), Vector::Zero(3)},
            {std::make_shared<Unicycle>(), Vector::Map(std::array{0.0, 0.0, 0.3}.data(), 3)},
        };
        for (const auto& [sys, x0] : systems) {
            auto ep = std::make_shared<EndpointProblem>(sys, x0, ControlGrid{1.0, 6, sys->control_dim()});
            const Eigen::Index n = ep->dim_domain();
            add("endpoint:" + sys->name(), ep, Vector::Ones(n));
        }
        bool ok = true;
        std::string detail;
        for (std::size_t i = 0; i < maps.size(); ++i) {
            const ValidationResult v = validate_oracle(*maps[i].second, anchors[i], 1);
            ok = ok && v.pass;
            detail += maps[i].first + (v.pass ? " ok; " : " FAILED (" + v.first_failure + "); ");
        }
        return Outcome{ok, detail};
    });

    std::printf("%d of 8 acceptance criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
