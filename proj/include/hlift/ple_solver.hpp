#pragma once

// Path-lifting equation du/ds = dF*_u G(u)^{-1} gamma_dot(s), integrated over s in [0, 1]
// with an embedded RK45 pair, Gauss-Newton drift correction, and singular-event detection.

#include "hlift/gramian.hpp"
#include "hlift/path.hpp"
#include "hlift/rk45.hpp"

#include <Eigen/Cholesky>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace hlift {

struct SolverOptions {
    double ds_init = 1e-2;
    double ds_min = 1e-12;
    double ds_max = 0.05;
    double rtol = 1e-8;  // tol_ode (relative)
    double atol = 1e-10;  // tol_ode (absolute)
    double tol_residual = 1e-10;
    double tol_init = 1e-8;
    double lambda_sing = kSingularFactor;  // lambda_1 < lambda_sing * max(1, lambda_n) is singular
    double lambda0 = 1e-6;  // Assumption (A) level used for per-state flags
    bool correction = true;
    double terminal_window = 1e-3;
    double ds_event = 1e-6;
    int max_steps = 200'000;
    int max_correction_iterations = 10;
    double divergence_norm = 1e12;

    void validate() const {
        auto positive = [](double v, const char* key) {
            require(std::isfinite(v) && v > 0.0, ErrorKind::Configuration, std::string(key) + " must be positive");
        };
        positive(ds_init, "solver.ds_init");
        positive(ds_min, "solver.ds_min");
        positive(ds_max, "solver.ds_max");
        positive(rtol, "solver.tol_ode");
        positive(atol, "solver.atol");
        positive(tol_residual, "solver.tol_residual");
        positive(tol_init, "solver.tol_init");
        positive(lambda_sing, "solver.lambda_sing");
        positive(lambda0, "solver.lambda0");
        positive(terminal_window, "solver.terminal_window");
        positive(ds_event, "solver.ds_event");
        require(max_steps >= 1, ErrorKind::Configuration, "solver.max_steps must be >= 1");
        require(max_correction_iterations >= 1, ErrorKind::Configuration,
                "solver.max_correction_iterations must be >= 1");
    }
};

/// Everything known about the map at a domain point: Jacobian, Gramian spectrum.
struct PointData {
    Matrix jacobian;
    GramianSpectrum spectrum;
};

[[nodiscard]] inline PointData point_data(const MapOracle& map, const Vector& u, const GramianSpectrum* prev = nullptr) {
    PointData p;
    p.jacobian = map.jacobian(u);
    p.spectrum = spectral_decompose(gramian_from_jacobian(map, p.jacobian), prev);
    return p;
}

/// Solves G c = y by Cholesky, falling back to an eigen-solve with eigenvalues clamped at `floor`.
[[nodiscard]] inline Vector gramian_solve(const Matrix& g, const GramianSpectrum& spec, const Vector& y, double floor) {
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() == Eigen::Success) {
        Vector c = llt.solve(y);
        if (c.allFinite()) return c;
    }
    const Vector inv = spec.lambdas.cwiseMax(floor).cwiseInverse();
    return spec.vectors * inv.asDiagonal() * (spec.vectors.transpose() * y);
}

/// dF*_u G(u)^{-1} gamma_dot from precomputed point data.
[[nodiscard]] inline Vector ple_rhs(const MapOracle& map, const PointData& p, const Vector& gamma_dot,
                                    double singular_factor = kSingularFactor) {
    require_dim(gamma_dot.size(), map.dim_codomain(), "ple_rhs: gamma_dot");
    const double lsing = singular_threshold(p.spectrum, singular_factor);
    if (!(p.spectrum.lambda_min() > lsing)) {
        throw SingularGramianError("lambda_1 = " + std::to_string(p.spectrum.lambda_min()) + " <= lambda_sing",
                                   p.spectrum.lambdas);
    }
    const Matrix g = gramian_from_jacobian(map, p.jacobian);
    return map.adjoint_from_jacobian(p.jacobian, gramian_solve(g, p.spectrum, gamma_dot, lsing));
}

[[nodiscard]] inline Vector ple_rhs(const MapOracle& map, const Vector& u, const Vector& gamma_dot,
                                    double singular_factor = kSingularFactor) {
    return ple_rhs(map, point_data(map, u), gamma_dot, singular_factor);
}

struct CorrectionResult {
    Vector u;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Gauss-Newton u <- u + dF* G^{-1} (target - F(u)) until |F(u) - target| <= tol.
[[nodiscard]] inline CorrectionResult gauss_newton(const MapOracle& map, Vector u, const Vector& target, double tol,
                                                   int max_iterations, double singular_factor = kSingularFactor,
                                                   int min_iterations = 0) {
    CorrectionResult r;
    Vector defect = target - map.eval(u);
    r.residual = defect.norm();
    while ((r.residual > tol || r.iterations < min_iterations) && r.iterations < max_iterations) {
        u += ple_rhs(map, u, defect, singular_factor);
        ++r.iterations;
        defect = target - map.eval(u);
        r.residual = defect.norm();
        if (!std::isfinite(r.residual)) break;
    }
    r.converged = r.residual <= tol;
    r.u = std::move(u);
    return r;
}

namespace flags {
inline constexpr unsigned kSingular = 1u << 0;
inline constexpr unsigned kKnot = 1u << 1;
inline constexpr unsigned kDegenerate = 1u << 2;
inline constexpr unsigned kAssumptionA = 1u << 3;
inline constexpr unsigned kCorrectionWarning = 1u << 4;
inline constexpr unsigned kSimplicity = 1u << 5;

[[nodiscard]] inline std::string to_string(unsigned f) {
    std::string out;
    auto add = [&](unsigned bit, const char* name) {
        if ((f & bit) == 0) return;
        if (!out.empty()) out += '|';
        out += name;
    };
    add(kSingular, "singular");
    add(kKnot, "knot");
    add(kDegenerate, "degenerate");
    add(kAssumptionA, "assumption_a");
    add(kCorrectionWarning, "correction");
    add(kSimplicity, "simplicity");
    return out;
}
}  // namespace flags

struct LiftState {
    double s = 0.0;
    int piece = 0;  // path piece used for gamma_dot at s (right-continuous at knots)
    Vector u;
    GramianSpectrum spectrum;
    SpectralDiagnostics diagnostics;
    Vector gamma;
    Vector gamma_dot;
    Vector du_ds;
    double residual = 0.0;
    double step_size = 0.0;  // size of the step that produced this state (0 for the anchor)
    double norm_u = 0.0;
    double norm_du_ds = 0.0;
    unsigned flag_bits = 0;
};

enum class LiftStatus { Reached, SingularTerminal, SingularInterior, StepUnderflow, Diverged };

[[nodiscard]] constexpr const char* to_string(LiftStatus s) noexcept {
    switch (s) {
        case LiftStatus::Reached: return "Reached";
        case LiftStatus::SingularTerminal: return "SingularTerminal";
        case LiftStatus::SingularInterior: return "SingularInterior";
        case LiftStatus::StepUnderflow: return "StepUnderflow";
        case LiftStatus::Diverged: return "Diverged";
    }
    return "Unknown";
}

struct ContinuationReport {
    std::vector<LiftState> trace;
    LiftStatus status = LiftStatus::Diverged;
    std::string message;
    Vector final_u;
    double final_s = 0.0;
    double final_residual = 0.0;
    double integral_abs_g = 0.0;
    double total_variation_norm_u = 0.0;
    double lambda0_measured = std::numeric_limits<double>::infinity();  // min over the trace of lambda_2
    double cbar = 0.0;  // (n - 1) max|gamma_dot| / sqrt(lambda0_measured)
    double bound_check_max = -std::numeric_limits<double>::infinity();
    double max_least_squares_defect = 0.0;  // max |dF(du/ds) - gamma_dot| / (1 + |gamma_dot|)
    int accepted_steps = 0;
    int rejected_steps = 0;
    std::vector<std::string> warnings;
};

class PathLifter {
public:
    PathLifter(const MapOracle& map, const TargetPath& path, SolverOptions options = {})
        : map_(map), path_(path), opt_(options) {
        opt_.validate();
        require_dim(path_.dim(), map_.dim_codomain(), "target path dimension");
    }

    [[nodiscard]] const SolverOptions& options() const noexcept { return opt_; }

    /// Builds the full state at (s, u) on the given path piece.
    [[nodiscard]] LiftState make_state(double s, int piece, Vector u, const GramianSpectrum* prev) const {
        LiftState st;
        st.s = s;
        st.piece = piece;
        const PointData p = point_data(map_, u, prev);
        st.spectrum = p.spectrum;
        st.gamma = path_.position(s, piece);
        st.gamma_dot = path_.velocity(s, piece);
        st.residual = (map_.eval(u) - st.gamma).norm();
        st.norm_u = map_.norm(u);
        st.diagnostics = diagnostics(map_, u, p.jacobian, p.spectrum, st.gamma_dot, opt_.lambda_sing);
        if (st.diagnostics.singular) {
            st.flag_bits |= flags::kSingular;
        } else {
            st.du_ds = ple_rhs(map_, p, st.gamma_dot, opt_.lambda_sing);
            st.norm_du_ds = map_.norm(st.du_ds);
        }
        if (p.spectrum.degenerate) st.flag_bits |= flags::kDegenerate;
        if (!gap_check(p.spectrum, opt_.lambda0).pass) st.flag_bits |= flags::kAssumptionA;
        if (p.spectrum.gap < kSimplicityFactor * std::max(1.0, p.spectrum.lambda_max())) {
            st.flag_bits |= flags::kSimplicity;
        }
        st.u = std::move(u);
        return st;
    }

    /// Anchor state; throws BadAnchor / SingularStart.
    [[nodiscard]] LiftState initial_state(const Vector& u0) const {
        require_dim(u0.size(), map_.dim_domain(), "lift: u0");
        const double res = (map_.eval(u0) - path_.position(0.0, 0)).norm();
        if (!(res <= opt_.tol_init)) {
            throw Error(ErrorKind::BadAnchor, "|F(u0) - gamma(0)| = " + std::to_string(res) + " exceeds tol_init");
        }
        const PointData p = point_data(map_, u0);
        if (!(p.spectrum.lambda_min() > singular_threshold(p.spectrum, opt_.lambda_sing))) {
            throw Error(ErrorKind::SingularStart, "u0 lies on the singular set (lambda_1 = " +
                                                      std::to_string(p.spectrum.lambda_min()) + ")");
        }
        return make_state(0.0, 0, u0, nullptr);
    }

    struct StepOutcome {
        enum class Kind { Accepted, SingularEvent, Diverged } kind = Kind::Accepted;
        LiftState state;  // valid when Accepted
        double next_step = 0.0;
        int rejections = 0;
        std::string message;
    };

    LiftState correct(const LiftState& state) const {
        CorrectionResult c = gauss_newton(map_, state.u, state.gamma, opt_.tol_residual,
                                          opt_.max_correction_iterations, opt_.lambda_sing);
        if (!c.converged && !(c.residual < 10.0 * opt_.tol_residual)) {
            throw Error(ErrorKind::CorrectionFailed, "residual " + std::to_string(c.residual) + " after " +
                                                        std::to_string(c.iterations) + " iterations");
        }
        LiftState out = make_state(state.s, state.piece, std::move(c.u), &state.spectrum);
        out.step_size = state.step_size;
        out.flag_bits |= state.flag_bits & flags::kKnot;
        if (!c.converged) out.flag_bits |= flags::kCorrectionWarning;
        return out;
    }

    /// One accepted RK45 step of size <= ds (retrying smaller steps internally).
    [[nodiscard]] StepOutcome step(const LiftState& state, double ds) const {
        StepOutcome out;
        const int piece = state.piece;
        const double s_end = path_.piece_end(piece);
        double h = std::min({ds, opt_.ds_max, s_end - state.s});
        auto rhs = [&](double s, const Vector& u) -> Vector {
            return ple_rhs(map_, point_data(map_, u), path_.velocity(s, piece), opt_.lambda_sing);
        };
        const Vector k1 = state.du_ds;
        // First-order estimate of where lambda_1 reaches lambda_sing along the step.
        double s_event = std::numeric_limits<double>::infinity();
        const double dl = state.diagnostics.dlambda1_ds;
        if (std::isfinite(dl) && dl < 0.0) {
            s_event = state.s + (state.spectrum.lambda_min() - singular_threshold(state.spectrum, opt_.lambda_sing)) / -dl;
        }
        while (true) {
            if (h < opt_.ds_min) {
                throw Error(ErrorKind::StepUnderflow, "step size " + std::to_string(h) + " below ds_min at s = " +
                                                          std::to_string(state.s));
            }
            const bool reaches_end = h >= s_end - state.s;
            const double s_new = reaches_end ? s_end : state.s + h;
            const double h_eff = s_new - state.s;
            bool singular = s_new > s_event;
            double err = std::numeric_limits<double>::infinity();
            rk45::StepResult trial;
            if (!singular) {
                try {
                    trial = rk45::step(rhs, state.s, state.u, h_eff, k1);
                    if (trial.y.allFinite()) {
                        err = rk45::error_norm(trial.error, state.u, trial.y, opt_.rtol, opt_.atol);
                    }
                } catch (const SingularGramianError&) {
                    singular = true;
                } catch (const TrajectoryBlowupError&) {
                    err = std::numeric_limits<double>::infinity();
                }
            }
            if (!singular && err <= 1.0) {
                if (map_.norm(trial.y) > opt_.divergence_norm) {
                    out.kind = StepOutcome::Kind::Diverged;
                    out.message = "|u| exceeded divergence bound";
                    return out;
                }
                try {
                    LiftState cand = build_candidate(state, s_new, reaches_end, trial.y);
                    cand.step_size = h_eff;
                    out.state = std::move(cand);
                    out.next_step = std::min(opt_.ds_max, h_eff * rk45::step_factor(err));
                    return out;
                } catch (const SingularGramianError&) {
                    singular = true;
                } catch (const TrajectoryBlowupError&) {
                    err = std::numeric_limits<double>::infinity();
                } catch (const Error& e) {
                    if (e.kind() == ErrorKind::AssumptionAViolation) throw;
                    // correction failure: fall through to a smaller step
                    err = std::numeric_limits<double>::infinity();
                }
            }
            ++out.rejections;
            if (singular) {
                h = 0.5 * h_eff;
                if (h < opt_.ds_event) {
                    out.kind = StepOutcome::Kind::SingularEvent;
                    return out;
                }
            } else {
                h = h_eff * (std::isfinite(err) ? std::max(0.2, rk45::step_factor(err)) : 0.5);
                h = std::min(h, 0.5 * h_eff);
            }
        }
    }

    [[nodiscard]] ContinuationReport lift(const Vector& u0) const {
        ContinuationReport rep;
        rep.trace.push_back(initial_state(u0));
        double ds = opt_.ds_init;
        try {
            while (true) {
                const LiftState& cur = rep.trace.back();
                if (cur.s >= 1.0) {
                    rep.status = LiftStatus::Reached;
                    break;
                }
                if (rep.accepted_steps >= opt_.max_steps) {
                    rep.status = LiftStatus::StepUnderflow;
                    rep.message = "step budget exhausted";
                    break;
                }
                StepOutcome o = step(cur, ds);
                rep.rejected_steps += o.rejections;
                if (o.kind == StepOutcome::Kind::SingularEvent) {
                    const bool terminal = cur.s >= 1.0 - opt_.terminal_window;
                    rep.status = terminal ? LiftStatus::SingularTerminal : LiftStatus::SingularInterior;
                    rep.message = "lambda_1 reaches lambda_sing within ds_event of s = " + fmt_double(cur.s);
                    break;
                }
                if (o.kind == StepOutcome::Kind::Diverged) {
                    rep.status = LiftStatus::Diverged;
                    rep.message = o.message;
                    break;
                }
                if (o.state.flag_bits & flags::kCorrectionWarning) {
                    rep.warnings.push_back("correction did not reach tol_residual at s = " + fmt_double(o.state.s));
                }
                if (o.state.flag_bits & flags::kDegenerate) {
                    rep.warnings.push_back("degenerate eigenvalues above lambda_1 at s = " + fmt_double(o.state.s));
                }
                rep.trace.push_back(std::move(o.state));
                ++rep.accepted_steps;
                ds = o.next_step;
            }
        } catch (const Error& e) {
            rep.status = e.kind() == ErrorKind::StepUnderflow ? LiftStatus::StepUnderflow : LiftStatus::Diverged;
            rep.message = e.what();
        }
        finalize(rep);
        return rep;
    }

private:
    LiftState build_candidate(const LiftState& prev, double s_new, bool reaches_piece_end, Vector u) const {
        int piece = prev.piece;
        bool knot = false;
        if (reaches_piece_end && piece + 1 < path_.pieces()) {
            ++piece;
            knot = true;
        }
        const double s = s_new;
        if (opt_.correction) {
            const Vector target = path_.position(s, piece);
            // One Gauss-Newton sweep always runs so lambda_1 near the singular set is resolved
            // beyond tol_residual.
            CorrectionResult c = gauss_newton(map_, std::move(u), target, opt_.tol_residual,
                                              opt_.max_correction_iterations, opt_.lambda_sing, 1);
            if (!c.converged && !(c.residual < 10.0 * opt_.tol_residual)) {
                throw Error(ErrorKind::CorrectionFailed, "residual " + std::to_string(c.residual));
            }
            LiftState st = make_state(s, piece, std::move(c.u), &prev.spectrum);
            if (!c.converged) st.flag_bits |= flags::kCorrectionWarning;
            if (knot) st.flag_bits |= flags::kKnot;
            return checked_nonsingular(std::move(st));
        }
        LiftState st = make_state(s, piece, std::move(u), &prev.spectrum);
        if (knot) st.flag_bits |= flags::kKnot;
        return checked_nonsingular(std::move(st));
    }

    static LiftState checked_nonsingular(LiftState st) {
        if (st.diagnostics.singular) throw SingularGramianError("candidate state is singular", st.spectrum.lambdas);
        return st;
    }

    void finalize(ContinuationReport& rep) const {
        const LiftState& last = rep.trace.back();
        if (rep.status == LiftStatus::Reached && last.residual > opt_.tol_residual) {
            // Without correction the flow drifts; polish the endpoint once.
            CorrectionResult c = gauss_newton(map_, last.u, last.gamma, opt_.tol_residual,
                                              opt_.max_correction_iterations, opt_.lambda_sing);
            if (c.converged) {
                rep.trace.back() = make_state(last.s, last.piece, std::move(c.u), &last.spectrum);
            } else {
                rep.status = LiftStatus::Diverged;
                rep.message = "final residual above tol_residual";
            }
        }
        const LiftState& fin = rep.trace.back();
        rep.final_u = fin.u;
        rep.final_s = fin.s;
        rep.final_residual = fin.residual;

        const Eigen::Index n = map_.dim_codomain();
        for (const auto& st : rep.trace) {
            if (n > 1) rep.lambda0_measured = std::min(rep.lambda0_measured, st.spectrum.lambdas[1]);
        }
        rep.cbar = n > 1 ? (n - 1) * path_.max_speed() / std::sqrt(rep.lambda0_measured) : 0.0;
        for (std::size_t k = 0; k < rep.trace.size(); ++k) {
            const auto& st = rep.trace[k];
            if (k > 0) {
                const auto& pr = rep.trace[k - 1];
                rep.total_variation_norm_u += std::abs(st.norm_u - pr.norm_u);
                if (st.diagnostics.g && pr.diagnostics.g) {
                    rep.integral_abs_g += 0.5 * (st.s - pr.s) * (std::abs(*st.diagnostics.g) + std::abs(*pr.diagnostics.g));
                }
            }
            if (st.diagnostics.singular) continue;
            const double bound = std::abs(st.diagnostics.a[0]) / std::sqrt(st.spectrum.lambdas[0]) + rep.cbar;
            rep.bound_check_max = std::max(rep.bound_check_max, st.norm_du_ds - bound);
            const Vector image = map_.apply_jacobian(st.u, st.du_ds);
            rep.max_least_squares_defect = std::max(
                rep.max_least_squares_defect, (image - st.gamma_dot).norm() / (1.0 + st.gamma_dot.norm()));
        }
    }

    static std::string fmt_double(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    const MapOracle& map_;
    const TargetPath& path_;
    SolverOptions opt_;
};

/// Lifts `path` through `map` from `u0`.
[[nodiscard]] inline ContinuationReport lift(const MapOracle& map, const TargetPath& path, const Vector& u0,
                                             const SolverOptions& options = {}) {
    return PathLifter(map, path, options).lift(u0);
}

}  // namespace hlift
