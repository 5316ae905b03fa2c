#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta pair with standard step control.

#include "hlift/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace hlift::rk45 {

namespace tableau {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b_hat (fifth minus embedded fourth order weights)
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace tableau

struct StepResult {
    Vector y;      // fifth-order solution
    Vector error;  // local error estimate
    Vector k_end;  // derivative at the new point (FSAL)
};

/// One trial step. `rhs(t, y)` returns dy/dt; k1 = rhs(t, y).
template <class Rhs>
StepResult step(Rhs&& rhs, double t, const Vector& y, double h, const Vector& k1) {
    using namespace tableau;
    const Vector k2 = rhs(t + c2 * h, Vector(y + h * (a21 * k1)));
    const Vector k3 = rhs(t + c3 * h, Vector(y + h * (a31 * k1 + a32 * k2)));
    const Vector k4 = rhs(t + c4 * h, Vector(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const Vector k5 = rhs(t + c5 * h, Vector(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const Vector k6 = rhs(t + h, Vector(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    StepResult r;
    r.y = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    r.k_end = rhs(t + h, r.y);
    r.error = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * r.k_end);
    return r;
}

/// RMS of err_k / (atol + rtol max(|y0_k|, |y1_k|)); a step is acceptable when <= 1.
[[nodiscard]] inline double error_norm(const Vector& err, const Vector& y0, const Vector& y1, double rtol,
                                       double atol) {
    if (err.size() == 0) return 0.0;
    const Eigen::ArrayXd scale = atol + rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array();
    return std::sqrt((err.array() / scale).square().mean());
}

/// Step-size factor from an error norm, clamped to [0.2, 5].
[[nodiscard]] inline double step_factor(double err) {
    if (err == 0.0) return 5.0;
    return std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
}

struct Tolerances {
    double rtol = 1e-12;
    double atol = 1e-12;
    double h_min = 1e-14;
    int max_steps = 1'000'000;
};

/// Integrates from t0 to t1 (either direction) and returns y(t1). `on_step(t, y, dydt)` sees every accepted point.
template <class Rhs, class Observer>
Vector integrate(Rhs&& rhs, double t0, double t1, Vector y, const Tolerances& tol, Observer&& on_step,
                 double h_init = 0.0) {
    const double span = t1 - t0;
    if (span == 0.0) return y;
    const double dir = span > 0 ? 1.0 : -1.0;
    double h = h_init > 0.0 ? dir * std::min(h_init, std::abs(span)) : span;
    double t = t0;
    Vector k = rhs(t, y);
    for (int n = 0; n < tol.max_steps; ++n) {
        if (dir * (t + h - t1) > 0.0) h = t1 - t;
        StepResult r = step(rhs, t, y, h, k);
        const double err = r.y.allFinite() ? error_norm(r.error, y, r.y, tol.rtol, tol.atol)
                                           : std::numeric_limits<double>::infinity();
        if (err <= 1.0) {
            t = (std::abs(t1 - (t + h)) <= 1e-15 * std::max(1.0, std::abs(t1))) ? t1 : t + h;
            y = std::move(r.y);
            k = std::move(r.k_end);
            on_step(t, y, k);
            if (t == t1) return y;
            h *= step_factor(err);
        } else {
            h *= std::isfinite(err) ? std::max(0.2, step_factor(err)) : 0.25;
        }
        if (std::abs(h) < tol.h_min * std::max(1.0, std::abs(t))) {
            throw TrajectoryBlowupError("step size underflow at t = " + std::to_string(t), t);
        }
    }
    throw TrajectoryBlowupError("step budget exhausted at t = " + std::to_string(t), t);
}

template <class Rhs>
Vector integrate(Rhs&& rhs, double t0, double t1, Vector y, const Tolerances& tol) {
    return integrate(std::forward<Rhs>(rhs), t0, t1, std::move(y), tol, [](double, const Vector&, const Vector&) {});
}

}  // namespace hlift::rk45
