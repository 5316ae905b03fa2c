#pragma once

// Gramian G(u) = dF dF*, its ordered sign-continuous eigendecomposition, and
// the spectral quantities that drive the least eigenvalue along a lift.

#include "hlift/map_oracle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <optional>

namespace hlift {

inline constexpr double kSingularFactor = 1e-10;
inline constexpr double kSimplicityFactor = 1e-8;
inline constexpr double kDegeneracyFactor = 1e-12;

struct GramianSpectrum {
    Vector lambdas;  // ascending
    Matrix vectors;  // column i is the unit eigenvector z_{i+1}
    double gap = 0.0;
    bool degenerate = false;  // a tie among lambda_2..lambda_n

    [[nodiscard]] Eigen::Index size() const noexcept { return lambdas.size(); }
    [[nodiscard]] double lambda_min() const { return lambdas[0]; }
    [[nodiscard]] double lambda_max() const { return lambdas[lambdas.size() - 1]; }
    [[nodiscard]] Vector z(Eigen::Index i) const { return vectors.col(i); }
};

/// Threshold below which lambda_1 counts as having reached the singular set.
[[nodiscard]] inline double singular_threshold(const GramianSpectrum& spec, double factor = kSingularFactor) {
    return factor * std::max(1.0, spec.lambda_max());
}

[[nodiscard]] inline Matrix gramian_from_jacobian(const MapOracle& map, const Matrix& jac) {
    const Matrix scaled = jac * map.weights().cwiseInverse().asDiagonal();
    Matrix g = scaled * jac.transpose();
    return 0.5 * (g + g.transpose());
}

[[nodiscard]] inline Matrix gramian(const MapOracle& map, const Vector& u) {
    return gramian_from_jacobian(map, map.jacobian(u));
}

[[nodiscard]] inline GramianSpectrum spectral_decompose(const Matrix& g, const GramianSpectrum* prev = nullptr) {
    require(g.rows() == g.cols() && g.rows() >= 1, ErrorKind::Configuration, "Gramian must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(g);
    if (solver.info() != Eigen::Success || !solver.eigenvalues().allFinite()) {
        throw NumericalError("symmetric eigensolver failed", g);
    }
    GramianSpectrum spec;
    spec.lambdas = solver.eigenvalues();
    spec.vectors = solver.eigenvectors();
    const Eigen::Index n = spec.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        auto col = spec.vectors.col(i);
        col.normalize();
        double sign = 1.0;
        if (prev != nullptr && prev->size() == n) {
            sign = col.dot(prev->vectors.col(i)) < 0.0 ? -1.0 : 1.0;
        } else {
            Eigen::Index k = 0;
            col.cwiseAbs().maxCoeff(&k);
            sign = col[k] < 0.0 ? -1.0 : 1.0;
        }
        col *= sign;
    }
    spec.gap = n > 1 ? spec.lambdas[1] - spec.lambdas[0] : std::numeric_limits<double>::infinity();
    const double tie = kDegeneracyFactor * std::max(1.0, spec.lambda_max());
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        if (spec.lambdas[i + 1] - spec.lambdas[i] <= tie) spec.degenerate = true;
    }
    return spec;
}

struct AssumptionAReport {
    bool pass = true;
    double worst_margin = std::numeric_limits<double>::infinity();  // min_{i>=2} lambda_i - lambda0
    double simplicity_margin = std::numeric_limits<double>::infinity();  // lambda_2 - lambda_1
    int failing_index = 0;  // 1-based index of the first eigenvalue below lambda0, 0 if none
};

/// Checks lambda_i >= lambda0 for every i >= 2; lambda_1 is exempt.
[[nodiscard]] inline AssumptionAReport gap_check(const GramianSpectrum& spec, double lambda0) {
    require(lambda0 > 0.0, ErrorKind::Configuration, "lambda0 must be positive");
    AssumptionAReport rep;
    for (Eigen::Index i = 1; i < spec.size(); ++i) {
        const double margin = spec.lambdas[i] - lambda0;
        rep.worst_margin = std::min(rep.worst_margin, margin);
        if (margin < 0.0 && rep.failing_index == 0) {
            rep.failing_index = static_cast<int>(i + 1);
            rep.pass = false;
        }
    }
    rep.simplicity_margin = spec.gap;
    return rep;
}

/// a_i = <gamma_dot, z_i>.
[[nodiscard]] inline Vector coefficients(const Vector& gamma_dot, const GramianSpectrum& spec) {
    require_dim(gamma_dot.size(), spec.size(), "coefficients: gamma_dot");
    return spec.vectors.transpose() * gamma_dot;
}

/// du/ds = sum_i a_i phi_{z_i} / lambda_i, the eigenbasis form of dF* G^{-1} gamma_dot.
[[nodiscard]] inline Vector spectral_velocity(const MapOracle& map, const Matrix& jac, const GramianSpectrum& spec,
                                              const Vector& a) {
    Vector c = Vector::Zero(spec.size());
    for (Eigen::Index i = 0; i < spec.size(); ++i) c += (a[i] / spec.lambdas[i]) * spec.vectors.col(i);
    return map.adjoint_from_jacobian(jac, c);
}

struct SpectralDiagnostics {
    Vector a;
    Matrix v;  // column i is v_{i+1} = phi_{z_{i+1}} / sqrt(lambda_{i+1}); zero when lambda_{i+1} is singular
    double h = std::numeric_limits<double>::quiet_NaN();
    double f = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> g;
    double dlambda1_ds = std::numeric_limits<double>::quiet_NaN();
    bool singular = false;
    double v_norm_error = 0.0;  // max_i | |v_i|_X - 1 | over nonsingular i
};

[[nodiscard]] inline SpectralDiagnostics diagnostics(const MapOracle& map, const Vector& u, const Matrix& jac,
                                                     const GramianSpectrum& spec, const Vector& gamma_dot,
                                                     double singular_factor = kSingularFactor) {
    const Eigen::Index n = spec.size();
    const double lsing = singular_threshold(spec, singular_factor);
    if (n > 1 && spec.lambdas[1] <= lsing) {
        throw Error(ErrorKind::AssumptionAViolation, "lambda_2 <= lambda_sing, corank exceeds one");
    }
    SpectralDiagnostics d;
    d.a = coefficients(gamma_dot, spec);
    d.v = Matrix::Zero(map.dim_domain(), n);
    d.singular = spec.lambdas[0] < lsing;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i == 0 && d.singular) continue;
        const double sq = std::sqrt(spec.lambdas[i]);
        d.v.col(i) = map.adjoint_from_jacobian(jac, spec.vectors.col(i)) / sq;
        d.v_norm_error = std::max(d.v_norm_error, std::abs(map.norm(d.v.col(i)) - 1.0));
    }
    if (d.singular) return d;

    const double sqrt_l1 = std::sqrt(spec.lambdas[0]);
    const Vector v1 = d.v.col(0);
    // d(phi_{z1})(v1); contracting with v_i gives z1*d^2F(v1, v_i) = z1*d^2F(v_i, v1).
    const Vector dphi = map.second_directional(u, spec.vectors.col(0), v1);
    d.h = map.inner(dphi, v1);
    d.f = 0.0;
    for (Eigen::Index i = 1; i < n; ++i) {
        d.f += d.a[i] / std::sqrt(spec.lambdas[i]) * map.inner(dphi, d.v.col(i));
    }
    d.g = d.a[0] / sqrt_l1;
    d.dlambda1_ds = 2.0 * d.a[0] * d.h + 2.0 * d.f * sqrt_l1;
    return d;
}

[[nodiscard]] inline SpectralDiagnostics diagnostics(const MapOracle& map, const Vector& u, const GramianSpectrum& spec,
                                                     const Vector& gamma_dot,
                                                     double singular_factor = kSingularFactor) {
    return diagnostics(map, u, map.jacobian(u), spec, gamma_dot, singular_factor);
}

/// dG|_u(du) applied to z: component k is e_k*d^2F(phi_z, du) + z*d^2F(phi_{e_k}, du).
[[nodiscard]] inline Vector gramian_differential_apply(const MapOracle& map, const Vector& u, const Matrix& jac,
                                                       const Vector& du, const Vector& z) {
    const Eigen::Index n = map.dim_codomain();
    const Vector phi_z = map.adjoint_from_jacobian(jac, z);
    Vector out(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Vector ek = Vector::Unit(n, k);
        const Vector phi_k = map.adjoint_from_jacobian(jac, ek);
        out[k] = map.bilinear_second(u, ek, phi_z, du) + map.bilinear_second(u, z, phi_k, du);
    }
    return out;
}

/// dz_1/ds along the PLE through u: -(G - lambda_1 I)^+ dG z_1, the pseudo-inverse being the reduced
/// resolvent sum_{i>=2} P_i / (lambda_i - lambda_1). The sign follows from differentiating G z_1 = lambda_1 z_1.
[[nodiscard]] inline Vector z1_derivative(const MapOracle& map, const Vector& u, const GramianSpectrum& spec,
                                          const Vector& gamma_dot) {
    const Eigen::Index n = spec.size();
    if (n == 1) return Vector::Zero(1);
    if (spec.gap < kSimplicityFactor * std::max(1.0, spec.lambda_max())) {
        throw Error(ErrorKind::SimplicityLoss, "lambda_1 is not simple: gap " + std::to_string(spec.gap));
    }
    const Matrix jac = map.jacobian(u);
    const Vector du = spectral_velocity(map, jac, spec, coefficients(gamma_dot, spec));
    const Vector z1 = spec.vectors.col(0);
    const Vector dgz = gramian_differential_apply(map, u, jac, du, z1);
    Vector out = Vector::Zero(n);
    for (Eigen::Index i = 1; i < n; ++i) {
        const Vector zi = spec.vectors.col(i);
        out -= zi * (zi.dot(dgz) / (spec.lambdas[i] - spec.lambdas[0]));
    }
    return out;
}

}  // namespace hlift
