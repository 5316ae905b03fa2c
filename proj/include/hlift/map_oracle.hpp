#pragma once

// Differentiable maps F: X -> R^n over a weighted coordinate space X = (R^N, <.,.>_W).
//
// Every oracle exposes F, the coordinate Jacobian J, dF (J v), the adjoint
// dF* z = W^{-1} J^T z (the switching function phi_z), and the z-contracted
// second differential z*d^2F(v, w) = <d(phi_z)(v), w>_X.

#include "hlift/core.hpp"

#include <memory>
#include <string>

namespace hlift {

inline constexpr double kFirstDifferenceStep = 1e-5;
inline constexpr double kSecondDifferenceStep = 1e-4;

class MapOracle {
public:
    MapOracle(Eigen::Index dim_domain, Eigen::Index dim_codomain, Vector weights)
        : dim_domain_(dim_domain), dim_codomain_(dim_codomain), weights_(std::move(weights)) {
        require(dim_codomain_ >= 1, ErrorKind::Configuration, "codomain dimension must be >= 1");
        require(dim_codomain_ <= dim_domain_, ErrorKind::Configuration,
                "codomain dimension must not exceed domain dimension");
        require_dim(weights_.size(), dim_domain_, "weights");
        for (Eigen::Index k = 0; k < weights_.size(); ++k) {
            require(std::isfinite(weights_[k]) && weights_[k] > 0.0, ErrorKind::Configuration,
                    "weights must be strictly positive (weight " + std::to_string(k) + ")");
        }
    }
    virtual ~MapOracle() = default;

    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual bool has_analytic_second() const { return false; }

    [[nodiscard]] Eigen::Index dim_domain() const noexcept { return dim_domain_; }
    [[nodiscard]] Eigen::Index dim_codomain() const noexcept { return dim_codomain_; }
    [[nodiscard]] const Vector& weights() const noexcept { return weights_; }

    [[nodiscard]] double inner(const Vector& a, const Vector& b) const {
        return (weights_.array() * a.array() * b.array()).sum();
    }
    [[nodiscard]] double norm(const Vector& a) const { return std::sqrt(inner(a, a)); }

    [[nodiscard]] Vector eval(const Vector& u) const {
        require_dim(u.size(), dim_domain_, "eval: u");
        return do_eval(u);
    }

    /// Coordinate Jacobian, n x N.
    [[nodiscard]] Matrix jacobian(const Vector& u) const {
        require_dim(u.size(), dim_domain_, "jacobian: u");
        return do_jacobian(u);
    }

    [[nodiscard]] Vector apply_jacobian(const Vector& u, const Vector& v) const {
        require_dim(v.size(), dim_domain_, "apply_jacobian: v");
        return jacobian(u) * v;
    }

    [[nodiscard]] Vector apply_adjoint(const Vector& u, const Vector& z) const {
        require_dim(z.size(), dim_codomain_, "apply_adjoint: z");
        return adjoint_from_jacobian(jacobian(u), z);
    }

    [[nodiscard]] Vector adjoint_from_jacobian(const Matrix& jac, const Vector& z) const {
        return (jac.transpose() * z).cwiseQuotient(weights_);
    }

    /// d(phi_z)|_u(v) as an element of X, so that z*d^2F(v, w) = <result, w>_X.
    [[nodiscard]] Vector second_directional(const Vector& u, const Vector& z, const Vector& v) const {
        require_dim(u.size(), dim_domain_, "second_directional: u");
        require_dim(z.size(), dim_codomain_, "second_directional: z");
        require_dim(v.size(), dim_domain_, "second_directional: v");
        if (has_analytic_second()) return do_second_directional(u, z, v);
        return fd_second_directional(u, z, v);
    }

    /// Central difference of s -> phi_z(u + s v) at s = 0, step 1e-4 (1 + |u|_X) along v/|v|_X.
    [[nodiscard]] Vector fd_second_directional(const Vector& u, const Vector& z, const Vector& v) const {
        const double vn = norm(v);
        if (vn == 0.0) return Vector::Zero(dim_domain_);
        const Vector dir = v / vn;
        const double eps = kSecondDifferenceStep * (1.0 + norm(u));
        const Vector plus = apply_adjoint(Vector(u + eps * dir), z);
        const Vector minus = apply_adjoint(Vector(u - eps * dir), z);
        return (plus - minus) * (vn / (2.0 * eps));
    }

    /// z*d^2F|_u(v, w). The finite-difference route is symmetrized over (v, w).
    [[nodiscard]] double bilinear_second(const Vector& u, const Vector& z, const Vector& v, const Vector& w) const {
        require_dim(w.size(), dim_domain_, "bilinear_second: w");
        if (has_analytic_second()) return inner(do_second_directional(u, z, v), w);
        return 0.5 * (inner(second_directional(u, z, v), w) + inner(second_directional(u, z, w), v));
    }

protected:
    virtual Vector do_eval(const Vector& u) const = 0;
    virtual Matrix do_jacobian(const Vector& u) const = 0;
    virtual Vector do_second_directional(const Vector& /*u*/, const Vector& /*z*/, const Vector& /*v*/) const {
        throw Error(ErrorKind::Configuration, name() + " has no analytic second differential");
    }

private:
    Eigen::Index dim_domain_;
    Eigen::Index dim_codomain_;
    Vector weights_;
};

using MapPtr = std::shared_ptr<const MapOracle>;

/// Column k is the central difference of F along coordinate k, step 1e-5 (1 + |u|_X).
inline Matrix fd_jacobian(const MapOracle& map, const Vector& u) {
    const double eps = kFirstDifferenceStep * (1.0 + map.norm(u));
    Matrix jac(map.dim_codomain(), map.dim_domain());
    Vector up = u;
    Vector um = u;
    for (Eigen::Index k = 0; k < map.dim_domain(); ++k) {
        up[k] = u[k] + eps;
        um[k] = u[k] - eps;
        jac.col(k) = (map.eval(up) - map.eval(um)) / (2.0 * eps);
        up[k] = u[k];
        um[k] = u[k];
    }
    return jac;
}

// ---------------------------------------------------------------------------
// Builtin maps
// ---------------------------------------------------------------------------

/// F(u) = A u.
class LinearMap final : public MapOracle {
public:
    explicit LinearMap(Matrix a) : LinearMap(a, Vector::Ones(a.cols())) {}
    LinearMap(Matrix a, Vector weights)
        : MapOracle(a.cols(), a.rows(), std::move(weights)), a_(std::move(a)) {}

    [[nodiscard]] std::string name() const override { return "linear"; }
    [[nodiscard]] bool has_analytic_second() const override { return true; }
    [[nodiscard]] const Matrix& matrix() const noexcept { return a_; }

protected:
    Vector do_eval(const Vector& u) const override { return a_ * u; }
    Matrix do_jacobian(const Vector& /*u*/) const override { return a_; }
    Vector do_second_directional(const Vector& /*u*/, const Vector& /*z*/, const Vector& /*v*/) const override {
        return Vector::Zero(dim_domain());
    }

private:
    Matrix a_;
};

/// F(u) = |u|_X^2, a map to R with the single critical value 0.
class SphereMap final : public MapOracle {
public:
    explicit SphereMap(Eigen::Index dim) : SphereMap(Vector::Ones(dim)) {}
    explicit SphereMap(Vector weights) : MapOracle(weights.size(), 1, weights) {}

    [[nodiscard]] std::string name() const override { return "sphere"; }
    [[nodiscard]] bool has_analytic_second() const override { return true; }

protected:
    Vector do_eval(const Vector& u) const override { return Vector::Constant(1, inner(u, u)); }
    Matrix do_jacobian(const Vector& u) const override {
        return (2.0 * weights().cwiseProduct(u)).transpose();
    }
    // phi_z(u) = 2 z u, so d(phi_z)(v) = 2 z v.
    Vector do_second_directional(const Vector& /*u*/, const Vector& z, const Vector& v) const override {
        return 2.0 * z[0] * v;
    }
};

/// F(u) = (u_1^2, u_2): a fold along u_1 = 0 with all curvature in the first component.
class FoldMap final : public MapOracle {
public:
    FoldMap() : FoldMap(Vector::Ones(2)) {}
    explicit FoldMap(Vector weights) : MapOracle(2, 2, std::move(weights)) {}

    [[nodiscard]] std::string name() const override { return "fold"; }
    [[nodiscard]] bool has_analytic_second() const override { return true; }

protected:
    Vector do_eval(const Vector& u) const override { return Vector{{u[0] * u[0], u[1]}}; }
    Matrix do_jacobian(const Vector& u) const override {
        Matrix j = Matrix::Zero(2, 2);
        j(0, 0) = 2.0 * u[0];
        j(1, 1) = 1.0;
        return j;
    }
    Vector do_second_directional(const Vector& /*u*/, const Vector& z, const Vector& v) const override {
        Vector out = Vector::Zero(2);
        out[0] = 2.0 * z[0] * v[0] / weights()[0];
        return out;
    }
};

}  // namespace hlift
