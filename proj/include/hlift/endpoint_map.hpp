#pragma once

// Endpoint maps of control systems x' = f(x, u) over piecewise-constant controls.
//
// Controls live on a uniform grid of P segments over [0, T]; the flattened control
// vector stores segment k, channel j at index k*m + j, and every coordinate carries
// the quadrature weight T/P so that the weighted inner product is the L2 product.

#include "hlift/map_oracle.hpp"
#include "hlift/rk45.hpp"

#include <memory>
#include <string>
#include <vector>

namespace hlift {

class ControlSystem {
public:
    virtual ~ControlSystem() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual Eigen::Index state_dim() const = 0;
    [[nodiscard]] virtual Eigen::Index control_dim() const = 0;
    [[nodiscard]] virtual Vector f(const Vector& x, const Vector& u) const = 0;
    [[nodiscard]] virtual Matrix f_x(const Vector& x, const Vector& u) const = 0;
    [[nodiscard]] virtual Matrix f_u(const Vector& x, const Vector& u) const = 0;
};

using SystemPtr = std::shared_ptr<const ControlSystem>;

/// x' = u.
class SingleIntegrator final : public ControlSystem {
public:
    explicit SingleIntegrator(Eigen::Index dim = 1) : dim_(dim) {
        require(dim >= 1, ErrorKind::Configuration, "single integrator dimension must be >= 1");
    }
    [[nodiscard]] std::string name() const override { return "single_integrator"; }
    [[nodiscard]] Eigen::Index state_dim() const override { return dim_; }
    [[nodiscard]] Eigen::Index control_dim() const override { return dim_; }
    [[nodiscard]] Vector f(const Vector& /*x*/, const Vector& u) const override { return u; }
    [[nodiscard]] Matrix f_x(const Vector&, const Vector&) const override { return Matrix::Zero(dim_, dim_); }
    [[nodiscard]] Matrix f_u(const Vector&, const Vector&) const override { return Matrix::Identity(dim_, dim_); }

private:
    Eigen::Index dim_;
};

/// x' = A x + B u.
class LtiSystem final : public ControlSystem {
public:
    LtiSystem(Matrix a, Matrix b) : a_(std::move(a)), b_(std::move(b)) {
        require(a_.rows() == a_.cols() && a_.rows() >= 1, ErrorKind::Configuration, "lti: A must be square");
        require(b_.rows() == a_.rows() && b_.cols() >= 1, ErrorKind::Configuration, "lti: B must have rows(A) rows");
    }
    [[nodiscard]] std::string name() const override { return "lti"; }
    [[nodiscard]] Eigen::Index state_dim() const override { return a_.rows(); }
    [[nodiscard]] Eigen::Index control_dim() const override { return b_.cols(); }
    [[nodiscard]] Vector f(const Vector& x, const Vector& u) const override { return a_ * x + b_ * u; }
    [[nodiscard]] Matrix f_x(const Vector&, const Vector&) const override { return a_; }
    [[nodiscard]] Matrix f_u(const Vector&, const Vector&) const override { return b_; }

private:
    Matrix a_;
    Matrix b_;
};

/// Brockett's nonholonomic integrator: x1' = u1, x2' = u2, x3' = x1 u2.
class BrockettIntegrator final : public ControlSystem {
public:
    [[nodiscard]] std::string name() const override { return "brockett"; }
    [[nodiscard]] Eigen::Index state_dim() const override { return 3; }
    [[nodiscard]] Eigen::Index control_dim() const override { return 2; }
    [[nodiscard]] Vector f(const Vector& x, const Vector& u) const override {
        return Vector{{u[0], u[1], x[0] * u[1]}};
    }
    [[nodiscard]] Matrix f_x(const Vector& /*x*/, const Vector& u) const override {
        Matrix m = Matrix::Zero(3, 3);
        m(2, 0) = u[1];
        return m;
    }
    [[nodiscard]] Matrix f_u(const Vector& x, const Vector& /*u*/) const override {
        Matrix m = Matrix::Zero(3, 2);
        m(0, 0) = 1.0;
        m(1, 1) = 1.0;
        m(2, 1) = x[0];
        return m;
    }
};

/// Kinematic unicycle: x' = u1 cos(theta), y' = u1 sin(theta), theta' = u2.
class Unicycle final : public ControlSystem {
public:
    [[nodiscard]] std::string name() const override { return "unicycle"; }
    [[nodiscard]] Eigen::Index state_dim() const override { return 3; }
    [[nodiscard]] Eigen::Index control_dim() const override { return 2; }
    [[nodiscard]] Vector f(const Vector& x, const Vector& u) const override {
        return Vector{{u[0] * std::cos(x[2]), u[0] * std::sin(x[2]), u[1]}};
    }
    [[nodiscard]] Matrix f_x(const Vector& x, const Vector& u) const override {
        Matrix m = Matrix::Zero(3, 3);
        m(0, 2) = -u[0] * std::sin(x[2]);
        m(1, 2) = u[0] * std::cos(x[2]);
        return m;
    }
    [[nodiscard]] Matrix f_u(const Vector& x, const Vector& /*u*/) const override {
        Matrix m = Matrix::Zero(3, 2);
        m(0, 0) = std::cos(x[2]);
        m(1, 0) = std::sin(x[2]);
        m(2, 1) = 1.0;
        return m;
    }
};

struct ControlGrid {
    double horizon = 1.0;
    int segments = 1;
    Eigen::Index control_dim = 1;

    [[nodiscard]] Eigen::Index size() const { return segments * control_dim; }
    [[nodiscard]] double segment_length() const { return horizon / segments; }
    [[nodiscard]] Vector weights() const { return Vector::Constant(size(), segment_length()); }
    [[nodiscard]] Vector segment(const Vector& controls, int k) const {
        return controls.segment(k * control_dim, control_dim);
    }
    /// Flattened controls equal to `value` on every segment.
    [[nodiscard]] Vector constant(const Vector& value) const {
        require_dim(value.size(), control_dim, "constant control");
        return value.replicate(segments, 1);
    }
};

/// States on the fine grid: node q of segment k sits at t = (k + q / nodes) * T / P.
struct Trajectory {
    int nodes_per_segment = 8;
    std::vector<double> t;
    std::vector<Vector> x;

    [[nodiscard]] const Vector& terminal() const { return x.back(); }
    [[nodiscard]] std::size_t node(int segment, int q) const {
        return static_cast<std::size_t>(segment * nodes_per_segment + q);
    }
};

inline void validate_grid(const ControlGrid& grid, int nodes_per_segment) {
    require(grid.horizon > 0.0 && std::isfinite(grid.horizon), ErrorKind::Configuration, "horizon T must be > 0");
    require(grid.segments >= 1, ErrorKind::Configuration, "segments must be >= 1");
    require(nodes_per_segment >= 2 && nodes_per_segment % 2 == 0, ErrorKind::Configuration,
            "nodes_per_segment must be an even integer >= 2");
}

inline rk45::Tolerances trajectory_tolerances() {
    rk45::Tolerances tol;
    tol.rtol = 1e-12;
    tol.atol = 1e-13;
    tol.h_min = 1e-13;
    tol.max_steps = 200'000;
    return tol;
}

[[nodiscard]] inline Trajectory integrate(const ControlSystem& system, const Vector& x0, const Vector& controls,
                                          const ControlGrid& grid, int nodes_per_segment = 8) {
    validate_grid(grid, nodes_per_segment);
    require_dim(x0.size(), system.state_dim(), "integrate: x0");
    require_dim(controls.size(), grid.size(), "integrate: controls");
    Trajectory traj;
    traj.nodes_per_segment = nodes_per_segment;
    const double h = grid.segment_length();
    const double sub = h / nodes_per_segment;
    const auto tol = trajectory_tolerances();
    Vector x = x0;
    traj.t.push_back(0.0);
    traj.x.push_back(x);
    for (int k = 0; k < grid.segments; ++k) {
        const Vector uk = grid.segment(controls, k);
        auto rhs = [&](double, const Vector& state) { return system.f(state, uk); };
        for (int q = 0; q < nodes_per_segment; ++q) {
            const double ta = k * h + q * sub;
            const double tb = (q + 1 == nodes_per_segment) ? (k + 1) * h : ta + sub;
            x = rk45::integrate(rhs, ta, tb, x, tol);
            if (!x.allFinite()) throw TrajectoryBlowupError("non-finite state", tb);
            traj.t.push_back(tb);
            traj.x.push_back(x);
        }
    }
    return traj;
}

/// First-variation data: kernel[k][q] = M(T) M(t)^{-1} f_u(x(t), u_k) at node q of segment k.
struct Linearization {
    Trajectory trajectory;
    std::vector<std::vector<Matrix>> kernel;
    Matrix jacobian;  // n x (P m), column block k is the Simpson integral of the kernel over segment k
};

class EndpointProblem final : public MapOracle {
public:
    EndpointProblem(SystemPtr system, Vector x0, ControlGrid grid, int nodes_per_segment = 8)
        : MapOracle(checked_grid(system, grid, nodes_per_segment).size(), system->state_dim(), grid.weights()),
          system_(std::move(system)),
          x0_(std::move(x0)),
          grid_(grid),
          nodes_(nodes_per_segment) {
        require_dim(x0_.size(), system_->state_dim(), "endpoint: x0");
    }

    [[nodiscard]] std::string name() const override { return "endpoint:" + system_->name(); }
    [[nodiscard]] const ControlSystem& system() const noexcept { return *system_; }
    [[nodiscard]] const SystemPtr& system_ptr() const noexcept { return system_; }
    [[nodiscard]] const Vector& x0() const noexcept { return x0_; }
    [[nodiscard]] const ControlGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] int nodes_per_segment() const noexcept { return nodes_; }

    [[nodiscard]] Vector endpoint(const Vector& u) const { return eval(u); }

    [[nodiscard]] Linearization linearize(const Vector& u) const {
        require_dim(u.size(), dim_domain(), "linearize: u");
        const Eigen::Index n = system_->state_dim();
        const Eigen::Index m = system_->control_dim();
        Linearization lin;
        lin.trajectory = integrate(*system_, x0_, u, grid_, nodes_);
        const Trajectory& traj = lin.trajectory;
        lin.kernel.assign(static_cast<std::size_t>(grid_.segments), std::vector<Matrix>(static_cast<std::size_t>(nodes_ + 1)));
        lin.jacobian = Matrix::Zero(n, dim_domain());

        // Backward costate sweep: Lambda' = -f_x^T Lambda, Lambda(T) = I, so that
        // Lambda(t)^T = M(T) M(t)^{-1}. The state is restarted from the forward node on
        // every fine interval and integrated backward alongside Lambda.
        const auto tol = trajectory_tolerances();
        Matrix lambda = Matrix::Identity(n, n);
        const double sub = grid_.segment_length() / nodes_;
        for (int k = grid_.segments - 1; k >= 0; --k) {
            const Vector uk = grid_.segment(u, k);
            auto rhs = [&](double, const Vector& y) {
                const Vector x = y.head(n);
                const Eigen::Map<const Matrix> lam(y.data() + n, n, n);
                Vector dy(n + n * n);
                dy.head(n) = system_->f(x, uk);
                Eigen::Map<Matrix>(dy.data() + n, n, n) = -system_->f_x(x, uk).transpose() * lam;
                return dy;
            };
            auto& kern = lin.kernel[static_cast<std::size_t>(k)];
            kern[static_cast<std::size_t>(nodes_)] =
                lambda.transpose() * system_->f_u(traj.x[traj.node(k, nodes_)], uk);
            for (int q = nodes_; q > 0; --q) {
                Vector y(n + n * n);
                y.head(n) = traj.x[traj.node(k, q)];
                Eigen::Map<Matrix>(y.data() + n, n, n) = lambda;
                y = rk45::integrate(rhs, traj.t[traj.node(k, q)], traj.t[traj.node(k, q - 1)], y, tol);
                lambda = Eigen::Map<const Matrix>(y.data() + n, n, n);
                kern[static_cast<std::size_t>(q - 1)] =
                    lambda.transpose() * system_->f_u(traj.x[traj.node(k, q - 1)], uk);
            }
            Matrix block = Matrix::Zero(n, m);
            for (int q = 0; q <= nodes_; ++q) {
                const double wq = (q == 0 || q == nodes_) ? 1.0 : (q % 2 == 1 ? 4.0 : 2.0);
                block += wq * kern[static_cast<std::size_t>(q)];
            }
            lin.jacobian.block(0, k * m, n, m) = block * (sub / 3.0);
        }
        return lin;
    }

    /// z*d^2E|_u(v, w) by central differences of the switching function, symmetrized.
    [[nodiscard]] double second_variation(const Vector& u, const Vector& z, const Vector& v, const Vector& w) const {
        return bilinear_second(u, z, v, w);
    }

protected:
    Vector do_eval(const Vector& u) const override { return integrate(*system_, x0_, u, grid_, nodes_).terminal(); }
    Matrix do_jacobian(const Vector& u) const override { return linearize(u).jacobian; }

private:
    static const ControlGrid& checked_grid(const SystemPtr& system, const ControlGrid& grid, int nodes) {
        require(system != nullptr, ErrorKind::Configuration, "endpoint: missing control system");
        require(grid.control_dim == system->control_dim(), ErrorKind::Configuration,
                "endpoint: grid control dimension does not match the system");
        validate_grid(grid, nodes);
        return grid;
    }

    SystemPtr system_;
    Vector x0_;
    ControlGrid grid_;
    int nodes_;
};

}  // namespace hlift
