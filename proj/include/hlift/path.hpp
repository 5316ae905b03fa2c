#pragma once

// Target curves gamma: [0, 1] -> R^n to be lifted.

#include "hlift/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace hlift {

class TargetPath {
public:
    using Curve = std::function<Vector(double)>;

    /// gamma(s) = (1 - s) start + s end.
    static TargetPath line(const Vector& start, const Vector& end) {
        require_dim(end.size(), start.size(), "line path: end");
        return polyline({start, end});
    }

    /// Uniformly parameterized polyline through `points`; C2 fails at the interior knots.
    static TargetPath polyline(std::vector<Vector> points) {
        require(points.size() >= 2, ErrorKind::Configuration, "polyline needs at least two points");
        for (const auto& p : points) require_dim(p.size(), points.front().size(), "polyline point");
        TargetPath path;
        path.kind_ = points.size() == 2 ? Kind::Line : Kind::Polyline;
        path.dim_ = points.front().size();
        path.points_ = std::move(points);
        return path;
    }

    /// A C2 curve given with its first two derivatives.
    static TargetPath analytic(Eigen::Index dim, Curve position, Curve velocity, Curve acceleration) {
        TargetPath path;
        path.kind_ = Kind::Analytic;
        path.dim_ = dim;
        path.position_ = std::move(position);
        path.velocity_ = std::move(velocity);
        path.acceleration_ = std::move(acceleration);
        return path;
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
    [[nodiscard]] bool is_polyline() const noexcept { return kind_ == Kind::Polyline; }
    [[nodiscard]] const char* kind_name() const noexcept {
        switch (kind_) {
            case Kind::Line: return "line";
            case Kind::Polyline: return "polyline";
            case Kind::Analytic: return "analytic";
        }
        return "unknown";
    }

    [[nodiscard]] int pieces() const {
        return kind_ == Kind::Analytic ? 1 : static_cast<int>(points_.size()) - 1;
    }
    [[nodiscard]] double piece_start(int j) const { return static_cast<double>(j) / pieces(); }
    [[nodiscard]] double piece_end(int j) const { return j + 1 == pieces() ? 1.0 : static_cast<double>(j + 1) / pieces(); }
    [[nodiscard]] int piece_at(double s) const {
        const int p = pieces();
        const int j = static_cast<int>(std::floor(s * p));
        return std::clamp(j, 0, p - 1);
    }

    [[nodiscard]] Vector position(double s) const { return position(s, piece_at(s)); }
    [[nodiscard]] Vector velocity(double s) const { return velocity(s, piece_at(s)); }
    [[nodiscard]] Vector acceleration(double s) const { return acceleration(s, piece_at(s)); }

    /// Evaluation on piece j, extended linearly past its ends.
    [[nodiscard]] Vector position(double s, int j) const {
        if (kind_ == Kind::Analytic) return position_(s);
        const double local = (s - piece_start(j)) * pieces();
        return points_[j] + local * (points_[j + 1] - points_[j]);
    }
    [[nodiscard]] Vector velocity(double s, int j) const {
        if (kind_ == Kind::Analytic) return velocity_(s);
        return (points_[j + 1] - points_[j]) * static_cast<double>(pieces());
    }
    [[nodiscard]] Vector acceleration(double s, int /*j*/) const {
        if (kind_ == Kind::Analytic) return acceleration_(s);
        return Vector::Zero(dim_);
    }

    /// max_s |gamma_dot(s)|; exact for polylines, sampled on 1001 points otherwise.
    [[nodiscard]] double max_speed() const {
        double best = 0.0;
        if (kind_ == Kind::Analytic) {
            for (int i = 0; i <= 1000; ++i) best = std::max(best, velocity_(i / 1000.0).norm());
            return best;
        }
        for (int j = 0; j < pieces(); ++j) best = std::max(best, velocity(0.0, j).norm());
        return best;
    }

private:
    enum class Kind { Line, Polyline, Analytic };
    Kind kind_ = Kind::Line;
    Eigen::Index dim_ = 0;
    std::vector<Vector> points_;
    Curve position_, velocity_, acceleration_;
};

}  // namespace hlift
