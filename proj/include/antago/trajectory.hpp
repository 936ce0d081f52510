#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "antago/errors.hpp"

namespace antago::trajectory {

enum class Kind { Lemniscate, Star };

struct TrajectorySpec {
    Kind kind = Kind::Lemniscate;
    double amplitude_mm = 40.0;
    double period_s = 25.0;
    int star_points = 5;
    double star_inner_ratio = 0.382;
    double ramp_s = 2.0;  // quadratic ease-in from the rest point
    int cycles = 2;

    void validate() const {
        if (!(amplitude_mm > 0.0)) throw ConfigError("trajectory: amplitude must be positive");
        if (!(period_s > 0.0)) throw ConfigError("trajectory: period must be positive");
        if (star_points < 2) throw ConfigError("trajectory: star needs at least 2 points");
        if (!(star_inner_ratio > 0.0 && star_inner_ratio < 1.0))
            throw ConfigError("trajectory: star inner ratio must lie in (0, 1)");
        if (!(ramp_s >= 0.0)) throw ConfigError("trajectory: ramp must be non-negative");
        if (cycles < 1) throw ConfigError("trajectory: cycles must be at least 1");
    }

    bool same_path(const TrajectorySpec& o) const {
        return kind == o.kind && amplitude_mm == o.amplitude_mm && period_s == o.period_s &&
               star_points == o.star_points && star_inner_ratio == o.star_inner_ratio &&
               ramp_s == o.ramp_s && cycles == o.cycles;
    }
};

// Figure-eight (Gerono form): x = A sin a, y = A sin a cos a, a = 2 pi t / T.
inline Eigen::Vector2d lemniscate_point(double t_s, const TrajectorySpec& spec) {
    const double a = 2.0 * std::numbers::pi * t_s / spec.period_s;
    const double s = std::sin(a);
    return {spec.amplitude_mm * s, spec.amplitude_mm * s * std::cos(a)};
}

// Closed 2n-gon star, vertices alternating between radius A and rho*A, first
// outer vertex at the top, counter-clockwise constant-speed traversal. All
// edges have equal length by symmetry, so arc length maps linearly to edges.
inline Eigen::Vector2d star_point(double t_s, const TrajectorySpec& spec) {
    const int verts = 2 * spec.star_points;
    double frac = std::fmod(t_s, spec.period_s) / spec.period_s;
    if (frac < 0.0) frac += 1.0;
    const double u = frac * verts;
    const int k = std::min(static_cast<int>(u), verts - 1);
    const double w = u - k;

    const auto vertex = [&spec, verts](int idx) {
        idx %= verts;
        const double ang = std::numbers::pi / 2.0 +
                           2.0 * std::numbers::pi * idx / verts;
        const double rad = (idx % 2 == 0) ? spec.amplitude_mm
                                          : spec.amplitude_mm * spec.star_inner_ratio;
        return Eigen::Vector2d{rad * std::cos(ang), rad * std::sin(ang)};
    };
    const Eigen::Vector2d a = vertex(k);
    const Eigen::Vector2d b = vertex(k + 1);
    return a + w * (b - a);
}

inline Eigen::Vector2d curve_point(double t_s, const TrajectorySpec& spec) {
    return spec.kind == Kind::Lemniscate ? lemniscate_point(t_s, spec) : star_point(t_s, spec);
}

// Lift a plane point onto the task sphere of radius l_m (lower hemisphere).
inline Eigen::Vector3d to_sphere(double x_mm, double y_mm, double arm_length_mm) {
    const double r2 = x_mm * x_mm + y_mm * y_mm;
    const double l2 = arm_length_mm * arm_length_mm;
    if (!(r2 < l2)) throw std::domain_error("to_sphere: point outside the open disc of radius l_m");
    return {x_mm, y_mm, -std::sqrt(l2 - r2)};
}

// Time-parameterized reference on the sphere. Negative time and the ease-in
// window both keep the command continuous from the rest pose.
inline Eigen::Vector3d reference(double t_s, const TrajectorySpec& spec, double arm_length_mm) {
    if (t_s < 0.0) return {0.0, 0.0, -arm_length_mm};
    double scale = 1.0;
    if (spec.ramp_s > 0.0 && t_s < spec.ramp_s) {
        const double r = t_s / spec.ramp_s;
        scale = r * r;
    }
    const Eigen::Vector2d p = scale * curve_point(t_s, spec);
    return to_sphere(p.x(), p.y(), arm_length_mm);
}

}  // namespace antago::trajectory
