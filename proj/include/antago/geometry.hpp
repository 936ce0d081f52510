#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "antago/errors.hpp"

namespace antago::geometry {

// Desk-scale joint geometry, millimetres throughout.
struct GeometryParams {
    double ball_radius_mm = 4.0;    // ball joint radius, informational
    double tendon_radius_mm = 5.0;  // attachment circle radius r_t
    double half_stroke_mm = 3.75;   // anchor offset q_t, half the tendon stroke
    double arm_length_mm = 100.0;   // pivot to end effector

    void validate() const {
        if (!(ball_radius_mm > 0.0 && tendon_radius_mm > 0.0 &&
              half_stroke_mm > 0.0 && arm_length_mm > 0.0))
            throw ConfigError("geometry: all lengths must be positive");
        if (half_stroke_mm > tendon_radius_mm)
            throw ConfigError("geometry: half_stroke q_t must not exceed tendon radius r_t");
    }
};

// Tendon coordinates, fixed channel order: anchors at (+q_t,0), (-q_t,0),
// (0,+q_t), (0,-q_t) in the attachment plane.
struct TendonVector {
    std::array<double, 4> q_mm{};
    double& operator[](int i) { return q_mm[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return q_mm[static_cast<std::size_t>(i)]; }
};

struct TendonMapResult {
    TendonVector q;
    bool clamped = false;  // set when the requested point left the reachable disc
};

struct EulerAngles {
    double roll_rad = 0.0;
    double pitch_rad = 0.0;
    bool near_gimbal = false;  // |pitch| > 85 deg, extraction ill conditioned
};

inline constexpr double kHalfPi = std::numbers::pi / 2.0;

// Orientation of the manipulator: yaw is structurally zero, so the full
// rotation is R = Ry(pitch) * Rx(roll).
inline Eigen::Matrix3d rotation_from_euler(double roll_rad, double pitch_rad) {
    if (!(std::abs(roll_rad) < kHalfPi) || !(std::abs(pitch_rad) < kHalfPi))
        throw std::domain_error("rotation_from_euler: angles must lie strictly inside +/-pi/2");
    const double cr = std::cos(roll_rad), sr = std::sin(roll_rad);
    const double cp = std::cos(pitch_rad), sp = std::sin(pitch_rad);
    Eigen::Matrix3d r;
    r << cp, sp * sr, sp * cr,
         0.0, cr, -sr,
         -sp, cp * sr, cp * cr;
    return r;
}

inline EulerAngles euler_from_rotation(const Eigen::Matrix3d& r) {
    EulerAngles e;
    e.roll_rad = std::atan2(r(2, 1), r(2, 2));
    e.pitch_rad = std::atan2(-r(2, 0), std::sqrt(r(2, 1) * r(2, 1) + r(2, 2) * r(2, 2)));
    e.near_gimbal = std::abs(e.pitch_rad) > 85.0 * std::numbers::pi / 180.0;
    return e;
}

// End effector in world frame; the arm hangs along -z at rest.
inline Eigen::Vector3d end_effector_position(const Eigen::Matrix3d& r, double arm_length_mm) {
    return r * Eigen::Vector3d(0.0, 0.0, -arm_length_mm);
}

// Planar coordinates of the tendon attachment point. Colinear with the end
// effector: equals (r_t / l_m) * (x, y) of end_effector_position.
inline Eigen::Vector2d attachment_projection(const Eigen::Matrix3d& r, double tendon_radius_mm) {
    const Eigen::Vector3d p = r * Eigen::Vector3d(0.0, 0.0, -tendon_radius_mm);
    return {p.x(), p.y()};
}

// Closed form of attachment_projection(rotation_from_euler(...)) without the
// domain guard; the integrator may transiently poke past +/-pi/2.
inline Eigen::Vector2d attachment_from_angles(double roll_rad, double pitch_rad,
                                              double tendon_radius_mm) {
    return {-tendon_radius_mm * std::sin(pitch_rad) * std::cos(roll_rad),
            tendon_radius_mm * std::sin(roll_rad)};
}

// Raw anchor distances, valid for any plane point. No stroke clamp here; the
// plant needs the smooth closed form on both sides of the disc boundary.
inline TendonVector tendon_lengths(double xp_mm, double yp_mm, double half_stroke_mm) {
    const double q = half_stroke_mm;
    TendonVector out;
    out[0] = std::sqrt((q - xp_mm) * (q - xp_mm) + yp_mm * yp_mm);
    out[1] = std::sqrt((q + xp_mm) * (q + xp_mm) + yp_mm * yp_mm);
    out[2] = std::sqrt(xp_mm * xp_mm + (q - yp_mm) * (q - yp_mm));
    out[3] = std::sqrt(xp_mm * xp_mm + (q + yp_mm) * (q + yp_mm));
    return out;
}

// Task-plane point to tendon coordinates. Points outside the reachable disc of
// radius q_t are pulled back to its boundary and flagged, so closed-loop
// episodes survive overshoot instead of faulting.
inline TendonMapResult task_to_tendon(double xp_mm, double yp_mm, double half_stroke_mm) {
    TendonMapResult res;
    const double rad = std::sqrt(xp_mm * xp_mm + yp_mm * yp_mm);
    if (rad > half_stroke_mm) {
        const double s = half_stroke_mm / rad;
        xp_mm *= s;
        yp_mm *= s;
        res.clamped = true;
    }
    res.q = tendon_lengths(xp_mm, yp_mm, half_stroke_mm);
    return res;
}

// Task-space reference (a point on the sphere of radius l_m) to tendon space.
inline TendonMapResult tendon_reference(const Eigen::Vector3d& task_mm, const GeometryParams& g) {
    const double norm = task_mm.norm();
    if (std::abs(norm - g.arm_length_mm) > 0.01 * g.arm_length_mm)
        throw std::domain_error("tendon_reference: point off the task sphere by more than 1%");
    const double s = g.tendon_radius_mm / g.arm_length_mm;
    return task_to_tendon(s * task_mm.x(), s * task_mm.y(), g.half_stroke_mm);
}

// d q_i / d (roll, pitch) by central differences, step 1e-6 rad. Differentiates
// the unclamped lengths; the disc clamp would put a kink under the integrator.
inline Eigen::Matrix<double, 4, 2> tendon_jacobian(double roll_rad, double pitch_rad,
                                                   const GeometryParams& g) {
    constexpr double h = 1e-6;
    const auto q_at = [&g](double roll, double pitch) {
        const Eigen::Vector2d a = attachment_from_angles(roll, pitch, g.tendon_radius_mm);
        return tendon_lengths(a.x(), a.y(), g.half_stroke_mm);
    };
    const TendonVector rp = q_at(roll_rad + h, pitch_rad);
    const TendonVector rm = q_at(roll_rad - h, pitch_rad);
    const TendonVector pp = q_at(roll_rad, pitch_rad + h);
    const TendonVector pm = q_at(roll_rad, pitch_rad - h);
    Eigen::Matrix<double, 4, 2> jac;
    for (int i = 0; i < 4; ++i) {
        jac(i, 0) = (rp[i] - rm[i]) / (2.0 * h);
        jac(i, 1) = (pp[i] - pm[i]) / (2.0 * h);
    }
    return jac;
}

}  // namespace antago::geometry
