#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "antago/errors.hpp"
#include "antago/geometry.hpp"

namespace antago::plant {

// Actuator and sensing constants shared by the four channels. Defaults encode
// a 130 mm pouch stack calibrated against two loaded-contraction measurements
// at 5 kV (see calibrate_from_table); stroke_mm is tied to the joint geometry
// (2 * q_t) when a config is resolved.
struct HaselParams {
    double actuated_length_mm = 130.0;   // L0, sets strain = contraction / L0
    double stroke_mm = 7.5;              // usable contraction range inside the joint
    double blocked_force_5kv_n = 2.1942754838709697; // calibrate_from_table of the default bench points
    double free_strain = 0.06934;        // strain intercept of the force line
    double v_ref_kv = 5.0;
    double v_max_kv = 5.5;
    double force_lag_s = 0.02;
    double cap_min_pf = 100.0;  // fully contracted
    double cap_max_pf = 500.0;  // fully elongated
    double sense_resistance_mohm = 2.0;
    double carrier_khz = 2.0;
    double carrier_rms_v = 10.0 / std::numbers::sqrt2;  // 10 V pp source through 1:2 gain
    // Channel-to-channel spread of the free strain, unit mean on channel 0.
    std::array<double, 4> strain_scale{1.0, 0.98769230769230771, 0.99692307692307691,
                                       1.0184615384615384};
    double slack_mm = 0.0;  // assembly slack offset added to every contraction

    void validate() const {
        if (!(actuated_length_mm > 0.0 && stroke_mm > 0.0))
            throw ConfigError("plant: lengths must be positive");
        if (!(blocked_force_5kv_n > 0.0 && free_strain > 0.0))
            throw ConfigError("plant: calibration must give positive force and strain");
        if (!(v_ref_kv > 0.0 && v_max_kv >= v_ref_kv))
            throw ConfigError("plant: need 0 < v_ref <= v_max");
        if (!(cap_max_pf > cap_min_pf && cap_min_pf > 0.0))
            throw ConfigError("plant: need 0 < cap_min < cap_max");
        if (!(sense_resistance_mohm > 0.0 && carrier_khz > 0.0 && carrier_rms_v > 0.0))
            throw ConfigError("plant: sensing chain parameters must be positive");
        if (!(force_lag_s > 0.0)) throw ConfigError("plant: force_lag must be positive");
        for (double s : strain_scale)
            if (!(s > 0.0)) throw ConfigError("plant: strain_scale entries must be positive");
    }
};

struct Calibration {
    double blocked_force_5kv_n = 0.0;
    double free_strain = 0.0;
};

// Fit the linear force-strain law F = Fb * (1 - eps/eps_max) through two
// (hanging load, settled strain) measurements taken at the reference voltage.
inline Calibration calibrate_from_table(double load1_kg, double strain1, double load2_kg,
                                        double strain2, double gravity_m_s2 = 9.81) {
    if (!(load1_kg > 0.0 && load2_kg > 0.0) || !(strain1 > 0.0 && strain2 > 0.0))
        throw std::domain_error("calibrate_from_table: loads and strains must be positive");
    if (std::abs(strain1 - strain2) < 1e-12)
        throw std::domain_error("calibrate_from_table: calibration points have equal strain");
    const double f1 = load1_kg * gravity_m_s2;
    const double f2 = load2_kg * gravity_m_s2;
    Calibration cal;
    cal.free_strain = (f1 * strain2 - f2 * strain1) / (f1 - f2);
    if (!(cal.free_strain > 0.0))
        throw std::domain_error("calibrate_from_table: points give non-positive free strain");
    cal.blocked_force_5kv_n = f1 / (1.0 - strain1 / cal.free_strain);
    if (!(cal.blocked_force_5kv_n > 0.0))
        throw std::domain_error("calibrate_from_table: points give non-positive blocked force");
    return cal;
}

// Electrostatic force scale, quadratic in drive voltage.
inline double blocked_force(double v_kv, const HaselParams& p) {
    if (!(v_kv >= 0.0) || v_kv > p.v_max_kv + 1e-12)
        throw std::domain_error("blocked_force: voltage outside [0, v_max]");
    const double r = v_kv / p.v_ref_kv;
    return p.blocked_force_5kv_n * r * r;
}

// Pulling force at a given contraction. Negative demanded contraction means
// the tendon is taut at full elongation, where the pouch holds blocked force;
// past the (per channel) free strain the output floors at zero.
inline double tension(double v_kv, double contraction_mm, const HaselParams& p, int channel = 0) {
    const double eps = std::max(0.0, contraction_mm / p.actuated_length_mm);
    const double eps_max =
        p.free_strain * p.strain_scale[static_cast<std::size_t>(channel)];
    return std::max(0.0, blocked_force(v_kv, p) * (1.0 - eps / eps_max));
}

// Self-sensing electrode pair: capacitance falls linearly over the stroke.
inline double capacitance_pf(double contraction_mm, const HaselParams& p) {
    const double c = std::clamp(contraction_mm, 0.0, p.stroke_mm);
    return p.cap_max_pf - (p.cap_max_pf - p.cap_min_pf) * c / p.stroke_mm;
}

// RMS of the carrier after the series-R / pouch-C divider, measured across the
// pouch: |H| = 1 / sqrt(1 + (w R C)^2).
inline double sense_voltage_rms(double cap_pf, const HaselParams& p) {
    if (!(cap_pf > 0.0)) throw std::domain_error("sense_voltage_rms: capacitance must be positive");
    const double wrc = 2.0 * std::numbers::pi * (p.carrier_khz * 1e3) *
                       (p.sense_resistance_mohm * 1e6) * (cap_pf * 1e-12);
    return p.carrier_rms_v / std::sqrt(1.0 + wrc * wrc);
}

// Lumped manipulator link. The defaults describe the light resin arm the
// tendon forces can actually swing; see README for how they were chosen.
struct RigidBodyParams {
    double mass_kg = 0.001;
    double com_mm = 6.0;             // pivot to centre of mass
    double damping_nmm_s = 0.07;     // viscous, N*mm*s/rad
    double gravity_m_s2 = 9.81;
    double dt_s = 1e-4;

    void validate() const {
        if (!(mass_kg > 0.0 && com_mm > 0.0)) throw ConfigError("body: mass and com must be positive");
        if (!(damping_nmm_s >= 0.0)) throw ConfigError("body: damping must be non-negative");
        if (!(gravity_m_s2 > 0.0)) throw ConfigError("body: gravity must be positive");
        if (!(dt_s > 0.0 && dt_s <= 1e-2)) throw ConfigError("body: dt must lie in (0, 1e-2] s");
    }
};

struct PlantState {
    double roll_rad = 0.0;
    double pitch_rad = 0.0;
    double roll_rate = 0.0;   // rad/s
    double pitch_rate = 0.0;  // rad/s
    std::array<double, 4> tension_n{0.0, 0.0, 0.0, 0.0};  // lagged actuator forces
    double time_s = 0.0;
};

// Geometric contraction demanded from each actuator at the given pose.
inline std::array<double, 4> contractions_at(double roll_rad, double pitch_rad,
                                             const HaselParams& hp,
                                             const geometry::GeometryParams& g) {
    const Eigen::Vector2d a = geometry::attachment_from_angles(roll_rad, pitch_rad, g.tendon_radius_mm);
    const geometry::TendonVector q = geometry::tendon_lengths(a.x(), a.y(), g.half_stroke_mm);
    std::array<double, 4> c{};
    for (int i = 0; i < 4; ++i) c[static_cast<std::size_t>(i)] = hp.stroke_mm - q[i] + hp.slack_mm;
    return c;
}

// One fixed step of the joint dynamics: commands -> lagged tensions ->
// generalized forces through the tendon Jacobian, gravity restoring torque,
// viscous damping, semi-implicit Euler update.
inline PlantState step_dynamics(const PlantState& s, const std::array<double, 4>& commands_kv,
                                const HaselParams& hp, const RigidBodyParams& body,
                                const geometry::GeometryParams& g) {
    for (int i = 0; i < 4; ++i) {
        const double v = commands_kv[static_cast<std::size_t>(i)];
        if (!(v >= 0.0) || v > hp.v_max_kv + 1e-12)
            throw std::domain_error("step_dynamics: command " + std::to_string(i + 1) +
                                    " outside [0, v_max]");
    }
    const double dt = body.dt_s;
    PlantState n = s;

    const std::array<double, 4> c = contractions_at(s.roll_rad, s.pitch_rad, hp, g);
    const double lag_alpha = 1.0 - std::exp(-dt / hp.force_lag_s);
    for (int i = 0; i < 4; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const double target = tension(commands_kv[u], c[u], hp, i);
        n.tension_n[u] = s.tension_n[u] + lag_alpha * (target - s.tension_n[u]);
    }

    const Eigen::Matrix<double, 4, 2> jac = geometry::tendon_jacobian(s.roll_rad, s.pitch_rad, g);
    double torque_roll_nmm = 0.0;
    double torque_pitch_nmm = 0.0;
    for (int i = 0; i < 4; ++i) {
        const auto u = static_cast<std::size_t>(i);
        torque_roll_nmm -= n.tension_n[u] * jac(i, 0);
        torque_pitch_nmm -= n.tension_n[u] * jac(i, 1);
    }
    const double mgl = body.mass_kg * body.gravity_m_s2 * body.com_mm;  // N*mm
    torque_roll_nmm += -mgl * std::cos(s.pitch_rad) * std::sin(s.roll_rad);
    torque_pitch_nmm += -mgl * std::cos(s.roll_rad) * std::sin(s.pitch_rad);
    torque_roll_nmm -= body.damping_nmm_s * s.roll_rate;
    torque_pitch_nmm -= body.damping_nmm_s * s.pitch_rate;

    const double com_m = body.com_mm * 1e-3;
    const double inertia = body.mass_kg * com_m * com_m;  // kg*m^2, point mass link
    const double acc_roll = torque_roll_nmm * 1e-3 / inertia;
    const double acc_pitch = torque_pitch_nmm * 1e-3 / inertia;

    n.roll_rate += dt * acc_roll;
    n.pitch_rate += dt * acc_pitch;
    n.roll_rad += dt * n.roll_rate;
    n.pitch_rad += dt * n.pitch_rate;
    n.time_s += dt;

    if (!std::isfinite(n.roll_rad) || !std::isfinite(n.pitch_rad) ||
        !std::isfinite(n.roll_rate) || !std::isfinite(n.pitch_rate))
        throw RuntimeFault("step_dynamics: integrator diverged at t = " +
                           std::to_string(s.time_s) + " s");
    return n;
}

// Bench rig for the calibration table: one pouch lifting a hanging mass, free
// of the joint kinematics. Returns the settled strain. The contraction is
// limited by the pouch itself (free strain), not by the joint stroke.
inline double settle_hanging_load(double v_kv, double load_kg, const HaselParams& p,
                                  int channel = 0, double duration_s = 2.0) {
    const double g = 9.81;
    const double eps_max = p.free_strain * p.strain_scale[static_cast<std::size_t>(channel)];
    const double c_free = eps_max * p.actuated_length_mm;
    const double stiffness_n_m = blocked_force(v_kv, p) / (c_free * 1e-3) + 1e-9;
    const double damping_n_s_m = 2.2 * std::sqrt(stiffness_n_m * load_kg);

    const double dt = 1e-4;
    double c_mm = 0.0, vel_mm_s = 0.0, force_n = 0.0;
    const double lag_alpha = 1.0 - std::exp(-dt / p.force_lag_s);
    const auto steps = static_cast<std::size_t>(duration_s / dt);
    for (std::size_t k = 0; k < steps; ++k) {
        force_n += lag_alpha * (tension(v_kv, c_mm, p, channel) - force_n);
        const double net_n = force_n - load_kg * g - damping_n_s_m * vel_mm_s * 1e-3;
        vel_mm_s += dt * (net_n / load_kg) * 1e3;
        c_mm += dt * vel_mm_s;
        if (c_mm < 0.0) { c_mm = 0.0; vel_mm_s = std::max(0.0, vel_mm_s); }
        if (c_mm > c_free) { c_mm = c_free; vel_mm_s = std::min(0.0, vel_mm_s); }
    }
    return c_mm / p.actuated_length_mm;
}

}  // namespace antago::plant
