#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "antago/errors.hpp"
#include "antago/geometry.hpp"
#include "antago/signal.hpp"
#include "antago/trajectory.hpp"

namespace antago::control {

// Per-channel PID gains. Units: kp kV/mm, ki kV/(mm*s), kd kV*s/mm. Error is
// measured minus reference, so positive error (tendon too long, actuator under
// contracted) drives the command up.
struct PidGains {
    std::array<double, 4> kp{};
    std::array<double, 4> ki{};
    std::array<double, 4> kd{};
};

struct PidState {
    double integral_mm_s = 0.0;
    double prev_meas_mm = 0.0;
    bool has_prev = false;
};

struct PidResult {
    double u_kv = 0.0;
    bool saturated_high = false;
};

// One PID update. Derivative acts on the measurement, so reference steps do
// not kick; the integral is frozen while the output is clamped against the
// error direction and its contribution is additionally bounded by v_max.
inline PidResult pid_step(double kp, double ki, double kd, PidState& s, double error_mm,
                          double meas_mm, double dt_s, double v_max_kv) {
    if (!std::isfinite(error_mm) || !std::isfinite(meas_mm))
        throw RuntimeFault("pid_step: non-finite controller input");
    double integral = s.integral_mm_s + error_mm * dt_s;
    if (ki > 0.0) {
        const double lim = v_max_kv / ki;
        integral = std::clamp(integral, -lim, lim);
    }
    const double deriv = s.has_prev ? (meas_mm - s.prev_meas_mm) / dt_s : 0.0;
    const double u_raw = kp * error_mm + ki * integral + kd * deriv;

    PidResult res;
    bool freeze = false;
    if (u_raw > v_max_kv) {
        res.u_kv = v_max_kv;
        res.saturated_high = true;
        freeze = error_mm > 0.0;
    } else if (u_raw < 0.0) {
        res.u_kv = 0.0;
        freeze = error_mm < 0.0;
    } else {
        res.u_kv = u_raw;
    }
    if (!freeze) s.integral_mm_s = integral;
    s.prev_meas_mm = meas_mm;
    s.has_prev = true;
    return res;
}

struct ControlParams {
    PidGains gains;
    std::array<double, 4> amp_scale{1.0, 1.0, 1.0, 1.0};
    double rate_hz = 200.0;
    double cmd_lowpass_hz = 15.0;
    double v_max_kv = 5.5;

    void validate() const {
        if (!(rate_hz > 0.0)) throw ConfigError("control: rate must be positive");
        if (!(cmd_lowpass_hz > 0.0)) throw ConfigError("control: command cutoff must be positive");
        if (!(v_max_kv > 0.0)) throw ConfigError("control: v_max must be positive");
        for (int i = 0; i < 4; ++i) {
            const auto u = static_cast<std::size_t>(i);
            if (!(gains.kp[u] >= 0.0 && gains.ki[u] >= 0.0 && gains.kd[u] >= 0.0))
                throw ConfigError("control: gains must be non-negative");
            if (!(amp_scale[u] > 0.0)) throw ConfigError("control: amp_scale must be positive");
        }
    }
};

struct ControllerState {
    explicit ControllerState(const ControlParams& p)
        : cmd_filter{signal::LowPass(p.cmd_lowpass_hz, 1.0 / p.rate_hz),
                     signal::LowPass(p.cmd_lowpass_hz, 1.0 / p.rate_hz),
                     signal::LowPass(p.cmd_lowpass_hz, 1.0 / p.rate_hz),
                     signal::LowPass(p.cmd_lowpass_hz, 1.0 / p.rate_hz)} {}
    std::array<PidState, 4> pid{};
    std::array<signal::LowPass, 4> cmd_filter;
};

struct ControlOutput {
    std::array<double, 4> commands_kv{};
    std::array<double, 4> q_ref_mm{};
    std::array<double, 4> error_mm{};
    std::array<bool, 4> saturated{};
    bool reference_clamped = false;
};

// Task reference plus tendon-space feedback to four voltage commands:
// tendon errors, per-channel PID, amplifier scale, command low-pass, clamp.
inline ControlOutput control_step(const Eigen::Vector3d& x_ref_mm,
                                  const geometry::TendonVector& q_feedback_mm,
                                  ControllerState& state, const ControlParams& p,
                                  const geometry::GeometryParams& g) {
    const geometry::TendonMapResult ref = geometry::tendon_reference(x_ref_mm, g);
    ControlOutput out;
    out.reference_clamped = ref.clamped;
    const double dt = 1.0 / p.rate_hz;
    for (int i = 0; i < 4; ++i) {
        const auto u = static_cast<std::size_t>(i);
        out.q_ref_mm[u] = ref.q[i];
        out.error_mm[u] = q_feedback_mm[i] - ref.q[i];
        const PidResult pid = pid_step(p.gains.kp[u], p.gains.ki[u], p.gains.kd[u],
                                       state.pid[u], out.error_mm[u], q_feedback_mm[i], dt,
                                       p.v_max_kv);
        double cmd = state.cmd_filter[u].push(pid.u_kv * p.amp_scale[u]);
        bool sat = pid.saturated_high;
        if (cmd > p.v_max_kv) {
            cmd = p.v_max_kv;
            sat = true;
        } else if (cmd < 0.0) {
            cmd = 0.0;
        }
        out.commands_kv[u] = cmd;
        out.saturated[u] = sat;
    }
    return out;
}

// Hand-tuned gain sets, one row per trajectory and feedback source. Stored as
// written in the tuning table: kp in kV/mm, ki carrying a 1e-3 factor, kd as a
// per-tick value of the 200 Hz loop. apply_to converts to continuous units for
// the configured rate.
struct GainPreset {
    const char* name;
    std::array<double, 4> kp;
    std::array<double, 4> ki_milli;
    std::array<double, 4> kd_tick;
    trajectory::Kind kind;

    void apply_to(ControlParams& p) const {
        for (int i = 0; i < 4; ++i) {
            const auto u = static_cast<std::size_t>(i);
            p.gains.kp[u] = kp[u];
            p.gains.ki[u] = ki_milli[u] * 1e-3 * p.rate_hz;
            p.gains.kd[u] = kd_tick[u] / p.rate_hz;
        }
    }
};

inline constexpr std::array<GainPreset, 4> kGainPresets{{
    {"lemni_ss", {0.30, 0.75, 0.95, 0.85}, {1, 2, 2, 2}, {0, 0, 0, 0},
     trajectory::Kind::Lemniscate},
    {"lemni_bm", {0.40, 0.85, 1.05, 0.95}, {2, 3, 3, 3}, {0.5, 1, 1, 1},
     trajectory::Kind::Lemniscate},
    {"star_ss", {0.45, 0.85, 0.80, 0.90}, {1, 2, 2, 2}, {0, 0, 0, 0},
     trajectory::Kind::Star},
    {"star_bm", {0.45, 0.95, 0.90, 0.95}, {1, 2, 2, 2}, {0.5, 1, 1, 1},
     trajectory::Kind::Star},
}};

inline const GainPreset* find_preset(const std::string& name) {
    for (const auto& p : kGainPresets)
        if (name == p.name) return &p;
    return nullptr;
}

}  // namespace antago::control
