#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "antago/control.hpp"
#include "antago/errors.hpp"
#include "antago/geometry.hpp"
#include "antago/plant.hpp"
#include "antago/trajectory.hpp"

namespace antago::config {

struct SignalParams {
    int ma_window = 20;
    double lp_cutoff_sense_hz = 10.0;
    double lp_cutoff_cmd_hz = 15.0;
    bool waveform_mode = false;
};

struct NoiseParams {
    double sense_sigma_v = 0.01;
    double mocap_sigma_mm = 0.05;
};

struct MocapParams {
    double rate_hz = 150.0;
};

enum class DrivePair { X, Y, Both };

struct OpenLoopParams {
    double v_amp_kv = 5.5;
    double freq_hz = 3.0;
    double duration_s = 5.0;
    DrivePair pair = DrivePair::X;
};

struct TrainParams {
    int episodes_per_kind = 2;
    double test_frac = 0.2;
    bool time_blocked = false;
};

// Two-point hanging-load calibration inputs. Defaults are the bench
// measurements for the first channel at the 5 kV reference step.
struct CalibrationTable {
    double load1_kg = 0.014;
    double strain1 = 0.065;
    double load2_kg = 0.034;
    double strain2 = 0.0588;
};

struct SimConfig {
    geometry::GeometryParams geometry;
    plant::HaselParams hasel;
    plant::RigidBodyParams body;
    control::ControlParams control;
    trajectory::TrajectorySpec trajectory;
    SignalParams signal;
    NoiseParams noise;
    MocapParams mocap;
    OpenLoopParams openloop;
    TrainParams train;
    CalibrationTable calibration;
    std::uint64_t seed = 0;
    std::string preset_name;  // applied by finalize(); empty = none

    std::set<std::string> keys_seen;  // explicit file keys, for precedence
    bool finalized = false;

    bool key_set(const std::string& k) const { return keys_seen.count(k) != 0; }

    void apply_preset(const std::string& name);
    void finalize();
    int substeps_per_tick() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_double(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(value, &pos);
        if (pos != value.size())
            throw ConfigError("config: trailing characters in value for '" + key + "'");
        if (!std::isfinite(d))
            throw ConfigError("config: non-finite value for '" + key + "'");
        return d;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config: cannot parse number for '" + key + "': " + value);
    }
}

inline int parse_int(const std::string& value, const std::string& key) {
    const double d = parse_double(value, key);
    const double r = std::nearbyint(d);
    if (std::abs(d - r) > 1e-9)
        throw ConfigError("config: expected integer for '" + key + "': " + value);
    return static_cast<int>(r);
}

inline std::uint64_t parse_u64(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size())
            throw ConfigError("config: trailing characters in value for '" + key + "'");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config: cannot parse integer for '" + key + "': " + value);
    }
}

inline bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "on" || value == "true" || value == "1") return true;
    if (value == "off" || value == "false" || value == "0") return false;
    throw ConfigError("config: expected on/off for '" + key + "': " + value);
}

inline std::array<double, 4> parse_vec4(const std::string& value, const std::string& key) {
    std::array<double, 4> out{};
    std::stringstream ss(value);
    std::string item;
    int n = 0;
    while (std::getline(ss, item, ',')) {
        if (n >= 4) throw ConfigError("config: '" + key + "' takes exactly 4 values");
        out[static_cast<std::size_t>(n)] = parse_double(trim(item), key);
        ++n;
    }
    if (n != 4) throw ConfigError("config: '" + key + "' takes exactly 4 values");
    return out;
}

}  // namespace detail

inline void apply_key(SimConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_int;
    using detail::parse_u64;
    using detail::parse_vec4;

    if (key == "geometry.r_s_mm") c.geometry.ball_radius_mm = parse_double(value, key);
    else if (key == "geometry.r_t_mm") c.geometry.tendon_radius_mm = parse_double(value, key);
    else if (key == "geometry.q_t_mm") c.geometry.half_stroke_mm = parse_double(value, key);
    else if (key == "geometry.l_m_mm") c.geometry.arm_length_mm = parse_double(value, key);
    else if (key == "plant.actuated_length_mm") c.hasel.actuated_length_mm = parse_double(value, key);
    else if (key == "plant.stroke_mm") c.hasel.stroke_mm = parse_double(value, key);
    else if (key == "plant.blocked_force_5kv_n") c.hasel.blocked_force_5kv_n = parse_double(value, key);
    else if (key == "plant.free_strain") c.hasel.free_strain = parse_double(value, key);
    else if (key == "plant.v_ref_kv") c.hasel.v_ref_kv = parse_double(value, key);
    else if (key == "plant.v_max_kv") c.hasel.v_max_kv = parse_double(value, key);
    else if (key == "plant.force_lag_s") c.hasel.force_lag_s = parse_double(value, key);
    else if (key == "plant.cap_min_pf") c.hasel.cap_min_pf = parse_double(value, key);
    else if (key == "plant.cap_max_pf") c.hasel.cap_max_pf = parse_double(value, key);
    else if (key == "plant.sense_resistance_mohm") c.hasel.sense_resistance_mohm = parse_double(value, key);
    else if (key == "plant.carrier_khz") c.hasel.carrier_khz = parse_double(value, key);
    else if (key == "plant.carrier_rms_v") c.hasel.carrier_rms_v = parse_double(value, key);
    else if (key == "plant.strain_scale") c.hasel.strain_scale = parse_vec4(value, key);
    else if (key == "plant.slack_mm") c.hasel.slack_mm = parse_double(value, key);
    else if (key == "plant.cal_load1_kg") c.calibration.load1_kg = parse_double(value, key);
    else if (key == "plant.cal_strain1") c.calibration.strain1 = parse_double(value, key);
    else if (key == "plant.cal_load2_kg") c.calibration.load2_kg = parse_double(value, key);
    else if (key == "plant.cal_strain2") c.calibration.strain2 = parse_double(value, key);
    else if (key == "plant.mass_kg") c.body.mass_kg = parse_double(value, key);
    else if (key == "plant.com_mm") c.body.com_mm = parse_double(value, key);
    else if (key == "plant.damping_nmm_s") c.body.damping_nmm_s = parse_double(value, key);
    else if (key == "plant.gravity_m_s2") c.body.gravity_m_s2 = parse_double(value, key);
    else if (key == "plant.dt_s") c.body.dt_s = parse_double(value, key);
    else if (key == "signal.ma_window") c.signal.ma_window = parse_int(value, key);
    else if (key == "signal.lp_cutoff_sense_hz") c.signal.lp_cutoff_sense_hz = parse_double(value, key);
    else if (key == "signal.lp_cutoff_cmd_hz") c.signal.lp_cutoff_cmd_hz = parse_double(value, key);
    else if (key == "signal.waveform_mode") c.signal.waveform_mode = parse_bool(value, key);
    else if (key == "control.kp") c.control.gains.kp = parse_vec4(value, key);
    else if (key == "control.ki") c.control.gains.ki = parse_vec4(value, key);
    else if (key == "control.kd") c.control.gains.kd = parse_vec4(value, key);
    else if (key == "control.amp_scale") c.control.amp_scale = parse_vec4(value, key);
    else if (key == "control.rate_hz") c.control.rate_hz = parse_double(value, key);
    else if (key == "control.preset") c.preset_name = value;
    else if (key == "trajectory.kind") {
        if (value == "lemniscate") c.trajectory.kind = trajectory::Kind::Lemniscate;
        else if (value == "star") c.trajectory.kind = trajectory::Kind::Star;
        else throw ConfigError("config: trajectory.kind must be lemniscate or star: " + value);
    }
    else if (key == "trajectory.amplitude_mm") c.trajectory.amplitude_mm = parse_double(value, key);
    else if (key == "trajectory.period_s") c.trajectory.period_s = parse_double(value, key);
    else if (key == "trajectory.cycles") c.trajectory.cycles = parse_int(value, key);
    else if (key == "trajectory.star_points") c.trajectory.star_points = parse_int(value, key);
    else if (key == "trajectory.star_inner_ratio") c.trajectory.star_inner_ratio = parse_double(value, key);
    else if (key == "trajectory.ramp_s") c.trajectory.ramp_s = parse_double(value, key);
    else if (key == "noise.sense_sigma_v") c.noise.sense_sigma_v = parse_double(value, key);
    else if (key == "noise.mocap_sigma_mm") c.noise.mocap_sigma_mm = parse_double(value, key);
    else if (key == "mocap.rate_hz") c.mocap.rate_hz = parse_double(value, key);
    else if (key == "openloop.v_amp_kv") c.openloop.v_amp_kv = parse_double(value, key);
    else if (key == "openloop.freq_hz") c.openloop.freq_hz = parse_double(value, key);
    else if (key == "openloop.duration_s") c.openloop.duration_s = parse_double(value, key);
    else if (key == "openloop.pair") {
        if (value == "x") c.openloop.pair = DrivePair::X;
        else if (value == "y") c.openloop.pair = DrivePair::Y;
        else if (value == "both") c.openloop.pair = DrivePair::Both;
        else throw ConfigError("config: openloop.pair must be x, y, or both: " + value);
    }
    else if (key == "train.episodes_per_kind") c.train.episodes_per_kind = parse_int(value, key);
    else if (key == "train.test_frac") c.train.test_frac = parse_double(value, key);
    else if (key == "train.time_blocked") c.train.time_blocked = parse_bool(value, key);
    else if (key == "seed") c.seed = parse_u64(value, key);
    else throw ConfigError("config: unknown key '" + key + "'");
}

// Flat UTF-8 "key = value" text, '#' to end of line is a comment, blank lines
// ignored. Unknown and duplicate keys are rejected.
inline SimConfig parse_config(std::istream& in) {
    SimConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: empty key on line " + std::to_string(lineno));
        if (value.empty())
            throw ConfigError("config: empty value for '" + key + "' on line " +
                              std::to_string(lineno));
        if (!c.keys_seen.insert(key).second)
            throw ConfigError("config: duplicate key '" + key + "' on line " +
                              std::to_string(lineno));
        apply_key(c, key, value);
    }
    return c;
}

inline SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    return parse_config(in);
}

// Fills gains and trajectory kind from a named tuning row. Values given
// explicitly in the config file win over preset entries.
inline void SimConfig::apply_preset(const std::string& name) {
    const control::GainPreset* p = control::find_preset(name);
    if (p == nullptr) throw ConfigError("config: unknown preset '" + name + "'");
    control::ControlParams from_preset = control;
    p->apply_to(from_preset);
    if (!key_set("control.kp")) control.gains.kp = from_preset.gains.kp;
    if (!key_set("control.ki")) control.gains.ki = from_preset.gains.ki;
    if (!key_set("control.kd")) control.gains.kd = from_preset.gains.kd;
    if (!key_set("trajectory.kind")) trajectory.kind = p->kind;
}

// Resolves derived defaults and validates every section. Call once, after any
// preset has been applied.
inline void SimConfig::finalize() {
    if (finalized) return;
    if (!preset_name.empty()) apply_preset(preset_name);

    if (!key_set("plant.stroke_mm")) hasel.stroke_mm = 2.0 * geometry.half_stroke_mm;
    if (trajectory.kind == trajectory::Kind::Star && !key_set("trajectory.period_s"))
        trajectory.period_s = 40.0;

    const bool direct_force =
        key_set("plant.blocked_force_5kv_n") || key_set("plant.free_strain");
    if (!direct_force) {
        const plant::Calibration cal = plant::calibrate_from_table(
            calibration.load1_kg, calibration.strain1, calibration.load2_kg,
            calibration.strain2, body.gravity_m_s2);
        hasel.blocked_force_5kv_n = cal.blocked_force_5kv_n;
        hasel.free_strain = cal.free_strain;
    }

    control.v_max_kv = hasel.v_max_kv;
    control.cmd_lowpass_hz = signal.lp_cutoff_cmd_hz;

    geometry.validate();
    hasel.validate();
    body.validate();
    control.validate();
    trajectory.validate();
    if (signal.ma_window < 1) throw ConfigError("config: signal.ma_window must be >= 1");
    if (!(signal.lp_cutoff_sense_hz > 0.0))
        throw ConfigError("config: signal.lp_cutoff_sense_hz must be positive");
    if (!(noise.sense_sigma_v >= 0.0) || !(noise.mocap_sigma_mm >= 0.0))
        throw ConfigError("config: noise sigmas must be non-negative");
    if (!(mocap.rate_hz > 0.0)) throw ConfigError("config: mocap.rate_hz must be positive");
    if (!(openloop.v_amp_kv >= 0.0 && openloop.v_amp_kv <= hasel.v_max_kv))
        throw ConfigError("config: openloop.v_amp_kv must lie in [0, v_max]");
    if (!(openloop.freq_hz > 0.0) || !(openloop.duration_s > 0.0))
        throw ConfigError("config: openloop frequency and duration must be positive");
    if (train.episodes_per_kind < 1)
        throw ConfigError("config: train.episodes_per_kind must be >= 1");
    if (!(train.test_frac > 0.0 && train.test_frac < 1.0))
        throw ConfigError("config: train.test_frac must lie in (0, 1)");

    substeps_per_tick();  // divisibility check
    finalized = true;
}

// The plant step must divide the control period exactly; 50 substeps at the
// defaults (5 ms tick, 0.1 ms plant step).
inline int SimConfig::substeps_per_tick() const {
    const double period = 1.0 / control.rate_hz;
    const double n = period / body.dt_s;
    const double rounded = std::nearbyint(n);
    if (rounded < 1.0 || std::abs(n - rounded) * body.dt_s > 1e-12)
        throw ConfigError("config: plant.dt_s must divide the control period");
    return static_cast<int>(rounded);
}

inline nlohmann::ordered_json config_to_json(const SimConfig& c) {
    nlohmann::ordered_json j;
    j["geometry"] = {{"r_s_mm", c.geometry.ball_radius_mm},
                     {"r_t_mm", c.geometry.tendon_radius_mm},
                     {"q_t_mm", c.geometry.half_stroke_mm},
                     {"l_m_mm", c.geometry.arm_length_mm}};
    j["plant"] = {{"actuated_length_mm", c.hasel.actuated_length_mm},
                  {"stroke_mm", c.hasel.stroke_mm},
                  {"blocked_force_5kv_n", c.hasel.blocked_force_5kv_n},
                  {"free_strain", c.hasel.free_strain},
                  {"v_ref_kv", c.hasel.v_ref_kv},
                  {"v_max_kv", c.hasel.v_max_kv},
                  {"force_lag_s", c.hasel.force_lag_s},
                  {"cap_min_pf", c.hasel.cap_min_pf},
                  {"cap_max_pf", c.hasel.cap_max_pf},
                  {"sense_resistance_mohm", c.hasel.sense_resistance_mohm},
                  {"carrier_khz", c.hasel.carrier_khz},
                  {"carrier_rms_v", c.hasel.carrier_rms_v},
                  {"strain_scale", c.hasel.strain_scale},
                  {"slack_mm", c.hasel.slack_mm},
                  {"cal_load1_kg", c.calibration.load1_kg},
                  {"cal_strain1", c.calibration.strain1},
                  {"cal_load2_kg", c.calibration.load2_kg},
                  {"cal_strain2", c.calibration.strain2},
                  {"mass_kg", c.body.mass_kg},
                  {"com_mm", c.body.com_mm},
                  {"damping_nmm_s", c.body.damping_nmm_s},
                  {"gravity_m_s2", c.body.gravity_m_s2},
                  {"dt_s", c.body.dt_s}};
    j["signal"] = {{"ma_window", c.signal.ma_window},
                   {"lp_cutoff_sense_hz", c.signal.lp_cutoff_sense_hz},
                   {"lp_cutoff_cmd_hz", c.signal.lp_cutoff_cmd_hz},
                   {"waveform_mode", c.signal.waveform_mode}};
    j["control"] = {{"kp", c.control.gains.kp},
                    {"ki", c.control.gains.ki},
                    {"kd", c.control.gains.kd},
                    {"amp_scale", c.control.amp_scale},
                    {"rate_hz", c.control.rate_hz},
                    {"preset", c.preset_name}};
    j["trajectory"] = {
        {"kind", c.trajectory.kind == trajectory::Kind::Lemniscate ? "lemniscate" : "star"},
        {"amplitude_mm", c.trajectory.amplitude_mm},
        {"period_s", c.trajectory.period_s},
        {"cycles", c.trajectory.cycles},
        {"star_points", c.trajectory.star_points},
        {"star_inner_ratio", c.trajectory.star_inner_ratio},
        {"ramp_s", c.trajectory.ramp_s}};
    j["noise"] = {{"sense_sigma_v", c.noise.sense_sigma_v},
                  {"mocap_sigma_mm", c.noise.mocap_sigma_mm}};
    j["mocap"] = {{"rate_hz", c.mocap.rate_hz}};
    j["openloop"] = {{"v_amp_kv", c.openloop.v_amp_kv},
                     {"freq_hz", c.openloop.freq_hz},
                     {"duration_s", c.openloop.duration_s},
                     {"pair", c.openloop.pair == DrivePair::X       ? "x"
                              : c.openloop.pair == DrivePair::Y    ? "y"
                                                                   : "both"}};
    j["train"] = {{"episodes_per_kind", c.train.episodes_per_kind},
                  {"test_frac", c.train.test_frac},
                  {"time_blocked", c.train.time_blocked}};
    j["seed"] = c.seed;
    return j;
}

}  // namespace antago::config
