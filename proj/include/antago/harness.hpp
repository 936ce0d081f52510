#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "antago/config.hpp"
#include "antago/control.hpp"
#include "antago/errors.hpp"
#include "antago/estimator.hpp"
#include "antago/geometry.hpp"
#include "antago/plant.hpp"
#include "antago/rng.hpp"
#include "antago/signal.hpp"
#include "antago/trajectory.hpp"

namespace antago::harness {

enum class FeedbackSource { SelfSensing, GroundTruth };

// One row per control tick. The Cartesian triples are reference, true plant
// pose, and the pose the feedback path believed (held mocap sample or model
// estimate). Tendon-space and command channels follow the anchor order
// +x, -x, +y, -y.
struct EpisodeLog {
    std::vector<double> t_s;
    std::vector<std::array<double, 3>> x_ref, x_true, x_est;
    std::vector<std::array<double, 4>> q_ref, q_est, v_cmd, v_sense;
    std::vector<std::array<bool, 4>> sat;

    // Auxiliary channels kept out of the CSV: exact pose angles per tick and
    // the true tendon lengths, used by training and the tendon RMSE summary.
    std::vector<double> roll_true, pitch_true;
    std::vector<std::array<double, 4>> q_true;

    trajectory::TrajectorySpec traj;
    double ramp_s = 0.0;
    std::string mode_label;
    bool aborted = false;
    std::string fault;

    std::size_t size() const { return t_s.size(); }
};

struct EpisodeOptions {
    FeedbackSource feedback = FeedbackSource::GroundTruth;
    const estimator::PolyModel* model = nullptr;
    std::uint64_t rng_stream = 0;
    // Optional override of the task reference; defaults to the configured
    // trajectory. duration_s < 0 means cycles * period.
    std::function<Eigen::Vector3d(double)> reference;
    double duration_s = -1.0;
};

namespace detail {

inline std::array<double, 3> to_array(const Eigen::Vector3d& v) {
    return {v.x(), v.y(), v.z()};
}

// Per-channel sensing chain: analytic (or waveform) RMS of the carrier
// divider, additive Gaussian noise, moving average, low-pass.
class SenseChain {
  public:
    SenseChain(const config::SimConfig& cfg)
        : cfg_(&cfg),
          ma_{signal::MovingAverage(static_cast<std::size_t>(cfg.signal.ma_window)),
              signal::MovingAverage(static_cast<std::size_t>(cfg.signal.ma_window)),
              signal::MovingAverage(static_cast<std::size_t>(cfg.signal.ma_window)),
              signal::MovingAverage(static_cast<std::size_t>(cfg.signal.ma_window))} {}

    std::array<double, 4> measure(const plant::PlantState& state,
                                  const geometry::GeometryParams& geom, RandomStream& rng) {
        const std::array<double, 4> c =
            plant::contractions_at(state.roll_rad, state.pitch_rad, cfg_->hasel, geom);
        std::array<double, 4> out{};
        for (int i = 0; i < 4; ++i) {
            const auto u = static_cast<std::size_t>(i);
            const double cap = plant::capacitance_pf(c[u], cfg_->hasel);
            double v;
            if (cfg_->signal.waveform_mode) {
                v = signal::waveform_sense_rms(cap, cfg_->hasel.sense_resistance_mohm,
                                               cfg_->hasel.carrier_khz, cfg_->hasel.carrier_rms_v);
            } else {
                v = plant::sense_voltage_rms(cap, cfg_->hasel);
            }
            v += cfg_->noise.sense_sigma_v * rng.next_gaussian();
            v = ma_[u].push(v);
            if (!lp_[u])
                lp_[u].emplace(cfg_->signal.lp_cutoff_sense_hz, 1.0 / cfg_->control.rate_hz, v);
            out[u] = lp_[u]->push(v);
        }
        return out;
    }

  private:
    const config::SimConfig* cfg_;
    std::array<signal::MovingAverage, 4> ma_;
    std::array<std::optional<signal::LowPass>, 4> lp_;
};

}  // namespace detail

// Closed loop at the control rate. Each tick: sample sensing voltages and the
// feedback pose, evaluate the reference, run the controller, log, then hold
// the new commands across the plant substeps of the next interval. A plant or
// controller fault ends the episode early with the partial log kept.
inline EpisodeLog run_closed_loop(const config::SimConfig& cfg, const EpisodeOptions& opt) {
    if (!cfg.finalized) throw std::logic_error("run_closed_loop: config not finalized");
    if (opt.feedback == FeedbackSource::SelfSensing && opt.model == nullptr)
        throw ConfigError("run_closed_loop: self-sensing requires a trained model");

    const double rate = cfg.control.rate_hz;
    const double duration =
        opt.duration_s >= 0.0
            ? opt.duration_s
            : static_cast<double>(cfg.trajectory.cycles) * cfg.trajectory.period_s;
    const auto ticks = static_cast<std::size_t>(std::llround(duration * rate));
    const int substeps = cfg.substeps_per_tick();
    const double l_m = cfg.geometry.arm_length_mm;

    auto ref_fn = opt.reference;
    if (!ref_fn) {
        const trajectory::TrajectorySpec spec = cfg.trajectory;
        ref_fn = [spec, l_m](double t) { return trajectory::reference(t, spec, l_m); };
    }

    EpisodeLog log;
    log.traj = cfg.trajectory;
    log.ramp_s = cfg.trajectory.ramp_s;
    log.mode_label = opt.feedback == FeedbackSource::SelfSensing ? "selfsense" : "benchmark";
    log.t_s.reserve(ticks);

    plant::PlantState state;
    control::ControllerState ctrl(cfg.control);
    detail::SenseChain sense(cfg);
    RandomStream rng(cfg.seed, opt.rng_stream);

    const double mocap_dt = 1.0 / cfg.mocap.rate_hz;
    long long mocap_index = -1;
    Eigen::Vector3d mocap_held = Eigen::Vector3d::Zero();

    try {
        for (std::size_t k = 0; k < ticks; ++k) {
            const double t = static_cast<double>(k) / rate;

            const Eigen::Matrix3d r =
                geometry::rotation_from_euler(state.roll_rad, state.pitch_rad);
            const Eigen::Vector3d x_true = geometry::end_effector_position(r, l_m);
            const std::array<double, 4> vh = sense.measure(state, cfg.geometry, rng);

            // Mocap sample-and-hold: a fresh noisy sample whenever a new
            // mocap frame boundary has passed, held otherwise.
            const auto frame = static_cast<long long>(std::floor(t / mocap_dt + 1e-9));
            if (frame != mocap_index) {
                mocap_index = frame;
                mocap_held = x_true;
                for (int a = 0; a < 3; ++a)
                    mocap_held[a] += cfg.noise.mocap_sigma_mm * rng.next_gaussian();
            }

            Eigen::Vector3d x_fb;
            if (opt.feedback == FeedbackSource::SelfSensing) {
                x_fb = estimator::estimate_position(*opt.model, vh, l_m);
            } else {
                x_fb = mocap_held;
            }
            const geometry::TendonMapResult q_fb = geometry::tendon_reference(x_fb, cfg.geometry);

            const Eigen::Vector3d x_ref = ref_fn(t);
            const control::ControlOutput u =
                control::control_step(x_ref, q_fb.q, ctrl, cfg.control, cfg.geometry);

            const geometry::TendonMapResult q_true =
                geometry::tendon_reference(x_true, cfg.geometry);

            log.t_s.push_back(t);
            log.x_ref.push_back(detail::to_array(x_ref));
            log.x_true.push_back(detail::to_array(x_true));
            log.x_est.push_back(detail::to_array(x_fb));
            log.q_ref.push_back({u.q_ref_mm[0], u.q_ref_mm[1], u.q_ref_mm[2], u.q_ref_mm[3]});
            log.q_est.push_back({q_fb.q[0], q_fb.q[1], q_fb.q[2], q_fb.q[3]});
            log.v_cmd.push_back(u.commands_kv);
            log.v_sense.push_back(vh);
            log.sat.push_back(u.saturated);
            log.roll_true.push_back(state.roll_rad);
            log.pitch_true.push_back(state.pitch_rad);
            log.q_true.push_back({q_true.q[0], q_true.q[1], q_true.q[2], q_true.q[3]});

            for (int s = 0; s < substeps; ++s)
                state = plant::step_dynamics(state, u.commands_kv, cfg.hasel, cfg.body,
                                             cfg.geometry);
        }
    } catch (const RuntimeFault& e) {
        log.aborted = true;
        log.fault = e.what();
    }
    return log;
}

// Open-loop antagonistic sinusoid: V(t) = V_amp (1 + sin(2 pi f t)) / 2 on the
// first channel of the driven pair, with the antagonist half a period behind.
inline EpisodeLog run_openloop(const config::SimConfig& cfg, std::uint64_t rng_stream = 0) {
    if (!cfg.finalized) throw std::logic_error("run_openloop: config not finalized");
    const double rate = cfg.control.rate_hz;
    const auto ticks = static_cast<std::size_t>(std::llround(cfg.openloop.duration_s * rate));
    const int substeps = cfg.substeps_per_tick();
    const double l_m = cfg.geometry.arm_length_mm;

    EpisodeLog log;
    log.traj = cfg.trajectory;
    log.ramp_s = 0.0;
    log.mode_label = "openloop";
    log.t_s.reserve(ticks);

    plant::PlantState state;
    detail::SenseChain sense(cfg);
    RandomStream rng(cfg.seed, rng_stream);

    const Eigen::Vector3d rest(0.0, 0.0, -l_m);
    const geometry::TendonMapResult q_rest = geometry::tendon_reference(rest, cfg.geometry);
    const double amp = cfg.openloop.v_amp_kv;
    const double omega = 2.0 * std::numbers::pi * cfg.openloop.freq_hz;
    const bool drive_x = cfg.openloop.pair != config::DrivePair::Y;
    const bool drive_y = cfg.openloop.pair != config::DrivePair::X;

    try {
        for (std::size_t k = 0; k < ticks; ++k) {
            const double t = static_cast<double>(k) / rate;
            const double lead = amp * (1.0 + std::sin(omega * t)) / 2.0;
            const double lag = amp * (1.0 - std::sin(omega * t)) / 2.0;
            std::array<double, 4> cmd{};
            if (drive_x) {
                cmd[0] = lead;
                cmd[1] = lag;
            }
            if (drive_y) {
                cmd[2] = lead;
                cmd[3] = lag;
            }

            const Eigen::Matrix3d r =
                geometry::rotation_from_euler(state.roll_rad, state.pitch_rad);
            const Eigen::Vector3d x_true = geometry::end_effector_position(r, l_m);
            const std::array<double, 4> vh = sense.measure(state, cfg.geometry, rng);
            const geometry::TendonMapResult q_now =
                geometry::tendon_reference(x_true, cfg.geometry);

            log.t_s.push_back(t);
            log.x_ref.push_back(detail::to_array(rest));
            log.x_true.push_back(detail::to_array(x_true));
            log.x_est.push_back(detail::to_array(x_true));
            log.q_ref.push_back({q_rest.q[0], q_rest.q[1], q_rest.q[2], q_rest.q[3]});
            log.q_est.push_back({q_now.q[0], q_now.q[1], q_now.q[2], q_now.q[3]});
            log.v_cmd.push_back(cmd);
            log.v_sense.push_back(vh);
            log.sat.push_back({false, false, false, false});
            log.roll_true.push_back(state.roll_rad);
            log.pitch_true.push_back(state.pitch_rad);
            log.q_true.push_back({q_now.q[0], q_now.q[1], q_now.q[2], q_now.q[3]});

            for (int s = 0; s < substeps; ++s)
                state = plant::step_dynamics(state, cmd, cfg.hasel, cfg.body, cfg.geometry);
        }
    } catch (const RuntimeFault& e) {
        log.aborted = true;
        log.fault = e.what();
    }
    return log;
}

struct OpenLoopStats {
    double roll_p2p_deg = 0.0;
    double pitch_p2p_deg = 0.0;
    double driven_p2p_deg = 0.0;
};

inline OpenLoopStats openloop_stats(const EpisodeLog& log, config::DrivePair pair) {
    if (log.size() == 0) throw std::domain_error("openloop_stats: empty log");
    const auto [rmin, rmax] = std::minmax_element(log.roll_true.begin(), log.roll_true.end());
    const auto [pmin, pmax] = std::minmax_element(log.pitch_true.begin(), log.pitch_true.end());
    OpenLoopStats s;
    const double deg = 180.0 / std::numbers::pi;
    s.roll_p2p_deg = (*rmax - *rmin) * deg;
    s.pitch_p2p_deg = (*pmax - *pmin) * deg;
    // The x-anchored pair swings the arm in the x-z plane (pitch), the
    // y-anchored pair in the y-z plane (roll).
    switch (pair) {
        case config::DrivePair::X: s.driven_p2p_deg = s.pitch_p2p_deg; break;
        case config::DrivePair::Y: s.driven_p2p_deg = s.roll_p2p_deg; break;
        case config::DrivePair::Both:
            s.driven_p2p_deg = std::max(s.roll_p2p_deg, s.pitch_p2p_deg);
            break;
    }
    return s;
}

// Task-space RMSE over the post-ramp window.
inline double rmse_task(const EpisodeLog& log, double window_start_s) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < log.size(); ++k) {
        if (log.t_s[k] < window_start_s - 1e-12) continue;
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            const double d = log.x_true[k][ua] - log.x_ref[k][ua];
            d2 += d * d;
        }
        acc += d2;
        ++n;
    }
    if (n == 0) throw std::domain_error("rmse_task: empty post-ramp window");
    return std::sqrt(acc / static_cast<double>(n));
}

// Per-channel RMSE of true tendon length against the reference, post-ramp.
inline std::array<double, 4> rmse_tendon(const EpisodeLog& log, double window_start_s) {
    std::array<double, 4> acc{};
    std::size_t n = 0;
    for (std::size_t k = 0; k < log.size(); ++k) {
        if (log.t_s[k] < window_start_s - 1e-12) continue;
        for (std::size_t u = 0; u < 4; ++u) {
            const double d = log.q_true[k][u] - log.q_ref[k][u];
            acc[u] += d * d;
        }
        ++n;
    }
    if (n == 0) throw std::domain_error("rmse_tendon: empty post-ramp window");
    for (std::size_t u = 0; u < 4; ++u) acc[u] = std::sqrt(acc[u] / static_cast<double>(n));
    return acc;
}

inline double increase_pct(double rmse_ss, double rmse_bm) {
    if (!(rmse_bm > 0.0)) throw std::domain_error("increase_pct: benchmark RMSE must be positive");
    return 100.0 * (rmse_ss - rmse_bm) / rmse_bm;
}

// episode.csv writer. Column set and order are fixed; sat flags are 0/1.
inline void write_csv(const EpisodeLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeFault("write_csv: cannot open " + path);
    out << "t_s,xr_x,xr_y,xr_z,x_x,x_y,x_z,xe_x,xe_y,xe_z,"
           "qr_1,qr_2,qr_3,qr_4,qe_1,qe_2,qe_3,qe_4,"
           "vcmd_1,vcmd_2,vcmd_3,vcmd_4,vh_1,vh_2,vh_3,vh_4,"
           "sat_1,sat_2,sat_3,sat_4\n";
    char buf[64];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        out << buf << sep;
    };
    for (std::size_t k = 0; k < log.size(); ++k) {
        put(log.t_s[k], ',');
        for (int a = 0; a < 3; ++a) put(log.x_ref[k][static_cast<std::size_t>(a)], ',');
        for (int a = 0; a < 3; ++a) put(log.x_true[k][static_cast<std::size_t>(a)], ',');
        for (int a = 0; a < 3; ++a) put(log.x_est[k][static_cast<std::size_t>(a)], ',');
        for (std::size_t u = 0; u < 4; ++u) put(log.q_ref[k][u], ',');
        for (std::size_t u = 0; u < 4; ++u) put(log.q_est[k][u], ',');
        for (std::size_t u = 0; u < 4; ++u) put(log.v_cmd[k][u], ',');
        for (std::size_t u = 0; u < 4; ++u) put(log.v_sense[k][u], ',');
        for (std::size_t u = 0; u < 4; ++u)
            out << (log.sat[k][u] ? 1 : 0) << (u == 3 ? '\n' : ',');
    }
    if (!out) throw RuntimeFault("write_csv: write failed for " + path);
}

// Builds an episode variant of a parsed (not yet finalized) config: fixes the
// trajectory kind, restores that kind's default period when the file did not
// pin one, and falls back to the kind's preset when no gains were given.
inline config::SimConfig episode_config(const config::SimConfig& raw, trajectory::Kind kind,
                                        const char* preset_suffix) {
    config::SimConfig c = raw;
    if (c.finalized)
        throw std::logic_error("episode_config: expects a config before finalize()");
    c.trajectory.kind = kind;
    c.keys_seen.insert("trajectory.kind");
    if (!c.key_set("trajectory.period_s"))
        c.trajectory.period_s = kind == trajectory::Kind::Star ? 40.0 : 25.0;
    const bool gains_given =
        c.key_set("control.kp") || c.key_set("control.ki") || c.key_set("control.kd");
    if (c.preset_name.empty() && !gains_given) {
        c.preset_name = std::string(kind == trajectory::Kind::Star ? "star" : "lemni") + "_" +
                        preset_suffix;
    }
    c.finalize();
    return c;
}

// Drops user gain and preset overrides so the per-trajectory preset pair is
// used; train and evaluate rely on the fixed benchmark / self-sensing rows.
inline config::SimConfig strip_gain_overrides(config::SimConfig raw) {
    raw.preset_name.clear();
    raw.keys_seen.erase("control.kp");
    raw.keys_seen.erase("control.ki");
    raw.keys_seen.erase("control.kd");
    return raw;
}

// Runs ground-truth benchmark episodes for both trajectory kinds, collects the
// filtered sensing voltages with the exact pose angles from the post-ramp
// window, and fits the pose polynomial.
inline estimator::PolyModel train_pipeline(const config::SimConfig& raw_in) {
    const config::SimConfig raw = strip_gain_overrides(raw_in);
    std::vector<estimator::Sample> inputs;
    std::vector<estimator::Angles> targets;
    const std::array<trajectory::Kind, 2> kinds{trajectory::Kind::Lemniscate,
                                                trajectory::Kind::Star};
    std::array<int, 2> episode_count{};
    for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
        const config::SimConfig cfg = episode_config(raw, kinds[ki], "bm");
        for (int e = 0; e < cfg.train.episodes_per_kind; ++e) {
            EpisodeOptions opt;
            opt.feedback = FeedbackSource::GroundTruth;
            opt.rng_stream = ki * 64 + static_cast<std::uint64_t>(e);
            const EpisodeLog log = run_closed_loop(cfg, opt);
            if (log.aborted)
                throw RuntimeFault("train_pipeline: episode aborted: " + log.fault);
            for (std::size_t k = 0; k < log.size(); ++k) {
                if (log.t_s[k] < log.ramp_s - 1e-12) continue;
                inputs.push_back(log.v_sense[k]);
                targets.push_back({log.roll_true[k], log.pitch_true[k]});
            }
            ++episode_count[ki];
        }
    }
    estimator::PolyModel model = estimator::fit(inputs, targets, raw.train.test_frac, raw.seed,
                                                raw.train.time_blocked);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "benchmark episodes, post-ramp: lemniscate x%d, star x%d",
                  episode_count[0], episode_count[1]);
    model.meta.source = buf;
    std::snprintf(buf, sizeof buf, "moving_average_%d+lowpass_%.6ghz", raw.signal.ma_window,
                  raw.signal.lp_cutoff_sense_hz);
    model.meta.input_filter = buf;
    return model;
}

struct CompareReport {
    std::string trajectory;
    double rmse_bm_mm = 0.0;
    double rmse_ss_mm = 0.0;
    double increase_pct = 0.0;
    std::array<double, 4> rmse_tendon_bm_mm{};
    std::array<double, 4> rmse_tendon_ss_mm{};
};

inline CompareReport compare_logs(const EpisodeLog& bm, const EpisodeLog& ss) {
    if (!bm.traj.same_path(ss.traj))
        throw std::domain_error("compare_logs: trajectory specs differ");
    CompareReport r;
    r.trajectory = bm.traj.kind == trajectory::Kind::Star ? "star" : "lemniscate";
    r.rmse_bm_mm = rmse_task(bm, bm.ramp_s);
    r.rmse_ss_mm = rmse_task(ss, ss.ramp_s);
    r.increase_pct = increase_pct(r.rmse_ss_mm, r.rmse_bm_mm);
    r.rmse_tendon_bm_mm = rmse_tendon(bm, bm.ramp_s);
    r.rmse_tendon_ss_mm = rmse_tendon(ss, ss.ramp_s);
    return r;
}

struct EvaluateResult {
    EpisodeLog benchmark;
    EpisodeLog selfsense;
    CompareReport report;
};

// Benchmark and self-sensing episodes on the configured trajectory, run
// concurrently with independent RNG streams, then compared.
inline EvaluateResult evaluate(const config::SimConfig& raw_in, const estimator::PolyModel& model) {
    const config::SimConfig raw = strip_gain_overrides(raw_in);
    const config::SimConfig cfg_bm = episode_config(raw, raw.trajectory.kind, "bm");
    const config::SimConfig cfg_ss = episode_config(raw, raw.trajectory.kind, "ss");

    auto bm_future = std::async(std::launch::async, [&cfg_bm]() {
        EpisodeOptions opt;
        opt.feedback = FeedbackSource::GroundTruth;
        opt.rng_stream = 0;
        return run_closed_loop(cfg_bm, opt);
    });
    auto ss_future = std::async(std::launch::async, [&cfg_ss, &model]() {
        EpisodeOptions opt;
        opt.feedback = FeedbackSource::SelfSensing;
        opt.model = &model;
        opt.rng_stream = 1;
        return run_closed_loop(cfg_ss, opt);
    });

    EvaluateResult res{bm_future.get(), ss_future.get(), {}};
    if (res.benchmark.aborted)
        throw RuntimeFault("evaluate: benchmark episode aborted: " + res.benchmark.fault);
    if (res.selfsense.aborted)
        throw RuntimeFault("evaluate: self-sensing episode aborted: " + res.selfsense.fault);
    res.report = compare_logs(res.benchmark, res.selfsense);
    return res;
}

inline nlohmann::ordered_json report_to_json(const CompareReport& r) {
    nlohmann::ordered_json j;
    j["trajectory"] = r.trajectory;
    j["rmse_task_bm_mm"] = r.rmse_bm_mm;
    j["rmse_task_ss_mm"] = r.rmse_ss_mm;
    j["increase_pct"] = r.increase_pct;
    j["rmse_tendon_bm_mm"] = r.rmse_tendon_bm_mm;
    j["rmse_tendon_ss_mm"] = r.rmse_tendon_ss_mm;
    return j;
}

// summary.json for the single-episode modes.
inline nlohmann::ordered_json summary_json(const config::SimConfig& cfg, const EpisodeLog& log) {
    nlohmann::ordered_json j;
    j["mode"] = log.mode_label;
    j["seed"] = cfg.seed;
    j["ticks"] = log.size();
    j["aborted"] = log.aborted;
    if (log.aborted) j["fault"] = log.fault;
    if (log.mode_label == "openloop") {
        if (!log.aborted) {
            const OpenLoopStats s = openloop_stats(log, cfg.openloop.pair);
            j["roll_p2p_deg"] = s.roll_p2p_deg;
            j["pitch_p2p_deg"] = s.pitch_p2p_deg;
            j["driven_p2p_deg"] = s.driven_p2p_deg;
        }
    } else if (!log.aborted) {
        j["rmse_task_mm"] = rmse_task(log, log.ramp_s);
        j["rmse_tendon_mm"] = rmse_tendon(log, log.ramp_s);
    }
    j["config"] = config::config_to_json(cfg);
    return j;
}

}  // namespace antago::harness
