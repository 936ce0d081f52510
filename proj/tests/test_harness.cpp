#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "antago/harness.hpp"

using namespace antago;
using Catch::Matchers::WithinAbs;

namespace {

config::SimConfig parsed(const std::string& text) {
    std::istringstream in(text);
    return config::parse_config(in);
}

config::SimConfig finalized(const std::string& text) {
    auto c = parsed(text);
    c.finalize();
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Minimal hand-built log: constant offset between truth and reference.
harness::EpisodeLog offset_log(int rows, double dx) {
    harness::EpisodeLog log;
    for (int k = 0; k < rows; ++k) {
        log.t_s.push_back(static_cast<double>(k));
        log.x_ref.push_back({0.0, 0.0, -100.0});
        log.x_true.push_back({dx, dx, -100.0 + dx});
        log.x_est.push_back({dx, dx, -100.0 + dx});
        log.q_ref.push_back({3.75, 3.75, 3.75, 3.75});
        log.q_est.push_back({3.75, 3.75, 3.75, 3.75});
        log.q_true.push_back({3.75 + dx, 3.75, 3.75, 3.75});
        log.v_cmd.push_back({1.0, 2.0, 3.0, 4.0});
        log.v_sense.push_back({0.5, 0.6, 0.7, 0.8});
        log.sat.push_back({false, true, false, false});
        log.roll_true.push_back(0.0);
        log.pitch_true.push_back(0.0);
    }
    return log;
}

}  // namespace

TEST_CASE("task rmse of a constant unit offset is sqrt 3") {
    const auto log = offset_log(10, 1.0);
    REQUIRE_THAT(harness::rmse_task(log, 0.0), WithinAbs(std::sqrt(3.0), 1e-12));
    // Window start excludes earlier rows but the offset is constant anyway.
    REQUIRE_THAT(harness::rmse_task(log, 5.0), WithinAbs(std::sqrt(3.0), 1e-12));
    REQUIRE_THROWS_AS(harness::rmse_task(log, 99.0), std::domain_error);
}

TEST_CASE("tendon rmse is per channel") {
    const auto log = offset_log(4, 0.5);
    const auto r = harness::rmse_tendon(log, 0.0);
    REQUIRE_THAT(r[0], WithinAbs(0.5, 1e-12));
    REQUIRE_THAT(r[1], WithinAbs(0.0, 1e-12));
    REQUIRE_THROWS_AS(harness::rmse_tendon(log, 99.0), std::domain_error);
}

TEST_CASE("rmse increase percentages reproduce the reference roundings") {
    REQUIRE(harness::increase_pct(2.0, 2.0) == 0.0);
    const double lemni = harness::increase_pct(4.245, 2.869);
    REQUIRE_THAT(lemni, WithinAbs(47.9609620076682, 1e-10));
    REQUIRE(std::round(lemni * 10.0) / 10.0 == 48.0);
    const double star = harness::increase_pct(3.407, 2.798);
    REQUIRE_THAT(star, WithinAbs(21.7655468191565, 1e-10));
    REQUIRE(std::round(star * 10.0) / 10.0 == 21.8);
    REQUIRE_THROWS_AS(harness::increase_pct(1.0, 0.0), std::domain_error);
}

TEST_CASE("csv writer emits the fixed header and identical bytes") {
    const auto log = offset_log(3, 0.25);
    harness::write_csv(log, "test_csv_a.csv");
    harness::write_csv(log, "test_csv_b.csv");
    const std::string a = slurp("test_csv_a.csv");
    REQUIRE(a == slurp("test_csv_b.csv"));
    const std::string header =
        "t_s,xr_x,xr_y,xr_z,x_x,x_y,x_z,xe_x,xe_y,xe_z,"
        "qr_1,qr_2,qr_3,qr_4,qe_1,qe_2,qe_3,qe_4,"
        "vcmd_1,vcmd_2,vcmd_3,vcmd_4,vh_1,vh_2,vh_3,vh_4,"
        "sat_1,sat_2,sat_3,sat_4\n";
    REQUIRE(a.substr(0, header.size()) == header);
    // 3 data rows, sat flags as 0/1.
    REQUIRE(std::count(a.begin(), a.end(), '\n') == 4);
    REQUIRE(a.find(",0,1,0,0\n") != std::string::npos);
    std::remove("test_csv_a.csv");
    std::remove("test_csv_b.csv");
}

TEST_CASE("zero amplitude open loop stays exactly at rest") {
    auto cfg = finalized("openloop.v_amp_kv = 0\nopenloop.duration_s = 1\n");
    const auto log = harness::run_openloop(cfg);
    REQUIRE(log.size() == 200);
    REQUIRE_FALSE(log.aborted);
    for (std::size_t k = 0; k < log.size(); ++k) {
        REQUIRE(log.roll_true[k] == 0.0);
        REQUIRE(log.pitch_true[k] == 0.0);
        REQUIRE(log.x_true[k][2] == -100.0);
    }
    const auto stats = harness::openloop_stats(log, cfg.openloop.pair);
    REQUIRE(stats.driven_p2p_deg == 0.0);
}

TEST_CASE("open loop drive is antagonistic on the selected pair") {
    auto cfg = finalized("openloop.duration_s = 0.5\n");
    const auto log = harness::run_openloop(cfg);
    for (std::size_t k = 0; k < log.size(); ++k) {
        // Half-period phase shift means the pair always sums to the amplitude.
        REQUIRE_THAT(log.v_cmd[k][0] + log.v_cmd[k][1], WithinAbs(5.5, 1e-12));
        REQUIRE(log.v_cmd[k][2] == 0.0);
        REQUIRE(log.v_cmd[k][3] == 0.0);
    }

    auto cfg_y = finalized("openloop.duration_s = 0.5\nopenloop.pair = y\n");
    const auto log_y = harness::run_openloop(cfg_y);
    for (std::size_t k = 0; k < log_y.size(); ++k) {
        REQUIRE(log_y.v_cmd[k][0] == 0.0);
        REQUIRE_THAT(log_y.v_cmd[k][2] + log_y.v_cmd[k][3], WithinAbs(5.5, 1e-12));
    }
}

TEST_CASE("episodes are deterministic and rng streams are independent") {
    auto cfg = finalized("seed = 42\n");
    harness::EpisodeOptions opt;
    opt.duration_s = 1.0;
    const auto a = harness::run_closed_loop(cfg, opt);
    const auto b = harness::run_closed_loop(cfg, opt);
    REQUIRE(a.size() == b.size());
    REQUIRE(a.v_sense == b.v_sense);
    REQUIRE(a.x_true == b.x_true);
    REQUIRE(a.v_cmd == b.v_cmd);

    harness::EpisodeOptions other = opt;
    other.rng_stream = 1;
    const auto c = harness::run_closed_loop(cfg, other);
    REQUIRE(a.v_sense != c.v_sense);
}

TEST_CASE("mocap feedback is sampled and held between frames") {
    auto cfg = finalized("seed = 3\n");
    harness::EpisodeOptions opt;
    opt.duration_s = 1.0;
    const auto log = harness::run_closed_loop(cfg, opt);
    // 150 Hz frames under a 200 Hz loop: a held value repeats at most once,
    // and with Gaussian mocap noise fresh frames are distinct.
    int run_len = 1;
    bool saw_hold = false;
    for (std::size_t k = 1; k < log.size(); ++k) {
        if (log.x_est[k] == log.x_est[k - 1]) {
            ++run_len;
            saw_hold = true;
            REQUIRE(run_len <= 2);
        } else {
            run_len = 1;
        }
    }
    REQUIRE(saw_hold);
}

TEST_CASE("self sensing mode needs a model") {
    auto cfg = finalized("");
    harness::EpisodeOptions opt;
    opt.feedback = harness::FeedbackSource::SelfSensing;
    opt.duration_s = 0.1;
    REQUIRE_THROWS_AS(harness::run_closed_loop(cfg, opt), ConfigError);
}

TEST_CASE("runners refuse a config that skipped finalize") {
    auto raw = parsed("");
    harness::EpisodeOptions opt;
    REQUIRE_THROWS_AS(harness::run_closed_loop(raw, opt), std::logic_error);
    REQUIRE_THROWS_AS(harness::run_openloop(raw), std::logic_error);
}

TEST_CASE("a runtime fault aborts the episode and keeps the partial log") {
    auto cfg = finalized("");
    harness::EpisodeOptions opt;
    opt.duration_s = 1.0;
    opt.reference = [](double t) {
        if (t >= 0.1) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            return Eigen::Vector3d(nan, nan, nan);
        }
        return Eigen::Vector3d(0.0, 0.0, -100.0);
    };
    const auto log = harness::run_closed_loop(cfg, opt);
    REQUIRE(log.aborted);
    REQUIRE(log.size() == 20);  // ticks before the poisoned reference
    REQUIRE(log.fault.find("non-finite") != std::string::npos);
}

TEST_CASE("episode variants pin the kind and fall back to its preset") {
    auto raw = parsed("seed = 5\n");
    const auto star = harness::episode_config(raw, trajectory::Kind::Star, "ss");
    REQUIRE(star.finalized);
    REQUIRE(star.trajectory.kind == trajectory::Kind::Star);
    REQUIRE(star.trajectory.period_s == 40.0);
    REQUIRE(star.preset_name == "star_ss");
    const auto* row = control::find_preset("star_ss");
    REQUIRE(star.control.gains.kp == row->kp);

    const auto lemni = harness::episode_config(raw, trajectory::Kind::Lemniscate, "bm");
    REQUIRE(lemni.trajectory.period_s == 25.0);
    REQUIRE(lemni.preset_name == "lemni_bm");

    // Explicit gains suppress the fallback.
    auto manual = parsed("control.kp = 1,1,1,1\n");
    const auto kept = harness::episode_config(manual, trajectory::Kind::Star, "bm");
    REQUIRE(kept.preset_name.empty());
    REQUIRE(kept.control.gains.kp == std::array<double, 4>{1.0, 1.0, 1.0, 1.0});

    auto done = finalized("");
    REQUIRE_THROWS_AS(harness::episode_config(done, trajectory::Kind::Star, "bm"),
                      std::logic_error);
}

TEST_CASE("gain overrides are stripped for train and evaluate") {
    auto raw = parsed("control.preset = lemni_bm\ncontrol.kp = 9,9,9,9\n");
    const auto stripped = harness::strip_gain_overrides(raw);
    REQUIRE(stripped.preset_name.empty());
    REQUIRE_FALSE(stripped.key_set("control.kp"));
    REQUIRE(stripped.key_set("control.preset") == raw.key_set("control.preset"));
}

TEST_CASE("compare_logs rejects mismatched trajectories") {
    harness::EpisodeLog bm = offset_log(5, 0.1);
    harness::EpisodeLog ss = offset_log(5, 0.2);
    ss.traj.amplitude_mm = 99.0;
    REQUIRE_THROWS_AS(harness::compare_logs(bm, ss), std::domain_error);

    ss.traj = bm.traj;
    const auto rep = harness::compare_logs(bm, ss);
    REQUIRE_THAT(rep.rmse_bm_mm, WithinAbs(0.1 * std::sqrt(3.0), 1e-12));
    REQUIRE_THAT(rep.increase_pct, WithinAbs(100.0, 1e-9));
    REQUIRE(rep.trajectory == "lemniscate");
}

TEST_CASE("summary json covers both episode shapes") {
    auto cfg = finalized("openloop.duration_s = 0.5\nopenloop.v_amp_kv = 0\n");
    const auto ol = harness::run_openloop(cfg);
    const auto j = harness::summary_json(cfg, ol);
    REQUIRE(j.at("mode") == "openloop");
    REQUIRE(j.at("ticks").get<std::size_t>() == 100);
    REQUIRE(j.at("aborted") == false);
    REQUIRE(j.contains("driven_p2p_deg"));
    REQUIRE(j.at("config").at("openloop").at("v_amp_kv").get<double>() == 0.0);

    harness::EpisodeOptions opt;
    opt.duration_s = 0.5;
    auto cl_cfg = finalized("trajectory.ramp_s = 0.1\n");
    const auto cl = harness::run_closed_loop(cl_cfg, opt);
    const auto jc = harness::summary_json(cl_cfg, cl);
    REQUIRE(jc.at("mode") == "benchmark");
    REQUIRE(jc.contains("rmse_task_mm"));
    REQUIRE(jc.contains("rmse_tendon_mm"));
}

TEST_CASE("mirrored constant references produce mirrored episodes") {
    const std::string quiet =
        "noise.sense_sigma_v = 0\n"
        "noise.mocap_sigma_mm = 0\n"
        "plant.strain_scale = 1, 1, 1, 1\n"
        "control.kp = 0.8, 0.8, 0.8, 0.8\n"
        "control.ki = 0.4, 0.4, 0.4, 0.4\n";
    auto cfg = finalized(quiet);
    harness::EpisodeOptions opt;
    opt.duration_s = 2.0;
    opt.reference = [](double) { return Eigen::Vector3d(10.0, 0.0, -std::sqrt(9900.0)); };
    const auto pos = harness::run_closed_loop(cfg, opt);
    opt.reference = [](double) { return Eigen::Vector3d(-10.0, 0.0, -std::sqrt(9900.0)); };
    const auto neg = harness::run_closed_loop(cfg, opt);
    REQUIRE_FALSE(pos.aborted);
    REQUIRE_FALSE(neg.aborted);
    for (std::size_t k = 0; k < pos.size(); k += 25) {
        REQUIRE_THAT(pos.pitch_true[k], WithinAbs(-neg.pitch_true[k], 1e-9));
        REQUIRE_THAT(pos.roll_true[k], WithinAbs(neg.roll_true[k], 1e-9));
        REQUIRE_THAT(pos.v_cmd[k][0], WithinAbs(neg.v_cmd[k][1], 1e-9));
        REQUIRE_THAT(pos.v_cmd[k][1], WithinAbs(neg.v_cmd[k][0], 1e-9));
    }
}

TEST_CASE("a held reference is eventually tracked") {
    auto cfg = finalized("noise.mocap_sigma_mm = 0\ncontrol.preset = lemni_bm\n");
    harness::EpisodeOptions opt;
    opt.duration_s = 8.0;
    opt.reference = [](double) { return Eigen::Vector3d(8.0, 0.0, -std::sqrt(9936.0)); };
    const auto log = harness::run_closed_loop(cfg, opt);
    REQUIRE_FALSE(log.aborted);
    const std::size_t last = log.size() - 1;
    double err = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double d = log.x_true[last][static_cast<std::size_t>(a)] -
                         log.x_ref[last][static_cast<std::size_t>(a)];
        err += d * d;
    }
    REQUIRE(std::sqrt(err) < 1.0);
}
