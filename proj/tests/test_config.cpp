#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "antago/config.hpp"

using namespace antago;
using Catch::Matchers::WithinAbs;

namespace {
config::SimConfig parse(const std::string& text) {
    std::istringstream in(text);
    return config::parse_config(in);
}
}  // namespace

TEST_CASE("empty config resolves to the documented defaults") {
    auto c = parse("");
    c.finalize();
    REQUIRE(c.geometry.ball_radius_mm == 4.0);
    REQUIRE(c.geometry.tendon_radius_mm == 5.0);
    REQUIRE(c.geometry.half_stroke_mm == 3.75);
    REQUIRE(c.geometry.arm_length_mm == 100.0);
    REQUIRE(c.hasel.stroke_mm == 7.5);
    REQUIRE(c.control.rate_hz == 200.0);
    REQUIRE(c.signal.ma_window == 20);
    REQUIRE(c.signal.lp_cutoff_sense_hz == 10.0);
    REQUIRE(c.mocap.rate_hz == 150.0);
    REQUIRE(c.trajectory.kind == trajectory::Kind::Lemniscate);
    REQUIRE(c.trajectory.period_s == 25.0);
    REQUIRE(c.trajectory.cycles == 2);
    REQUIRE(c.seed == 0);
    REQUIRE(c.substeps_per_tick() == 50);
    // The bench table is solved during finalize.
    REQUIRE_THAT(c.hasel.free_strain, WithinAbs(0.06934, 1e-12));
    REQUIRE_THAT(c.hasel.blocked_force_5kv_n, WithinAbs(2.1942754838709697, 1e-12));
}

TEST_CASE("explicit keys override their defaults") {
    auto c = parse(
        "geometry.l_m_mm = 120\n"
        "plant.mass_kg = 0.01\n"
        "signal.waveform_mode = on\n"
        "trajectory.amplitude_mm = 25\n"
        "noise.sense_sigma_v = 0.02\n"
        "openloop.pair = y\n"
        "control.amp_scale = 2, 1, 1, 1\n"
        "seed = 12345\n");
    REQUIRE(c.geometry.arm_length_mm == 120.0);
    REQUIRE(c.body.mass_kg == 0.01);
    REQUIRE(c.signal.waveform_mode);
    REQUIRE(c.trajectory.amplitude_mm == 25.0);
    REQUIRE(c.noise.sense_sigma_v == 0.02);
    REQUIRE(c.openloop.pair == config::DrivePair::Y);
    REQUIRE(c.control.amp_scale == std::array<double, 4>{2.0, 1.0, 1.0, 1.0});
    REQUIRE(c.seed == 12345);
    c.finalize();
    REQUIRE(c.finalized);
}

TEST_CASE("comments and whitespace are tolerated") {
    auto c = parse(
        "# leading comment\n"
        "\n"
        "  geometry.r_t_mm   =  6.0   # trailing comment\n"
        "\t\n");
    REQUIRE(c.geometry.tendon_radius_mm == 6.0);
    REQUIRE(c.key_set("geometry.r_t_mm"));
    REQUIRE_FALSE(c.key_set("geometry.r_s_mm"));
}

TEST_CASE("malformed input is rejected with ConfigError") {
    REQUIRE_THROWS_AS(parse("no equals sign here\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("unknown.key = 1\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("seed = 1\nseed = 2\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("plant.mass_kg = heavy\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("plant.mass_kg = 1.0x\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("plant.mass_kg =\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("= 3\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("control.kp = 1, 2, 3\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("control.kp = 1, 2, 3, 4, 5\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("trajectory.kind = circle\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("openloop.pair = z\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("signal.waveform_mode = maybe\n"), ConfigError);
    REQUIRE_THROWS_AS(parse("signal.ma_window = 2.5\n"), ConfigError);
}

TEST_CASE("stroke follows the joint geometry unless pinned") {
    auto derived = parse("geometry.q_t_mm = 3\n");
    derived.finalize();
    REQUIRE(derived.hasel.stroke_mm == 6.0);

    auto pinned = parse("geometry.q_t_mm = 3\nplant.stroke_mm = 5\n");
    pinned.finalize();
    REQUIRE(pinned.hasel.stroke_mm == 5.0);
}

TEST_CASE("star episodes default to the slower period") {
    auto star = parse("trajectory.kind = star\n");
    star.finalize();
    REQUIRE(star.trajectory.period_s == 40.0);

    auto pinned = parse("trajectory.kind = star\ntrajectory.period_s = 33\n");
    pinned.finalize();
    REQUIRE(pinned.trajectory.period_s == 33.0);

    auto via_preset = parse("control.preset = star_bm\n");
    via_preset.finalize();
    REQUIRE(via_preset.trajectory.kind == trajectory::Kind::Star);
    REQUIRE(via_preset.trajectory.period_s == 40.0);
}

TEST_CASE("direct force keys switch off the bench calibration") {
    auto direct = parse("plant.blocked_force_5kv_n = 2.5\n");
    direct.finalize();
    REQUIRE(direct.hasel.blocked_force_5kv_n == 2.5);
    REQUIRE_THAT(direct.hasel.free_strain, WithinAbs(0.06934, 1e-12));

    auto table = parse(
        "plant.cal_load1_kg = 0.010\n"
        "plant.cal_strain1 = 0.060\n"
        "plant.cal_load2_kg = 0.030\n"
        "plant.cal_strain2 = 0.050\n");
    table.finalize();
    // Hand solve of the two-point line for the replacement table.
    const double f1 = 0.010 * 9.81, f2 = 0.030 * 9.81;
    const double eps_max = (f1 * 0.050 - f2 * 0.060) / (f1 - f2);
    REQUIRE_THAT(table.hasel.free_strain, WithinAbs(eps_max, 1e-12));
    REQUIRE_THAT(table.hasel.blocked_force_5kv_n, WithinAbs(f1 / (1.0 - 0.060 / eps_max), 1e-12));
}

TEST_CASE("presets fill only the gains the file left open") {
    auto c = parse("control.preset = lemni_bm\ncontrol.kp = 1, 1, 1, 1\n");
    c.finalize();
    REQUIRE(c.control.gains.kp == std::array<double, 4>{1.0, 1.0, 1.0, 1.0});
    REQUIRE_THAT(c.control.gains.ki[0], WithinAbs(0.4, 1e-12));
    REQUIRE_THAT(c.control.gains.kd[0], WithinAbs(0.0025, 1e-12));
    REQUIRE(c.trajectory.kind == trajectory::Kind::Lemniscate);

    auto bad = parse("control.preset = warp9\n");
    REQUIRE_THROWS_AS(bad.finalize(), ConfigError);
}

TEST_CASE("finalize propagates shared limits into the controller") {
    auto c = parse("plant.v_max_kv = 6.0\nsignal.lp_cutoff_cmd_hz = 12\n");
    c.finalize();
    REQUIRE(c.control.v_max_kv == 6.0);
    REQUIRE(c.control.cmd_lowpass_hz == 12.0);
}

TEST_CASE("the plant step must divide the control period") {
    auto bad = parse("plant.dt_s = 3e-4\n");
    REQUIRE_THROWS_AS(bad.finalize(), ConfigError);

    auto fine = parse("plant.dt_s = 2.5e-4\n");
    fine.finalize();
    REQUIRE(fine.substeps_per_tick() == 20);
}

TEST_CASE("finalize validates section contents") {
    auto bad_noise = parse("noise.sense_sigma_v = -0.1\n");
    REQUIRE_THROWS_AS(bad_noise.finalize(), ConfigError);
    auto bad_amp = parse("openloop.v_amp_kv = 9\n");
    REQUIRE_THROWS_AS(bad_amp.finalize(), ConfigError);
    auto bad_frac = parse("train.test_frac = 1\n");
    REQUIRE_THROWS_AS(bad_frac.finalize(), ConfigError);
    auto bad_window = parse("signal.ma_window = 0\n");
    REQUIRE_THROWS_AS(bad_window.finalize(), ConfigError);
}

TEST_CASE("finalize is idempotent") {
    auto c = parse("control.preset = star_ss\n");
    c.finalize();
    const auto kp = c.control.gains.kp;
    c.finalize();
    REQUIRE(c.control.gains.kp == kp);
}

TEST_CASE("json echo mirrors the resolved configuration") {
    auto c = parse("control.preset = lemni_ss\nseed = 7\n");
    c.finalize();
    const auto j = config::config_to_json(c);
    REQUIRE(j.at("geometry").at("r_s_mm").get<double>() == 4.0);
    REQUIRE(j.at("control").at("preset").get<std::string>() == "lemni_ss");
    REQUIRE(j.at("seed").get<std::uint64_t>() == 7);
    REQUIRE(j.at("trajectory").at("kind").get<std::string>() == "lemniscate");
    REQUIRE(j.at("plant").at("stroke_mm").get<double>() == 7.5);
}
