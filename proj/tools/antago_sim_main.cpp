#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "antago/config.hpp"
#include "antago/errors.hpp"
#include "antago/estimator.hpp"
#include "antago/harness.hpp"

namespace {

namespace fs = std::filesystem;
using antago::ConfigError;
using antago::RuntimeFault;

struct CliArgs {
    std::string mode;
    std::string config_path;
    std::string model_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::string preset;
};

void write_json_file(const nlohmann::ordered_json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeFault("cannot open " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw RuntimeFault("write failed for " + path.string());
}

antago::config::SimConfig load_base_config(const CliArgs& a) {
    antago::config::SimConfig cfg = antago::config::load_config(a.config_path);
    if (!a.preset.empty()) cfg.preset_name = a.preset;
    if (a.seed) cfg.seed = *a.seed;
    return cfg;
}

// Single-episode modes fall back to the trajectory's own preset when the
// config neither names a preset nor sets gains explicitly.
antago::config::SimConfig resolve_episode_config(const antago::config::SimConfig& raw,
                                                 const char* preset_suffix) {
    const bool gains_given = raw.key_set("control.kp") || raw.key_set("control.ki") ||
                             raw.key_set("control.kd");
    if (!raw.preset_name.empty() || gains_given) {
        antago::config::SimConfig cfg = raw;
        cfg.finalize();
        return cfg;
    }
    return antago::harness::episode_config(raw, raw.trajectory.kind, preset_suffix);
}

antago::estimator::PolyModel require_model(const CliArgs& a) {
    if (a.model_path.empty())
        throw ConfigError(a.mode + " requires --model <file>");
    return antago::estimator::load_model(a.model_path);
}

// Writes episode outputs; returns 3 when the episode aborted on a fault.
int emit_episode(const antago::config::SimConfig& cfg, const antago::harness::EpisodeLog& log,
                 const fs::path& out_dir, const std::string& csv_name) {
    antago::harness::write_csv(log, (out_dir / csv_name).string());
    write_json_file(antago::harness::summary_json(cfg, log), out_dir / "summary.json");
    if (log.aborted) {
        std::cerr << "episode aborted: " << log.fault << "\n";
        return 3;
    }
    return 0;
}

int run_mode(const CliArgs& a) {
    const fs::path out_dir(a.out_dir);
    fs::create_directories(out_dir);

    if (a.mode == "openloop") {
        antago::config::SimConfig cfg = load_base_config(a);
        cfg.finalize();
        const antago::harness::EpisodeLog log = antago::harness::run_openloop(cfg);
        return emit_episode(cfg, log, out_dir, "episode.csv");
    }
    if (a.mode == "benchmark" || a.mode == "selfsense") {
        const bool ss = a.mode == "selfsense";
        antago::estimator::PolyModel model;
        if (ss) model = require_model(a);
        const antago::config::SimConfig raw = load_base_config(a);
        const antago::config::SimConfig cfg = resolve_episode_config(raw, ss ? "ss" : "bm");
        antago::harness::EpisodeOptions opt;
        opt.feedback = ss ? antago::harness::FeedbackSource::SelfSensing
                          : antago::harness::FeedbackSource::GroundTruth;
        if (ss) opt.model = &model;
        const antago::harness::EpisodeLog log = antago::harness::run_closed_loop(cfg, opt);
        return emit_episode(cfg, log, out_dir, "episode.csv");
    }
    if (a.mode == "train") {
        const antago::config::SimConfig raw = load_base_config(a);
        const antago::estimator::PolyModel model = antago::harness::train_pipeline(raw);
        const fs::path model_path = out_dir / "model.json";
        antago::estimator::save_model(model, model_path.string());

        antago::config::SimConfig echo = raw;
        echo.finalize();
        nlohmann::ordered_json j;
        j["mode"] = "train";
        j["seed"] = raw.seed;
        j["model_file"] = model_path.string();
        j["metrics"] = {{"r2", model.metrics.r2}, {"rmse", model.metrics.rmse_rad}};
        j["samples"] = model.meta.samples;
        j["source"] = model.meta.source;
        j["config"] = antago::config::config_to_json(echo);
        write_json_file(j, out_dir / "summary.json");
        return 0;
    }
    if (a.mode == "evaluate") {
        const antago::estimator::PolyModel model = require_model(a);
        const antago::config::SimConfig raw = load_base_config(a);
        const antago::harness::EvaluateResult res = antago::harness::evaluate(raw, model);
        antago::harness::write_csv(res.benchmark, (out_dir / "episode_bm.csv").string());
        antago::harness::write_csv(res.selfsense, (out_dir / "episode_ss.csv").string());

        const antago::config::SimConfig cfg_bm =
            antago::harness::episode_config(antago::harness::strip_gain_overrides(raw),
                                            raw.trajectory.kind, "bm");
        nlohmann::ordered_json j;
        j["mode"] = "evaluate";
        j["seed"] = raw.seed;
        j["comparison"] = antago::harness::report_to_json(res.report);
        j["config"] = antago::config::config_to_json(cfg_bm);
        write_json_file(j, out_dir / "summary.json");
        return 0;
    }
    throw ConfigError("unknown mode " + a.mode);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator for a two-axis tendon joint driven by four self-sensing "
                 "electrohydraulic actuators"};
    app.require_subcommand(1);

    CliArgs args;
    std::uint64_t seed_value = 0;
    const std::vector<std::string> modes{"openloop", "benchmark", "train", "selfsense",
                                         "evaluate"};
    const std::vector<std::string> mode_help{
        "antagonistic sinusoid sweep, logs the pose excursion",
        "closed loop on ground-truth (mocap) feedback",
        "run benchmark episodes and fit the pose estimator",
        "closed loop on the self-sensing estimator (needs --model)",
        "benchmark vs self-sensing comparison (needs --model)"};
    for (std::size_t i = 0; i < modes.size(); ++i) {
        CLI::App* sub = app.add_subcommand(modes[i], mode_help[i]);
        sub->add_option("--config", args.config_path, "flat key = value config file")
            ->required();
        sub->add_option("--model", args.model_path, "estimator model JSON");
        sub->add_option("--out", args.out_dir, "output directory (default .)");
        sub->add_option("--seed", seed_value, "override the config seed");
        sub->add_option("--preset", args.preset, "gain preset")
            ->check(CLI::IsMember({"lemni_ss", "lemni_bm", "star_ss", "star_bm"}));
        sub->callback([&args, &seed_value, sub, name = modes[i]]() {
            args.mode = name;
            if (sub->count("--seed") > 0) args.seed = seed_value;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        return run_mode(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime fault: " << e.what() << "\n";
        return 3;
    }
}
