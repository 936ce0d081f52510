#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "antago/errors.hpp"
#include "antago/geometry.hpp"
#include "antago/rng.hpp"

namespace antago::estimator {

inline constexpr int kInputs = 4;     // one sensed voltage per actuator
inline constexpr int kOutputs = 2;    // roll, pitch
inline constexpr int kDegree = 3;
inline constexpr int kFeatures = 35;  // monomials of total degree <= 3 in 4 vars

// Exponent table in graded-lexicographic order, constant term first.
inline const std::array<std::array<int, 4>, kFeatures>& feature_exponents() {
    static const auto table = [] {
        std::array<std::array<int, 4>, kFeatures> t{};
        int n = 0;
        for (int d = 0; d <= kDegree; ++d)
            for (int a = d; a >= 0; --a)
                for (int b = d - a; b >= 0; --b)
                    for (int c = d - a - b; c >= 0; --c)
                        t[static_cast<std::size_t>(n++)] = {a, b, c, d - a - b - c};
        return t;
    }();
    return table;
}

inline std::array<double, kFeatures> expand_features(const std::array<double, 4>& v) {
    std::array<double, kFeatures> f{};
    const auto& exps = feature_exponents();
    for (int i = 0; i < kFeatures; ++i) {
        double m = 1.0;
        for (int j = 0; j < 4; ++j) {
            const int e = exps[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            for (int k = 0; k < e; ++k) m *= v[static_cast<std::size_t>(j)];
        }
        f[static_cast<std::size_t>(i)] = m;
    }
    return f;
}

struct ModelMetrics {
    std::array<double, 2> r2{0.0, 0.0};
    std::array<double, 2> rmse_rad{0.0, 0.0};
    std::array<bool, 2> constant_target{false, false};
};

struct ModelMeta {
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    bool time_blocked_split = false;
    std::string source;        // how the training pairs were produced
    std::string input_filter;  // filtering applied to the voltages
};

struct PolyModel {
    int degree = kDegree;
    Eigen::Vector4d input_mean = Eigen::Vector4d::Zero();
    Eigen::Vector4d input_std = Eigen::Vector4d::Ones();
    Eigen::Matrix<double, kFeatures, kOutputs> coeffs =
        Eigen::Matrix<double, kFeatures, kOutputs>::Zero();
    ModelMetrics metrics;
    ModelMeta meta;
};

using Sample = std::array<double, 4>;
using Angles = std::array<double, 2>;

namespace detail {
inline std::array<double, 4> standardize(const PolyModel& m, const Sample& v) {
    std::array<double, 4> z{};
    for (int i = 0; i < 4; ++i)
        z[static_cast<std::size_t>(i)] =
            (v[static_cast<std::size_t>(i)] - m.input_mean(i)) / m.input_std(i);
    return z;
}
}  // namespace detail

// Least squares on an explicit train/test index split. Row order follows the
// given index lists, so a caller permuting samples and indices consistently
// reproduces the exact same solve.
inline PolyModel fit_with_split(const std::vector<Sample>& inputs,
                                const std::vector<Angles>& targets,
                                const std::vector<std::size_t>& train_idx,
                                const std::vector<std::size_t>& test_idx) {
    if (inputs.size() != targets.size())
        throw std::domain_error("fit: inputs and targets differ in length");
    if (train_idx.size() < static_cast<std::size_t>(kFeatures))
        throw std::domain_error("fit: training split smaller than the feature count");

    PolyModel model;
    const auto n_train = static_cast<Eigen::Index>(train_idx.size());

    for (int ch = 0; ch < 4; ++ch) {
        double mean = 0.0;
        for (std::size_t idx : train_idx) mean += inputs[idx][static_cast<std::size_t>(ch)];
        mean /= static_cast<double>(train_idx.size());
        double var = 0.0;
        for (std::size_t idx : train_idx) {
            const double d = inputs[idx][static_cast<std::size_t>(ch)] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(train_idx.size()));
        if (!(sd > 1e-12))
            throw FitError("fit: input channel " + std::to_string(ch + 1) +
                           " is constant over the training data");
        model.input_mean(ch) = mean;
        model.input_std(ch) = sd;
    }

    Eigen::MatrixXd design(n_train, kFeatures);
    Eigen::MatrixXd rhs(n_train, kOutputs);
    for (Eigen::Index r = 0; r < n_train; ++r) {
        const std::size_t idx = train_idx[static_cast<std::size_t>(r)];
        const auto f = expand_features(detail::standardize(model, inputs[idx]));
        for (int c = 0; c < kFeatures; ++c) design(r, c) = f[static_cast<std::size_t>(c)];
        rhs(r, 0) = targets[idx][0];
        rhs(r, 1) = targets[idx][1];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < kFeatures)
        throw FitError("fit: design matrix is rank deficient (rank " +
                       std::to_string(qr.rank()) + " of " + std::to_string(kFeatures) + ")");
    model.coeffs = qr.solve(rhs);

    for (int out = 0; out < kOutputs; ++out) {
        double mean_y = 0.0;
        for (std::size_t idx : test_idx) mean_y += targets[idx][static_cast<std::size_t>(out)];
        mean_y /= std::max<double>(1.0, static_cast<double>(test_idx.size()));
        double ss_res = 0.0, ss_tot = 0.0;
        for (std::size_t idx : test_idx) {
            const auto f = expand_features(detail::standardize(model, inputs[idx]));
            double pred = 0.0;
            for (int c = 0; c < kFeatures; ++c)
                pred += model.coeffs(c, out) * f[static_cast<std::size_t>(c)];
            const double y = targets[idx][static_cast<std::size_t>(out)];
            ss_res += (y - pred) * (y - pred);
            ss_tot += (y - mean_y) * (y - mean_y);
        }
        const auto u = static_cast<std::size_t>(out);
        model.metrics.rmse_rad[u] =
            test_idx.empty() ? 0.0
                             : std::sqrt(ss_res / static_cast<double>(test_idx.size()));
        if (ss_tot > 1e-18) {
            model.metrics.r2[u] = 1.0 - ss_res / ss_tot;
        } else {
            model.metrics.r2[u] = 0.0;
            model.metrics.constant_target[u] = true;
        }
    }

    model.meta.samples = inputs.size();
    model.meta.train_count = train_idx.size();
    model.meta.test_count = test_idx.size();
    return model;
}

// Seeded-shuffle (or trailing-block) split, then fit_with_split.
inline PolyModel fit(const std::vector<Sample>& inputs, const std::vector<Angles>& targets,
                     double test_frac, std::uint64_t seed, bool time_blocked = false) {
    const std::size_t n = inputs.size();
    if (n < 100) throw std::domain_error("fit: need at least 100 samples");
    if (!(test_frac > 0.0 && test_frac < 1.0))
        throw std::domain_error("fit: test_frac must lie in (0, 1)");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (!time_blocked) {
        RandomStream rng(seed, /*stream=*/0xe5717a70);
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = rng.next_u64() % (i + 1);
            std::swap(order[i], order[j]);
        }
    }
    const auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
    const std::size_t n_train = n - n_test;
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<long>(n_train));
    std::vector<std::size_t> test_idx(order.begin() + static_cast<long>(n_train), order.end());

    PolyModel model = fit_with_split(inputs, targets, train_idx, test_idx);
    model.meta.seed = seed;
    model.meta.time_blocked_split = time_blocked;
    return model;
}

inline Angles predict_angles(const PolyModel& m, const Sample& v) {
    const auto f = expand_features(detail::standardize(m, v));
    Angles out{0.0, 0.0};
    for (int c = 0; c < kFeatures; ++c) {
        out[0] += m.coeffs(c, 0) * f[static_cast<std::size_t>(c)];
        out[1] += m.coeffs(c, 1) * f[static_cast<std::size_t>(c)];
    }
    return out;
}

// Composition with the forward kinematics. Raw polynomial output can poke past
// the orientation domain under noise, so it is clamped just inside.
inline Eigen::Vector3d estimate_position(const PolyModel& m, const Sample& v,
                                         double arm_length_mm) {
    constexpr double lim = geometry::kHalfPi - 1e-9;
    const Angles a = predict_angles(m, v);
    const Eigen::Matrix3d r = geometry::rotation_from_euler(std::clamp(a[0], -lim, lim),
                                                            std::clamp(a[1], -lim, lim));
    return geometry::end_effector_position(r, arm_length_mm);
}

inline nlohmann::ordered_json model_to_json(const PolyModel& m) {
    nlohmann::ordered_json j;
    j["degree"] = m.degree;
    j["input_mean"] = {m.input_mean(0), m.input_mean(1), m.input_mean(2), m.input_mean(3)};
    j["input_std"] = {m.input_std(0), m.input_std(1), m.input_std(2), m.input_std(3)};
    auto coeffs = nlohmann::ordered_json::array();
    for (int r = 0; r < kFeatures; ++r)
        coeffs.push_back({m.coeffs(r, 0), m.coeffs(r, 1)});
    j["coeffs"] = std::move(coeffs);
    j["metrics"] = {{"r2", m.metrics.r2},
                    {"rmse", m.metrics.rmse_rad},
                    {"constant_target", m.metrics.constant_target}};
    j["meta"] = {{"seed", m.meta.seed},
                 {"samples", m.meta.samples},
                 {"train_count", m.meta.train_count},
                 {"test_count", m.meta.test_count},
                 {"time_blocked_split", m.meta.time_blocked_split},
                 {"source", m.meta.source},
                 {"input_filter", m.meta.input_filter}};
    return j;
}

inline PolyModel model_from_json(const nlohmann::json& j) {
    PolyModel m;
    m.degree = j.at("degree").get<int>();
    if (m.degree != kDegree) throw ConfigError("model: unsupported polynomial degree");
    for (int i = 0; i < 4; ++i) {
        m.input_mean(i) = j.at("input_mean").at(static_cast<std::size_t>(i)).get<double>();
        m.input_std(i) = j.at("input_std").at(static_cast<std::size_t>(i)).get<double>();
        if (!(m.input_std(i) > 0.0)) throw ConfigError("model: input_std must be positive");
    }
    const auto& coeffs = j.at("coeffs");
    if (coeffs.size() != kFeatures) throw ConfigError("model: expected 35 coefficient rows");
    for (std::size_t r = 0; r < kFeatures; ++r) {
        m.coeffs(static_cast<Eigen::Index>(r), 0) = coeffs.at(r).at(0).get<double>();
        m.coeffs(static_cast<Eigen::Index>(r), 1) = coeffs.at(r).at(1).get<double>();
    }
    if (j.contains("metrics")) {
        const auto& mt = j.at("metrics");
        m.metrics.r2 = mt.at("r2").get<std::array<double, 2>>();
        m.metrics.rmse_rad = mt.at("rmse").get<std::array<double, 2>>();
        if (mt.contains("constant_target"))
            m.metrics.constant_target = mt.at("constant_target").get<std::array<bool, 2>>();
    }
    if (j.contains("meta")) {
        const auto& me = j.at("meta");
        m.meta.seed = me.value("seed", std::uint64_t{0});
        m.meta.samples = me.value("samples", std::size_t{0});
        m.meta.train_count = me.value("train_count", std::size_t{0});
        m.meta.test_count = me.value("test_count", std::size_t{0});
        m.meta.time_blocked_split = me.value("time_blocked_split", false);
        m.meta.source = me.value("source", std::string{});
        m.meta.input_filter = me.value("input_filter", std::string{});
    }
    return m;
}

inline void save_model(const PolyModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeFault("save_model: cannot open " + path);
    out << model_to_json(m).dump(2) << "\n";
}

inline PolyModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_model: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("load_model: invalid JSON in " + path + ": " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("load_model: malformed model in " + path + ": " + e.what());
    }
}

}  // namespace antago::estimator
