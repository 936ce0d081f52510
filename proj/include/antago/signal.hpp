#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace antago::signal {

inline double rms(std::span<const double> samples) {
    if (samples.empty()) throw std::domain_error("rms: empty sample window");
    double acc = 0.0;
    for (double s : samples) acc += s * s;
    return std::sqrt(acc / static_cast<double>(samples.size()));
}

// Sliding mean over the last `window` samples. Before the window fills the
// mean runs over what has arrived, so early output is usable rather than
// biased toward a zero fill.
class MovingAverage {
public:
    explicit MovingAverage(std::size_t window) : window_(window) {
        if (window == 0) throw std::domain_error("MovingAverage: window must be positive");
    }

    double push(double x) {
        buf_.push_back(x);
        sum_ += x;
        if (buf_.size() > window_) {
            sum_ -= buf_.front();
            buf_.pop_front();
        }
        return sum_ / static_cast<double>(buf_.size());
    }

    std::size_t count() const { return buf_.size(); }

private:
    std::size_t window_;
    std::deque<double> buf_;
    double sum_ = 0.0;
};

// One-pole IIR low-pass, alpha = dt / (dt + 1/(2 pi f_c)).
class LowPass {
public:
    LowPass(double cutoff_hz, double dt_s, double initial = 0.0) : y_(initial) {
        if (!(cutoff_hz > 0.0) || !(dt_s > 0.0))
            throw std::domain_error("LowPass: cutoff and dt must be positive");
        const double rc = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
        alpha_ = dt_s / (dt_s + rc);
    }

    double push(double x) {
        y_ += alpha_ * (x - y_);
        return y_;
    }

    double value() const { return y_; }
    double alpha() const { return alpha_; }

private:
    double alpha_;
    double y_;
};

// Brute-force check of the sensing chain: synthesize the AC carrier, run it
// through the RC divider with trapezoidal integration, drop the transient, and
// RMS whole periods of the settled output. Validation path for the analytic
// divider gain; also selectable at runtime via signal.waveform_mode.
inline double waveform_sense_rms(double cap_pf, double resistance_mohm, double carrier_khz,
                                 double carrier_rms_v, double sample_hz = 100e3) {
    if (!(cap_pf > 0.0) || !(resistance_mohm > 0.0) || !(carrier_khz > 0.0))
        throw std::domain_error("waveform_sense_rms: parameters must be positive");
    const double rc_s = resistance_mohm * 1e6 * cap_pf * 1e-12;
    const double f_hz = carrier_khz * 1e3;
    const double dt = 1.0 / sample_hz;
    const double amp = carrier_rms_v * std::numbers::sqrt2;
    const double k = dt / (2.0 * rc_s);

    const std::size_t per_period = static_cast<std::size_t>(std::llround(sample_hz / f_hz));
    const std::size_t settle = static_cast<std::size_t>(std::ceil(20.0 * rc_s / dt));
    const std::size_t window = 20 * per_period;

    double y = 0.0;
    double x_prev = 0.0;
    double acc = 0.0;
    for (std::size_t n = 1; n <= settle + window; ++n) {
        const double x = amp * std::sin(2.0 * std::numbers::pi * f_hz * static_cast<double>(n) * dt);
        y = ((1.0 - k) * y + k * (x + x_prev)) / (1.0 + k);
        x_prev = x;
        if (n > settle) acc += y * y;
    }
    return std::sqrt(acc / static_cast<double>(window));
}

}  // namespace antago::signal
