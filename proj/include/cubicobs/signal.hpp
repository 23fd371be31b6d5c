#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cubicobs/errors.hpp"

namespace cubicobs {

enum class SignalKind { zero, step, sine, piecewise_constant };

inline std::string to_string(SignalKind k) {
    switch (k) {
        case SignalKind::zero: return "zero";
        case SignalKind::step: return "step";
        case SignalKind::sine: return "sine";
        case SignalKind::piecewise_constant: return "piecewise-constant";
    }
    return "?";
}

// Deterministic scalar signal. All kinds evaluate to 0 for t < 0, matching
// the simulator's pre-history convention.
struct SignalSpec {
    SignalKind kind = SignalKind::zero;
    double amplitude = 0.0;
    double frequency = 0.0;  // rad/s, sine only
    double step_time = 0.0;  // step only
    std::vector<std::pair<double, double>> breakpoints;  // (time, value), piecewise only

    static SignalSpec zero() { return {}; }

    static SignalSpec step(double amplitude, double step_time = 0.0) {
        SignalSpec s;
        s.kind = SignalKind::step;
        s.amplitude = amplitude;
        s.step_time = step_time;
        return s;
    }

    static SignalSpec sine(double amplitude, double frequency) {
        SignalSpec s;
        s.kind = SignalKind::sine;
        s.amplitude = amplitude;
        s.frequency = frequency;
        return s;
    }

    static SignalSpec piecewise(std::vector<std::pair<double, double>> breakpoints) {
        SignalSpec s;
        s.kind = SignalKind::piecewise_constant;
        s.breakpoints = std::move(breakpoints);
        return s;
    }

    void validate() const {
        if (kind == SignalKind::piecewise_constant) {
            for (std::size_t i = 1; i < breakpoints.size(); ++i)
                if (!(breakpoints[i].first > breakpoints[i - 1].first))
                    throw invalid_input_error("signal: piecewise breakpoint times must be strictly increasing");
        }
    }

    double eval(double t) const {
        if (t < 0.0) return 0.0;
        switch (kind) {
            case SignalKind::zero:
                return 0.0;
            case SignalKind::step:
                return t >= step_time ? amplitude : 0.0;
            case SignalKind::sine:
                return amplitude * std::sin(frequency * t);
            case SignalKind::piecewise_constant: {
                double v = 0.0;
                for (const auto& [bt, bv] : breakpoints) {
                    if (t >= bt) v = bv;
                    else break;
                }
                return v;
            }
        }
        return 0.0;
    }

    // du/dt away from discontinuities (0 for the piecewise kinds).
    double derivative(double t) const {
        if (t < 0.0) return 0.0;
        if (kind == SignalKind::sine) return amplitude * frequency * std::cos(frequency * t);
        return 0.0;
    }

    // Times where the signal (or its slope) is discontinuous; t = 0 is always
    // one because of the pre-history cutoff.
    std::vector<double> discontinuities() const {
        std::vector<double> out{0.0};
        if (kind == SignalKind::step && step_time > 0.0) out.push_back(step_time);
        if (kind == SignalKind::piecewise_constant)
            for (const auto& [bt, bv] : breakpoints)
                if (bt > 0.0) out.push_back(bt);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    bool is_piecewise_constant() const { return kind != SignalKind::sine; }
};

}  // namespace cubicobs
