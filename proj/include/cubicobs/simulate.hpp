#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "cubicobs/design.hpp"
#include "cubicobs/numerics.hpp"
#include "cubicobs/plant.hpp"
#include "cubicobs/signal.hpp"

// Fixed-step RK4 integration of plant/observer pairs for all supported plant
// classes. The step size must divide every delay, so delayed values are read
// from stored integration stages and no history interpolation ever happens.
// Both observers (plain and cubic injection) run on the same grid in one
// coupled system; the cubic injection is computed from the output innovation,
// which equals the unmeasurable error expression algebraically but is
// realizable.

namespace cubicobs::sim {

enum class OutputPathMode { oracle, measurement };

struct SimulationConfig {
    double t_end = 10.0;
    double step_h = 1e-3;
    Vector x0;
    Vector xhat0;
    std::vector<SignalSpec> inputs;  // one per plant input channel
    SignalSpec disturbance;          // unknown-input plants only

    // Pre-history is fixed: x(t) = x0 and all signals are 0 for t < 0.
};

struct Trace {
    std::vector<double> times;
    std::vector<Vector> x;
    std::vector<Vector> xhat_linear, xhat_cubic;
    std::vector<Vector> e_linear, e_cubic;
    std::vector<double> V_linear, V_cubic;
    std::vector<Vector> y;     // physical measurement
    std::vector<Vector> ybar;  // signal driving the observers (equals y unless delays are compressed)

    std::size_t size() const { return times.size(); }
};

// V(t_k) = e(t_k)' P e(t_k).
inline std::vector<double> lyapunov_trace(const std::vector<Vector>& e_series, const Matrix& p) {
    if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff()))
        throw invalid_input_error("lyapunov_trace: P is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(p));
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw invalid_input_error("lyapunov_trace: P is not positive definite");
    std::vector<double> v;
    v.reserve(e_series.size());
    for (const auto& e : e_series) v.push_back(e.dot(p * e));
    return v;
}

namespace detail {

inline long steps_for(double t_end, double h) {
    if (!(h > 0.0)) throw config_error("simulation: step_h must be > 0");
    if (!(t_end > 0.0)) throw config_error("simulation: t_end must be > 0");
    if (t_end < 10.0 * h) throw config_error("simulation: t_end must be at least 10 steps");
    const long k = std::lround(t_end / h);
    if (std::abs(k * h - t_end) > 1e-9 * std::max(1.0, t_end))
        throw config_error("simulation: t_end must be a multiple of step_h (nearest: " +
                           std::to_string(k * h) + ")");
    return k;
}

inline long delay_steps(double delay, double h, const char* what) {
    const long k = std::lround(delay / h);
    if (std::abs(k * h - delay) > 1e-9)
        throw config_error(std::string("simulation: step_h must divide the ") + what + " " +
                           std::to_string(delay) + " (try step_h = " +
                           std::to_string(delay / std::max<long>(1, k)) + ")");
    return k;
}

// Per-step storage of the four RK4 stage states of the plant part; delayed
// reads always land on a stored stage because delays are step multiples.
class StageRing {
  public:
    StageRing(long capacity, Vector pre_history)
        : capacity_(std::max<long>(capacity, 1)),
          pre_history_(std::move(pre_history)),
          slots_(static_cast<std::size_t>(capacity_) * 4) {}

    void store(long step, int stage, const Vector& x) {
        slots_[static_cast<std::size_t>(step % capacity_) * 4 + stage] = x;
    }

    const Vector& at(long step, int stage) const {
        if (step < 0) return pre_history_;
        return slots_[static_cast<std::size_t>(step % capacity_) * 4 + stage];
    }

  private:
    long capacity_;
    Vector pre_history_;
    std::vector<Vector> slots_;
};

// Precomputed half-step lattice tables for reconstructing the compressed
// output from raw delayed measurements:
//   ybar(s) = y(s) + sum_i C_i e^{-A d_i} I_i(s),
//   I_i(s)  = sum_j  int_{s-d_i}^{s} e^{A(s-r)} B_j u_j(r - delta_j) dr.
// Piecewise-constant inputs integrate exactly per lattice slice (prefix sums
// of slice integrals); smooth inputs use the trapezoid rule on the lattice
// with endpoint-derivative corrections.
struct OutputPathTables {
    int n = 0;
    double half = 0.0;                // h/2
    std::vector<Matrix> prefactor;    // C_i e^{-A d_i}
    std::vector<long> window_halves;  // 2 * d_i / h
    std::vector<long> delta_halves;   // input delays in half-steps
    std::vector<std::vector<Vector>> slice;         // slice[j][m] = e^{A m h/2} Psi(h/2) B_j
    std::vector<std::vector<Vector>> slice_prefix;  // running sums of `slice`
    std::vector<std::vector<Vector>> node;          // node[j][p]  = e^{A p h/2} B_j
    std::vector<std::vector<Vector>> node_slope;    // A * node[j][p]

    void build(const PlantModel& plant, double h) {
        n = plant.n();
        half = 0.5 * h;
        long max_window = 0;
        for (const auto& od : plant.output_delays) {
            const long k = delay_steps(od.d, h, "output delay");
            window_halves.push_back(2 * k);
            max_window = std::max(max_window, 2 * k);
            prefactor.push_back(od.d == 0.0 ? od.C : Matrix(od.C * numerics::expm(-plant.A * od.d)));
        }
        const Matrix e_half = numerics::expm(plant.A * half);
        const std::size_t n_ch = plant.input_channels.size();
        slice.resize(n_ch);
        slice_prefix.resize(n_ch);
        node.resize(n_ch);
        node_slope.resize(n_ch);
        for (std::size_t j = 0; j < n_ch; ++j) {
            const Matrix& b = plant.input_channels[j].B;
            delta_halves.push_back(2 * delay_steps(plant.input_channels[j].delta, h, "input delay"));

            // Psi(tau) B = int_0^tau e^{A s} ds B via one augmented exponential.
            Matrix aug = Matrix::Zero(n + 1, n + 1);
            aug.topLeftCorner(n, n) = plant.A * half;
            aug.topRightCorner(n, 1) = b * half;
            const Vector psi_b = numerics::expm(aug).topRightCorner(n, 1);

            auto& q = slice[j];
            auto& s = slice_prefix[j];
            auto& r = node[j];
            auto& ar = node_slope[j];
            q.resize(max_window + 1);
            s.resize(max_window + 1);
            r.resize(max_window + 1);
            ar.resize(max_window + 1);
            q[0] = psi_b;
            r[0] = b;
            for (long m = 1; m <= max_window; ++m) {
                q[m] = e_half * q[m - 1];
                r[m] = e_half * r[m - 1];
            }
            s[0] = q[0];
            for (long m = 1; m <= max_window; ++m) s[m] = s[m - 1] + q[m];
            for (long m = 0; m <= max_window; ++m) ar[m] = plant.A * r[m];
        }
    }

    // I_i at half-lattice time index s_half, for output delay i.
    Vector window_integral(const PlantModel& plant, const std::vector<SignalSpec>& inputs,
                           std::size_t i, long s_half) const {
        Vector total = Vector::Zero(n);
        const long w = window_halves[i];
        if (w == 0) return total;
        const long lo = s_half - w;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
            const SignalSpec& u = inputs[j];
            const long dj = delta_halves[j];

            // piece boundaries of r -> u(r - delta_j) inside [lo, s_half]
            std::vector<long> bounds{lo, s_half};
            for (double t_disc : u.discontinuities()) {
                const long b = 2 * std::lround(t_disc / (2.0 * half)) + dj;
                if (b > lo && b < s_half) bounds.push_back(b);
            }
            std::sort(bounds.begin(), bounds.end());
            bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

            for (std::size_t p = 0; p + 1 < bounds.size(); ++p) {
                const long a = bounds[p], b = bounds[p + 1];
                if (u.is_piecewise_constant()) {
                    const double c = u.eval(0.5 * (a + b) * half - dj * half);
                    if (c == 0.0) continue;
                    const long m_lo = s_half - b;
                    const long m_hi = s_half - a - 1;
                    const Vector sum = (m_lo > 0)
                                           ? Vector(slice_prefix[j][m_hi] - slice_prefix[j][m_lo - 1])
                                           : slice_prefix[j][m_hi];
                    total += c * sum;
                } else {
                    // trapezoid over the lattice nodes of [a, b] plus the
                    // Euler-Maclaurin endpoint correction
                    Vector acc = Vector::Zero(n);
                    for (long q = a; q <= b; ++q) {
                        const double uval = u.eval(q * half - dj * half);
                        const double wgt = (q == a || q == b) ? 0.5 : 1.0;
                        if (uval != 0.0) acc += (wgt * uval) * node[j][s_half - q];
                    }
                    acc *= half;
                    const auto g_slope = [&](long q) -> Vector {
                        const double uval = u.eval(q * half - dj * half);
                        const double udot = u.derivative(q * half - dj * half);
                        return -uval * node_slope[j][s_half - q] + udot * node[j][s_half - q];
                    };
                    acc -= (half * half / 12.0) * (g_slope(b) - g_slope(a));
                    total += acc;
                }
            }
        }
        return total;
    }
};

}  // namespace detail

namespace detail {

struct Engine {
    const PlantModel& plant;
    const design::ObserverDesign& obs;
    const SimulationConfig& config;
    OutputPathMode mode;

    int n = 0;
    double h = 0.0;
    long n_steps = 0;
    Matrix theta, n_gain, p_lyap;
    std::vector<Matrix> feedforward;
    std::vector<long> state_delay_steps;
    std::vector<long> output_delay_steps;
    OutputPathTables tables;

    Engine(const PlantModel& plant_, const design::ObserverDesign& obs_,
           const SimulationConfig& config_, OutputPathMode mode_)
        : plant(plant_), obs(obs_), config(config_), mode(mode_) {
        plant.validate();
        n = plant.n();
        h = config.step_h;
        n_steps = steps_for(config.t_end, h);

        if (config.x0.size() != n || config.xhat0.size() != n)
            throw config_error("simulation: x0 and xhat0 must have length n");
        if (config.inputs.size() != plant.input_channels.size())
            throw config_error("simulation: need one input signal per plant input channel (" +
                               std::to_string(plant.input_channels.size()) + ")");
        for (const auto& sig : config.inputs) sig.validate();
        config.disturbance.validate();

        if (obs.effective_C.rows() != plant.ny() || obs.effective_C.cols() != n)
            throw invalid_input_error("simulation: design output matrix shape mismatch");
        if (design::consistency_residual(plant.A, obs) > design::kAcceptResidual)
            throw invalid_input_error("simulation: design violates the decoupling condition");

        const int ny = plant.ny();
        theta = obs.theta.size() ? obs.theta : Matrix::Zero(ny, ny);
        n_gain = obs.N.size() ? obs.N : Matrix::Zero(n, ny);
        p_lyap = obs.P.size() ? obs.P : Matrix::Identity(n, n);

        if (!obs.input_feedforward.empty() &&
            obs.input_feedforward.size() != plant.input_channels.size())
            throw invalid_input_error("simulation: design feedforward count mismatch");
        feedforward = obs.input_feedforward;
        if (feedforward.empty()) {
            const Matrix iec = Matrix::Identity(n, n) - obs.E * obs.effective_C;
            for (const auto& ch : plant.input_channels) feedforward.push_back(iec * ch.B);
        }

        if (!plant.state_delays.empty() &&
            obs.delayed_output_gains.size() != plant.state_delays.size())
            throw invalid_input_error("simulation: design lacks delayed output-injection gains");
        for (const auto& sd : plant.state_delays)
            state_delay_steps.push_back(delay_steps(sd.tau, h, "state delay"));
        for (const auto& od : plant.output_delays)
            output_delay_steps.push_back(delay_steps(od.d, h, "output delay"));

        if (plant.has_output_delays() && mode == OutputPathMode::measurement) {
            tables.build(plant, h);
            for (std::size_t j = 0; j < config.inputs.size(); ++j)
                for (double t_disc : config.inputs[j].discontinuities())
                    if (std::abs(std::lround(t_disc / h) * h - t_disc) > 1e-9)
                        throw config_error(
                            "simulation: measurement-path reconstruction needs input "
                            "discontinuities on the step grid");
        }
    }

    long max_delay_steps() const {
        long m = 0;
        for (long k : state_delay_steps) m = std::max(m, k);
        for (long k : output_delay_steps) m = std::max(m, k);
        return m;
    }

    // Raw measurement at a stage: sum of (possibly delayed) C_i x terms.
    Vector measurement(const StageRing& ring, long step, int stage,
                       const Eigen::Ref<const Vector>& x_now) const {
        if (!plant.has_output_delays()) return plant.C * x_now;
        Vector y = Vector::Zero(plant.ny());
        for (std::size_t i = 0; i < plant.output_delays.size(); ++i) {
            const long k = output_delay_steps[i];
            if (k == 0)
                y += plant.output_delays[i].C * x_now;
            else
                y += plant.output_delays[i].C * ring.at(step - k, stage);
        }
        return y;
    }

    // Signal the observers are driven by.
    Vector drive_signal(const StageRing& ring, long step, int stage, long s_half,
                        const Eigen::Ref<const Vector>& x_now) const {
        if (!plant.has_output_delays()) return plant.C * x_now;
        if (mode == OutputPathMode::oracle) return obs.effective_C * x_now;
        Vector ybar = measurement(ring, step, stage, x_now);
        for (std::size_t i = 0; i < plant.output_delays.size(); ++i) {
            if (output_delay_steps[i] == 0) continue;
            ybar += tables.prefactor[i] * tables.window_integral(plant, config.inputs, i, s_half);
        }
        return ybar;
    }

    Vector derivative(const StageRing& ring, long step, int stage, long s_half, double t,
                      const Eigen::Ref<const Vector>& z) const {
        const auto x = z.head(n);
        const auto wl = z.segment(n, n);
        const auto wc = z.segment(2 * n, n);

        Vector dx = plant.A * x;
        for (std::size_t i = 0; i < plant.state_delays.size(); ++i)
            dx += plant.state_delays[i].A * ring.at(step - state_delay_steps[i], stage);
        for (std::size_t j = 0; j < plant.input_channels.size(); ++j)
            dx += plant.input_channels[j].B *
                  config.inputs[j].eval(t - plant.input_channels[j].delta);
        if (plant.unknown_input) dx += *plant.unknown_input * config.disturbance.eval(t);

        const Vector v = drive_signal(ring, step, stage, s_half, x);

        Vector shared = obs.L * v;
        for (std::size_t i = 0; i < plant.state_delays.size(); ++i)
            shared += obs.delayed_output_gains[i] *
                      (plant.C * ring.at(step - state_delay_steps[i], stage));
        for (std::size_t j = 0; j < plant.input_channels.size(); ++j)
            shared += feedforward[j] * config.inputs[j].eval(t - plant.input_channels[j].delta);

        Vector dz(3 * n);
        dz.head(n) = dx;
        dz.segment(n, n) = obs.G * wl + shared;

        Vector dwc = obs.G * wc + shared;
        const Vector innovation = v - obs.effective_C * (wc + obs.E * v);
        const double quad = innovation.dot(theta * innovation);
        if (quad != 0.0) dwc -= quad * (n_gain * innovation);
        dz.tail(n) = dwc;
        return dz;
    }

    Trace run() {
        StageRing ring(max_delay_steps() + 2, config.x0);

        Trace trace;
        const std::size_t rows = static_cast<std::size_t>(n_steps) + 1;
        trace.times.reserve(rows);
        trace.x.reserve(rows);

        Vector z(3 * n);
        z.head(n) = config.x0;
        {
            ring.store(0, 0, config.x0);
            const Vector v0 = drive_signal(ring, 0, 0, 0, config.x0);
            const Vector w0 = config.xhat0 - obs.E * v0;
            z.segment(n, n) = w0;
            z.tail(n) = w0;
        }

        record(trace, ring, 0, z);

        Vector k1(3 * n), k2(3 * n), k3(3 * n), k4(3 * n), stage(3 * n);
        for (long m = 0; m < n_steps; ++m) {
            const double t = m * h;
            ring.store(m, 0, z.head(n));
            k1 = derivative(ring, m, 0, 2 * m, t, z);

            stage = z + (0.5 * h) * k1;
            ring.store(m, 1, stage.head(n));
            k2 = derivative(ring, m, 1, 2 * m + 1, t + 0.5 * h, stage);

            stage = z + (0.5 * h) * k2;
            ring.store(m, 2, stage.head(n));
            k3 = derivative(ring, m, 2, 2 * m + 1, t + 0.5 * h, stage);

            stage = z + h * k3;
            ring.store(m, 3, stage.head(n));
            k4 = derivative(ring, m, 3, 2 * m + 2, t + h, stage);

            z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!z.allFinite())
                throw divergence_error("simulation diverged at t = " + std::to_string((m + 1) * h),
                                       (m + 1) * h);
            record(trace, ring, m + 1, z);
        }
        return trace;
    }

    void record(Trace& trace, const StageRing& ring, long m, const Vector& z) {
        const auto x = z.head(n);
        const auto wl = z.segment(n, n);
        const auto wc = z.segment(2 * n, n);
        const Vector y = measurement(ring, m, 0, x);
        const Vector v = drive_signal(ring, m, 0, 2 * m, x);
        const Vector xhat_l = wl + obs.E * v;
        const Vector xhat_c = wc + obs.E * v;

        trace.times.push_back(m * h);
        trace.x.emplace_back(x);
        trace.xhat_linear.push_back(xhat_l);
        trace.xhat_cubic.push_back(xhat_c);
        trace.e_linear.emplace_back(x - xhat_l);
        trace.e_cubic.emplace_back(x - xhat_c);
        trace.V_linear.push_back(trace.e_linear.back().dot(p_lyap * trace.e_linear.back()));
        trace.V_cubic.push_back(trace.e_cubic.back().dot(p_lyap * trace.e_cubic.back()));
        trace.y.push_back(y);
        trace.ybar.push_back(v);
    }
};

}  // namespace detail

// Plant + both observers, no state or output delays (input delays are plain
// signal shifts and are allowed).
inline Trace simulate_pair(const PlantModel& plant, const design::ObserverDesign& design,
                           const SimulationConfig& config) {
    if (!plant.state_delays.empty())
        throw invalid_input_error("simulate_pair: use simulate_delay_pair for state delays");
    if (plant.has_output_delays())
        throw invalid_input_error("simulate_pair: use simulate_output_delay_pair");
    return detail::Engine(plant, design, config, OutputPathMode::oracle).run();
}

// Plant with delayed state terms; the observers feed back delayed outputs.
inline Trace simulate_delay_pair(const PlantModel& plant, const design::ObserverDesign& design,
                                 const SimulationConfig& config) {
    if (plant.has_output_delays())
        throw invalid_input_error("simulate_delay_pair: output delays are a separate plant class");
    return detail::Engine(plant, design, config, OutputPathMode::oracle).run();
}

// Plant with delayed measurements. `oracle` drives the observers with the
// compressed output computed from the true state; `measurement` reconstructs
// it from raw delayed measurements plus an input convolution, which is the
// realizable path.
inline Trace simulate_output_delay_pair(const PlantModel& plant, const design::ObserverDesign& design,
                                        const SimulationConfig& config, OutputPathMode mode) {
    if (!plant.has_output_delays())
        throw invalid_input_error("simulate_output_delay_pair: plant has no output delays");
    return detail::Engine(plant, design, config, mode).run();
}

// Direct integration of the estimation-error dynamics
// e' = G e + (e'C' theta C e) N C e.
struct ErrorTrace {
    std::vector<double> times;
    std::vector<Vector> e;
};

inline ErrorTrace simulate_error_ode(const Matrix& g, const Matrix& c_eff, const Matrix& theta,
                                     const Matrix& n_gain, const Vector& e0,
                                     const SimulationConfig& config) {
    numerics::detail::require_square(g, "simulate_error_ode");
    const Eigen::Index n = g.rows();
    if (e0.size() != n) throw dimension_error("simulate_error_ode: e0 length mismatch");
    const long n_steps = detail::steps_for(config.t_end, config.step_h);
    const double h = config.step_h;
    const Matrix m = c_eff.transpose() * theta * c_eff;

    const auto f = [&](const Vector& e) -> Vector {
        Vector de = g * e;
        const double quad = e.dot(m * e);
        if (quad != 0.0) de += quad * (n_gain * (c_eff * e));
        return de;
    };

    ErrorTrace trace;
    trace.times.reserve(n_steps + 1);
    trace.e.reserve(n_steps + 1);
    Vector e = e0;
    trace.times.push_back(0.0);
    trace.e.push_back(e);
    for (long k = 0; k < n_steps; ++k) {
        const Vector k1 = f(e);
        const Vector k2 = f(e + (0.5 * h) * k1);
        const Vector k3 = f(e + (0.5 * h) * k2);
        const Vector k4 = f(e + h * k3);
        e += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!e.allFinite())
            throw divergence_error("error dynamics diverged at t = " + std::to_string((k + 1) * h),
                                   (k + 1) * h);
        trace.times.push_back((k + 1) * h);
        trace.e.push_back(e);
    }
    return trace;
}

}  // namespace cubicobs::sim
