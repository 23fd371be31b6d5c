#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cubicobs/errors.hpp"
#include "cubicobs/types.hpp"

namespace cubicobs {

// One delayed-state term A_i * x(t - tau_i). Any scalar coefficient on a
// shared delay matrix is expected to be folded into A_i.
struct StateDelay {
    Matrix A;
    double tau = 0.0;
};

// One input channel B_j * u_j(t - delta_j); delta_j may be zero.
struct InputChannel {
    Matrix B;
    double delta = 0.0;
};

// One delayed measurement term C_i * x(t - d_i).
struct OutputDelay {
    Matrix C;
    double d = 0.0;
};

// LTI plant with optional unknown-input, state-delay, input-delay and
// output-delay descriptors. When `output_delays` is non-empty it replaces the
// plain measurement matrix C.
struct PlantModel {
    Matrix A;
    Matrix C;
    std::vector<StateDelay> state_delays;
    std::vector<InputChannel> input_channels;
    std::optional<Matrix> unknown_input;  // B_d
    std::vector<OutputDelay> output_delays;

    int n() const { return static_cast<int>(A.rows()); }

    int ny() const {
        return static_cast<int>(output_delays.empty() ? C.rows() : output_delays.front().C.rows());
    }

    bool has_output_delays() const { return !output_delays.empty(); }

    void validate() const {
        if (A.rows() == 0 || A.rows() != A.cols())
            throw dimension_error("plant: A must be square and non-empty, got " +
                                  std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
        if (!A.allFinite()) throw invalid_input_error("plant: A has non-finite entries");
        if (!state_delays.empty() && !output_delays.empty())
            throw invalid_input_error("plant: state delays and output delays cannot be combined");
        const Eigen::Index nn = A.rows();

        if (output_delays.empty()) {
            if (C.rows() == 0 || C.cols() != nn)
                throw dimension_error("plant: C must be n_y x n with n = " + std::to_string(nn));
            if (!C.allFinite()) throw invalid_input_error("plant: C has non-finite entries");
        } else {
            const Eigen::Index rows = output_delays.front().C.rows();
            for (std::size_t i = 0; i < output_delays.size(); ++i) {
                const auto& od = output_delays[i];
                if (od.C.rows() != rows || od.C.cols() != nn)
                    throw dimension_error("plant: output_delays[" + std::to_string(i) +
                                          "].C has inconsistent shape");
                if (!od.C.allFinite())
                    throw invalid_input_error("plant: delayed output matrix has non-finite entries");
                if (!(od.d >= 0.0) || !std::isfinite(od.d))
                    throw invalid_input_error("plant: output delay must be finite and >= 0");
                for (std::size_t j = 0; j < i; ++j)
                    if (output_delays[j].d == od.d)
                        throw invalid_input_error("plant: output delays must be distinct");
            }
        }

        for (std::size_t i = 0; i < state_delays.size(); ++i) {
            const auto& sd = state_delays[i];
            if (sd.A.rows() != nn || sd.A.cols() != nn)
                throw dimension_error("plant: state_delays[" + std::to_string(i) + "].A must be n x n");
            if (!sd.A.allFinite())
                throw invalid_input_error("plant: delayed state matrix has non-finite entries");
            if (!(sd.tau > 0.0) || !std::isfinite(sd.tau))
                throw invalid_input_error("plant: state delay must be finite and > 0");
            for (std::size_t j = 0; j < i; ++j)
                if (state_delays[j].tau == sd.tau)
                    throw invalid_input_error("plant: state delays must be distinct");
        }

        for (std::size_t j = 0; j < input_channels.size(); ++j) {
            const auto& ch = input_channels[j];
            if (ch.B.rows() != nn || ch.B.cols() != 1)
                throw dimension_error("plant: inputs[" + std::to_string(j) +
                                      "].B must be an n x 1 column");
            if (!ch.B.allFinite())
                throw invalid_input_error("plant: input matrix has non-finite entries");
            if (!(ch.delta >= 0.0) || !std::isfinite(ch.delta))
                throw invalid_input_error("plant: input delay must be finite and >= 0");
        }

        if (unknown_input) {
            if (unknown_input->rows() != nn)
                throw dimension_error("plant: Bd must have n rows");
            if (!unknown_input->allFinite())
                throw invalid_input_error("plant: Bd has non-finite entries");
        }
    }

    double max_delay() const {
        double d = 0.0;
        for (const auto& sd : state_delays) d = std::max(d, sd.tau);
        for (const auto& ch : input_channels) d = std::max(d, ch.delta);
        for (const auto& od : output_delays) d = std::max(d, od.d);
        return d;
    }
};

}  // namespace cubicobs
