#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace cubicobs {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad values handed to an operation (non-finite entries, indefinite weights, ...).
struct invalid_input_error : error {
    using error::error;
};

// Shape mismatch; kept separate because callers often want to report it as such.
struct dimension_error : invalid_input_error {
    using invalid_input_error::invalid_input_error;
};

// A design step cannot be completed: unobservable pair, non-Hurwitz state
// matrix, rank condition failure, or a residual above the acceptance bound.
struct infeasible_design_error : error {
    explicit infeasible_design_error(const std::string& what,
                                     double residual = std::numeric_limits<double>::quiet_NaN(),
                                     int delay_index = -1)
        : error(what), residual(residual), delay_index(delay_index) {}

    double residual;
    int delay_index;  // >= 0 when a specific delay channel failed
};

// Simulation produced a non-finite state.
struct divergence_error : error {
    divergence_error(const std::string& what, double first_bad_time)
        : error(what), first_bad_time(first_bad_time) {}

    double first_bad_time;
};

// Config file problems: parse errors, schema violations, incompatible grids.
struct config_error : error {
    using error::error;
};

}  // namespace cubicobs
