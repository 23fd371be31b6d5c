#pragma once

#include "cubicobs/plant.hpp"
#include "cubicobs/types.hpp"

// Built-in reference scenario: a 4-state plant with one input channel and two
// measurement channels, the second delayed by 2 s. Shipped with the tool as
// the `reproduce-example` subject and used by the acceptance suite. The
// published gain and compressed output matrix for this plant are kept
// verbatim so the tool can audit them against its own computations.

namespace cubicobs::reference {

inline Matrix plant_a() {
    Matrix a(4, 4);
    a << -2, 0, 0, 1,
          1, -2, 0, 0,
          0, 0, -3, 1,
          0, 0, 2, -2;
    return a;
}

inline Matrix input_b1() {
    Matrix b(4, 1);
    b << 0, 1, -1, 1;
    return b;
}

inline Matrix output_c1() {
    Matrix c(2, 4);
    c << 1, 1, 0, 0,
         0, 0, 0, 1;
    return c;
}

inline Matrix output_c2() {
    Matrix c(2, 4);
    c << 1, 0, 0, 0,
         0, 0, 0, 1;
    return c;
}

inline constexpr double kOutputDelay2 = 2.0;  // d_2; d_1 and the input delay are zero

inline PlantModel plant() {
    PlantModel p;
    p.A = plant_a();
    p.input_channels.push_back({input_b1(), 0.0});
    p.output_delays.push_back({output_c1(), 0.0});
    p.output_delays.push_back({output_c2(), kOutputDelay2});
    return p;
}

inline Spectrum observer_poles() { return real_spectrum({-10.0, -15.0, -12.0, -20.0}); }

inline Spectrum plant_eigenvalues() { return real_spectrum({-2.0, -2.0, -4.0, -1.0}); }

// Compressed output matrix as published for this plant; audited by the tool
// against the matrix-exponential computation, never assumed correct.
inline Matrix published_cbar() {
    Matrix c(2, 4);
    c << 1.0183, 2, 1, 7.3891,
         1, 1, 54.5982, 1.0183;
    return c;
}

// Published output-injection gain (stored transposed in the source, 4x2 here).
inline Matrix published_gain() {
    Matrix l(4, 2);
    l << 57.55, -3.99,
        -11.18, -11.54,
         -0.82, 0.72,
         -1.98, 3.63;
    return l;
}

}  // namespace cubicobs::reference
