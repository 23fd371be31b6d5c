#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <vector>

namespace cubicobs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Eigenvalue list; complex entries come in conjugate pairs for real matrices.
using Spectrum = std::vector<std::complex<double>>;

// Seed used by the randomized retry loops when the caller does not pass one.
inline constexpr std::uint64_t kDefaultSeed = 12345;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// max |a_i - b_j| under a greedy nearest-neighbor pairing; used to compare
// eigenvalue multisets where ordering is arbitrary.
inline double spectrum_distance(const Spectrum& a, const Spectrum& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    std::vector<bool> used(b.size(), false);
    double worst = 0.0;
    for (const auto& va : a) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (used[j]) continue;
            double d = std::abs(va - b[j]);
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        used[best_j] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

inline Spectrum real_spectrum(std::initializer_list<double> vals) {
    Spectrum s;
    for (double v : vals) s.emplace_back(v, 0.0);
    return s;
}

}  // namespace cubicobs
