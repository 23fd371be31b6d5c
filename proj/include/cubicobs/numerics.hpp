#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "cubicobs/errors.hpp"
#include "cubicobs/types.hpp"

// Dense real-matrix kernels for desk-scale problems (n up to a few dozen).
// Decompositions (SVD, eigen, LU) come from Eigen; the solvers built on top
// of them live here.

namespace cubicobs::numerics {

inline constexpr double kPinvCutoff = 1e-12;   // singular values below cutoff*sigma_max are rank noise
inline constexpr double kHurwitzMargin = 1e-9; // require max Re(eig) < -margin

namespace detail {

inline void require_finite(const Matrix& m, const char* op) {
    if (!m.allFinite()) throw invalid_input_error(std::string(op) + ": non-finite entries");
}

inline void require_square(const Matrix& m, const char* op) {
    if (m.rows() != m.cols())
        throw dimension_error(std::string(op) + ": matrix must be square, got " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

}  // namespace detail

// Moore-Penrose inverse via SVD.
inline Matrix pinv(const Matrix& m) {
    detail::require_finite(m, "pinv");
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double cut = sv.size() > 0 ? kPinvCutoff * sv(0) : 0.0;
    Vector inv = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline int rank(const Matrix& m) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double tol = std::max(m.rows(), m.cols()) * Eigen::NumTraits<double>::epsilon() * sv(0);
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++r;
    return r;
}

// Matrix exponential, scaling-and-squaring with a [13/13] Pade approximant.
inline Matrix expm(const Matrix& m) {
    detail::require_square(m, "expm");
    detail::require_finite(m, "expm");
    const Eigen::Index n = m.rows();
    if (n == 0) return Matrix(0, 0);

    static const double b[14] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};
    const double theta13 = 5.371920351148152;

    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13)
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    const Matrix a = m / std::pow(2.0, squarings);

    const Matrix ident = Matrix::Identity(n, n);
    const Matrix a2 = a * a;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;
    const Matrix u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) +
                          b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
    const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
                     b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;

    Matrix e = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) e = e * e;
    return e;
}

inline Spectrum eig(const Matrix& m) {
    detail::require_square(m, "eig");
    detail::require_finite(m, "eig");
    Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) throw error("eig: eigenvalue iteration failed");
    Spectrum s(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) s[i] = solver.eigenvalues()(i);
    return s;
}

inline double spectral_abscissa(const Matrix& m) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& lambda : eig(m)) worst = std::max(worst, lambda.real());
    return worst;
}

inline bool is_hurwitz(const Matrix& m) { return spectral_abscissa(m) < -kHurwitzMargin; }

// Solves G'P + PG = -Q for symmetric P > 0. Desk-scale n makes the n^2 x n^2
// vectorized system the simplest correct choice.
inline Matrix lyap_solve(const Matrix& g, const Matrix& q) {
    detail::require_square(g, "lyap_solve");
    detail::require_square(q, "lyap_solve");
    detail::require_finite(g, "lyap_solve");
    detail::require_finite(q, "lyap_solve");
    const Eigen::Index n = g.rows();
    if (q.rows() != n) throw dimension_error("lyap_solve: G and Q dimensions differ");
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff()))
        throw invalid_input_error("lyap_solve: Q is not symmetric");
    {
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(q));
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw invalid_input_error("lyap_solve: Q is not positive definite");
    }
    if (!is_hurwitz(g))
        throw infeasible_design_error("lyap_solve: G is not Hurwitz (max Re eig = " +
                                      std::to_string(spectral_abscissa(g)) + ")");

    // (I (x) G' + G' (x) I) vec(P) = -vec(Q), column-major vec.
    const Matrix gt = g.transpose();
    Matrix big = Matrix::Zero(n * n, n * n);
    for (Eigen::Index j = 0; j < n; ++j)
        big.block(j * n, j * n, n, n) += gt;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index i = 0; i < n; ++i)
                big(j * n + i, k * n + i) += gt(j, k);

    const Eigen::PartialPivLU<Matrix> lu(big);
    const auto residual_of = [&](const Matrix& p) -> Matrix {
        return g.transpose() * p + p * g + q;
    };
    const auto solve_into = [&](const Matrix& rhs_mat) -> Matrix {
        Vector rhs(n * n);
        for (Eigen::Index j = 0; j < n; ++j) rhs.segment(j * n, n) = rhs_mat.col(j);
        const Vector sol = lu.solve(rhs);
        Matrix out(n, n);
        for (Eigen::Index j = 0; j < n; ++j) out.col(j) = sol.segment(j * n, n);
        return out;
    };

    Matrix p = symmetrized(solve_into(-q));
    for (int refine = 0; refine < 2; ++refine) {
        const Matrix r = residual_of(p);
        if (r.norm() <= 1e-12 * q.norm()) break;
        p = symmetrized(p - solve_into(r));
    }

    // Double precision cannot push the residual below the representation
    // floor eps * ||G|| * ||P||, which dominates 1e-9 ||Q|| for badly scaled
    // G; accept whichever bound is weaker.
    const double floor_bound =
        100.0 * Eigen::NumTraits<double>::epsilon() * (2.0 * g.norm() * p.norm() + q.norm());
    const double resid = residual_of(p).norm();
    if (resid > std::max(1e-9 * q.norm(), floor_bound))
        throw error("lyap_solve: residual " + std::to_string(resid) + " exceeds tolerance");
    return p;
}

inline Matrix observability_matrix(const Matrix& a, const Matrix& c) {
    const Eigen::Index n = a.rows();
    const Eigen::Index ny = c.rows();
    Matrix obs(ny * n, n);
    Matrix block = c;
    for (Eigen::Index i = 0; i < n; ++i) {
        obs.middleRows(i * ny, ny) = block;
        block = block * a;
    }
    return obs;
}

inline int observability_rank(const Matrix& a, const Matrix& c) {
    return rank(observability_matrix(a, c));
}

inline bool is_observable(const Matrix& a, const Matrix& c) {
    return observability_rank(a, c) == a.rows();
}

struct PolePlacement {
    Matrix gain;               // L with eig(A - L C) at the requested locations
    Spectrum requested;
    Spectrum placed_targets;   // after the repeated-pole perturbation, if any
    Spectrum achieved;         // eig(A - L C), recomputed
    bool perturbed = false;
};

namespace detail {

// Real block-diagonal matrix with the given spectrum: 1x1 blocks for real
// eigenvalues, 2x2 rotation blocks for conjugate pairs.
inline Matrix real_block_form(const Spectrum& vals) {
    const Eigen::Index n = static_cast<Eigen::Index>(vals.size());
    Matrix f = Matrix::Zero(n, n);
    std::vector<bool> used(vals.size(), false);
    Eigen::Index pos = 0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (used[i]) continue;
        if (std::abs(vals[i].imag()) <= 1e-12 * (1.0 + std::abs(vals[i]))) {
            f(pos, pos) = vals[i].real();
            used[i] = true;
            pos += 1;
            continue;
        }
        // find the conjugate partner
        std::size_t partner = vals.size();
        for (std::size_t j = i + 1; j < vals.size(); ++j) {
            if (used[j]) continue;
            if (std::abs(vals[j] - std::conj(vals[i])) <= 1e-9 * (1.0 + std::abs(vals[i]))) {
                partner = j;
                break;
            }
        }
        if (partner == vals.size())
            throw invalid_input_error("place_poles: desired set not closed under conjugation");
        f(pos, pos) = vals[i].real();
        f(pos, pos + 1) = std::abs(vals[i].imag());
        f(pos + 1, pos) = -std::abs(vals[i].imag());
        f(pos + 1, pos + 1) = vals[i].real();
        used[i] = used[partner] = true;
        pos += 2;
    }
    if (pos != n) throw invalid_input_error("place_poles: desired set not closed under conjugation");
    return f;
}

// Solves A X - X F = Q via the vectorized system.
inline Matrix sylvester_solve(const Matrix& a, const Matrix& f, const Matrix& q) {
    const Eigen::Index n = a.rows();
    const Eigen::Index m = f.cols();
    Matrix big = Matrix::Zero(n * m, n * m);
    for (Eigen::Index j = 0; j < m; ++j)
        big.block(j * n, j * n, n, n) += a;
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index k = 0; k < m; ++k)
            for (Eigen::Index i = 0; i < n; ++i)
                big(j * n + i, k * n + i) -= f(k, j);
    Vector rhs(n * m);
    for (Eigen::Index j = 0; j < m; ++j) rhs.segment(j * n, n) = q.col(j);
    Eigen::FullPivLU<Matrix> lu(big);
    if (!lu.isInvertible()) throw error("sylvester: singular operator");
    const Vector sol = lu.solve(rhs);
    Matrix x(n, m);
    for (Eigen::Index j = 0; j < m; ++j) x.col(j) = sol.segment(j * n, n);
    return x;
}

}  // namespace detail

// Output-injection pole placement: find L so that eig(A - L C) matches
// `desired`. Sylvester-based: pick a target block F with the desired
// spectrum, draw a random right-hand side, solve A'X - XF = C'K and read the
// gain off K X^{-1}; retry with a fresh draw when X comes out singular.
// Repeated desired poles are split by 1e-6 first (reported in the result).
inline PolePlacement place_poles_detailed(const Matrix& a, const Matrix& c,
                                          const Spectrum& desired,
                                          std::uint64_t seed = kDefaultSeed) {
    detail::require_square(a, "place_poles");
    detail::require_finite(a, "place_poles");
    detail::require_finite(c, "place_poles");
    const Eigen::Index n = a.rows();
    if (c.cols() != n) throw dimension_error("place_poles: C column count must match A");
    if (static_cast<Eigen::Index>(desired.size()) != n)
        throw invalid_input_error("place_poles: need exactly n desired eigenvalues");
    if (!is_observable(a, c))
        throw infeasible_design_error("place_poles: (A, C) is not observable");

    PolePlacement out;
    out.requested = desired;

    // Split repeated targets so the Sylvester target block stays simple.
    Spectrum targets = desired;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        int repeat = 0;
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(targets[j] - targets[i]) < 1e-9 * (1.0 + std::abs(targets[i]))) ++repeat;
        if (repeat > 0) {
            targets[i] += std::complex<double>(repeat * 1e-6, 0.0);
            out.perturbed = true;
        }
    }
    out.placed_targets = targets;

    const Spectrum plant_eigs = eig(a);
    for (const auto& t : targets)
        for (const auto& p : plant_eigs)
            if (std::abs(t - p) < 1e-9)
                throw infeasible_design_error(
                    "place_poles: desired pole coincides with a plant eigenvalue; "
                    "the Sylvester construction needs disjoint spectra");

    const Matrix f = detail::real_block_form(targets);
    const Matrix at = a.transpose();
    const Matrix ct = c.transpose();

    // With more than one output the gain is not unique; random right-hand
    // sides land anywhere in the solution family, some of it badly scaled,
    // which ruins the conditioning of everything built on top of G. Draw
    // several candidates, keep the one with the smallest ||A - L C||, then
    // walk the right-hand side downhill on the same objective. Every
    // candidate is verified against the target spectrum before it competes.
    const auto gain_from = [&](const Matrix& kbar) -> std::optional<Matrix> {
        Matrix x;
        try {
            x = detail::sylvester_solve(at, f, ct * kbar);
        } catch (const error&) {
            return std::nullopt;
        }
        Eigen::FullPivLU<Matrix> lu(x);
        if (!lu.isInvertible()) return std::nullopt;
        return (kbar * lu.inverse()).transpose();
    };
    const auto score_of = [&](const Matrix& kbar) -> double {
        const auto gain = gain_from(kbar);
        if (!gain) return std::numeric_limits<double>::infinity();
        if (spectrum_distance(eig(a - *gain * c), targets) > 1e-6)
            return std::numeric_limits<double>::infinity();
        return (a - *gain * c).norm();
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr int kDraws = 24;
    double best_score = std::numeric_limits<double>::infinity();
    Matrix best_kbar;
    for (int attempt = 0; attempt < kDraws; ++attempt) {
        Matrix kbar(c.rows(), n);
        for (Eigen::Index i = 0; i < kbar.rows(); ++i)
            for (Eigen::Index j = 0; j < kbar.cols(); ++j)
                kbar(i, j) = gauss(rng);
        const double score = score_of(kbar);
        if (score < best_score) {
            best_score = score;
            best_kbar = kbar;
        }
        if (c.rows() == 1 && std::isfinite(best_score)) break;  // single-output gain is unique
    }
    if (!std::isfinite(best_score))
        throw infeasible_design_error("place_poles: no attempt produced the requested spectrum");

    if (c.rows() > 1) {
        double step = 0.5;
        for (int round = 0; round < 200 && step > 1e-6; ++round) {
            bool improved = false;
            for (Eigen::Index i = 0; i < best_kbar.rows(); ++i) {
                for (Eigen::Index j = 0; j < best_kbar.cols(); ++j) {
                    for (double sign : {1.0, -1.0}) {
                        Matrix trial = best_kbar;
                        trial(i, j) += sign * step;
                        const double score = score_of(trial);
                        if (score < best_score) {
                            best_score = score;
                            best_kbar = trial;
                            improved = true;
                        }
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
    }

    out.gain = *gain_from(best_kbar);
    out.achieved = eig(a - out.gain * c);
    return out;
}

inline Matrix place_poles(const Matrix& a, const Matrix& c, const Spectrum& desired,
                          std::uint64_t seed = kDefaultSeed) {
    return place_poles_detailed(a, c, desired, seed).gain;
}

}  // namespace cubicobs::numerics
