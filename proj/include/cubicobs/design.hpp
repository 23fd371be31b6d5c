#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cubicobs/numerics.hpp"
#include "cubicobs/plant.hpp"

// Observer-parameter synthesis. The observer family is
//
//   w'(t) = G w + L y (+ sum_i J_i y(t - tau_i) + sum_j H_j u(t - delta_j))
//           - (r' theta r) N r,     r = innovation
//   xhat  = w + E y
//
// with the cubic injection gain N chosen against a Lyapunov certificate P.
// Every accepted design satisfies the state-decoupling condition
// (I - E C) A - G (I - E C) - L C = 0 up to a reported residual, which is
// what removes the plant state from the estimation-error dynamics.

namespace cubicobs::design {

inline constexpr double kAcceptResidual = 1e-6;  // least-squares design paths
inline constexpr double kExactResidual = 1e-8;   // constructions that should be exact

struct EquilibriumSearch {
    int trials = 0;
    std::uint64_t seed = 0;
    int converged_to_origin = 0;
    int no_convergence = 0;
    std::vector<Vector> violations;      // distinct nonzero roots found
    std::vector<double> violation_norms;

    bool clean() const { return violations.empty(); }
};

struct DesignReport {
    // ||(I - E C) A - G (I - E C) - L C||_F, the state-decoupling residual.
    double consistency_residual = 0.0;
    int rank_cw = -1;  // rank of C*W and W for the alpha construction
    int rank_w = -1;
    // ||(I - E C) B_d||_F; NaN when the plant has no unknown input.
    double unknown_input_residual = std::numeric_limits<double>::quiet_NaN();
    // ||W F - B_d||_F for the least-squares F; NaN when not applicable.
    double range_residual = std::numeric_limits<double>::quiet_NaN();
    bool decoupling_failed = false;
    std::vector<double> delay_constraint_residuals;
    // The negativity condition on P N C + C' N' P can only hold semidefinitely
    // when rank(C' theta C) < n; flagged so downstream checks know.
    bool injection_semidefinite_only = false;
    EquilibriumSearch equilibrium_check;
    Spectrum placed_eigenvalues;
    Spectrum requested_poles;
    bool poles_perturbed = false;
    std::string notes;
};

struct ObserverDesign {
    Matrix G;            // n x n, Hurwitz
    Matrix L;            // n x n_y output-injection gain (the delayed family calls it J)
    Matrix E;            // n x n_y output feedthrough
    Matrix effective_C;  // the output matrix the observer is driven by (C or the delay-compressed one)
    Matrix theta;        // n_y x n_y, symmetric PSD innovation weight
    Matrix N;            // n x n_y cubic injection gain
    Matrix P;            // n x n Lyapunov certificate
    double gamma = 1.0;
    std::vector<Matrix> delayed_output_gains;  // J_i, one per state delay
    std::vector<Matrix> input_feedforward;     // H_j, one per input channel

    int n() const { return static_cast<int>(G.rows()); }
    int ny() const { return static_cast<int>(effective_C.rows()); }
    bool has_cubic_gain() const { return N.size() > 0; }
};

// Carries the partial report out of a rejected design so callers can still
// write it.
struct design_rejected : infeasible_design_error {
    design_rejected(const std::string& what, DesignReport report,
                    double residual = std::numeric_limits<double>::quiet_NaN(),
                    int delay_index = -1)
        : infeasible_design_error(what, residual, delay_index), report(std::move(report)) {}

    DesignReport report;
};

inline double consistency_residual(const Matrix& a, const ObserverDesign& d) {
    const Matrix iec = Matrix::Identity(a.rows(), a.cols()) - d.E * d.effective_C;
    return (iec * a - d.G * iec - d.L * d.effective_C).norm();
}

// Delay-compressed output matrix: sum_i C_i * exp(-A d_i). A zero delay
// contributes its C_i verbatim.
inline Matrix compute_cbar(const Matrix& a, const std::vector<OutputDelay>& output_delays) {
    if (output_delays.empty()) throw invalid_input_error("compute_cbar: no output delays given");
    numerics::detail::require_square(a, "compute_cbar");
    Matrix cbar = Matrix::Zero(output_delays.front().C.rows(), a.cols());
    for (const auto& od : output_delays) {
        if (od.C.cols() != a.cols())
            throw dimension_error("compute_cbar: C_i column count must match A");
        if (od.d == 0.0)
            cbar += od.C;
        else
            cbar += od.C * numerics::expm(-a * od.d);
    }
    return cbar;
}

inline Matrix effective_output_matrix(const PlantModel& plant) {
    return plant.has_output_delays() ? compute_cbar(plant.A, plant.output_delays) : plant.C;
}

namespace detail {

inline void require_psd(const Matrix& theta, const char* op) {
    if (theta.rows() != theta.cols()) throw dimension_error(std::string(op) + ": theta must be square");
    if ((theta - theta.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * std::max(1.0, theta.cwiseAbs().maxCoeff()))
        throw invalid_input_error(std::string(op) + ": theta is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(theta));
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
        throw invalid_input_error(std::string(op) + ": theta has a negative eigenvalue");
}

inline std::vector<Matrix> feedforward_gains(const PlantModel& plant, const Matrix& iec) {
    std::vector<Matrix> h;
    h.reserve(plant.input_channels.size());
    for (const auto& ch : plant.input_channels) h.push_back(iec * ch.B);
    return h;
}

}  // namespace detail

struct CubicGain {
    Matrix N;
    Matrix P;
    bool semidefinite_only = false;
};

// Cubic injection gain: P solves G'P + PG = -Q, then N = -gamma P^{-1} C' theta,
// which gives P N C + C' N' P = -2 gamma C' theta C (negative semidefinite,
// strict only when C' theta C has full rank).
inline CubicGain design_cubic_gain(const Matrix& g, const Matrix& c_eff, const Matrix& theta,
                                   double gamma, const Matrix& q) {
    if (!(gamma > 0.0)) throw invalid_input_error("design_cubic_gain: gamma must be > 0");
    if (c_eff.cols() != g.rows())
        throw dimension_error("design_cubic_gain: C column count must match G");
    if (theta.rows() != c_eff.rows())
        throw dimension_error("design_cubic_gain: theta must be n_y x n_y");
    detail::require_psd(theta, "design_cubic_gain");

    CubicGain out;
    out.P = numerics::lyap_solve(g, q);  // throws when G is not Hurwitz
    Eigen::LLT<Matrix> llt(out.P);
    if (llt.info() != Eigen::Success)
        throw error("design_cubic_gain: Lyapunov solution is not positive definite");
    out.N = -gamma * llt.solve(c_eff.transpose() * theta);

    const Matrix lhs = out.P * out.N * c_eff + c_eff.transpose() * out.N.transpose() * out.P;
    const Matrix rhs = -2.0 * gamma * c_eff.transpose() * theta * c_eff;
    // representation floor: P N alone cannot be formed more accurately than
    // eps * ||P|| ||N||, so badly conditioned certificates get a wider gate
    const double floor_bound = 100.0 * Eigen::NumTraits<double>::epsilon() * out.P.norm() *
                               out.N.norm() * (1.0 + c_eff.norm());
    if ((lhs - rhs).norm() > std::max(1e-8 * std::max(1.0, rhs.norm()), floor_bound))
        throw error("design_cubic_gain: injection identity violated beyond tolerance");

    out.semidefinite_only = numerics::rank(rhs) < g.rows();
    return out;
}

inline void attach_cubic_gain(ObserverDesign& d, const Matrix& theta, double gamma,
                              const Matrix& q, DesignReport* report = nullptr) {
    const CubicGain cg = design_cubic_gain(d.G, d.effective_C, theta, gamma, q);
    d.theta = theta;
    d.gamma = gamma;
    d.N = cg.N;
    d.P = cg.P;
    if (report) report->injection_semidefinite_only = cg.semidefinite_only;
}

// Full-order design: E = 0, L from pole placement, G = A - L C. The
// decoupling condition then holds identically.
inline std::pair<ObserverDesign, DesignReport> design_linear_fullorder(
    const PlantModel& plant, const Spectrum& desired, std::uint64_t seed = kDefaultSeed,
    const std::optional<Matrix>& c_override = std::nullopt) {
    plant.validate();
    const Matrix c_eff = c_override ? *c_override : effective_output_matrix(plant);
    const Eigen::Index n = plant.A.rows();

    const numerics::PolePlacement placement =
        numerics::place_poles_detailed(plant.A, c_eff, desired, seed);

    ObserverDesign d;
    d.G = plant.A - placement.gain * c_eff;
    d.L = placement.gain;
    d.E = Matrix::Zero(n, c_eff.rows());
    d.effective_C = c_eff;
    d.input_feedforward = detail::feedforward_gains(plant, Matrix::Identity(n, n));

    DesignReport report;
    report.requested_poles = placement.requested;
    report.placed_eigenvalues = placement.achieved;
    report.poles_perturbed = placement.perturbed;
    report.consistency_residual = consistency_residual(plant.A, d);
    if (report.consistency_residual > 1e-9)
        throw design_rejected("design_linear_fullorder: decoupling residual unexpectedly large",
                              report, report.consistency_residual);
    return {std::move(d), std::move(report)};
}

// Scalar-state-matrix design G = -alpha I. W = alpha I + A + Z1 C must
// satisfy rank(C W) = rank(W); E projects onto that range and L is recovered
// from the decoupling condition by pseudoinverse.
inline std::pair<ObserverDesign, DesignReport> design_linear_alpha(
    const PlantModel& plant, double alpha, const Matrix& z1, const Matrix& z2,
    const std::optional<Matrix>& c_override = std::nullopt) {
    plant.validate();
    if (!(alpha > 0.0)) throw invalid_input_error("design_linear_alpha: alpha must be > 0");
    const Matrix c_eff = c_override ? *c_override : effective_output_matrix(plant);
    const Eigen::Index n = plant.A.rows();
    const Eigen::Index ny = c_eff.rows();
    if (z1.rows() != n || z1.cols() != ny)
        throw dimension_error("design_linear_alpha: Z1 must be n x n_y");
    if (z2.rows() != n || z2.cols() != ny)
        throw dimension_error("design_linear_alpha: Z2 must be n x n_y");

    const Matrix ident = Matrix::Identity(n, n);
    const Matrix w = alpha * ident + plant.A + z1 * c_eff;
    const Matrix cw = c_eff * w;

    DesignReport report;
    report.rank_w = numerics::rank(w);
    report.rank_cw = numerics::rank(cw);
    if (report.rank_cw != report.rank_w)
        throw design_rejected("design_linear_alpha: rank(CW) = " + std::to_string(report.rank_cw) +
                                  " != rank(W) = " + std::to_string(report.rank_w),
                              report);

    const Matrix cw_pinv = numerics::pinv(cw);
    ObserverDesign d;
    d.G = -alpha * ident;
    d.E = w * cw_pinv + z2 * (Matrix::Identity(ny, ny) - cw * cw_pinv);
    d.effective_C = c_eff;
    const Matrix iec = ident - d.E * c_eff;
    d.L = (iec * plant.A - d.G * iec) * numerics::pinv(c_eff);
    d.input_feedforward = detail::feedforward_gains(plant, iec);

    report.consistency_residual = consistency_residual(plant.A, d);
    if (report.consistency_residual > kAcceptResidual)
        throw design_rejected("design_linear_alpha: decoupling residual " +
                                  std::to_string(report.consistency_residual) +
                                  " exceeds " + std::to_string(kAcceptResidual),
                              report, report.consistency_residual);
    return {std::move(d), std::move(report)};
}

// Unknown-input variant: additionally reports how well (I - E C) kills the
// disturbance column space. A least-squares F with B_d = W F is attempted;
// when the decoupling residual stays above tolerance the design is returned
// with the failure flagged rather than rejected.
inline std::pair<ObserverDesign, DesignReport> design_unknown_input(
    const PlantModel& plant, double alpha, const Matrix& z1, const Matrix& z2,
    const std::optional<Matrix>& c_override = std::nullopt) {
    if (!plant.unknown_input)
        throw invalid_input_error("design_unknown_input: plant has no unknown-input matrix");
    auto [d, report] = design_linear_alpha(plant, alpha, z1, z2, c_override);

    const Matrix& bd = *plant.unknown_input;
    const Matrix iec = Matrix::Identity(d.n(), d.n()) - d.E * d.effective_C;
    report.unknown_input_residual = (iec * bd).norm();

    const Matrix w = alpha * Matrix::Identity(d.n(), d.n()) + plant.A + z1 * d.effective_C;
    const Matrix f = numerics::pinv(w) * bd;
    report.range_residual = (w * f - bd).norm();
    report.decoupling_failed = report.unknown_input_residual > kExactResidual;
    if (report.decoupling_failed)
        report.notes = "unknown-input decoupling could not be achieved exactly; "
                       "residual is the minimized value";
    return {std::move(d), std::move(report)};
}

// Extends an accepted base design to a state/input-delay plant: feedforward
// gains H_j = (I - E C) B_j and delayed output-injection gains J_i solving
// (I - E C) A_i = J_i C in the least-squares sense.
inline std::pair<ObserverDesign, DesignReport> design_delay_observer(const PlantModel& plant,
                                                                     const ObserverDesign& base) {
    plant.validate();
    if (plant.has_output_delays())
        throw invalid_input_error("design_delay_observer: not applicable to output-delay plants");
    ObserverDesign d = base;
    DesignReport report;
    report.consistency_residual = consistency_residual(plant.A, d);
    if (report.consistency_residual > kAcceptResidual)
        throw invalid_input_error("design_delay_observer: base design violates the decoupling "
                                  "condition (residual " +
                                  std::to_string(report.consistency_residual) + ")");

    const Matrix iec = Matrix::Identity(d.n(), d.n()) - d.E * d.effective_C;
    d.input_feedforward = detail::feedforward_gains(plant, iec);

    const Matrix c_pinv = numerics::pinv(d.effective_C);
    d.delayed_output_gains.clear();
    for (std::size_t i = 0; i < plant.state_delays.size(); ++i) {
        const Matrix lhs = iec * plant.state_delays[i].A;
        const Matrix ji = lhs * c_pinv;
        const double resid = (lhs - ji * d.effective_C).norm();
        report.delay_constraint_residuals.push_back(resid);
        if (resid > kExactResidual)
            throw design_rejected("design_delay_observer: delayed-state constraint unsolvable for "
                                      "delay index " + std::to_string(i) +
                                      " (residual " + std::to_string(resid) + ")",
                                  report, resid, static_cast<int>(i));
        d.delayed_output_gains.push_back(ji);
    }
    return {std::move(d), std::move(report)};
}

// Newton-search falsifier for uniqueness of the origin as an equilibrium of
// the cubic error dynamics. Finding no nonzero root is evidence, not proof.
inline EquilibriumSearch check_equilibrium_uniqueness(const Matrix& g, const Matrix& c_eff,
                                                      const Matrix& theta, const Matrix& n_gain,
                                                      int trials, std::uint64_t seed) {
    numerics::detail::require_square(g, "check_equilibrium_uniqueness");
    const Eigen::Index n = g.rows();
    const Matrix m = c_eff.transpose() * theta * c_eff;
    const Matrix nc = n_gain * c_eff;

    EquilibriumSearch search;
    search.trials = trials;
    search.seed = seed;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < trials; ++trial) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = gauss(rng);
        if (v.norm() == 0.0) v(0) = 1.0;
        v.normalize();

        bool converged = false;
        for (int iter = 0; iter < 80; ++iter) {
            const double quad = v.dot(m * v);
            const Vector fval = g * v + quad * (nc * v);
            if (fval.norm() <= 1e-12 * (1.0 + v.norm())) {
                converged = true;
                break;
            }
            const Matrix jac = g + quad * nc + 2.0 * (nc * v) * (m * v).transpose();
            Eigen::FullPivLU<Matrix> lu(jac);
            if (!lu.isInvertible()) break;
            const Vector step = lu.solve(fval);
            v -= step;
            if (!v.allFinite() || v.norm() > 1e9) break;
        }
        if (!converged) {
            ++search.no_convergence;
            continue;
        }
        if (v.norm() <= 1e-6) {
            ++search.converged_to_origin;
            continue;
        }
        bool duplicate = false;
        for (const auto& known : search.violations)
            if ((known - v).norm() < 1e-6 * (1.0 + v.norm())) duplicate = true;
        if (!duplicate) {
            search.violations.push_back(v);
            search.violation_norms.push_back(v.norm());
        }
    }
    return search;
}

}  // namespace cubicobs::design
