#include <catch2/catch_amalgamated.hpp>

#include "cubicobs/numerics.hpp"
#include "cubicobs/reference_system.hpp"
#include "oracles.hpp"

using cubicobs::Matrix;
using cubicobs::Spectrum;
using cubicobs::Vector;
using namespace cubicobs::numerics;

namespace {

void check_penrose(const Matrix& m, const Matrix& mp, double tol = 1e-10) {
    const double scale = std::max(1.0, m.norm());
    REQUIRE((m * mp * m - m).norm() <= tol * scale);
    REQUIRE((mp * m * mp - mp).norm() <= tol * std::max(1.0, mp.norm()));
    REQUIRE(((m * mp) - (m * mp).transpose()).norm() <= tol * scale);
    REQUIRE(((mp * m) - (mp * m).transpose()).norm() <= tol * scale);
}

}  // namespace

TEST_CASE("pinv: identity and zero") {
    REQUIRE(pinv(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3), 1e-14));

    const Matrix z = Matrix::Zero(2, 3);
    const Matrix zp = pinv(z);
    REQUIRE(zp.rows() == 3);
    REQUIRE(zp.cols() == 2);
    REQUIRE(zp.norm() == 0.0);
}

TEST_CASE("pinv: Penrose conditions on random matrices") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        check_penrose(oracles::random_matrix(4, 2, seed), pinv(oracles::random_matrix(4, 2, seed)));
        check_penrose(oracles::random_matrix(3, 5, seed + 100),
                      pinv(oracles::random_matrix(3, 5, seed + 100)));
    }
    // rank-deficient input
    const Matrix r1 = oracles::random_matrix(4, 1, 7) * oracles::random_matrix(1, 3, 8);
    check_penrose(r1, pinv(r1));
}

TEST_CASE("pinv: rejects non-finite entries") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(pinv(m), cubicobs::invalid_input_error);
}

TEST_CASE("expm: closed forms") {
    REQUIRE(expm(Matrix::Zero(4, 4)).isApprox(Matrix::Identity(4, 4), 1e-14));

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = -2.0;
    const Matrix e = expm(d);
    REQUIRE(e(0, 0) == Catch::Approx(std::exp(1.0)).epsilon(1e-12));
    REQUIRE(e(1, 1) == Catch::Approx(std::exp(-2.0)).epsilon(1e-12));
    REQUIRE(std::abs(e(0, 1)) + std::abs(e(1, 0)) < 1e-15);
}

TEST_CASE("expm: matches the series oracle on the reference plant") {
    const Matrix a = cubicobs::reference::plant_a();
    const Matrix got = expm(-2.0 * a);
    const Matrix want = oracles::expm_taylor(-2.0 * a);
    REQUIRE((got - want).norm() <= 1e-8 * want.norm());
}

TEST_CASE("expm: group property on random small matrices") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const Matrix m = oracles::random_matrix(4, 4, seed);
        for (double s : {0.3, 1.1}) {
            for (double t : {0.4, 1.7}) {
                const Matrix lhs = expm(m * (s + t));
                const Matrix rhs = expm(m * s) * expm(m * t);
                REQUIRE((lhs - rhs).norm() <= 1e-8 * std::max(1.0, lhs.norm()));
            }
        }
    }
}

TEST_CASE("expm: rejects non-square input") {
    REQUIRE_THROWS_AS(expm(Matrix::Zero(2, 3)), cubicobs::dimension_error);
}

TEST_CASE("lyap_solve: scalar closed form") {
    const Matrix g = -2.0 * Matrix::Identity(3, 3);
    const Matrix p = lyap_solve(g, Matrix::Identity(3, 3));
    REQUIRE(p.isApprox(0.25 * Matrix::Identity(3, 3), 1e-12));
}

TEST_CASE("lyap_solve: hand-solved 2x2 case") {
    Matrix g(2, 2);
    g << -1, 0, 1, -2;
    const Matrix q = Matrix::Identity(2, 2);
    const Matrix p = lyap_solve(g, q);

    // solved by hand from the three scalar equations
    Matrix expected(2, 2);
    expected << 7.0 / 12.0, 1.0 / 12.0, 1.0 / 12.0, 0.25;
    REQUIRE(p.isApprox(expected, 1e-12));
    REQUIRE((g.transpose() * p + p * g + q).norm() <= 1e-9 * q.norm());
}

TEST_CASE("lyap_solve: output is symmetric positive definite") {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        const Matrix g = oracles::random_hurwitz(5, seed);
        Matrix q = oracles::random_matrix(5, 5, seed + 50);
        q = (q * q.transpose() + Matrix::Identity(5, 5)).eval();
        const Matrix p = lyap_solve(g, q);
        REQUIRE((p - p.transpose()).norm() <= 1e-12 * p.norm());
        Eigen::SelfAdjointEigenSolver<Matrix> es(p);
        REQUIRE(es.eigenvalues().minCoeff() > 0.0);
        REQUIRE((g.transpose() * p + p * g + q).norm() <= 1e-9 * q.norm());
    }
}

TEST_CASE("lyap_solve: rejects non-Hurwitz G and bad Q") {
    REQUIRE_THROWS_AS(lyap_solve(Matrix::Identity(1, 1), Matrix::Identity(1, 1)),
                      cubicobs::infeasible_design_error);
    Matrix q(2, 2);
    q << 1, 2, 0, 1;  // not symmetric
    REQUIRE_THROWS_AS(lyap_solve(-Matrix::Identity(2, 2), q), cubicobs::invalid_input_error);
    Matrix nd = Matrix::Identity(2, 2);
    nd(1, 1) = -1.0;  // indefinite
    REQUIRE_THROWS_AS(lyap_solve(-Matrix::Identity(2, 2), nd), cubicobs::invalid_input_error);
}

TEST_CASE("eig: reference plant spectrum") {
    const Spectrum s = eig(cubicobs::reference::plant_a());
    REQUIRE(cubicobs::spectrum_distance(s, cubicobs::reference::plant_eigenvalues()) <= 1e-8);
}

TEST_CASE("eig: identity and rotation") {
    const Spectrum ones = eig(Matrix::Identity(3, 3));
    REQUIRE(cubicobs::spectrum_distance(ones, cubicobs::real_spectrum({1, 1, 1})) <= 1e-14);

    Matrix rot(2, 2);
    rot << 0, 1, -1, 0;
    const Spectrum s = eig(rot);
    Spectrum expected{{0.0, 1.0}, {0.0, -1.0}};
    REQUIRE(cubicobs::spectrum_distance(s, expected) <= 1e-14);
}

TEST_CASE("eig: conjugate pairs for real input") {
    const Matrix m = oracles::random_matrix(6, 6, 31);
    Spectrum s = eig(m);
    Spectrum conj;
    for (auto v : s) conj.push_back(std::conj(v));
    REQUIRE(cubicobs::spectrum_distance(s, conj) <= 1e-10);
}

TEST_CASE("eig: rejects non-square input") {
    REQUIRE_THROWS_AS(eig(Matrix::Zero(2, 3)), cubicobs::dimension_error);
}

TEST_CASE("place_poles: scalar case") {
    const Matrix l = place_poles(-Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                                 cubicobs::real_spectrum({-5.0}));
    REQUIRE(l(0, 0) == Catch::Approx(4.0).margin(1e-9));
}

TEST_CASE("place_poles: double integrator, hand-computed gain") {
    Matrix a(2, 2);
    a << 0, 1, 0, 0;
    Matrix c(1, 2);
    c << 1, 0;
    // characteristic polynomial matching gives L = [3, 2]'
    const Matrix l = place_poles(a, c, cubicobs::real_spectrum({-1.0, -2.0}));
    REQUIRE(l(0, 0) == Catch::Approx(3.0).margin(1e-9));
    REQUIRE(l(1, 0) == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("place_poles: achieved spectrum matches request") {
    for (std::uint64_t seed : {41u, 42u}) {
        const Matrix a = oracles::random_matrix(5, 5, seed);
        const Matrix c = oracles::random_matrix(2, 5, seed + 10);
        const Spectrum desired = cubicobs::real_spectrum({-1.0, -2.5, -3.0, -4.5, -6.0});
        const Matrix l = place_poles(a, c, desired, seed);
        REQUIRE(cubicobs::spectrum_distance(eig(a - l * c), desired) <= 1e-6);
    }
}

TEST_CASE("place_poles: complex-pair targets") {
    const Matrix a = oracles::random_matrix(4, 4, 51);
    const Matrix c = oracles::random_matrix(1, 4, 52);
    Spectrum desired{{-2.0, 1.5}, {-2.0, -1.5}, {-3.0, 0.0}, {-5.0, 0.0}};
    const Matrix l = place_poles(a, c, desired);
    REQUIRE(l.imag().norm() == 0.0);  // gain is real by construction
    REQUIRE(cubicobs::spectrum_distance(eig(a - l * c), desired) <= 1e-6);
}

TEST_CASE("place_poles: repeated targets are split and reported") {
    Matrix a(2, 2);
    a << 0, 1, 0, 0;
    Matrix c(1, 2);
    c << 1, 0;
    const auto detail = place_poles_detailed(a, c, cubicobs::real_spectrum({-3.0, -3.0}));
    REQUIRE(detail.perturbed);
    REQUIRE(cubicobs::spectrum_distance(detail.achieved, cubicobs::real_spectrum({-3.0, -3.0})) <=
            2e-6);
}

TEST_CASE("place_poles: unobservable pair rejected") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = -1.0;
    a(1, 1) = -2.0;
    Matrix c(1, 2);
    c << 1, 0;  // second state invisible
    REQUIRE_THROWS_AS(place_poles(a, c, cubicobs::real_spectrum({-3.0, -4.0})),
                      cubicobs::infeasible_design_error);
}

TEST_CASE("place_poles: conjugation violation rejected") {
    const Matrix a = oracles::random_matrix(2, 2, 61);
    Matrix c(1, 2);
    c << 1, 1;
    Spectrum bad{{-1.0, 1.0}, {-2.0, 0.0}};
    REQUIRE_THROWS_AS(place_poles(a, c, bad), cubicobs::invalid_input_error);
}

TEST_CASE("observability rank") {
    Matrix a(2, 2);
    a << 0, 1, 0, 0;
    Matrix c(1, 2);
    c << 1, 0;
    REQUIRE(observability_rank(a, c) == 2);
    Matrix c2(1, 2);
    c2 << 0, 1;  // measuring the chain's source leaves the first state invisible
    REQUIRE(observability_rank(a, c2) == 1);
}
