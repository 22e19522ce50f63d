/// @file test_quadrature.cpp
/// @brief Gauss-Legendre rules: pinned low-order values and exactness.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "entropycg/quadrature.hpp"

using namespace entropycg;

namespace {

/// Integrates x^k over [0,1] with the given 1D rule.
double integrate_monomial(const QuadratureRule1D& rule, int k) {
    double s = 0.0;
    for (int q = 0; q < rule.size(); ++q) s += rule.weights[q] * std::pow(rule.points[q], k);
    return s;
}

}  // namespace

TEST_CASE("one-point rule is the midpoint rule") {
    const QuadratureRule1D rule = gauss_legendre(1);
    REQUIRE(rule.size() == 1);
    CHECK(rule.points[0] == Catch::Approx(0.5).margin(1e-15));
    CHECK(rule.weights[0] == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("two-point rule: symmetric nodes, weights sum to one") {
    const QuadratureRule1D rule = gauss_legendre(2);
    REQUIRE(rule.size() == 2);
    CHECK(rule.weights[0] + rule.weights[1] == Catch::Approx(1.0).margin(1e-15));
    CHECK(rule.points[0] + rule.points[1] == Catch::Approx(1.0).margin(1e-14));
    // Nodes are 1/2 -+ 1/(2 sqrt 3).
    const double d = 0.5 / std::sqrt(3.0);
    CHECK(rule.points[0] == Catch::Approx(0.5 - d).margin(1e-14));
    CHECK(rule.points[1] == Catch::Approx(0.5 + d).margin(1e-14));
}

TEST_CASE("n-point rule integrates degree 2n-1 exactly") {
    for (int n = 1; n <= 12; ++n) {
        const QuadratureRule1D rule = gauss_legendre(n);
        for (int k = 0; k <= 2 * n - 1; ++k) {
            const double exact = 1.0 / (k + 1);
            INFO("n=" << n << " k=" << k);
            CHECK(integrate_monomial(rule, k) == Catch::Approx(exact).margin(1e-13));
        }
    }
}

TEST_CASE("n-point rule misses degree 2n") {
    for (int n = 1; n <= 6; ++n) {
        const QuadratureRule1D rule = gauss_legendre(n);
        const int k = 2 * n;
        CHECK(std::fabs(integrate_monomial(rule, k) - 1.0 / (k + 1)) > 1e-10);
    }
}

TEST_CASE("nodes ascend and lie inside (0,1), weights positive") {
    for (int n = 1; n <= 20; ++n) {
        const QuadratureRule1D rule = gauss_legendre(n);
        for (int q = 0; q < n; ++q) {
            CHECK(rule.points[q] > 0.0);
            CHECK(rule.points[q] < 1.0);
            CHECK(rule.weights[q] > 0.0);
            if (q > 0) CHECK(rule.points[q] > rule.points[q - 1]);
        }
    }
}

TEST_CASE("order out of range throws") {
    CHECK_THROWS_AS(gauss_legendre(0), std::invalid_argument);
    CHECK_THROWS_AS(gauss_legendre(65), std::invalid_argument);
}

TEST_CASE("tensor rule in 1D mirrors the line rule") {
    const QuadratureRule1D line = gauss_legendre(3);
    const QuadratureRule rule = tensor_gauss(3, 1);
    REQUIRE(rule.size() == 3);
    for (int q = 0; q < 3; ++q) {
        CHECK(rule.points[q][0] == line.points[q]);
        CHECK(rule.points[q][1] == 0.0);
        CHECK(rule.weights[q] == line.weights[q]);
    }
}

TEST_CASE("tensor rule integrates bivariate monomials on the unit square") {
    const int n = 4;
    const QuadratureRule rule = tensor_gauss(n, 2);
    REQUIRE(rule.size() == n * n);
    double wsum = 0.0;
    for (int q = 0; q < rule.size(); ++q) wsum += rule.weights[q];
    CHECK(wsum == Catch::Approx(1.0).margin(1e-14));
    for (int a = 0; a <= 2 * n - 1; ++a)
        for (int b = 0; b <= 2 * n - 1; ++b) {
            double s = 0.0;
            for (int q = 0; q < rule.size(); ++q)
                s += rule.weights[q] * std::pow(rule.points[q][0], a) *
                     std::pow(rule.points[q][1], b);
            const double exact = 1.0 / ((a + 1) * (b + 1));
            INFO("a=" << a << " b=" << b);
            CHECK(s == Catch::Approx(exact).margin(1e-13));
        }
}

TEST_CASE("tensor rule orders points x-fastest") {
    const QuadratureRule1D line = gauss_legendre(2);
    const QuadratureRule rule = tensor_gauss(2, 2);
    // Index q = j*2 + i carries (x_i, y_j).
    CHECK(rule.points[1][0] == line.points[1]);
    CHECK(rule.points[1][1] == line.points[0]);
    CHECK(rule.points[2][0] == line.points[0]);
    CHECK(rule.points[2][1] == line.points[1]);
}

TEST_CASE("tensor rule rejects unsupported dimensions") {
    CHECK_THROWS_AS(tensor_gauss(2, 0), std::invalid_argument);
    CHECK_THROWS_AS(tensor_gauss(2, 3), std::invalid_argument);
}
