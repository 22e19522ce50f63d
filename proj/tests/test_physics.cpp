/// @file test_physics.cpp
/// @brief Flux models: pinned values, entropy-pair compatibility,
/// wave-speed dominance, the exact pre-shock solution, and the
/// benchmark presets.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "entropycg/physics.hpp"

using namespace entropycg;

namespace {

double unit_real(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

/// Central difference of a scalar component of a Vec2-valued function.
double fd(const std::function<Vec2(const Vec2&, double)>& g, const Vec2& x, double u, int comp) {
    const double eps = 1e-6 * std::max(1.0, std::fabs(u));
    return (g(x, u + eps)[comp] - g(x, u - eps)[comp]) / (2.0 * eps);
}

}  // namespace

TEST_CASE("linear advection with unit speed: pinned values") {
    const FluxModel m = linear_advection(1, {1.0, 0.0});
    const Vec2 x = {0.0, 0.0};
    CHECK(m.f(x, 2.0)[0] == 2.0);
    CHECK(m.q(x, 2.0)[0] == 2.0);
    CHECK(m.psi(x, 2.0)[0] == 2.0);
    CHECK(m.lambda(x, x, -3.0, 7.0, {1.0, 0.0}) == 1.0);
    CHECK(m.eta(2.0) == 2.0);
    CHECK(m.v(2.0) == 2.0);
    CHECK(m.linear_in_u);
    CHECK(m.state_independent_lambda);
    CHECK(m.polynomial);
}

TEST_CASE("Burgers flux: pinned entropy potential and wave speed") {
    const FluxModel m = burgers();
    const Vec2 x = {0.0, 0.0};
    CHECK(m.psi(x, 1.0)[0] == Catch::Approx(1.0 / 6.0).margin(1e-15));
    CHECK(m.lambda(x, x, -1.0, 2.0, {1.0, 0.0}) == 2.0);
    CHECK(m.q(x, 2.0)[0] == Catch::Approx(8.0 / 3.0).margin(1e-14));
    CHECK(m.f(x, 3.0)[0] == Catch::Approx(4.5).margin(1e-15));
    CHECK_FALSE(m.linear_in_u);
}

TEST_CASE("Buckley-Leverett flux: endpoints, wave speed, entropy flux") {
    const FluxModel m = buckley_leverett();
    const Vec2 x = {0.0, 0.0};
    CHECK(m.f(x, 0.0)[0] == Catch::Approx(0.0).margin(1e-15));
    CHECK(m.f(x, 0.0)[1] == Catch::Approx(0.0).margin(1e-15));
    CHECK(m.f(x, 1.0)[0] == Catch::Approx(1.0).margin(1e-15));
    CHECK(m.f(x, 1.0)[1] == Catch::Approx(1.0).margin(1e-15));
    CHECK(m.lambda(x, x, 0.3, 0.9, {1.0, 0.0}) == 3.4);

    // Entropy flux: frozen closed-form values.
    CHECK(m.q(x, 0.0)[0] == Catch::Approx(-0.5).margin(1e-14));
    CHECK(m.q(x, 0.0)[1] == Catch::Approx(-1.48174770424681038702).margin(1e-14));
    CHECK(m.q(x, 0.3)[0] == Catch::Approx(-0.46726648200165095766).margin(1e-14));
    CHECK(m.q(x, 0.3)[1] == Catch::Approx(-1.52195117753003810002).margin(1e-14));
}

TEST_CASE("KPP flux: pinned values and entropy pair") {
    const FluxModel m = kpp();
    const Vec2 x = {0.0, 0.0};
    const double r = std::sqrt(0.5);
    CHECK(m.f(x, M_PI / 4.0)[0] == Catch::Approx(r).margin(1e-15));
    CHECK(m.f(x, M_PI / 4.0)[1] == Catch::Approx(r).margin(1e-15));
    CHECK(m.lambda(x, x, 0.0, 10.0, {0.0, 1.0}) == 1.0);
    const double u = 1.3;
    CHECK(m.q(x, u)[0] == Catch::Approx(u * std::sin(u) + std::cos(u)).margin(1e-15));
    CHECK(m.q(x, u)[1] == Catch::Approx(u * std::cos(u) - std::sin(u)).margin(1e-15));
    CHECK(m.invariant[0] == Catch::Approx(M_PI / 4.0).margin(1e-15));
    CHECK(m.invariant[1] == Catch::Approx(3.5 * M_PI).margin(1e-15));
}

TEST_CASE("entropy pairs satisfy q' = v f' and psi = v f - q") {
    std::mt19937_64 rng(360);
    const Vec2 x = {0.2, -0.4};
    const std::vector<FluxModel> models = {linear_advection(1, {0.7, 0.0}), burgers(),
                                           buckley_leverett(), kpp()};
    for (const FluxModel& m : models) {
        for (int trial = 0; trial < 50; ++trial) {
            double u = 2.0 * unit_real(rng) - 1.0;
            if (m.name == "buckley_leverett") u = 0.02 + 0.96 * unit_real(rng);
            if (m.name == "kpp") u = M_PI / 4.0 + (3.25 * M_PI) * unit_real(rng);
            for (int comp = 0; comp < m.dim; ++comp) {
                const double qprime = fd(m.q, x, u, comp);
                const double expected = m.v(u) * m.fprime(x, u)[comp];
                INFO(m.name << " u=" << u << " comp=" << comp);
                CHECK(qprime ==
                      Catch::Approx(expected).margin(1e-6 * std::max(1.0, std::fabs(expected))));
                // f' itself against a difference of f.
                const double fp_fd = fd(m.f, x, u, comp);
                CHECK(m.fprime(x, u)[comp] ==
                      Catch::Approx(fp_fd).margin(1e-6 * std::max(1.0, std::fabs(fp_fd))));
                // Potential identity.
                const double psi = m.v(u) * m.f(x, u)[comp] - m.q(x, u)[comp];
                CHECK(m.psi(x, u)[comp] == Catch::Approx(psi).margin(1e-12));
            }
        }
    }
}

TEST_CASE("wave speed bound dominates |n . f'| along state segments") {
    std::mt19937_64 rng(1234);
    const Vec2 x = {0.0, 0.0};
    const std::vector<FluxModel> models = {burgers(), buckley_leverett(), kpp()};
    for (const FluxModel& m : models) {
        for (int trial = 0; trial < 100; ++trial) {
            double ui, uj;
            if (m.name == "burgers") {
                ui = 2.0 * unit_real(rng) - 1.0;
                uj = 2.0 * unit_real(rng) - 1.0;
            } else if (m.name == "buckley_leverett") {
                ui = unit_real(rng);
                uj = unit_real(rng);
            } else {
                ui = M_PI / 4.0 + 3.25 * M_PI * unit_real(rng);
                uj = M_PI / 4.0 + 3.25 * M_PI * unit_real(rng);
            }
            const Vec2 dirs[2] = {{1.0, 0.0}, {0.0, 1.0}};
            for (int d = 0; d < m.dim; ++d) {
                const double lam = m.lambda(x, x, ui, uj, dirs[d]);
                for (int s = 0; s <= 10; ++s) {
                    const double u = ui + 0.1 * s * (uj - ui);
                    const double speed = std::fabs(dot(dirs[d], m.fprime(x, u), m.dim));
                    INFO(m.name << " ui=" << ui << " uj=" << uj << " theta=" << 0.1 * s);
                    CHECK(speed <= lam + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("pre-shock exact solution: initial data, implicit relation, domain") {
    CHECK(burgers_exact_sine(0.37, 0.0) == Catch::Approx(std::sin(2.0 * M_PI * 0.37)).margin(1e-15));
    const double t_crit = 1.0 / (2.0 * M_PI);
    CHECK_THROWS_AS(burgers_exact_sine(0.5, t_crit), std::invalid_argument);
    CHECK_THROWS_AS(burgers_exact_sine(0.5, 1.0), std::invalid_argument);

    std::mt19937_64 rng(88);
    for (int trial = 0; trial < 200; ++trial) {
        const double x = unit_real(rng);
        const double t = 0.9 * t_crit * unit_real(rng);
        const double u = burgers_exact_sine(x, t);
        CHECK(std::fabs(u - std::sin(2.0 * M_PI * (x - u * t))) <= 1e-10);
        CHECK(std::fabs(u) <= 1.0 + 1e-9);
    }
}

TEST_CASE("solid body rotation returns to the initial data after one turn") {
    const BenchmarkProblem b = benchmark("solid_body_rotation");
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec2 x = {unit_real(rng), unit_real(rng)};
        CHECK(b.exact(x, 1.0) == Catch::Approx(b.u0(x)).margin(1e-12));
    }
    // Velocity field is divergence free and vanishes at the center.
    const Vec2 vc = b.flux.velocity({0.5, 0.5});
    CHECK(std::fabs(vc[0]) <= 1e-15);
    CHECK(std::fabs(vc[1]) <= 1e-15);
}

TEST_CASE("benchmark presets load with the documented shapes") {
    for (const std::string name : {"adv1d_cos", "adv1d_threebody", "burgers1d",
                                   "solid_body_rotation", "buckley_leverett", "kpp"}) {
        const BenchmarkProblem b = benchmark(name);
        CHECK(b.name == name);
        CHECK(b.dim == b.flux.dim);
        CHECK(b.t_final > 0.0);
        // Initial data stays inside the invariant interval.
        std::mt19937_64 rng(9001);
        for (int trial = 0; trial < 200; ++trial) {
            const Vec2 x = {b.lower[0] + (b.upper[0] - b.lower[0]) * unit_real(rng),
                            b.dim == 1 ? 0.0
                                       : b.lower[1] + (b.upper[1] - b.lower[1]) * unit_real(rng)};
            const double u = b.u0(x);
            CHECK(u >= b.flux.invariant[0] - 1e-12);
            CHECK(u <= b.flux.invariant[1] + 1e-12);
        }
    }
    CHECK_THROWS_AS(benchmark("nope"), std::invalid_argument);
}

TEST_CASE("benchmark exact solutions at t = 0 match the initial data") {
    for (const std::string name : {"adv1d_cos", "adv1d_threebody", "burgers1d"}) {
        const BenchmarkProblem b = benchmark(name);
        REQUIRE(b.exact);
        std::mt19937_64 rng(606);
        for (int trial = 0; trial < 100; ++trial) {
            const Vec2 x = {unit_real(rng), 0.0};
            CHECK(b.exact(x, 0.0) == Catch::Approx(b.u0(x)).margin(1e-12));
        }
    }
    // Unit-speed periodic translation: one period returns the profile.
    const BenchmarkProblem tb = benchmark("adv1d_threebody");
    std::mt19937_64 rng(607);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec2 x = {unit_real(rng), 0.0};
        CHECK(tb.exact(x, 1.0) == Catch::Approx(tb.u0(x)).margin(1e-12));
    }
}
