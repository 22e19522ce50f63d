/// @file test_solver.cpp
/// @brief Scheme parsing, the assembled semi-discrete system, its
/// conservation and entropy identities, and the run driver.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "entropycg/solver.hpp"

using namespace entropycg;

namespace {

double unit_real(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

Mesh line(int cells, int degree) {
    return build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {cells, 1}, degree);
}

}  // namespace

TEST_CASE("scheme labels parse and print as an exact round trip") {
    const char* labels[] = {"CG",          "HO-SUPG",       "HO-VMS",       "HO-SUPG-EV",
                            "HO-VMS-EV",   "HO-SUPG-BP",    "HO-VMS-BP",    "HO-SUPG-FL",
                            "HO-VMS-FL",   "HO-SUPG-EV-BP", "HO-VMS-EV-BP", "HO-SUPG-EV-FL",
                            "HO-VMS-EV-FL"};
    for (const char* s : labels) CHECK(scheme_label(parse_scheme(s)) == s);

    const SchemeConfig cg = parse_scheme("CG");
    CHECK(cg.stabilization == StabKind::none);
    CHECK_FALSE(cg.entropy_viscosity);
    CHECK(cg.limiter == LimiterMode::none);
    CHECK(cg.omega == 1.0);

    const SchemeConfig fl = parse_scheme("HO-VMS-EV-FL");
    CHECK(fl.stabilization == StabKind::vms);
    CHECK(fl.entropy_viscosity);
    CHECK(fl.limiter == LimiterMode::fl);

    for (const char* bad : {"", "HO", "HO-XX", "CG-EV", "HO-SUPG-EV-BP-FL", "HO-SUPG-",
                            "ho-supg", "HO-SUPG-BP-EV", "SUPG"})
        CHECK_THROWS_AS(parse_scheme(bad), std::invalid_argument);
}

TEST_CASE("keyword parsers accept their vocabulary and reject the rest") {
    CHECK(parse_integrator("ssprk3") == IntegratorKind::ssprk3);
    CHECK(parse_integrator("rk76") == IntegratorKind::rk76);
    CHECK_THROWS_AS(parse_integrator("rk4"), std::invalid_argument);
    CHECK(parse_basis("bernstein") == BasisType::bernstein);
    CHECK(parse_basis("lagrange") == BasisType::lagrange);
    CHECK_THROWS_AS(parse_basis("legendre"), std::invalid_argument);
    CHECK(parse_recovery("lumped") == RecoveryKind::lumped_average);
    CHECK(parse_recovery("l2") == RecoveryKind::l2_projection);
    CHECK_THROWS_AS(parse_recovery("spr"), std::invalid_argument);
}

TEST_CASE("flux limiting requires the Bernstein basis") {
    const Mesh mesh = line(4, 2);
    CHECK_THROWS_AS(System(mesh, BasisType::lagrange, burgers(), parse_scheme("HO-VMS-EV-FL")),
                    std::invalid_argument);
    CHECK_NOTHROW(System(mesh, BasisType::lagrange, burgers(), parse_scheme("HO-VMS-EV")));
    CHECK_NOTHROW(System(mesh, BasisType::bernstein, burgers(), parse_scheme("HO-VMS-EV-FL")));
}

TEST_CASE("quadrature order tracks the flux polynomiality") {
    const System poly(line(4, 2), BasisType::bernstein, burgers(), parse_scheme("CG"));
    CHECK(poly.context().n_q() == 4);  // degree + 2 points per direction
    const Mesh sq = build_mesh(2, {0.0, 0.0}, {1.0, 1.0}, {3, 3}, 2);
    const System gen(sq, BasisType::bernstein, kpp(), parse_scheme("CG"));
    CHECK(gen.context().n_q() == 25);  // degree + 3 squared
}

TEST_CASE("constant states are exact steady states for every scheme") {
    const char* schemes[] = {"CG", "HO-SUPG-EV", "HO-VMS-EV-FL"};
    for (const char* s : schemes) {
        System sys1(line(6, 2), BasisType::bernstein, burgers(), parse_scheme(s));
        std::vector<double> u(sys1.n_dofs(), 0.37), dudt;
        sys1.rhs(u, dudt);
        for (double v : dudt) CHECK(std::fabs(v) <= 1e-11);

        const Mesh sq = build_mesh(2, {0.0, 0.0}, {1.0, 1.0}, {3, 3}, 2);
        System sys2(sq, BasisType::bernstein, kpp(), parse_scheme(s));
        std::vector<double> w(sys2.n_dofs(), 1.0), dwdt;
        sys2.rhs(w, dwdt);
        for (double v : dwdt) CHECK(std::fabs(v) <= 1e-11);
    }
}

TEST_CASE("unlimited flux decomposition reproduces the consistent-mass rhs") {
    std::mt19937_64 rng(51);
    for (int dim = 1; dim <= 2; ++dim) {
        const Mesh mesh = dim == 1 ? line(8, 2)
                                   : build_mesh(2, {0.0, 0.0}, {1.0, 1.0}, {3, 3}, 2);
        System sys(mesh, BasisType::bernstein, dim == 1 ? burgers() : kpp(),
                   parse_scheme("HO-VMS-EV-FL"));
        const int N = sys.n_dofs();
        std::vector<double> u(N), a, b;
        const double lo = sys.flux().invariant[0], hi = sys.flux().invariant[1];
        for (int trial = 0; trial < 5; ++trial) {
            for (int i = 0; i < N; ++i) u[i] = lo + (hi - lo) * unit_real(rng);
            sys.unlimited_rhs(u, a);
            sys.decomposition_rhs(u, b);
            double scale = 1.0;
            for (int i = 0; i < N; ++i) scale = std::max(scale, std::fabs(a[i]));
            for (int i = 0; i < N; ++i) CHECK(std::fabs(a[i] - b[i]) <= 1e-11 * scale);
        }
    }
}

TEST_CASE("every scheme conserves the total mass") {
    std::mt19937_64 rng(53);
    const char* schemes[] = {"CG", "HO-SUPG", "HO-VMS-EV", "HO-VMS-EV-BP", "HO-VMS-EV-FL"};
    for (const char* s : schemes) {
        System sys(line(8, 2), BasisType::bernstein, burgers(), parse_scheme(s));
        const int N = sys.n_dofs();
        const std::vector<double>& m = sys.lumped_mass();
        std::vector<double> u(N), dudt;
        for (int trial = 0; trial < 5; ++trial) {
            for (int i = 0; i < N; ++i) u[i] = 2.0 * unit_real(rng) - 1.0;
            sys.rhs(u, dudt);
            double rate = 0.0, scale = 1.0;
            for (int i = 0; i < N; ++i) {
                rate += m[i] * dudt[i];
                scale = std::max(scale, std::fabs(m[i] * dudt[i]));
            }
            CHECK(std::fabs(rate) <= 1e-10 * scale);
        }
    }
}

TEST_CASE("the pure Galerkin entropy balance closes to rounding") {
    std::mt19937_64 rng(57);
    System sys(line(8, 3), BasisType::bernstein, burgers(), parse_scheme("CG"));
    const int N = sys.n_dofs();
    std::vector<double> u(N), dudt;
    for (int trial = 0; trial < 10; ++trial) {
        for (int i = 0; i < N; ++i) u[i] = 2.0 * unit_real(rng) - 1.0;
        sys.rhs(u, dudt);
        const ElementBudget b = sys.entropy_budget(u, dudt);
        const double scale = std::max(1.0, std::fabs(sys.integral_entropy(u)));
        CHECK(std::fabs(b.lhs) <= 1e-10 * scale);
    }
}

TEST_CASE("entropy functionals of a constant equal volume times eta") {
    System sys(line(5, 2), BasisType::bernstein, burgers(), parse_scheme("CG"));
    const std::vector<double> u(sys.n_dofs(), 0.6);
    CHECK(sys.lumped_entropy(u) == Catch::Approx(0.18).margin(1e-13));
    CHECK(sys.integral_entropy(u) == Catch::Approx(0.18).margin(1e-13));
}

TEST_CASE("interpolation of a basis-degree polynomial is L1-exact") {
    System sys(line(5, 2), BasisType::bernstein, burgers(), parse_scheme("CG"));
    // Value-periodic on [0,1]: the seam node is written by both adjacent
    // elements, so f(0) must equal f(1).
    const auto f = [](const Vec2& x) { return 1.0 + (x[0] - 0.5) * (x[0] - 0.5); };
    const std::vector<double> u = sys.interpolate(f);
    CHECK(sys.l1_error(u, f) <= 1e-13);
    // Bernstein coefficients of a non-linear function differ from its
    // nodal values, so sampling is not interpolation here.
    const std::vector<double> us = sys.sample(f);
    double diff = 0.0;
    for (int i = 0; i < sys.n_dofs(); ++i) diff = std::max(diff, std::fabs(u[i] - us[i]));
    CHECK(diff > 1e-3);
}

TEST_CASE("initial data honors the per-benchmark sampling choice") {
    const BenchmarkProblem sbr = benchmark("solid_body_rotation");
    const Mesh sq = build_mesh(2, sbr.lower, sbr.upper, {8, 8}, 1);
    System sys2(sq, BasisType::bernstein, sbr.flux, parse_scheme(sbr.default_scheme));
    CHECK(sbr.sample_initial_data);
    CHECK(sys2.initial_state(sbr) == sys2.sample(sbr.u0));

    const BenchmarkProblem bur = benchmark("burgers1d");
    const Mesh m1 = build_mesh(1, bur.lower, bur.upper, {8, 1}, 2);
    System sys1(m1, BasisType::bernstein, bur.flux, parse_scheme(bur.default_scheme));
    CHECK_FALSE(bur.sample_initial_data);
    CHECK(sys1.initial_state(bur) == sys1.interpolate(bur.u0));
}

TEST_CASE("advance: zero final time returns immediately") {
    System sys(line(6, 1), BasisType::bernstein, burgers(), parse_scheme("CG"));
    std::vector<double> u = sys.interpolate([](const Vec2& x) { return std::sin(x[0]); });
    const std::vector<double> ref = u;
    RunOptions opt;
    opt.t_final = 0.0;
    const RunResult res = sys.advance(u, opt);
    CHECK(res.steps == 0);
    CHECK(res.t == 0.0);
    CHECK_FALSE(res.blew_up);
    CHECK(u == ref);
}

TEST_CASE("advance: smooth advection converges at second order on P1") {
    const BenchmarkProblem b = benchmark("adv1d_cos");
    const auto err = [&](int cells) {
        const Mesh mesh = build_mesh(1, b.lower, b.upper, {cells, 1}, 1);
        System sys(mesh, BasisType::bernstein, b.flux, parse_scheme("HO-SUPG"));
        std::vector<double> u = sys.initial_state(b);
        RunOptions opt;
        opt.t_final = b.t_final;
        const RunResult res = sys.advance(u, opt);
        REQUIRE_FALSE(res.blew_up);
        REQUIRE(res.t == Catch::Approx(b.t_final).margin(1e-12));
        return sys.l1_error(u, [&](const Vec2& x) { return b.exact(x, b.t_final); });
    };
    // Coarse pairs sit above 2 (2.6 at 8->16, decaying toward 2), so the
    // asymptotic claim needs the finer pair.
    const double e1 = err(64), e2 = err(128);
    CHECK(std::log2(e1 / e2) == Catch::Approx(2.0).margin(0.3));
}

TEST_CASE("advance: an unstable step size is flagged as blow-up") {
    const BenchmarkProblem b = benchmark("burgers1d");
    const Mesh mesh = build_mesh(1, b.lower, b.upper, {16, 1}, 1);
    System sys(mesh, BasisType::bernstein, b.flux, parse_scheme("CG"));
    std::vector<double> u = sys.initial_state(b);
    RunOptions opt;
    // A horizon short enough to clamp dt would end the run after one
    // oversized step before the instability can compound.
    opt.t_final = 10.0;
    opt.cfl = 50.0;
    opt.max_steps = 500;
    const RunResult res = sys.advance(u, opt);
    CHECK(res.blew_up);
    CHECK(res.t < opt.t_final);
}

TEST_CASE("advance: step callback sees every accepted step") {
    System sys(line(8, 1), BasisType::bernstein, linear_advection(1, {1.0, 0.0}),
               parse_scheme("HO-SUPG"));
    std::vector<double> u = sys.interpolate([](const Vec2& x) { return std::cos(x[0]); });
    RunOptions opt;
    opt.t_final = 0.25;
    long long count = 0;
    double last_t = 0.0;
    opt.on_step = [&](long long step, double t, double dt, const std::vector<double>& state) {
        ++count;
        CHECK(step == count);
        CHECK(dt > 0.0);
        CHECK(t > last_t);
        last_t = t;
        CHECK(static_cast<int>(state.size()) == sys.n_dofs());
    };
    const RunResult res = sys.advance(u, opt);
    CHECK(res.steps == count);
    CHECK(res.t == Catch::Approx(0.25).margin(1e-12));
    CHECK(last_t == Catch::Approx(0.25).margin(1e-12));

    // A step cap halts the run early.
    std::vector<double> v = u;
    RunOptions capped;
    capped.t_final = 0.25;
    capped.max_steps = 3;
    const RunResult r2 = sys.advance(v, capped);
    CHECK(r2.steps == 3);
    CHECK(r2.t < 0.25);
}

TEST_CASE("system time step matches the standalone CFL control") {
    const FluxModel adv = linear_advection(1, {1.0, 0.0});
    System sys(line(4, 1), BasisType::bernstein, adv, parse_scheme("CG"));
    const std::vector<double> u(sys.n_dofs(), 0.0);
    // State-independent speeds use the cached base step.
    CHECK(sys.timestep(u, 1e9, 1.0) == Catch::Approx(0.25 / 4.0).margin(1e-15));
    CHECK(sys.timestep(u, 1e9, 1.0) ==
          Catch::Approx(cfl_timestep(sys.context(), adv, u, 1.0, 1e9)).margin(1e-15));
    CHECK(sys.timestep(u, 1e-3, 1.0) == 1e-3);
    CHECK_THROWS_AS(sys.timestep(u, 1.0, 0.0), std::invalid_argument);

    System bsys(line(4, 1), BasisType::bernstein, burgers(), parse_scheme("CG"));
    const std::vector<double> ub(bsys.n_dofs(), 2.0);
    CHECK(bsys.timestep(ub, 1e9, 0.5) ==
          Catch::Approx(cfl_timestep(bsys.context(), bsys.flux(), ub, 0.5, 1e9)).margin(1e-15));
}

TEST_CASE("run diagnostics accumulate and restore") {
    std::mt19937_64 rng(61);
    System sys(line(8, 2), BasisType::bernstein, burgers(), parse_scheme("HO-VMS-EV"));
    const int N = sys.n_dofs();
    std::vector<double> u(N), dudt;
    sys.reset_run_diagnostics();
    for (int trial = 0; trial < 5; ++trial) {
        for (int i = 0; i < N; ++i) u[i] = 2.0 * unit_real(rng) - 1.0;
        sys.rhs(u, dudt);
        // The local entropy condition holds for each evaluation.
        CHECK(sys.last_diagnostics().entropy_defect_rel <= 1e-10);
    }
    const RhsDiagnostics saved = sys.run_diagnostics();
    CHECK(saved.entropy_defect_rel <= 1e-10);
    CHECK(saved.nu_max >= 0.0);
    sys.reset_run_diagnostics();
    CHECK(sys.run_diagnostics().nu_max == 0.0);
    sys.restore_run_diagnostics(saved);
    CHECK(sys.run_diagnostics().nu_max == saved.nu_max);
    CHECK(sys.run_diagnostics().entropy_defect == saved.entropy_defect);
}
