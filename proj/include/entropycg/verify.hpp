#pragma once

/// @file verify.hpp
/// @brief Seeded property suites: operator identities, LLF entropy
/// fuzz, IDP bounds, decomposition equivalence, the discrete entropy
/// laws, and the RK order harness.
///
/// Random numbers come from mt19937_64 through a fixed 53-bit mapping,
/// so a given seed produces identical checks on every platform.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "entropycg/solver.hpp"

namespace entropycg {

struct SuiteResult {
    std::string name;
    long long checks = 0;
    long long failures = 0;
    double worst = 0.0;  // largest normalized defect seen
    std::string note;

    bool passed() const { return failures == 0; }
};

namespace detail {
inline double unit_real(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double in_range(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * unit_real(rng);
}

/// Tracks the largest defect and counts threshold violations.
struct DefectTracker {
    SuiteResult& r;
    void check(double defect, double tol, const std::string& what) {
        ++r.checks;
        if (defect > r.worst) {
            r.worst = defect;
            r.note = what;
        }
        if (defect > tol) ++r.failures;
    }
};
}  // namespace detail

/// Element-operator identities on small meshes, all degrees and bases.
inline SuiteResult suite_operators(unsigned long long /*seed*/) {
    SuiteResult r;
    r.name = "operators";
    detail::DefectTracker t{r};
    for (int dim = 1; dim <= 2; ++dim) {
        for (int p = 1; p <= 4; ++p) {
            for (BasisType basis : {BasisType::bernstein, BasisType::lagrange}) {
                const std::array<int, 2> cells = {dim == 1 ? 4 : 3, 3};
                const Mesh mesh =
                    build_mesh(dim, {0.0, 0.0}, {1.0, dim == 1 ? 0.0 : 1.0}, cells, p);
                const ElementContext ctx = build_element_context(mesh, basis, p + 2);
                const ElementOperators& ops = ctx.ops;
                const int n = ctx.n_loc();
                const std::string tag = "dim=" + std::to_string(dim) + " p=" + std::to_string(p) +
                                        " " + to_string(basis);

                double cscale = 1e-300, ctscale = 1e-300;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        cscale = std::max({cscale, std::fabs(ops.c_at(i, j)[0]),
                                           std::fabs(ops.c_at(i, j)[1])});
                        ctscale = std::max({ctscale, std::fabs(ops.ct_at(i, j)[0]),
                                            std::fabs(ops.ct_at(i, j)[1])});
                    }

                for (int i = 0; i < n; ++i) {
                    // Mass row sums equal the lumped masses.
                    double mrow = 0.0;
                    for (int j = 0; j < n; ++j) mrow += ops.mass(i, j);
                    t.check(std::fabs(mrow - ops.lumped[i]) / ops.volume, 1e-12,
                            tag + " mass row sum");
                    // c and the lumped c~ have zero row sums; m~ is a
                    // symmetric zero-row-sum graph Laplacian.
                    Vec2 crow = {0.0, 0.0}, ctrow = {0.0, 0.0};
                    double mtrow = 0.0;
                    for (int j = 0; j < n; ++j) {
                        crow[0] += ops.c_at(i, j)[0];
                        crow[1] += ops.c_at(i, j)[1];
                        ctrow[0] += ops.ct_at(i, j)[0];
                        ctrow[1] += ops.ct_at(i, j)[1];
                        mtrow += ops.mt_at(i, j);
                        t.check(std::fabs(ops.mt_at(i, j) - ops.mt_at(j, i)) / ops.volume, 1e-13,
                                tag + " mt symmetry");
                        // Stencil pattern is exactly the c~ support plus i.
                        const bool support = std::fabs(ops.ct_at(i, j)[0]) +
                                                 std::fabs(ops.ct_at(i, j)[1]) +
                                                 std::fabs(ops.ct_at(j, i)[0]) +
                                                 std::fabs(ops.ct_at(j, i)[1]) >
                                             0.0;
                        const bool member = std::find(ops.stencil[i].begin(),
                                                      ops.stencil[i].end(),
                                                      j) != ops.stencil[i].end();
                        t.check(member == (support || i == j) ? 0.0 : 1.0, 0.5,
                                tag + " stencil pattern");
                    }
                    t.check(norm2(crow, dim) / cscale, 1e-12, tag + " c row sum");
                    t.check(norm2(ctrow, dim) / ctscale, 1e-12, tag + " ct row sum");
                    t.check(std::fabs(mtrow) / ops.volume, 1e-12, tag + " mt row sum");
                }
                // Column sums of the sparsified c match those of c (the
                // potential-system compatibility requirement).
                for (int j = 0; j < n; ++j) {
                    Vec2 col = {0.0, 0.0}, colt = {0.0, 0.0};
                    for (int i = 0; i < n; ++i) {
                        col[0] += ops.c_at(i, j)[0];
                        col[1] += ops.c_at(i, j)[1];
                        colt[0] += ops.ct_at(i, j)[0];
                        colt[1] += ops.ct_at(i, j)[1];
                    }
                    // Goes through the dense M_C solve, so allow its conditioning.
                    t.check(norm2(minus(colt, col), dim) / cscale, 1e-11, tag + " ct column sum");
                }
                // Global convective matrix is skew on the periodic mesh.
                const int N = mesh.n_nodes;
                std::vector<Vec2> C(static_cast<size_t>(N) * N, Vec2{0.0, 0.0});
                for (int e = 0; e < mesh.n_elements; ++e) {
                    const auto& nodes = mesh.element_nodes[e];
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j) {
                            Vec2& g = C[static_cast<size_t>(nodes[i]) * N + nodes[j]];
                            g[0] += ops.c_at(i, j)[0];
                            g[1] += ops.c_at(i, j)[1];
                        }
                }
                double skew = 0.0;
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < N; ++j) {
                        const Vec2& a = C[static_cast<size_t>(i) * N + j];
                        const Vec2& b = C[static_cast<size_t>(j) * N + i];
                        skew = std::max(skew, norm2(plus(a, b), dim));
                    }
                t.check(skew / cscale, 1e-12, tag + " global skew");
            }
        }
    }
    return r;
}

/// LLF pairwise entropy flux is nonpositive for every model.
inline SuiteResult suite_llf_entropy(unsigned long long seed) {
    SuiteResult r;
    r.name = "llf-entropy";
    detail::DefectTracker t{r};
    std::mt19937_64 rng(seed);
    struct Case {
        FluxModel flux;
        double lo, hi;
    };
    std::vector<Case> cases;
    cases.push_back({linear_advection(1, {1.0, 0.0}), -1.0, 1.0});
    cases.push_back({linear_advection(2, {0.8, -0.6}), -1.0, 1.0});
    cases.push_back({burgers(), -1.0, 1.0});
    cases.push_back({buckley_leverett(), 0.0, 1.0});
    cases.push_back({kpp(), 0.25 * M_PI, 3.5 * M_PI});
    for (const Case& c : cases) {
        const int dim = c.flux.dim;
        for (int it = 0; it < 10000; ++it) {
            const double ui = detail::in_range(rng, c.lo, c.hi);
            const double uj = detail::in_range(rng, c.lo, c.hi);
            const Vec2 xi = {detail::unit_real(rng), dim > 1 ? detail::unit_real(rng) : 0.0};
            const Vec2 xj = {detail::unit_real(rng), dim > 1 ? detail::unit_real(rng) : 0.0};
            Vec2 ct = {detail::in_range(rng, -1.0, 1.0),
                       dim > 1 ? detail::in_range(rng, -1.0, 1.0) : 0.0};
            const double a = norm2(ct, dim);
            if (a < 1e-8) continue;
            const Vec2 nij = scaled(ct, 1.0 / a);
            const double d = a * c.flux.lambda(xi, xj, ui, uj, nij);
            const double q = pair_entropy_flux(c.flux, xi, xj, ui, uj, ct, d, dim);
            const double scale =
                std::max({1.0, d * std::fabs(uj - ui),
                          std::fabs(dot(ct, plus(c.flux.f(xj, uj), c.flux.f(xi, ui)), dim))});
            t.check(q / scale, 1e-12, c.flux.name + " entropy flux");
        }
    }
    return r;
}

/// Forward-Euler IDP bounds and bar-state containment.
inline SuiteResult suite_idp(unsigned long long seed) {
    SuiteResult r;
    r.name = "idp";
    detail::DefectTracker t{r};
    std::mt19937_64 rng(seed);

    // Bar states of random Burgers pairs stay between the two states.
    {
        const FluxModel flux = burgers();
        for (int it = 0; it < 10000; ++it) {
            const double ui = detail::in_range(rng, -1.0, 1.0);
            const double uj = detail::in_range(rng, -1.0, 1.0);
            const Vec2 ct = {detail::in_range(rng, -1.0, 1.0), 0.0};
            const double a = std::fabs(ct[0]);
            if (a < 1e-8) continue;
            const double d = a * std::max(std::fabs(ui), std::fabs(uj));
            if (d <= 0.0) continue;
            const double fi = 0.5 * ui * ui, fj = 0.5 * uj * uj;
            const double bar = 0.5 * (ui + uj) - ct[0] * (fj - fi) / (2.0 * d);
            const double lo = std::min(ui, uj), hi = std::max(ui, uj);
            const double range = std::max(1.0, hi - lo);
            t.check((lo - bar) / range, 1e-12, "bar state below pair min");
            t.check((bar - hi) / range, 1e-12, "bar state above pair max");
        }
    }

    // Forward-Euler steps of the BP scheme respect the local bounds.
    struct Case {
        int dim, p;
        std::array<int, 2> cells;
    };
    for (const Case& c : {Case{1, 1, {6, 1}}, Case{1, 2, {4, 1}}, Case{1, 3, {3, 1}},
                          Case{2, 1, {3, 3}}, Case{2, 2, {3, 3}}}) {
        FluxModel flux = c.dim == 1 ? burgers() : kpp();
        const double lo = flux.invariant[0], hi = flux.invariant[1];
        const Mesh mesh =
            build_mesh(c.dim, {0.0, 0.0}, {1.0, c.dim == 1 ? 0.0 : 1.0}, c.cells, c.p);
        System sys(mesh, BasisType::bernstein, std::move(flux), parse_scheme("HO-VMS-EV-BP"));
        const int N = sys.n_dofs();
        std::vector<double> u(N), umin, umax, dudt;
        for (int it = 0; it < 40; ++it) {
            for (int i = 0; i < N; ++i) u[i] = detail::in_range(rng, lo, hi);
            compute_stencil_bounds(sys.stencils(), u, umin, umax);
            const double dt = sys.timestep(u, 1e30, 0.9);
            sys.rhs(u, dudt);
            for (int i = 0; i < N; ++i) {
                const double un = u[i] + dt * dudt[i];
                const double range = std::max(1.0, umax[i] - umin[i]);
                t.check((umin[i] - un) / range, 1e-12, "forward Euler below local min");
                t.check((un - umax[i]) / range, 1e-12, "forward Euler above local max");
            }
        }
    }
    return r;
}

/// Subcell decomposition with raw fluxes reproduces the target rhs.
inline SuiteResult suite_decomposition(unsigned long long seed) {
    SuiteResult r;
    r.name = "decomposition";
    detail::DefectTracker t{r};
    std::mt19937_64 rng(seed);
    for (int dim = 1; dim <= 2; ++dim) {
        for (int p = 1; p <= 4; ++p) {
            for (const char* label : {"HO-SUPG", "HO-VMS-EV"}) {
                FluxModel flux = dim == 1 ? burgers() : kpp();
                const double lo = flux.invariant[0], hi = flux.invariant[1];
                const std::array<int, 2> cells = {dim == 1 ? 4 : 3, 3};
                const Mesh mesh =
                    build_mesh(dim, {0.0, 0.0}, {1.0, dim == 1 ? 0.0 : 1.0}, cells, p);
                System sys(mesh, BasisType::bernstein, std::move(flux), parse_scheme(label));
                const int N = sys.n_dofs();
                std::vector<double> u(N), target, decomp;
                for (int it = 0; it < 200; ++it) {
                    for (int i = 0; i < N; ++i) u[i] = detail::in_range(rng, lo, hi);
                    sys.unlimited_rhs(u, target);
                    sys.decomposition_rhs(u, decomp);
                    double scale = 1.0, defect = 0.0;
                    for (int i = 0; i < N; ++i) scale = std::max(scale, std::fabs(target[i]));
                    for (int i = 0; i < N; ++i)
                        defect = std::max(defect, std::fabs(decomp[i] - target[i]));
                    t.check(defect / scale, 1e-11,
                            std::string(label) + " dim=" + std::to_string(dim) +
                                " p=" + std::to_string(p));
                }
            }
        }
    }
    return r;
}

/// Discrete entropy laws: the pure-Galerkin balance, the local EV
/// condition, and the limited schemes' aggregate dissipation.
inline SuiteResult suite_entropy_laws(unsigned long long seed) {
    SuiteResult r;
    r.name = "entropy-laws";
    detail::DefectTracker t{r};
    std::mt19937_64 rng(seed);

    // The pure Galerkin entropy balance vanishes identically.
    for (int p = 1; p <= 3; ++p) {
        for (int model = 0; model < 2; ++model) {
            FluxModel flux = model == 0 ? linear_advection(1, {1.0, 0.0}) : burgers();
            const Mesh mesh = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {8, 1}, p);
            System sys(mesh, BasisType::bernstein, std::move(flux), parse_scheme("CG"));
            const int N = sys.n_dofs();
            std::vector<double> u(N), dudt;
            for (int it = 0; it < 50; ++it) {
                for (int i = 0; i < N; ++i) u[i] = detail::in_range(rng, -1.0, 1.0);
                sys.rhs(u, dudt);
                const ElementBudget b = sys.entropy_budget(u, dudt);
                const double scale = std::max(1.0, std::fabs(sys.integral_entropy(u)));
                t.check(std::fabs(b.lhs) / scale, 1e-10, "CG entropy balance p=" +
                                                             std::to_string(p));
            }
        }
    }

    // Local condition: production never exceeds the EV dissipation.
    for (int p = 1; p <= 3; ++p) {
        FluxModel flux = burgers();
        const Mesh mesh = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {8, 1}, p);
        System sys(mesh, BasisType::bernstein, std::move(flux), parse_scheme("HO-VMS-EV"));
        const int N = sys.n_dofs();
        std::vector<double> u(N), dudt;
        for (int it = 0; it < 50; ++it) {
            for (int i = 0; i < N; ++i) u[i] = detail::in_range(rng, -1.0, 1.0);
            sys.rhs(u, dudt);
            t.check(sys.last_diagnostics().entropy_defect_rel, 1e-10,
                    "local entropy condition p=" + std::to_string(p));
        }
    }

    // Aggregate law: FL updates do not produce lumped entropy.
    for (int dim = 1; dim <= 2; ++dim) {
        FluxModel flux = dim == 1 ? burgers() : kpp();
        const double lo = flux.invariant[0], hi = flux.invariant[1];
        const std::array<int, 2> cells = {dim == 1 ? 6 : 3, 3};
        const Mesh mesh = build_mesh(dim, {0.0, 0.0}, {1.0, dim == 1 ? 0.0 : 1.0}, cells, 2);
        System sys(mesh, BasisType::bernstein, std::move(flux), parse_scheme("HO-VMS-EV-FL"));
        const int N = sys.n_dofs();
        const std::vector<double>& m = sys.lumped_mass();
        std::vector<double> u(N), dudt;
        for (int it = 0; it < 50; ++it) {
            for (int i = 0; i < N; ++i) u[i] = detail::in_range(rng, lo, hi);
            sys.rhs(u, dudt);
            double rate = 0.0, scale = 1.0;
            for (int i = 0; i < N; ++i) {
                const double term = m[i] * u[i] * dudt[i];  // v = u (square entropy)
                rate += term;
                scale = std::max(scale, std::fabs(term));
            }
            t.check(rate / scale, 1e-10, "FL entropy aggregate dim=" + std::to_string(dim));
        }
    }
    return r;
}

/// Observed convergence orders of the two integrators on u' = -u.
inline SuiteResult suite_rk_order(unsigned long long /*seed*/) {
    SuiteResult r;
    r.name = "rk-order";
    detail::DefectTracker t{r};
    RhsFn decay = [](const std::vector<double>& u, std::vector<double>& out) {
        out.resize(u.size());
        for (size_t i = 0; i < u.size(); ++i) out[i] = -u[i];
    };
    const auto run = [&](bool ssp, double dt) {
        std::vector<double> u = {1.0};
        SspRk3Work sw;
        ErkWork ew;
        const ButcherTableau tab = rk76_tableau();
        const int steps = static_cast<int>(std::llround(1.0 / dt));
        for (int s = 0; s < steps; ++s) {
            if (ssp)
                ssprk3_step(u, dt, decay, sw);
            else
                erk_step(tab, u, dt, decay, ew);
        }
        return std::fabs(u[0] - std::exp(-1.0));
    };
    const double e1s = run(true, 0.1), e2s = run(true, 0.05);
    const double order3 = std::log2(e1s / e2s);
    t.check(std::fabs(order3 - 3.0), 0.1, "SSP-RK3 observed order " + std::to_string(order3));
    const double e1r = run(false, 0.2), e2r = run(false, 0.1);
    const double order6 = std::log2(e1r / e2r);
    t.check(std::fabs(order6 - 6.0), 0.2, "RK76 observed order " + std::to_string(order6));
    return r;
}

/// Runs every suite with one seed.
inline std::vector<SuiteResult> run_all_suites(unsigned long long seed) {
    return {suite_operators(seed),     suite_llf_entropy(seed),  suite_idp(seed),
            suite_decomposition(seed), suite_entropy_laws(seed), suite_rk_order(seed)};
}

/// Runs one suite by name; throws on an unknown name.
inline SuiteResult run_suite(const std::string& name, unsigned long long seed) {
    if (name == "operators") return suite_operators(seed);
    if (name == "llf-entropy") return suite_llf_entropy(seed);
    if (name == "idp") return suite_idp(seed);
    if (name == "decomposition") return suite_decomposition(seed);
    if (name == "entropy-laws") return suite_entropy_laws(seed);
    if (name == "rk-order") return suite_rk_order(seed);
    throw std::invalid_argument("verify: unknown suite '" + name + "'");
}

}  // namespace entropycg
