#pragma once

/// @file solver.hpp
/// @brief Scheme configuration and the semi-discrete system: assembly
/// of the stabilized Galerkin right-hand side, the limited update, time
/// step control, and the run loop.
///
/// The Galerkin term is assembled in weak form, int grad phi_i . f(u_h),
/// which makes the subcell flux decomposition reproduce the target time
/// derivatives exactly under the element quadrature for every flux.
/// Stabilization residuals use the strong pointwise form udot + div f.
/// Element loops run in ascending order, so results are reproducible
/// bit for bit.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "entropycg/element_ops.hpp"
#include "entropycg/limiter.hpp"
#include "entropycg/linalg.hpp"
#include "entropycg/mesh.hpp"
#include "entropycg/physics.hpp"
#include "entropycg/stabilization.hpp"
#include "entropycg/time_integration.hpp"

namespace entropycg {

enum class LimiterMode { none, bp, fl };
enum class IntegratorKind { ssprk3, rk76 };

inline const char* to_string(LimiterMode m) {
    switch (m) {
        case LimiterMode::none: return "none";
        case LimiterMode::bp: return "bp";
        default: return "fl";
    }
}

inline const char* to_string(IntegratorKind k) {
    return k == IntegratorKind::ssprk3 ? "ssprk3" : "rk76";
}

inline IntegratorKind parse_integrator(const std::string& s) {
    if (s == "ssprk3") return IntegratorKind::ssprk3;
    if (s == "rk76") return IntegratorKind::rk76;
    throw std::invalid_argument("integrator: expected ssprk3 or rk76, got '" + s + "'");
}

inline BasisType parse_basis(const std::string& s) {
    if (s == "bernstein") return BasisType::bernstein;
    if (s == "lagrange") return BasisType::lagrange;
    throw std::invalid_argument("basis: expected bernstein or lagrange, got '" + s + "'");
}

inline RecoveryKind parse_recovery(const std::string& s) {
    if (s == "lumped") return RecoveryKind::lumped_average;
    if (s == "l2") return RecoveryKind::l2_projection;
    throw std::invalid_argument("recovery: expected lumped or l2, got '" + s + "'");
}

/// Spatial scheme selection.  omega scales the linear-stabilization
/// coefficient; recovery picks the VMS gradient reconstruction.
struct SchemeConfig {
    StabKind stabilization = StabKind::none;
    bool entropy_viscosity = false;
    LimiterMode limiter = LimiterMode::none;
    double omega = 1.0;
    RecoveryKind recovery = RecoveryKind::lumped_average;
};

/// Parses a scheme label: CG | HO-(SUPG|VMS)[-EV][-BP|-FL].
inline SchemeConfig parse_scheme(const std::string& s) {
    SchemeConfig c;
    if (s == "CG") return c;
    std::vector<std::string> toks;
    size_t start = 0;
    while (start <= s.size()) {
        const size_t pos = s.find('-', start);
        if (pos == std::string::npos) {
            toks.push_back(s.substr(start));
            break;
        }
        toks.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    const auto fail = [&s]() {
        throw std::invalid_argument("scheme: expected CG or HO-(SUPG|VMS)[-EV][-BP|-FL], got '" +
                                    s + "'");
    };
    if (toks.size() < 2 || toks[0] != "HO") fail();
    size_t k = 1;
    if (toks[k] == "SUPG")
        c.stabilization = StabKind::supg;
    else if (toks[k] == "VMS")
        c.stabilization = StabKind::vms;
    else
        fail();
    ++k;
    if (k < toks.size() && toks[k] == "EV") {
        c.entropy_viscosity = true;
        ++k;
    }
    if (k < toks.size() && (toks[k] == "BP" || toks[k] == "FL")) {
        c.limiter = toks[k] == "BP" ? LimiterMode::bp : LimiterMode::fl;
        ++k;
    }
    if (k != toks.size()) fail();
    return c;
}

/// Canonical label of a scheme configuration (inverse of parse_scheme).
inline std::string scheme_label(const SchemeConfig& c) {
    if (c.stabilization == StabKind::none) return "CG";
    std::string s = c.stabilization == StabKind::supg ? "HO-SUPG" : "HO-VMS";
    if (c.entropy_viscosity) s += "-EV";
    if (c.limiter == LimiterMode::bp) s += "-BP";
    if (c.limiter == LimiterMode::fl) s += "-FL";
    return s;
}

/// Diagnostics of a right-hand side evaluation.  The defect maxima
/// start at -inf so taking maxima over evaluations is monotone.
struct RhsDiagnostics {
    double nu_max = 0.0;            // largest entropy viscosity
    double production_total = 0.0;  // sum of element entropy productions
    double production_max = 0.0;    // largest element entropy production
    // max_e p_h^e - nu^e denom^e, raw and scaled by max(1, |p_h^e|):
    // the local entropy condition holds when these stay nonpositive.
    double entropy_defect = -std::numeric_limits<double>::infinity();
    double entropy_defect_rel = -std::numeric_limits<double>::infinity();
    int degenerate_elements = 0;  // EV denominators below threshold
    LimiterStats limiter;         // accumulated over elements
};

/// Global consistent mass as a tensor product of 1D periodic factors.
inline TensorProductSolver assemble_global_mass(const Mesh& mesh, BasisType type) {
    const int p = mesh.degree;
    const ReferenceBasis b1(type, p, 1);
    const QuadratureRule1D quad = gauss_legendre(p + 2);
    const int nb = p + 1;
    std::vector<double> vals(nb);
    std::vector<DenseMatrix> factors;
    for (int d = 0; d < mesh.dim; ++d) {
        const double h = d == 0 ? mesh.h()[0] : mesh.h()[1];
        DenseMatrix m1(nb, nb);
        for (int iq = 0; iq < quad.size(); ++iq) {
            b1.values({quad.points[iq], 0.0}, vals.data());
            const double w = quad.weights[iq] * h;
            for (int i = 0; i < nb; ++i)
                for (int j = 0; j < nb; ++j) m1(i, j) += w * vals[i] * vals[j];
        }
        const int n1 = mesh.nodes_per_dir[d];
        DenseMatrix big(n1, n1);
        for (int e = 0; e < mesh.cells[d]; ++e)
            for (int i = 0; i < nb; ++i)
                for (int j = 0; j < nb; ++j) big((e * p + i) % n1, (e * p + j) % n1) += m1(i, j);
        factors.push_back(std::move(big));
    }
    return TensorProductSolver(std::move(factors), p);
}

/// Options for System::advance.
struct RunOptions {
    double t_final = 1.0;
    double cfl = 0.25;
    IntegratorKind integrator = IntegratorKind::ssprk3;
    long long max_steps = std::numeric_limits<long long>::max();
    /// Called after each accepted step with (step, t, dt, u).
    std::function<void(long long, double, double, const std::vector<double>&)> on_step;
};

struct RunResult {
    long long steps = 0;
    double t = 0.0;
    bool blew_up = false;
};

/// Semi-discrete CG system for one mesh / basis / flux / scheme choice.
class System {
public:
    System(const Mesh& mesh, BasisType basis, FluxModel flux, SchemeConfig scheme)
        : flux_(std::move(flux)),
          scheme_(scheme),
          basis_(basis),
          ctx_(build_element_context(mesh, basis, mesh.degree + (flux_.polynomial ? 2 : 3))),
          mass_(assemble_global_mass(ctx_.mesh, basis)) {
        if (scheme_.limiter != LimiterMode::none && basis != BasisType::bernstein)
            throw std::invalid_argument("System: flux limiting requires the Bernstein basis");
        const Mesh& m = ctx_.mesh;
        const int n = ctx_.n_loc(), nq = ctx_.n_q(), E = m.n_elements, N = m.n_nodes;

        lumped_.assign(N, 0.0);
        for (int e = 0; e < E; ++e) {
            const auto& nodes = m.element_nodes[e];
            for (int k = 0; k < n; ++k) lumped_[nodes[k]] += ctx_.ops.lumped[k];
        }
        stencils_.resize(N);
        for (int i = 0; i < N; ++i) stencils_[i] = m.full_stencil(i);

        ew_.resize(ctx_);
        lw_.resize(ctx_);
        b_.resize(N);
        udotS_.resize(N);
        acc_.resize(N);
        umin_.resize(N);
        umax_.resize(N);
        u_loc_.resize(n);
        udot_loc_.resize(n);
        v_loc_.resize(n);
        s_loc_.assign(n, 0.0);
        gf_loc_.resize(n);
        sl_buf_.assign(n, 0.0);
        se_buf_.assign(n, 0.0);
        g_loc_.resize(n);
        gradflux_store_.assign(static_cast<size_t>(E) * n, 0.0);
        s_store_.assign(static_cast<size_t>(E) * n, 0.0);
        if (scheme_.stabilization != StabKind::none || scheme_.entropy_viscosity)
            udot_gal_.resize(N);

        if (flux_.linear_in_u) {
            vel_q_cache_.resize(E);
            vel_node_cache_.resize(E);
            fnorm_cache_.assign(E, 0.0);
            std::vector<Vec2> xq(nq), xn(n);
            for (int e = 0; e < E; ++e) {
                element_qpoints(ctx_, e, xq);
                element_node_coords(ctx_, e, xn);
                auto& vq = vel_q_cache_[e];
                auto& vn = vel_node_cache_[e];
                vq.resize(nq);
                vn.resize(n);
                double fn = 0.0;
                for (int q = 0; q < nq; ++q) {
                    vq[q] = flux_.velocity(xq[q]);
                    fn = std::max(fn, norm2(vq[q], m.dim));
                }
                for (int k = 0; k < n; ++k) {
                    vn[k] = flux_.velocity(xn[k]);
                    fn = std::max(fn, norm2(vn[k], m.dim));
                }
                fnorm_cache_[e] = fn;
            }
        }
        if (flux_.state_independent_lambda) {
            dt_cache_.assign(E, std::vector<double>(static_cast<size_t>(n) * n, 0.0));
            std::vector<Vec2> xn(n);
            const std::vector<double> uzero(n, 0.0);
            std::vector<double> den(N, 0.0);
            for (int e = 0; e < E; ++e) {
                element_node_coords(ctx_, e, xn);
                llf_diffusion(ctx_, flux_, uzero, xn, dt_cache_[e]);
                const auto& nodes = m.element_nodes[e];
                for (int i = 0; i < n; ++i)
                    den[nodes[i]] -= dt_cache_[e][static_cast<size_t>(i) * n + i];
            }
            double mmin = ctx_.ops.lumped[0];
            for (int i = 1; i < n; ++i) mmin = std::min(mmin, ctx_.ops.lumped[i]);
            cfl_base_ = std::numeric_limits<double>::infinity();
            for (int i = 0; i < N; ++i)
                if (den[i] > 0.0) cfl_base_ = std::min(cfl_base_, mmin / (2.0 * den[i]));
        }
    }

    const ElementContext& context() const { return ctx_; }
    const Mesh& mesh() const { return ctx_.mesh; }
    const FluxModel& flux() const { return flux_; }
    const SchemeConfig& scheme() const { return scheme_; }
    BasisType basis() const { return basis_; }
    int n_dofs() const { return ctx_.mesh.n_nodes; }
    const std::vector<double>& lumped_mass() const { return lumped_; }
    const std::vector<std::vector<int>>& stencils() const { return stencils_; }
    const RhsDiagnostics& last_diagnostics() const { return diag_; }
    const RhsDiagnostics& run_diagnostics() const { return run_diag_; }
    void reset_run_diagnostics() { run_diag_ = RhsDiagnostics{}; }
    /// Reinstates saved accumulators, so out-of-band diagnostic rhs
    /// evaluations do not pollute the running tallies.
    void restore_run_diagnostics(const RhsDiagnostics& d) { run_diag_ = d; }

    /// Consistent-mass solve M x = b in place.
    void mass_solve(std::vector<double>& x) const { mass_.solve_inplace(x); }

    /// Coefficients from pointwise nodal values of f (bound preserving
    /// for data inside the invariant set).
    std::vector<double> sample(const std::function<double(const Vec2&)>& f) const {
        std::vector<double> out(ctx_.mesh.n_nodes);
        for (int i = 0; i < ctx_.mesh.n_nodes; ++i) out[i] = f(ctx_.mesh.node_coords[i]);
        return out;
    }

    /// Coefficients of the nodal interpolant of f on the lattice.
    std::vector<double> interpolate(const std::function<double(const Vec2&)>& f) const {
        const Mesh& m = ctx_.mesh;
        const int n = ctx_.n_loc();
        std::vector<double> out(m.n_nodes, 0.0);
        std::vector<Vec2> x(n);
        std::vector<double> c(n);
        for (int e = 0; e < m.n_elements; ++e) {
            element_node_coords(ctx_, e, x);
            for (int k = 0; k < n; ++k) c[k] = f(x[k]);
            ctx_.blattice_lu.solve_inplace(c.data());
            const auto& nodes = m.element_nodes[e];
            for (int k = 0; k < n; ++k) out[nodes[k]] = c[k];
        }
        return out;
    }

    std::vector<double> initial_state(const BenchmarkProblem& b) const {
        return b.sample_initial_data ? sample(b.u0) : interpolate(b.u0);
    }

    /// Scheme right-hand side du/dt = L(u), limited when configured.
    void rhs(const std::vector<double>& u, std::vector<double>& dudt) {
        if (scheme_.limiter == LimiterMode::none) {
            rhs_impl(u, dudt, nullptr);
        } else {
            LimiterConfig lc;
            lc.bound_preserving = true;
            lc.entropy_correction = scheme_.limiter == LimiterMode::fl;
            rhs_impl(u, dudt, &lc);
        }
    }

    /// Stabilized consistent-mass target derivatives (no limiter).
    void unlimited_rhs(const std::vector<double>& u, std::vector<double>& dudt) {
        rhs_impl(u, dudt, nullptr);
    }

    /// Subcell-decomposition path with the raw fluxes (no clipping);
    /// must reproduce unlimited_rhs to rounding.
    void decomposition_rhs(const std::vector<double>& u, std::vector<double>& dudt) {
        LimiterConfig lc;
        lc.bound_preserving = false;
        lc.entropy_correction = false;
        rhs_impl(u, dudt, &lc);
    }

    /// CFL time step; cached for state-independent wave speeds.
    double timestep(const std::vector<double>& u, double remaining, double cfl) const {
        if (cfl <= 0.0) throw std::invalid_argument("System: cfl must be positive");
        if (flux_.state_independent_lambda) return std::min(cfl * cfl_base_, remaining);
        return cfl_timestep(ctx_, flux_, u, cfl, remaining, nullptr);
    }

    /// Integrates u to opt.t_final; stops early on non-finite values.
    RunResult advance(std::vector<double>& u, const RunOptions& opt) {
        RunResult res;
        RhsFn f = [this](const std::vector<double>& v, std::vector<double>& out) { rhs(v, out); };
        const ButcherTableau tab = rk76_tableau();
        const double tf = opt.t_final;
        // A state this far outside the invariant set counts as blow-up.
        const double width = flux_.invariant[1] - flux_.invariant[0];
        const double bound = 1e3 * std::max(width, 1e-300);
        while (res.t < tf - 1e-14 * std::max(1.0, std::fabs(tf)) && res.steps < opt.max_steps) {
            const double dt = timestep(u, tf - res.t, opt.cfl);
            if (!(dt > 0.0)) break;
            if (opt.integrator == IntegratorKind::ssprk3)
                ssprk3_step(u, dt, f, ssp_work_);
            else
                erk_step(tab, u, dt, f, erk_work_);
            res.t += dt;
            ++res.steps;
            bool bad = false;
            for (double v : u)
                if (!std::isfinite(v) || std::fabs(v) > bound) {
                    bad = true;
                    break;
                }
            if (bad) {
                res.blew_up = true;
                break;
            }
            if (opt.on_step) opt.on_step(res.steps, res.t, dt, u);
        }
        return res;
    }

    /// Sum_i m_i eta(u_i): the lumped entropy functional.
    double lumped_entropy(const std::vector<double>& u) const {
        double s = 0.0;
        for (int i = 0; i < ctx_.mesh.n_nodes; ++i) s += lumped_[i] * flux_.eta(u[i]);
        return s;
    }

    /// int eta(u_h) by element quadrature.
    double integral_entropy(const std::vector<double>& u) {
        const Mesh& m = ctx_.mesh;
        const int n = ctx_.n_loc(), nq = ctx_.n_q();
        double s = 0.0;
        for (int e = 0; e < m.n_elements; ++e) {
            const auto& nodes = m.element_nodes[e];
            for (int k = 0; k < n; ++k) u_loc_[k] = u[nodes[k]];
            for (int q = 0; q < nq; ++q) {
                double uq = 0.0;
                for (int k = 0; k < n; ++k) uq += ctx_.phi(q, k) * u_loc_[k];
                s += ctx_.qw_phys[q] * flux_.eta(uq);
            }
        }
        return s;
    }

    /// Global entropy budget of the pure Galerkin evolution: lhs is
    /// int (v(u_h) udot + div q(u_h)), rhs the orthogonality defect.
    ElementBudget entropy_budget(const std::vector<double>& u, const std::vector<double>& udot) {
        const Mesh& m = ctx_.mesh;
        const int n = ctx_.n_loc();
        ElementBudget total;
        ew_.vel_q = nullptr;
        for (int e = 0; e < m.n_elements; ++e) {
            const auto& nodes = m.element_nodes[e];
            for (int k = 0; k < n; ++k) {
                u_loc_[k] = u[nodes[k]];
                udot_loc_[k] = udot[nodes[k]];
                v_loc_[k] = flux_.square_entropy ? u_loc_[k] : flux_.v(u_loc_[k]);
            }
            evaluate_element_fields(ctx_, flux_, e, u_loc_, ew_);
            fill_residual(ctx_, udot_loc_, ew_);
            const ElementBudget b = entropy_budget_element(ctx_, flux_, v_loc_, ew_);
            total.lhs += b.lhs;
            total.rhs += b.rhs;
        }
        return total;
    }

    /// L1 distance between u_h and a reference function.
    double l1_error(const std::vector<double>& u, const std::function<double(const Vec2&)>& ref) {
        const Mesh& m = ctx_.mesh;
        const int n = ctx_.n_loc(), nq = ctx_.n_q();
        double s = 0.0;
        for (int e = 0; e < m.n_elements; ++e) {
            const auto& nodes = m.element_nodes[e];
            for (int k = 0; k < n; ++k) u_loc_[k] = u[nodes[k]];
            element_qpoints(ctx_, e, ew_.x_q);
            for (int q = 0; q < nq; ++q) {
                double uq = 0.0;
                for (int k = 0; k < n; ++k) uq += ctx_.phi(q, k) * u_loc_[k];
                s += ctx_.qw_phys[q] * std::fabs(uq - ref(ew_.x_q[q]));
            }
        }
        return s;
    }

private:
    /// Fills ew_ with u_q (and x_q on the generic path) for pass 0.
    void fill_uq(int e) {
        const int n = ctx_.n_loc(), nq = ctx_.n_q();
        if (flux_.linear_in_u) {
            ew_.vel_q = &vel_q_cache_[e];
        } else {
            ew_.vel_q = nullptr;
            element_qpoints(ctx_, e, ew_.x_q);
        }
        for (int q = 0; q < nq; ++q) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += ctx_.phi(q, k) * u_loc_[k];
            ew_.u_q[q] = s;
        }
    }

    /// Full field evaluation for pass A; returns max |f'|.
    double fill_fields(int e) {
        if (!flux_.linear_in_u) {
            ew_.vel_q = nullptr;
            return evaluate_element_fields(ctx_, flux_, e, u_loc_, ew_);
        }
        ew_.vel_q = &vel_q_cache_[e];
        const auto& vq = vel_q_cache_[e];
        const int n = ctx_.n_loc(), nq = ctx_.n_q(), dim = ctx_.mesh.dim;
        for (int q = 0; q < nq; ++q) {
            double uu = 0.0;
            Vec2 g = {0.0, 0.0};
            for (int k = 0; k < n; ++k) {
                const double c = u_loc_[k];
                uu += ctx_.phi(q, k) * c;
                const Vec2& d = ctx_.dphi_at(q, k);
                g[0] += d[0] * c;
                g[1] += d[1] * c;
            }
            ew_.u_q[q] = uu;
            ew_.grad_u_q[q] = g;
            ew_.fp_q[q] = vq[q];
            ew_.divf_q[q] = dot(vq[q], g, dim);
        }
        return fnorm_cache_[e];
    }

    void merge_run_diag() {
        run_diag_.nu_max = std::max(run_diag_.nu_max, diag_.nu_max);
        run_diag_.production_total += diag_.production_total;
        run_diag_.production_max = std::max(run_diag_.production_max, diag_.production_max);
        run_diag_.entropy_defect = std::max(run_diag_.entropy_defect, diag_.entropy_defect);
        run_diag_.entropy_defect_rel =
            std::max(run_diag_.entropy_defect_rel, diag_.entropy_defect_rel);
        run_diag_.degenerate_elements += diag_.degenerate_elements;
        run_diag_.limiter.idp_clip += diag_.limiter.idp_clip;
        run_diag_.limiter.entropy_clip += diag_.limiter.entropy_clip;
        run_diag_.limiter.dtadd_max = std::max(run_diag_.limiter.dtadd_max, diag_.limiter.dtadd_max);
        run_diag_.limiter.pairs += diag_.limiter.pairs;
        run_diag_.limiter.idp_clipped += diag_.limiter.idp_clipped;
        run_diag_.limiter.entropy_clipped += diag_.limiter.entropy_clipped;
    }

    void rhs_impl(const std::vector<double>& u, std::vector<double>& dudt,
                  const LimiterConfig* lim) {
        const Mesh& m = ctx_.mesh;
        const int n = ctx_.n_loc(), E = m.n_elements, N = m.n_nodes;
        diag_ = RhsDiagnostics{};

        // Pass 0: weak Galerkin term, gradflux stored per element.
        std::fill(b_.begin(), b_.end(), 0.0);
        for (int e = 0; e < E; ++e) {
            const auto& nodes = m.element_nodes[e];
            for (int k = 0; k < n; ++k) u_loc_[k] = u[nodes[k]];
            fill_uq(e);
            gradflux_element(ctx_, flux_, gf_loc_, ew_);
            double* gf = gradflux_store_.data() + static_cast<size_t>(e) * n;
            for (int k = 0; k < n; ++k) {
                gf[k] = gf_loc_[k];
                b_[nodes[k]] += gf_loc_[k];
            }
        }

        const bool needs_res =
            scheme_.stabilization != StabKind::none || scheme_.entropy_viscosity;
        if (needs_res) {
            udot_gal_ = b_;
            mass_.solve_inplace(udot_gal_);
        }

        // VMS gradient recovery on the whole mesh.
        const bool lag_interp = scheme_.recovery == RecoveryKind::lumped_average;
        if (scheme_.stabilization == StabKind::vms) {
            if (lag_interp) {
                g_nodes_ = recover_gradient_lumped(ctx_, u);
            } else {
                auto rhsg = recover_gradient_l2_rhs(ctx_, u);
                for (int d = 0; d < m.dim; ++d) mass_.solve_inplace(rhsg[d]);
                g_nodes_.assign(N, Vec2{0.0, 0.0});
                for (int i = 0; i < N; ++i) {
                    g_nodes_[i][0] = rhsg[0][i];
                    if (m.dim > 1) g_nodes_[i][1] = rhsg[1][i];
                }
            }
        }

        // Pass A: linear stabilization and entropy viscosity.
        if (lim) std::fill(s_store_.begin(), s_store_.end(), 0.0);
        if (needs_res) {
            if (!scheme_.entropy_viscosity) std::fill(se_buf_.begin(), se_buf_.end(), 0.0);
            for (int e = 0; e < E; ++e) {
                const auto& nodes = m.element_nodes[e];
                for (int k = 0; k < n; ++k) {
                    u_loc_[k] = u[nodes[k]];
                    udot_loc_[k] = udot_gal_[nodes[k]];
                }
                const double fmax = fill_fields(e);
                fill_residual(ctx_, udot_loc_, ew_);

                if (scheme_.stabilization == StabKind::supg) {
                    const double nu = supg_coefficient(ctx_, flux_, scheme_.omega, fmax);
                    supg_element(ctx_, nu, sl_buf_, ew_);
                } else if (scheme_.stabilization == StabKind::vms) {
                    const double nu = vms_coefficient(ctx_, scheme_.omega, fmax);
                    for (int k = 0; k < n; ++k) g_loc_[k] = g_nodes_[nodes[k]];
                    vms_element(ctx_, nu, g_loc_, lag_interp, sl_buf_, ew_);
                } else {
                    std::fill(sl_buf_.begin(), sl_buf_.end(), 0.0);
                }

                if (scheme_.entropy_viscosity) {
                    if (flux_.square_entropy)
                        std::copy(u_loc_.begin(), u_loc_.end(), v_loc_.begin());
                    else
                        for (int k = 0; k < n; ++k) v_loc_[k] = flux_.v(u_loc_[k]);
                    const ElementEntropyData data =
                        entropy_viscosity_element(ctx_, flux_, u_loc_, v_loc_, sl_buf_, ew_);
                    entropy_viscosity_term(ctx_, data.nu, se_buf_, ew_);
                    diag_.nu_max = std::max(diag_.nu_max, data.nu);
                    diag_.production_total += data.production;
                    diag_.production_max = std::max(diag_.production_max, data.production);
                    if (data.degenerate) ++diag_.degenerate_elements;
                    const double defect = data.production - data.nu * data.denom;
                    diag_.entropy_defect = std::max(diag_.entropy_defect, defect);
                    diag_.entropy_defect_rel =
                        std::max(diag_.entropy_defect_rel,
                                 defect / std::max(1.0, std::fabs(data.production)));
                }

                double* ss = s_store_.data() + static_cast<size_t>(e) * n;
                for (int k = 0; k < n; ++k) {
                    const double s = sl_buf_[k] + se_buf_[k];
                    if (lim) ss[k] = s;
                    b_[nodes[k]] -= s;
                }
            }
        }

        if (!lim) {
            dudt = b_;
            mass_.solve_inplace(dudt);
            merge_run_diag();
            return;
        }

        // Limited path: stabilized targets, bounds, then pass B.
        udotS_ = b_;
        mass_.solve_inplace(udotS_);
        compute_stencil_bounds(stencils_, u, umin_, umax_);
        std::fill(acc_.begin(), acc_.end(), 0.0);
        for (int e = 0; e < E; ++e) {
            const auto& nodes = m.element_nodes[e];
            for (int k = 0; k < n; ++k) {
                u_loc_[k] = u[nodes[k]];
                udot_loc_[k] = udotS_[nodes[k]];
            }
            const double* gf = gradflux_store_.data() + static_cast<size_t>(e) * n;
            const double* ss = s_store_.data() + static_cast<size_t>(e) * n;
            for (int k = 0; k < n; ++k) {
                gf_loc_[k] = gf[k];
                s_loc_[k] = ss[k];
            }
            if (flux_.state_independent_lambda) {
                std::copy(dt_cache_[e].begin(), dt_cache_[e].end(), lw_.dt.begin());
                lw_.dt_ready = true;
            } else {
                lw_.dt_ready = false;
            }
            lw_.vel_node = flux_.linear_in_u ? &vel_node_cache_[e] : nullptr;
            const LimiterStats st = limited_element_update(ctx_, flux_, e, u_loc_, udot_loc_,
                                                           s_loc_, gf_loc_, umin_, umax_, *lim,
                                                           lw_, acc_);
            diag_.limiter.idp_clip += st.idp_clip;
            diag_.limiter.entropy_clip += st.entropy_clip;
            diag_.limiter.dtadd_max = std::max(diag_.limiter.dtadd_max, st.dtadd_max);
            diag_.limiter.pairs += st.pairs;
            diag_.limiter.idp_clipped += st.idp_clipped;
            diag_.limiter.entropy_clipped += st.entropy_clipped;
        }
        dudt.resize(N);
        for (int i = 0; i < N; ++i) dudt[i] = acc_[i] / lumped_[i];
        merge_run_diag();
    }

    FluxModel flux_;
    SchemeConfig scheme_;
    BasisType basis_;
    ElementContext ctx_;
    TensorProductSolver mass_;

    std::vector<double> lumped_;
    std::vector<std::vector<int>> stencils_;

    ElementWork ew_;
    LimiterWork lw_;
    std::vector<double> b_, udot_gal_, udotS_, acc_, umin_, umax_;
    std::vector<double> u_loc_, udot_loc_, v_loc_, s_loc_, gf_loc_, sl_buf_, se_buf_;
    std::vector<Vec2> g_loc_;
    std::vector<Vec2> g_nodes_;
    std::vector<double> gradflux_store_, s_store_;

    std::vector<std::vector<Vec2>> vel_q_cache_, vel_node_cache_;
    std::vector<double> fnorm_cache_;
    std::vector<std::vector<double>> dt_cache_;
    double cfl_base_ = std::numeric_limits<double>::infinity();

    SspRk3Work ssp_work_;
    ErkWork erk_work_;

    RhsDiagnostics diag_, run_diag_;
};

}  // namespace entropycg
