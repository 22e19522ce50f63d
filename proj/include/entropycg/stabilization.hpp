#pragma once

/// @file stabilization.hpp
/// @brief Linear stabilization (SUPG / VMS), gradient recovery, and the
/// entropy-viscosity machinery.
///
/// Every kernel works on one element with gathered local coefficient
/// vectors and writes local contribution vectors; the global solver
/// accumulates them in a fixed element order.  Test functions enter
/// linearly, so s(v_h, .) is the dot product of the nodal v values
/// with the per-basis-function contribution vector.

#include <cmath>
#include <vector>

#include "entropycg/element_ops.hpp"
#include "entropycg/physics.hpp"

namespace entropycg {

enum class StabKind { none, supg, vms };
enum class RecoveryKind { lumped_average, l2_projection };

inline const char* to_string(StabKind s) {
    switch (s) {
        case StabKind::none: return "none";
        case StabKind::supg: return "supg";
        default: return "vms";
    }
}

/// Reusable per-element buffers for the hot kernels.
struct ElementWork {
    std::vector<double> u_q, udot_q, divf_q, resid_q, vh_q, v_at_q, pu_q;
    std::vector<Vec2> grad_u_q, fp_q, x_q, f_q, grad_v_q;
    std::vector<double> v_lattice, fl_v;
    std::vector<double> tmp_modes;
    /// Cached f'(x) at this element's quadrature points for fluxes that
    /// are linear in u; kernels then avoid the std::function calls.
    const std::vector<Vec2>* vel_q = nullptr;

    void resize(const ElementContext& ctx) {
        const int nq = ctx.n_q();
        u_q.resize(nq);
        udot_q.resize(nq);
        divf_q.resize(nq);
        resid_q.resize(nq);
        vh_q.resize(nq);
        v_at_q.resize(nq);
        pu_q.resize(nq);
        grad_u_q.resize(nq);
        fp_q.resize(nq);
        x_q.resize(nq);
        f_q.resize(nq);
        grad_v_q.resize(nq);
        v_lattice.resize(ctx.n_loc());
        fl_v.resize(ctx.n_sq);
        tmp_modes.resize(ctx.n_modes);
    }
};

/// Physical quadrature positions of element e.
inline void element_qpoints(const ElementContext& ctx, int e, std::vector<Vec2>& x_q) {
    const Vec2 o = element_origin(ctx.mesh, e);
    const Vec2 h = ctx.mesh.h();
    for (int q = 0; q < ctx.n_q(); ++q) {
        const Vec2& xi = ctx.quad.points[q];
        x_q[q] = {o[0] + xi[0] * h[0], ctx.mesh.dim == 1 ? 0.0 : o[1] + xi[1] * h[1]};
    }
}

/// Evaluates u, grad u, f', and div f(u_h) at the volume points.
/// Returns max |f'| over quadrature points and lattice nodes.
inline double evaluate_element_fields(const ElementContext& ctx, const FluxModel& flux, int e,
                                      const std::vector<double>& u_loc, ElementWork& w) {
    const int n = ctx.n_loc(), nq = ctx.n_q(), dim = ctx.mesh.dim;
    element_qpoints(ctx, e, w.x_q);
    double fmax = 0.0;
    for (int q = 0; q < nq; ++q) {
        double u = 0.0;
        Vec2 g = {0.0, 0.0};
        for (int k = 0; k < n; ++k) {
            const double c = u_loc[k];
            u += ctx.phi(q, k) * c;
            const Vec2& d = ctx.dphi_at(q, k);
            g[0] += d[0] * c;
            g[1] += d[1] * c;
        }
        w.u_q[q] = u;
        w.grad_u_q[q] = g;
        const Vec2 fp = flux.fprime(w.x_q[q], u);
        w.fp_q[q] = fp;
        w.divf_q[q] = dot(fp, g, dim);
        fmax = std::max(fmax, norm2(fp, dim));
    }
    // Lattice nodes contribute to the |f'| estimate as well.
    const Vec2 o = element_origin(ctx.mesh, e);
    const Vec2 h = ctx.mesh.h();
    for (int j = 0; j < n; ++j) {
        double u = 0.0;
        for (int k = 0; k < n; ++k) u += ctx.blattice(j, k) * u_loc[k];
        const Vec2 xi = ctx.basis.node(j);
        const Vec2 x = {o[0] + xi[0] * h[0], dim == 1 ? 0.0 : o[1] + xi[1] * h[1]};
        fmax = std::max(fmax, norm2(flux.fprime(x, u), dim));
    }
    return fmax;
}

/// -int phi_i div f(u_h): Galerkin right-hand side of one element.
/// Requires evaluate_element_fields to have filled `w`.
inline void galerkin_element_rhs(const ElementContext& ctx, std::vector<double>& out,
                                 const ElementWork& w) {
    const int n = ctx.n_loc(), nq = ctx.n_q();
    out.assign(n, 0.0);
    for (int q = 0; q < nq; ++q) {
        const double s = ctx.qw_phys[q] * w.divf_q[q];
        if (s == 0.0) continue;
        for (int i = 0; i < n; ++i) out[i] -= ctx.phi(q, i) * s;
    }
}

/// int grad phi_i . f(u_h), needed by the flux-potential system.
inline void gradflux_element(const ElementContext& ctx, const FluxModel& flux,
                             std::vector<double>& out, ElementWork& w) {
    const int n = ctx.n_loc(), nq = ctx.n_q(), dim = ctx.mesh.dim;
    out.assign(n, 0.0);
    for (int q = 0; q < nq; ++q) {
        const Vec2 f = w.vel_q ? scaled((*w.vel_q)[q], w.u_q[q]) : flux.f(w.x_q[q], w.u_q[q]);
        w.f_q[q] = f;
        const double wq = ctx.qw_phys[q];
        for (int i = 0; i < n; ++i) out[i] += wq * dot(ctx.dphi_at(q, i), f, dim);
    }
}

/// SUPG coefficient: omega h / (2 p |f'|), zero for vanishing speed.
inline double supg_coefficient(const ElementContext& ctx, const FluxModel& flux, double omega,
                               double fmax) {
    if (fmax < 1e-14 * std::max(flux.speed_scale, 1e-300)) return 0.0;
    return omega * ctx.ops.h_iso / (2.0 * ctx.mesh.degree * fmax);
}

/// VMS coefficient: omega h |f'| / (2 p).
inline double vms_coefficient(const ElementContext& ctx, double omega, double fmax) {
    return omega * ctx.ops.h_iso * fmax / (2.0 * ctx.mesh.degree);
}

/// Fills w.udot_q and w.resid_q = udot + div f (after field evaluation).
inline void fill_residual(const ElementContext& ctx, const std::vector<double>& udot_loc,
                          ElementWork& w) {
    const int n = ctx.n_loc(), nq = ctx.n_q();
    for (int q = 0; q < nq; ++q) {
        double ud = 0.0;
        for (int k = 0; k < n; ++k) ud += ctx.phi(q, k) * udot_loc[k];
        w.udot_q[q] = ud;
        w.resid_q[q] = ud + w.divf_q[q];
    }
}

/// s^SUPG(phi_i, u_h) for all i; requires fill_residual.
inline void supg_element(const ElementContext& ctx, double nu, std::vector<double>& out,
                         const ElementWork& w) {
    const int n = ctx.n_loc(), nq = ctx.n_q(), dim = ctx.mesh.dim;
    out.assign(n, 0.0);
    if (nu == 0.0) return;
    for (int q = 0; q < nq; ++q) {
        const double s = nu * ctx.qw_phys[q] * w.resid_q[q];
        if (s == 0.0) continue;
        const Vec2& fp = w.fp_q[q];
        for (int i = 0; i < n; ++i) out[i] += s * dot(fp, ctx.dphi_at(q, i), dim);
    }
}

/// s^VMS(phi_i, u_h) for all i.  g_nodal holds the recovered gradient
/// at this element's nodes; `lagrange_interp` selects the nodal
/// (Lagrange) interpolation used by the averaged recovery, otherwise
/// the coefficients are expanded in the active basis.
inline void vms_element(const ElementContext& ctx, double nu, const std::vector<Vec2>& g_nodal,
                        bool lagrange_interp, std::vector<double>& out, ElementWork& w) {
    const int n = ctx.n_loc(), nq = ctx.n_q(), dim = ctx.mesh.dim;
    out.assign(n, 0.0);
    if (nu == 0.0) return;
    const DenseMatrix& tab = lagrange_interp ? ctx.psi : ctx.phi;
    for (int q = 0; q < nq; ++q) {
        Vec2 g = {0.0, 0.0};
        for (int k = 0; k < n; ++k) {
            const double t = tab(q, k);
            g[0] += t * g_nodal[k][0];
            g[1] += t * g_nodal[k][1];
        }
        const Vec2 defect = minus(w.grad_u_q[q], g);
        const double wq = nu * ctx.qw_phys[q];
        for (int i = 0; i < n; ++i) out[i] += wq * dot(ctx.dphi_at(q, i), defect, dim);
    }
}

/// Lumped-average gradient recovery: g_i = sum_e m_i^e grad u_h|_e(x_i) / m_i.
inline std::vector<Vec2> recover_gradient_lumped(const ElementContext& ctx,
                                                 const std::vector<double>& u) {
    const Mesh& mesh = ctx.mesh;
    const int n = ctx.n_loc();
    std::vector<Vec2> g(mesh.n_nodes, Vec2{0.0, 0.0});
    std::vector<double> m(mesh.n_nodes, 0.0);
    std::vector<double> u_loc(n);
    for (int e = 0; e < mesh.n_elements; ++e) {
        const auto& nodes = mesh.element_nodes[e];
        for (int k = 0; k < n; ++k) u_loc[k] = u[nodes[k]];
        for (int j = 0; j < n; ++j) {
            Vec2 grad = {0.0, 0.0};
            for (int k = 0; k < n; ++k) {
                const Vec2& d = ctx.dphi_node(j, k);
                grad[0] += d[0] * u_loc[k];
                grad[1] += d[1] * u_loc[k];
            }
            const double mi = ctx.ops.lumped[j];
            g[nodes[j]][0] += mi * grad[0];
            g[nodes[j]][1] += mi * grad[1];
            m[nodes[j]] += mi;
        }
    }
    for (int i = 0; i < mesh.n_nodes; ++i) {
        g[i][0] /= m[i];
        g[i][1] /= m[i];
    }
    return g;
}

/// Right-hand sides for the consistent-mass L2 gradient recovery
/// (component k of int phi_i grad u_h); the caller solves M g_k = rhs_k.
inline std::vector<std::vector<double>> recover_gradient_l2_rhs(const ElementContext& ctx,
                                                                const std::vector<double>& u) {
    const Mesh& mesh = ctx.mesh;
    const int n = ctx.n_loc(), nq = ctx.n_q(), dim = mesh.dim;
    std::vector<std::vector<double>> rhs(dim, std::vector<double>(mesh.n_nodes, 0.0));
    std::vector<double> u_loc(n);
    for (int e = 0; e < mesh.n_elements; ++e) {
        const auto& nodes = mesh.element_nodes[e];
        for (int k = 0; k < n; ++k) u_loc[k] = u[nodes[k]];
        for (int q = 0; q < nq; ++q) {
            Vec2 g = {0.0, 0.0};
            for (int k = 0; k < n; ++k) {
                const Vec2& d = ctx.dphi_at(q, k);
                g[0] += d[0] * u_loc[k];
                g[1] += d[1] * u_loc[k];
            }
            const double wq = ctx.qw_phys[q];
            for (int i = 0; i < n; ++i) {
                const double s = wq * ctx.phi(q, i);
                for (int d2 = 0; d2 < dim; ++d2) rhs[d2][nodes[i]] += s * g[d2];
            }
        }
    }
    return rhs;
}

/// Element entropy production and viscosity (one evaluation).
struct ElementEntropyData {
    double production = 0.0;   // p_h^e
    double denom = 0.0;        // int (i1 v - i0 v)^2
    double nu_min = 0.0;       // max(0, p_h) / denom
    double nu = 0.0;           // nu_min + smoothness part
    bool degenerate = false;   // denominator below threshold
};

/// Computes p_h^e, the fluctuation denominator, and the entropy
/// viscosity coefficient.  `s_ls_loc` is the linear-stabilization
/// contribution vector for this element (zero vector when absent);
/// v_loc are the nodal entropy variables v(u_j).  Fills w.fl_v with
/// the subcell fluctuations of v_h and w.v_lattice with its lattice
/// values for reuse by the EV term.
inline ElementEntropyData entropy_viscosity_element(const ElementContext& ctx,
                                                    const FluxModel& flux,
                                                    const std::vector<double>& /*u_loc*/,
                                                    const std::vector<double>& v_loc,
                                                    const std::vector<double>& s_ls_loc,
                                                    ElementWork& w) {
    const int n = ctx.n_loc(), nq = ctx.n_q(), dim = ctx.mesh.dim;
    ElementEntropyData out;

    // p_h = int (v(u_h) - v_h)(udot + div f) - s_ls(v_h, u_h).
    double ph = 0.0;
    for (int q = 0; q < nq; ++q) {
        double vh = 0.0;
        for (int k = 0; k < n; ++k) vh += ctx.phi(q, k) * v_loc[k];
        w.vh_q[q] = vh;
        w.v_at_q[q] = flux.square_entropy ? w.u_q[q] : flux.v(w.u_q[q]);
        ph += ctx.qw_phys[q] * (w.v_at_q[q] - vh) * w.resid_q[q];
    }
    for (int i = 0; i < n; ++i) ph -= v_loc[i] * s_ls_loc[i];
    out.production = ph;

    // Subcell fluctuation of v_h from its lattice values.
    for (int j = 0; j < n; ++j) {
        double vv = 0.0;
        for (int k = 0; k < n; ++k) vv += ctx.blattice(j, k) * v_loc[k];
        w.v_lattice[j] = vv;
    }
    const int corners = 1 << dim;
    const double mean = 1.0 / corners;
    double denom = 0.0, vscale = 0.0;
    for (int j = 0; j < n; ++j) vscale = std::max(vscale, std::fabs(w.v_lattice[j]));
    for (int sq = 0; sq < ctx.n_sq; ++sq) {
        double fl = 0.0;
        for (int c = 0; c < corners; ++c)
            fl += (ctx.sq_corner_w[sq][c] - mean) * w.v_lattice[ctx.sq_corner_ids[sq][c]];
        w.fl_v[sq] = fl;
        denom += ctx.sq_w_phys[sq] * fl * fl;
    }
    out.denom = denom;
    const double dtol = 1e-14 * ctx.ops.volume * std::max(1.0, vscale) * std::max(1.0, vscale);
    if (denom < dtol) {
        out.degenerate = true;
        return out;  // nu = 0 by the degeneracy rule
    }
    out.nu_min = std::max(0.0, ph) / denom;

    // Smoothness sensor: |int grad v_h . (f(pi u) - f(u))| / denom.
    std::fill(w.tmp_modes.begin(), w.tmp_modes.end(), 0.0);
    for (int m = 0; m < ctx.n_modes; ++m) {
        double s = 0.0;
        for (int q = 0; q < nq; ++q) s += ctx.quad.weights[q] * ctx.modes(m, q) * w.u_q[q];
        w.tmp_modes[m] = s;
    }
    for (int q = 0; q < nq; ++q) {
        double pu = 0.0;
        for (int m = 0; m < ctx.n_modes; ++m) pu += w.tmp_modes[m] * ctx.modes(m, q);
        w.pu_q[q] = pu;
    }
    double smooth = 0.0;
    for (int q = 0; q < nq; ++q) {
        Vec2 gv = {0.0, 0.0};
        for (int k = 0; k < n; ++k) {
            const Vec2& d = ctx.dphi_at(q, k);
            gv[0] += d[0] * v_loc[k];
            gv[1] += d[1] * v_loc[k];
        }
        const Vec2 df = w.vel_q ? scaled((*w.vel_q)[q], w.pu_q[q] - w.u_q[q])
                                : minus(flux.f(w.x_q[q], w.pu_q[q]), flux.f(w.x_q[q], w.u_q[q]));
        smooth += ctx.qw_phys[q] * dot(gv, df, dim);
    }
    out.nu = out.nu_min + std::fabs(smooth) / denom;
    return out;
}

/// s^EV(phi_i, v_h) for all i, with the fluctuations already in w.fl_v.
inline void entropy_viscosity_term(const ElementContext& ctx, double nu, std::vector<double>& out,
                                   const ElementWork& w) {
    const int n = ctx.n_loc();
    out.assign(n, 0.0);
    if (nu == 0.0) return;
    for (int sq = 0; sq < ctx.n_sq; ++sq) {
        const double s = nu * ctx.sq_w_phys[sq] * w.fl_v[sq];
        if (s == 0.0) continue;
        for (int i = 0; i < n; ++i) out[i] += s * ctx.subcell_fluct(sq, i);
    }
}

/// Element contribution to the entropy budget: the left side is
/// int (d eta(u_h)/dt + div q(u_h)) with d/dt realized through udot;
/// the right side is the weighted residual int (v(u_h) - v_h) R.
struct ElementBudget {
    double lhs = 0.0;
    double rhs = 0.0;
};

inline ElementBudget entropy_budget_element(const ElementContext& ctx, const FluxModel& flux,
                                            const std::vector<double>& v_loc, ElementWork& w) {
    const int n = ctx.n_loc(), nq = ctx.n_q();
    ElementBudget out;
    for (int q = 0; q < nq; ++q) {
        const double vq = flux.v(w.u_q[q]);
        double vh = 0.0;
        for (int k = 0; k < n; ++k) vh += ctx.phi(q, k) * v_loc[k];
        out.lhs += ctx.qw_phys[q] * vq * w.resid_q[q];
        out.rhs += ctx.qw_phys[q] * (vq - vh) * w.resid_q[q];
    }
    return out;
}

}  // namespace entropycg
