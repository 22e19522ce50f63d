#pragma once

/// @file element_ops.hpp
/// @brief Element matrices, lumped gradient operator, subcell machinery.
///
/// On a uniform mesh every element shares one set of operators; the
/// assembly below still takes an element index so tests can exercise
/// the contract, but the solver builds a single ElementContext and
/// reuses it.  Local pair stencils come from the sparsified lumped
/// gradient operator c~ = M_L M_C^{-1} C, whose rows sum to zero and
/// whose truncated pattern is the compact 3^d subcell neighborhood.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "entropycg/basis.hpp"
#include "entropycg/mesh.hpp"
#include "entropycg/quadrature.hpp"

namespace entropycg {

struct ElementOperators {
    int dim = 1;
    int degree = 1;
    int n_loc = 0;
    Vec2 h = {0.0, 0.0};
    double volume = 0.0;
    double h_iso = 0.0;  // |K|^{1/d}

    DenseMatrix mass;             // m_ij
    std::vector<double> lumped;   // m_i = sum_j m_ij
    std::vector<Vec2> c;          // c_ij = int phi_i grad phi_j, flat n_loc x n_loc
    std::vector<Vec2> ctilde;     // M_L M_C^{-1} C, truncated
    std::vector<std::vector<int>> stencil;  // N~_i including i, ascending
    std::vector<double> mtilde;   // subcell Q1 mass on the c~ pattern, zero row sums
    LuFactor mtilde_reduced;      // rows/cols 1.. for the pinned potential solve

    const Vec2& c_at(int i, int j) const { return c[static_cast<size_t>(i) * n_loc + j]; }
    const Vec2& ct_at(int i, int j) const { return ctilde[static_cast<size_t>(i) * n_loc + j]; }
    double mt_at(int i, int j) const { return mtilde[static_cast<size_t>(i) * n_loc + j]; }
};

namespace detail {

/// Q1 mass matrix of one subcell (lengths a, b), corner order 00,10,01,11.
inline void subcell_q1_mass(int dim, double a, double b, double* out /* 4x4 or 2x2 */) {
    if (dim == 1) {
        const double s = a / 6.0;
        out[0] = 2 * s; out[1] = s;
        out[2] = s;     out[3] = 2 * s;
    } else {
        static const double m[16] = {4, 2, 2, 1, 2, 4, 1, 2, 2, 1, 4, 2, 1, 2, 2, 4};
        const double s = a * b / 36.0;
        for (int k = 0; k < 16; ++k) out[k] = m[k] * s;
    }
}

}  // namespace detail

/// Assembles the element operators for element e.  `nq` is the number
/// of quadrature points per direction (must integrate degree 2p).
inline ElementOperators assemble_element_operators(const Mesh& mesh, int e,
                                                   const ReferenceBasis& basis, int nq) {
    if (basis.degree != mesh.degree || basis.dim != mesh.dim)
        throw std::invalid_argument("assemble_element_operators: basis/mesh mismatch");
    (void)e;  // uniform mesh: all elements share the same geometry

    ElementOperators ops;
    ops.dim = mesh.dim;
    ops.degree = mesh.degree;
    ops.n_loc = basis.size();
    ops.h = mesh.h();
    ops.volume = ops.h[0] * (mesh.dim == 1 ? 1.0 : ops.h[1]);
    ops.h_iso = (mesh.dim == 1) ? ops.volume : std::sqrt(ops.volume);

    const int n = ops.n_loc;
    const QuadratureRule quad = tensor_gauss(nq, mesh.dim);
    ops.mass = DenseMatrix(n, n);
    ops.c.assign(static_cast<size_t>(n) * n, Vec2{0.0, 0.0});

    std::vector<double> phi(n);
    std::vector<Vec2> dphi(n);
    for (int q = 0; q < quad.size(); ++q) {
        basis.values(quad.points[q], phi.data());
        basis.gradients(quad.points[q], dphi.data());
        const double w = quad.weights[q] * ops.volume;
        for (int i = 0; i < n; ++i) {
            const double wphi = w * phi[i];
            for (int j = 0; j < n; ++j) {
                ops.mass(i, j) += wphi * phi[j];
                auto& cij = ops.c[static_cast<size_t>(i) * n + j];
                cij[0] += wphi * dphi[j][0] / ops.h[0];
                if (mesh.dim > 1) cij[1] += wphi * dphi[j][1] / ops.h[1];
            }
        }
    }
    ops.lumped.assign(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) ops.lumped[i] += ops.mass(i, j);

    // c~ = M_L M_C^{-1} C, then truncate relative to the largest entry.
    const LuFactor mass_lu = LuFactor::factor(ops.mass);
    ops.ctilde.assign(static_cast<size_t>(n) * n, Vec2{0.0, 0.0});
    std::vector<double> col(n);
    for (int d = 0; d < mesh.dim; ++d) {
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) col[i] = ops.c[static_cast<size_t>(i) * n + j][d];
            mass_lu.solve_inplace(col.data());
            for (int i = 0; i < n; ++i)
                ops.ctilde[static_cast<size_t>(i) * n + j][d] = ops.lumped[i] * col[i];
        }
    }
    double cmax = 0.0;
    for (const auto& v : ops.ctilde) cmax = std::max(cmax, norm2(v, mesh.dim));
    const double tol = 1e-13 * cmax;
    for (auto& v : ops.ctilde)
        if (norm2(v, mesh.dim) < tol) v = {0.0, 0.0};

    // Pair stencils from the (structurally symmetric) c~ pattern.
    ops.stencil.assign(n, {});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const bool on = norm2(ops.ct_at(i, j), mesh.dim) > 0.0 ||
                            norm2(ops.ct_at(j, i), mesh.dim) > 0.0;
            if (on || i == j) ops.stencil[i].push_back(j);
        }
    }

    // Subcell Q1 mass restricted to the pair stencil; diagonal balances rows.
    ops.mtilde.assign(static_cast<size_t>(n) * n, 0.0);
    const int p = mesh.degree;
    const int npd = p + 1;
    const int subcells = (mesh.dim == 1) ? p : p * p;
    const int corners = 1 << mesh.dim;
    double local[16];
    detail::subcell_q1_mass(mesh.dim, ops.h[0] / p, (mesh.dim == 1 ? 0.0 : ops.h[1] / p), local);
    std::vector<double> full(static_cast<size_t>(n) * n, 0.0);
    for (int s = 0; s < subcells; ++s) {
        const int sx = s % p;
        const int sy = (mesh.dim == 1) ? 0 : s / p;
        int ids[4] = {0, 0, 0, 0};
        for (int c2 = 0; c2 < corners; ++c2) {
            const int ax = c2 & 1, ay = (c2 >> 1) & 1;
            ids[c2] = (mesh.dim == 1) ? (sx + ax) : (sy + ay) * npd + (sx + ax);
        }
        for (int a = 0; a < corners; ++a)
            for (int b = 0; b < corners; ++b)
                full[static_cast<size_t>(ids[a]) * n + ids[b]] += local[a * corners + b];
    }
    for (int i = 0; i < n; ++i) {
        double diag = 0.0;
        for (int j : ops.stencil[i]) {
            if (j == i) continue;
            const double v = full[static_cast<size_t>(i) * n + j];
            ops.mtilde[static_cast<size_t>(i) * n + j] = v;
            diag -= v;
        }
        ops.mtilde[static_cast<size_t>(i) * n + i] = diag;
    }

    // Pinned solve: drop the lowest-indexed local node.
    DenseMatrix red(n - 1, n - 1);
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j) red(i - 1, j - 1) = ops.mt_at(i, j);
    ops.mtilde_reduced = LuFactor::factor(red);

    return ops;
}

/// Solves m~ w = r with the zeroth potential pinned to zero.  Checks
/// that the right-hand side is compatible (sums to ~0); an incompatible
/// r signals an assembly bug upstream.
inline std::vector<double> solve_flux_potentials(const ElementOperators& ops,
                                                 const std::vector<double>& r) {
    const int n = ops.n_loc;
    if (static_cast<int>(r.size()) != n)
        throw std::invalid_argument("solve_flux_potentials: size mismatch");
    double sum = 0.0, scale = 0.0;
    for (double v : r) {
        sum += v;
        scale = std::max(scale, std::fabs(v));
    }
    if (std::fabs(sum) > 1e-10 * std::max(1.0, scale))
        throw std::runtime_error("solve_flux_potentials: incompatible right-hand side");
    std::vector<double> red(r.begin() + 1, r.end());
    ops.mtilde_reduced.solve_inplace(red.data());
    std::vector<double> w(n, 0.0);
    for (int i = 1; i < n; ++i) w[i] = red[i - 1];
    return w;
}

/// Allocation-free variant of solve_flux_potentials for hot loops;
/// `red` is an n-1 sized scratch vector, `w` receives the potentials.
inline void solve_flux_potentials_inplace(const ElementOperators& ops,
                                          const std::vector<double>& r, std::vector<double>& red,
                                          std::vector<double>& w) {
    const int n = ops.n_loc;
    double sum = 0.0, scale = 0.0;
    for (double v : r) {
        sum += v;
        scale = std::max(scale, std::fabs(v));
    }
    if (std::fabs(sum) > 1e-10 * std::max(1.0, scale))
        throw std::runtime_error("solve_flux_potentials: incompatible right-hand side");
    red.assign(r.begin() + 1, r.end());
    ops.mtilde_reduced.solve_inplace(red.data());
    w[0] = 0.0;
    for (int i = 1; i < n; ++i) w[i] = red[i - 1];
}

/// Precomputed reference tables shared by every element of a mesh.
struct ElementContext {
    Mesh mesh;  // owning copy keeps the context self-contained
    ReferenceBasis basis;
    ReferenceBasis lagrange;
    ElementOperators ops;

    // Volume quadrature (reference points, physical weights).
    QuadratureRule quad;
    std::vector<double> qw_phys;
    DenseMatrix phi;             // n_q x n_loc values
    std::vector<Vec2> dphi_phys; // n_q x n_loc physical gradients
    DenseMatrix psi;             // Lagrange values at the quadrature points

    // Lattice tables.
    DenseMatrix blattice;          // phi_k(node_j), rows = nodes
    LuFactor blattice_lu;          // nodal values -> coefficients
    std::vector<Vec2> dphi_lattice;  // physical grad phi_k at node_j

    // Subcell quadrature: p^d subcells x 2^d Gauss points.
    int n_sq = 0;
    std::vector<std::array<int, 4>> sq_corner_ids;
    std::vector<std::array<double, 4>> sq_corner_w;
    std::vector<double> sq_w_phys;
    std::vector<Vec2> sq_pts_ref;
    DenseMatrix subcell_fluct;  // (i1 - i0) phi_k at subcell points, n_sq x n_loc

    // Orthonormal total-degree-(p-1) modes at the volume points.
    int n_modes = 0;
    DenseMatrix modes;  // n_modes x n_q

    int n_loc() const { return basis.size(); }
    int n_q() const { return quad.size(); }

    const Vec2& dphi_at(int q, int k) const { return dphi_phys[static_cast<size_t>(q) * n_loc() + k]; }
    const Vec2& dphi_node(int j, int k) const { return dphi_lattice[static_cast<size_t>(j) * n_loc() + k]; }
};

/// Builds the shared per-element tables.  `nq` is the volume quadrature
/// order per direction; pass degree+2 for polynomial fluxes and
/// degree+3 for non-polynomial ones.
inline ElementContext build_element_context(const Mesh& mesh, BasisType type, int nq) {
    ElementContext ctx;
    ctx.mesh = mesh;
    ctx.basis = ReferenceBasis(type, mesh.degree, mesh.dim);
    ctx.lagrange = ReferenceBasis(BasisType::lagrange, mesh.degree, mesh.dim);
    ctx.ops = assemble_element_operators(mesh, 0, ctx.basis, nq);

    const int n = ctx.n_loc();
    const int dim = mesh.dim;
    const Vec2 h = mesh.h();

    ctx.quad = tensor_gauss(nq, dim);
    const int nqt = ctx.quad.size();
    ctx.qw_phys.resize(nqt);
    ctx.phi = DenseMatrix(nqt, n);
    ctx.psi = DenseMatrix(nqt, n);
    ctx.dphi_phys.assign(static_cast<size_t>(nqt) * n, Vec2{0.0, 0.0});
    std::vector<double> vals(n);
    std::vector<Vec2> grads(n);
    for (int q = 0; q < nqt; ++q) {
        ctx.qw_phys[q] = ctx.quad.weights[q] * ctx.ops.volume;
        ctx.basis.values(ctx.quad.points[q], vals.data());
        for (int k = 0; k < n; ++k) ctx.phi(q, k) = vals[k];
        ctx.basis.gradients(ctx.quad.points[q], grads.data());
        for (int k = 0; k < n; ++k) {
            ctx.dphi_phys[static_cast<size_t>(q) * n + k] =
                {grads[k][0] / h[0], dim == 1 ? 0.0 : grads[k][1] / h[1]};
        }
        ctx.lagrange.values(ctx.quad.points[q], vals.data());
        for (int k = 0; k < n; ++k) ctx.psi(q, k) = vals[k];
    }

    ctx.blattice = DenseMatrix(n, n);
    ctx.dphi_lattice.assign(static_cast<size_t>(n) * n, Vec2{0.0, 0.0});
    for (int j = 0; j < n; ++j) {
        const Vec2 xj = ctx.basis.node(j);
        ctx.basis.values(xj, vals.data());
        for (int k = 0; k < n; ++k) ctx.blattice(j, k) = vals[k];
        ctx.basis.gradients(xj, grads.data());
        for (int k = 0; k < n; ++k)
            ctx.dphi_lattice[static_cast<size_t>(j) * n + k] =
                {grads[k][0] / h[0], dim == 1 ? 0.0 : grads[k][1] / h[1]};
    }
    ctx.blattice_lu = LuFactor::factor(ctx.blattice);

    // Subcell Gauss points: 2 per direction per subcell (exact for the
    // products of multilinear fluctuations integrated here).
    const int p = mesh.degree;
    const int npd = p + 1;
    const int subcells = (dim == 1) ? p : p * p;
    const int corners = 1 << dim;
    const QuadratureRule sub = tensor_gauss(2, dim);
    const double subvol = ctx.ops.volume / subcells;
    ctx.n_sq = subcells * sub.size();
    ctx.sq_corner_ids.resize(ctx.n_sq);
    ctx.sq_corner_w.resize(ctx.n_sq);
    ctx.sq_w_phys.resize(ctx.n_sq);
    ctx.sq_pts_ref.resize(ctx.n_sq);
    ctx.subcell_fluct = DenseMatrix(ctx.n_sq, n);
    int sq = 0;
    for (int s = 0; s < subcells; ++s) {
        const int sx = s % p;
        const int sy = (dim == 1) ? 0 : s / p;
        std::array<int, 4> ids = {0, 0, 0, 0};
        for (int c2 = 0; c2 < corners; ++c2) {
            const int ax = c2 & 1, ay = (c2 >> 1) & 1;
            ids[c2] = (dim == 1) ? (sx + ax) : (sy + ay) * npd + (sx + ax);
        }
        for (int g = 0; g < sub.size(); ++g, ++sq) {
            const double xi = sub.points[g][0], eta = sub.points[g][1];
            ctx.sq_corner_ids[sq] = ids;
            std::array<double, 4> w = {0.0, 0.0, 0.0, 0.0};
            if (dim == 1) {
                w[0] = 1.0 - xi;
                w[1] = xi;
            } else {
                w[0] = (1.0 - xi) * (1.0 - eta);
                w[1] = xi * (1.0 - eta);
                w[2] = (1.0 - xi) * eta;
                w[3] = xi * eta;
            }
            ctx.sq_corner_w[sq] = w;
            ctx.sq_w_phys[sq] = sub.weights[g] * subvol;
            ctx.sq_pts_ref[sq] = {(sx + xi) / p, dim == 1 ? 0.0 : (sy + eta) / p};
            const double mean = 1.0 / corners;
            for (int k = 0; k < n; ++k) {
                double t = 0.0;
                for (int c2 = 0; c2 < corners; ++c2)
                    t += (w[c2] - mean) * ctx.blattice(ids[c2], k);
                ctx.subcell_fluct(sq, k) = t;
            }
        }
    }

    // Total-degree p-1 orthonormal modes (shifted Legendre products).
    std::vector<std::array<int, 2>> mode_ids;
    for (int a = 0; a < p; ++a) {
        if (dim == 1) {
            mode_ids.push_back({a, 0});
        } else {
            for (int b = 0; a + b <= p - 1; ++b) mode_ids.push_back({a, b});
        }
    }
    ctx.n_modes = static_cast<int>(mode_ids.size());
    ctx.modes = DenseMatrix(ctx.n_modes, nqt);
    for (int m = 0; m < ctx.n_modes; ++m)
        for (int q = 0; q < nqt; ++q) {
            double v = shifted_legendre(mode_ids[m][0], ctx.quad.points[q][0]);
            if (dim > 1) v *= shifted_legendre(mode_ids[m][1], ctx.quad.points[q][1]);
            ctx.modes(m, q) = v;
        }

    return ctx;
}

/// Piecewise multilinear interpolant of element nodal values on the
/// subcell lattice, plus its subcell averages.  Evaluation-oriented;
/// the hot kernels use the precomputed subcell tables instead.
struct SubcellInterpolant {
    const ElementContext* ctx = nullptr;
    std::vector<double> nodal;  // values at the element lattice nodes

    /// i1: value of the multilinear interpolant at reference point xi.
    double interpolant(const Vec2& xi) const {
        const int p = ctx->mesh.degree;
        const int dim = ctx->mesh.dim;
        const int npd = p + 1;
        auto clamp_cell = [&](double c) { return std::min(std::max(0, static_cast<int>(c)), p - 1); };
        const int sx = clamp_cell(xi[0] * p);
        const int sy = (dim == 1) ? 0 : clamp_cell(xi[1] * p);
        const double lx = xi[0] * p - sx;
        const double ly = (dim == 1) ? 0.0 : xi[1] * p - sy;
        if (dim == 1) return (1 - lx) * nodal[sx] + lx * nodal[sx + 1];
        const double v00 = nodal[sy * npd + sx], v10 = nodal[sy * npd + sx + 1];
        const double v01 = nodal[(sy + 1) * npd + sx], v11 = nodal[(sy + 1) * npd + sx + 1];
        return (1 - lx) * (1 - ly) * v00 + lx * (1 - ly) * v10 + (1 - lx) * ly * v01 + lx * ly * v11;
    }

    /// i0: average of i1 over the subcell containing xi (equals the
    /// corner mean for multilinear functions on boxes).
    double subcell_average(const Vec2& xi) const {
        const int p = ctx->mesh.degree;
        const int dim = ctx->mesh.dim;
        const int npd = p + 1;
        auto clamp_cell = [&](double c) { return std::min(std::max(0, static_cast<int>(c)), p - 1); };
        const int sx = clamp_cell(xi[0] * p);
        const int sy = (dim == 1) ? 0 : clamp_cell(xi[1] * p);
        if (dim == 1) return 0.5 * (nodal[sx] + nodal[sx + 1]);
        return 0.25 * (nodal[sy * npd + sx] + nodal[sy * npd + sx + 1] +
                       nodal[(sy + 1) * npd + sx] + nodal[(sy + 1) * npd + sx + 1]);
    }
};

/// L2 projection of element-local quadrature-point values onto the
/// total-degree p-1 polynomial space; returns the modal coefficients.
inline std::vector<double> local_projection(const ElementContext& ctx,
                                            const std::vector<double>& values_at_q) {
    std::vector<double> alpha(ctx.n_modes, 0.0);
    for (int m = 0; m < ctx.n_modes; ++m) {
        double s = 0.0;
        for (int q = 0; q < ctx.n_q(); ++q)
            s += ctx.quad.weights[q] * ctx.modes(m, q) * values_at_q[q];
        alpha[m] = s;
    }
    return alpha;
}

/// Values of the projected polynomial back at the quadrature points.
inline std::vector<double> projection_values(const ElementContext& ctx,
                                             const std::vector<double>& alpha) {
    std::vector<double> out(ctx.n_q(), 0.0);
    for (int m = 0; m < ctx.n_modes; ++m) {
        const double a = alpha[m];
        if (a == 0.0) continue;
        for (int q = 0; q < ctx.n_q(); ++q) out[q] += a * ctx.modes(m, q);
    }
    return out;
}

}  // namespace entropycg
