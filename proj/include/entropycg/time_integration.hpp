#pragma once

/// @file time_integration.hpp
/// @brief Explicit time stepping: SSP-RK3 and a 7-stage order-6
/// Runge-Kutta method, plus the CFL time-step control.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "entropycg/limiter.hpp"

namespace entropycg {

/// Semi-discrete right-hand side: dudt = L(u).
using RhsFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct ButcherTableau {
    int stages = 0;
    DenseMatrix a;          // strictly lower triangular
    std::vector<double> b;  // weights, sum 1
    std::vector<double> c;  // abscissae, c_i = sum_j a_ij
};

/// 7-stage, order-6 explicit method used for convergence studies.
inline ButcherTableau rk76_tableau() {
    ButcherTableau t;
    t.stages = 7;
    t.c = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 0.5, 0.5, 1.0};
    t.b = {11.0 / 120.0, 0.0, 27.0 / 40.0, 27.0 / 40.0, -4.0 / 15.0, -4.0 / 15.0, 11.0 / 120.0};
    t.a = DenseMatrix(7, 7);
    const double rows[7][7] = {
        {0, 0, 0, 0, 0, 0, 0},
        {1.0 / 3.0, 0, 0, 0, 0, 0, 0},
        {0, 2.0 / 3.0, 0, 0, 0, 0, 0},
        {1.0 / 12.0, 1.0 / 3.0, -1.0 / 12.0, 0, 0, 0, 0},
        {-1.0 / 16.0, 9.0 / 8.0, -3.0 / 16.0, -3.0 / 8.0, 0, 0, 0},
        {0, 9.0 / 8.0, -3.0 / 8.0, -3.0 / 4.0, 0.5, 0, 0},
        {9.0 / 44.0, -9.0 / 11.0, 63.0 / 44.0, 18.0 / 11.0, 0, -16.0 / 11.0, 0}};
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) t.a(i, j) = rows[i][j];
    return t;
}

/// Workspace for the Shu-Osher form SSP-RK3 step.
struct SspRk3Work {
    std::vector<double> k, u1;
    void resize(size_t n) {
        k.resize(n);
        u1.resize(n);
    }
};

/// u <- SSP-RK3(u); rhs is evaluated at the three stage states.
inline void ssprk3_step(std::vector<double>& u, double dt, const RhsFn& rhs, SspRk3Work& w) {
    const size_t n = u.size();
    w.resize(n);
    rhs(u, w.k);
    for (size_t i = 0; i < n; ++i) w.u1[i] = u[i] + dt * w.k[i];
    rhs(w.u1, w.k);
    for (size_t i = 0; i < n; ++i) w.u1[i] = 0.75 * u[i] + 0.25 * (w.u1[i] + dt * w.k[i]);
    rhs(w.u1, w.k);
    for (size_t i = 0; i < n; ++i) u[i] = (u[i] + 2.0 * (w.u1[i] + dt * w.k[i])) / 3.0;
}

/// Workspace for a general explicit Runge-Kutta step.
struct ErkWork {
    std::vector<std::vector<double>> k;
    std::vector<double> stage;
    void resize(int stages, size_t n) {
        k.assign(stages, std::vector<double>(n));
        stage.resize(n);
    }
};

/// One step of an explicit method given by its Butcher tableau.
inline void erk_step(const ButcherTableau& tab, std::vector<double>& u, double dt,
                     const RhsFn& rhs, ErkWork& w) {
    const size_t n = u.size();
    w.resize(tab.stages, n);
    for (int s = 0; s < tab.stages; ++s) {
        w.stage = u;
        for (int j = 0; j < s; ++j) {
            const double a = tab.a(s, j);
            if (a == 0.0) continue;
            const double adt = a * dt;
            for (size_t i = 0; i < n; ++i) w.stage[i] += adt * w.k[j][i];
        }
        rhs(w.stage, w.k[s]);
    }
    for (int s = 0; s < tab.stages; ++s) {
        const double bdt = tab.b[s] * dt;
        if (bdt == 0.0) continue;
        for (size_t i = 0; i < n; ++i) u[i] += bdt * w.k[s][i];
    }
}

/// CFL time step from the LLF diffusion row sums:
///   dt = cfl * min_i [ min_e m_i^e / (2 sum_e sum_j d~_ij^e) ],
/// clamped to the remaining time (also the fallback when every wave
/// speed vanishes).  `dt_rows` may carry precomputed per-element d~
/// matrices (state-independent lambda); otherwise they are built here.
inline double cfl_timestep(const ElementContext& ctx, const FluxModel& flux,
                           const std::vector<double>& u, double cfl, double remaining,
                           const std::vector<std::vector<double>>* dt_cache = nullptr) {
    if (cfl <= 0.0) throw std::invalid_argument("cfl_timestep: cfl must be positive");
    const Mesh& mesh = ctx.mesh;
    const int n = ctx.n_loc();
    std::vector<double> den(mesh.n_nodes, 0.0);
    std::vector<double> u_loc(n), dmat;
    std::vector<Vec2> x_node(n);
    if (!dt_cache) dmat.assign(static_cast<size_t>(n) * n, 0.0);
    for (int e = 0; e < mesh.n_elements; ++e) {
        const auto& nodes = mesh.element_nodes[e];
        const std::vector<double>* dm;
        if (dt_cache) {
            dm = &(*dt_cache)[e];
        } else {
            for (int k = 0; k < n; ++k) u_loc[k] = u[nodes[k]];
            element_node_coords(ctx, e, x_node);
            llf_diffusion(ctx, flux, u_loc, x_node, dmat);
            dm = &dmat;
        }
        for (int i = 0; i < n; ++i) {
            // diagonal = -row sum, so the row sum is just -d_ii
            den[nodes[i]] -= (*dm)[static_cast<size_t>(i) * n + i];
        }
    }
    double dt = remaining;
    double mmin = ctx.ops.lumped[0];
    for (int i = 1; i < n; ++i) mmin = std::min(mmin, ctx.ops.lumped[i]);
    for (int i = 0; i < mesh.n_nodes; ++i) {
        if (den[i] > 0.0) dt = std::min(dt, cfl * mmin / (2.0 * den[i]));
    }
    return std::min(dt, remaining);
}

}  // namespace entropycg
