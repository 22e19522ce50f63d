#pragma once

/// @file physics.hpp
/// @brief Flux models, entropy pairs, and benchmark problem definitions.
///
/// All models carry the square entropy eta = u^2/2 together with a
/// compatible entropy flux q (q' = v f') and potential psi = v f - q.
/// Fluxes take the position as well as the state: the base models are
/// autonomous and ignore it, but divergence-free advection fields
/// (solid body rotation) need it.  The pairwise wave-speed bound
/// lambda must dominate |n . f'| along the segment between the two
/// states for the directions n that occur in the pair stencils (axis
/// directions on these meshes).

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "entropycg/linalg.hpp"

namespace entropycg {

struct FluxModel {
    std::string name;
    int dim = 1;
    bool linear_in_u = false;  // f(x,u) = velocity(x) * u

    std::function<Vec2(const Vec2&, double)> f;
    std::function<Vec2(const Vec2&, double)> fprime;  // df/du
    std::function<double(double)> eta;
    std::function<double(double)> v;  // eta'
    std::function<Vec2(const Vec2&, double)> q;
    std::function<Vec2(const Vec2&, double)> psi;  // v f - q
    /// Pairwise wave speed bound: (x_i, x_j, u_i, u_j, unit n).
    std::function<double(const Vec2&, const Vec2&, double, double, const Vec2&)> lambda;
    std::function<Vec2(const Vec2&)> velocity;  // set when linear_in_u
    /// True when lambda does not depend on the states; the solver then
    /// caches the LLF diffusion matrices and the CFL time step.
    bool state_independent_lambda = false;
    bool square_entropy = false;  // v(u) = u, lets hot loops skip the call
    /// True when f is jointly polynomial in x and u of low enough degree
    /// that the degree+2 volume quadrature integrates the scheme exactly.
    bool polynomial = false;

    double speed_scale = 1.0;      // representative |f'| for degeneracy tests
    Vec2 invariant = {0.0, 1.0};   // invariant interval G
};

namespace detail {
inline void attach_square_entropy(FluxModel& m) {
    m.eta = [](double u) { return 0.5 * u * u; };
    m.v = [](double u) { return u; };
    m.square_entropy = true;
}
}  // namespace detail

/// Constant-velocity linear advection, f = a u.
inline FluxModel linear_advection(int dim, Vec2 a) {
    FluxModel m;
    m.name = "linear_advection";
    m.state_independent_lambda = true;
    m.polynomial = true;
    m.dim = dim;
    m.linear_in_u = true;
    m.velocity = [a](const Vec2&) { return a; };
    m.f = [a](const Vec2&, double u) { return scaled(a, u); };
    m.fprime = [a](const Vec2&, double) { return a; };
    detail::attach_square_entropy(m);
    m.q = [a](const Vec2&, double u) { return scaled(a, 0.5 * u * u); };
    m.psi = [a](const Vec2&, double u) { return scaled(a, 0.5 * u * u); };
    m.lambda = [a, dim](const Vec2&, const Vec2&, double, double, const Vec2& n) {
        return std::fabs(dot(n, a, dim));
    };
    m.speed_scale = norm2(a, dim);
    m.invariant = {-1.0, 1.0};
    return m;
}

/// Divergence-free advection field, f(x,u) = vel(x) u.  Set
/// `polynomial_velocity` when vel is affine in x so the cheaper exact
/// quadrature applies.
inline FluxModel advection_field(int dim, std::function<Vec2(const Vec2&)> vel,
                                 double speed_scale, bool polynomial_velocity = false) {
    FluxModel m;
    m.name = "advection_field";
    m.state_independent_lambda = true;
    m.polynomial = polynomial_velocity;
    m.dim = dim;
    m.linear_in_u = true;
    m.velocity = vel;
    m.f = [vel](const Vec2& x, double u) { return scaled(vel(x), u); };
    m.fprime = [vel](const Vec2& x, double) { return vel(x); };
    detail::attach_square_entropy(m);
    m.q = [vel](const Vec2& x, double u) { return scaled(vel(x), 0.5 * u * u); };
    m.psi = [vel](const Vec2& x, double u) { return scaled(vel(x), 0.5 * u * u); };
    m.lambda = [vel, dim](const Vec2& xi, const Vec2& xj, double, double, const Vec2& n) {
        return std::max(std::fabs(dot(n, vel(xi), dim)), std::fabs(dot(n, vel(xj), dim)));
    };
    m.speed_scale = speed_scale;
    m.invariant = {0.0, 1.0};
    return m;
}

/// 1D Burgers, f = u^2/2.
inline FluxModel burgers() {
    FluxModel m;
    m.name = "burgers";
    m.polynomial = true;
    m.dim = 1;
    m.f = [](const Vec2&, double u) { return Vec2{0.5 * u * u, 0.0}; };
    m.fprime = [](const Vec2&, double u) { return Vec2{u, 0.0}; };
    detail::attach_square_entropy(m);
    m.q = [](const Vec2&, double u) { return Vec2{u * u * u / 3.0, 0.0}; };
    m.psi = [](const Vec2&, double u) { return Vec2{u * u * u / 6.0, 0.0}; };
    m.lambda = [](const Vec2&, const Vec2&, double ui, double uj, const Vec2& n) {
        return std::max(std::fabs(ui), std::fabs(uj)) * std::fabs(n[0]);
    };
    m.speed_scale = 1.0;
    m.invariant = {-1.0, 1.0};
    return m;
}

/// 2D Buckley-Leverett with gravity, global wave speed bound 3.4.
inline FluxModel buckley_leverett() {
    FluxModel m;
    m.name = "buckley_leverett";
    m.state_independent_lambda = true;
    m.dim = 2;
    auto D = [](double u) { return 2.0 * u * u - 2.0 * u + 1.0; };
    auto s = [D](double u) { return u * u / D(u); };
    m.f = [s](const Vec2&, double u) {
        const double su = s(u);
        const double g = 1.0 - 5.0 * (1.0 - u) * (1.0 - u);
        return Vec2{su, su * g};
    };
    m.fprime = [D, s](const Vec2&, double u) {
        const double d = D(u);
        const double sp = 2.0 * u * (1.0 - u) / (d * d);
        const double g = 1.0 - 5.0 * (1.0 - u) * (1.0 - u);
        return Vec2{sp, sp * g + s(u) * 10.0 * (1.0 - u)};
    };
    detail::attach_square_entropy(m);
    m.q = [D](const Vec2&, double u) {
        const double d = D(u);
        const double qx = 0.25 * (2.0 * (u - 1.0) / d - std::log(d));
        const double qy = (1.0 / 12.0) * (-20.0 * u * u * u + 15.0 * u * u -
                                          (9.0 * u + 6.0) / d - 3.0 * std::log(d) -
                                          15.0 * std::atan(1.0 - 2.0 * u));
        return Vec2{qx, qy};
    };
    m.psi = [f = m.f, q = m.q](const Vec2& x, double u) {
        const Vec2 fu = f(x, u), qu = q(x, u);
        return Vec2{u * fu[0] - qu[0], u * fu[1] - qu[1]};
    };
    m.lambda = [](const Vec2&, const Vec2&, double, double, const Vec2&) { return 3.4; };
    m.speed_scale = 3.4;
    m.invariant = {0.0, 1.0};
    return m;
}

/// 2D KPP rotating wave, f = (sin u, cos u), global wave speed 1.
inline FluxModel kpp() {
    FluxModel m;
    m.name = "kpp";
    m.state_independent_lambda = true;
    m.dim = 2;
    m.f = [](const Vec2&, double u) { return Vec2{std::sin(u), std::cos(u)}; };
    m.fprime = [](const Vec2&, double u) { return Vec2{std::cos(u), -std::sin(u)}; };
    detail::attach_square_entropy(m);
    m.q = [](const Vec2&, double u) {
        return Vec2{u * std::sin(u) + std::cos(u), u * std::cos(u) - std::sin(u)};
    };
    m.psi = [](const Vec2&, double u) { return Vec2{-std::cos(u), std::sin(u)}; };
    m.lambda = [](const Vec2&, const Vec2&, double, double, const Vec2&) { return 1.0; };
    m.speed_scale = 1.0;
    m.invariant = {M_PI / 4.0, 3.5 * M_PI};
    return m;
}

/// Entropy solution of 1D Burgers with u0 = sin(2 pi x) before shock
/// formation (t < 1/(2 pi)): solves u = sin(2 pi (x - u t)) by Newton
/// with a bisection fallback.
inline double burgers_exact_sine(double x, double t) {
    constexpr double t_crit = 1.0 / (2.0 * M_PI);
    if (t >= t_crit)
        throw std::invalid_argument("burgers_exact_sine: valid only before shock formation");
    if (t == 0.0) return std::sin(2.0 * M_PI * x);
    auto F = [&](double u) { return u - std::sin(2.0 * M_PI * (x - u * t)); };
    double u = std::sin(2.0 * M_PI * x);
    bool ok = false;
    for (int it = 0; it < 100; ++it) {
        const double fu = F(u);
        const double dfu = 1.0 + 2.0 * M_PI * t * std::cos(2.0 * M_PI * (x - u * t));
        const double du = fu / dfu;
        u -= du;
        if (std::fabs(du) < 1e-15) {
            ok = true;
            break;
        }
    }
    if (!ok || std::fabs(F(u)) > 1e-12 || std::fabs(u) > 1.0 + 1e-9) {
        double lo = -1.0, hi = 1.0;  // F(-1) <= 0 <= F(1)
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (F(mid) <= 0.0)
                lo = mid;
            else
                hi = mid;
        }
        u = 0.5 * (lo + hi);
    }
    return u;
}

/// One benchmark configuration: flux, domain, data, reference solution.
struct BenchmarkProblem {
    std::string name;
    FluxModel flux;
    int dim = 1;
    Vec2 lower = {0.0, 0.0};
    Vec2 upper = {1.0, 0.0};
    double t_final = 1.0;
    std::function<double(const Vec2&)> u0;
    /// Null when no closed-form reference exists.
    std::function<double(const Vec2&, double)> exact;
    /// Discontinuous data is sampled into the coefficients (keeps them
    /// inside the invariant set); smooth data is interpolated exactly.
    bool sample_initial_data = false;
    bool polynomial_flux = true;  // selects the volume quadrature order
    std::string default_scheme = "HO-VMS-EV";
    double default_omega = 1.0;
};

inline BenchmarkProblem benchmark(const std::string& name) {
    BenchmarkProblem b;
    b.name = name;
    if (name == "adv1d_cos") {
        b.flux = linear_advection(1, {1.0, 0.0});
        b.dim = 1;
        b.lower = {0.0, 0.0};
        b.upper = {1.0, 0.0};
        b.t_final = 1.0;
        b.u0 = [](const Vec2& x) { return std::cos(2.0 * M_PI * (x[0] - 0.5)); };
        b.exact = [](const Vec2& x, double t) {
            return std::cos(2.0 * M_PI * (x[0] - t - 0.5));
        };
        b.default_scheme = "HO-SUPG";
    } else if (name == "adv1d_threebody") {
        b.flux = linear_advection(1, {1.0, 0.0});
        b.flux.invariant = {0.0, 1.0};
        b.dim = 1;
        b.lower = {0.0, 0.0};
        b.upper = {1.0, 0.0};
        b.t_final = 100.0;
        auto profile = [](double x) {
            x = x - std::floor(x);
            if (std::fabs(2.0 * x - 0.3) <= 0.25) {
                const double d = 2.0 * x - 0.3;
                return std::exp(-300.0 * d * d);
            }
            if (std::fabs(2.0 * x - 0.9) <= 0.2) return 1.0;
            if (std::fabs(2.0 * x - 1.6) <= 0.2) {
                const double d = (2.0 * x - 1.6) / 0.2;
                return std::sqrt(std::max(0.0, 1.0 - d * d));
            }
            return 0.0;
        };
        b.u0 = [profile](const Vec2& x) { return profile(x[0]); };
        b.exact = [profile](const Vec2& x, double t) { return profile(x[0] - t); };
        b.sample_initial_data = true;
        b.default_scheme = "HO-VMS-EV";
        b.default_omega = 0.1;
    } else if (name == "burgers1d") {
        b.flux = burgers();
        b.dim = 1;
        b.lower = {0.0, 0.0};
        b.upper = {1.0, 0.0};
        b.t_final = 0.1;
        b.u0 = [](const Vec2& x) { return std::sin(2.0 * M_PI * x[0]); };
        b.exact = [](const Vec2& x, double t) { return burgers_exact_sine(x[0], t); };
        b.default_scheme = "HO-VMS-EV";
    } else if (name == "solid_body_rotation") {
        auto vel = [](const Vec2& x) {
            return Vec2{2.0 * M_PI * (0.5 - x[1]), 2.0 * M_PI * (x[0] - 0.5)};
        };
        // The rotation velocity is affine in x, so the flux is polynomial.
        b.flux = advection_field(2, vel, 2.0 * M_PI * std::sqrt(0.5), true);
        b.dim = 2;
        b.lower = {0.0, 0.0};
        b.upper = {1.0, 1.0};
        b.t_final = 1.0;
        b.u0 = [](const Vec2& x) {
            const double rh = std::sqrt((x[0] - 0.25) * (x[0] - 0.25) +
                                        (x[1] - 0.5) * (x[1] - 0.5)) / 0.15;
            if (rh <= 1.0) return 0.25 * (1.0 + std::cos(M_PI * rh));
            const double rc = std::sqrt((x[0] - 0.5) * (x[0] - 0.5) +
                                        (x[1] - 0.25) * (x[1] - 0.25)) / 0.15;
            if (rc <= 1.0) return 1.0 - rc;
            const double rs = std::sqrt((x[0] - 0.5) * (x[0] - 0.5) +
                                        (x[1] - 0.75) * (x[1] - 0.75));
            if (rs <= 0.15 && (std::fabs(x[0] - 0.5) >= 0.025 || x[1] >= 0.85)) return 1.0;
            return 0.0;
        };
        b.exact = [u0 = b.u0](const Vec2& x, double t) {
            const double a = -2.0 * M_PI * t;
            const double dx = x[0] - 0.5, dy = x[1] - 0.5;
            const Vec2 back = {0.5 + std::cos(a) * dx - std::sin(a) * dy,
                               0.5 + std::sin(a) * dx + std::cos(a) * dy};
            return u0(back);
        };
        b.sample_initial_data = true;
        b.default_scheme = "HO-VMS-EV-BP";
    } else if (name == "buckley_leverett") {
        b.flux = buckley_leverett();
        b.dim = 2;
        b.lower = {-1.5, -1.5};
        b.upper = {1.5, 1.5};
        b.t_final = 0.5;
        b.u0 = [](const Vec2& x) {
            return (x[0] * x[0] + x[1] * x[1] < 0.5) ? 1.0 : 0.0;
        };
        b.sample_initial_data = true;
        b.polynomial_flux = false;
        b.default_scheme = "HO-VMS-EV-FL";
    } else if (name == "kpp") {
        b.flux = kpp();
        b.dim = 2;
        b.lower = {-2.0, -2.5};
        b.upper = {2.0, 1.5};
        b.t_final = 1.0;
        b.u0 = [](const Vec2& x) {
            return (std::sqrt(x[0] * x[0] + x[1] * x[1]) <= 1.0) ? 3.5 * M_PI : 0.25 * M_PI;
        };
        b.sample_initial_data = true;
        b.polynomial_flux = false;
        b.default_scheme = "HO-VMS-EV-FL";
    } else {
        throw std::invalid_argument("benchmark: unknown name '" + name + "'");
    }
    return b;
}

}  // namespace entropycg
