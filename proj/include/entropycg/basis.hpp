#pragma once

/// @file basis.hpp
/// @brief Bernstein and Lagrange tensor-product bases on [0,1]^d.
///
/// Local degrees of freedom sit on the equispaced lattice k/p and are
/// numbered lexicographically with the x index fastest.  Bernstein
/// coefficients are not nodal values; Lagrange coefficients are.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "entropycg/linalg.hpp"

namespace entropycg {

enum class BasisType { bernstein, lagrange };

inline const char* to_string(BasisType b) {
    return b == BasisType::bernstein ? "bernstein" : "lagrange";
}

/// Values of the p+1 one-dimensional Bernstein polynomials at x in [0,1].
inline void bernstein_values(int p, double x, double* out) {
    // de Casteljau-style accumulation: stable and exact at the endpoints.
    out[0] = 1.0;
    const double y = 1.0 - x;
    for (int j = 1; j <= p; ++j) {
        double saved = 0.0;
        for (int k = 0; k < j; ++k) {
            const double tmp = out[k];
            out[k] = saved + y * tmp;
            saved = x * tmp;
        }
        out[j] = saved;
    }
}

/// Derivatives of the 1D Bernstein polynomials: B' = p (B^{p-1}_{k-1} - B^{p-1}_k).
inline void bernstein_derivatives(int p, double x, double* out) {
    if (p == 0) {
        out[0] = 0.0;
        return;
    }
    std::vector<double> lower(p);
    bernstein_values(p - 1, x, lower.data());
    for (int k = 0; k <= p; ++k) {
        const double a = (k > 0) ? lower[k - 1] : 0.0;
        const double b = (k < p) ? lower[k] : 0.0;
        out[k] = p * (a - b);
    }
}

/// Values of the Lagrange polynomials on the equispaced lattice {k/p}.
inline void lagrange_values(int p, double x, double* out) {
    if (p == 0) {
        out[0] = 1.0;
        return;
    }
    for (int k = 0; k <= p; ++k) {
        double v = 1.0;
        const double xk = static_cast<double>(k) / p;
        for (int m = 0; m <= p; ++m) {
            if (m == k) continue;
            const double xm = static_cast<double>(m) / p;
            v *= (x - xm) / (xk - xm);
        }
        out[k] = v;
    }
}

inline void lagrange_derivatives(int p, double x, double* out) {
    if (p == 0) {
        out[0] = 0.0;
        return;
    }
    for (int k = 0; k <= p; ++k) {
        const double xk = static_cast<double>(k) / p;
        double sum = 0.0;
        for (int m = 0; m <= p; ++m) {
            if (m == k) continue;
            const double xm = static_cast<double>(m) / p;
            double prod = 1.0 / (xk - xm);
            for (int r = 0; r <= p; ++r) {
                if (r == k || r == m) continue;
                const double xr = static_cast<double>(r) / p;
                prod *= (x - xr) / (xk - xr);
            }
            sum += prod;
        }
        out[k] = sum;
    }
}

/// Shifted Legendre polynomial, orthonormal on [0,1]:
/// L_k(x) = sqrt(2k+1) P_k(2x-1).
inline double shifted_legendre(int k, double x) {
    const double t = 2.0 * x - 1.0;
    double p0 = 1.0, p1 = t;
    if (k == 0) return 1.0;
    for (int j = 2; j <= k; ++j) {
        const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    return std::sqrt(2.0 * k + 1.0) * p1;
}

/// Tensor-product scalar basis of degree p on [0,1]^dim.
struct ReferenceBasis {
    BasisType type = BasisType::bernstein;
    int degree = 1;
    int dim = 1;

    ReferenceBasis() = default;
    ReferenceBasis(BasisType t, int p, int d) : type(t), degree(p), dim(d) {
        if (p < 1) throw std::invalid_argument("ReferenceBasis: degree must be >= 1");
        if (d < 1 || d > 2) throw std::invalid_argument("ReferenceBasis: dim must be 1 or 2");
    }

    int nodes_per_dir() const { return degree + 1; }
    int size() const {
        int n = degree + 1;
        return dim == 1 ? n : n * n;
    }

    /// Reference coordinate of local lattice node l (x index fastest).
    Vec2 node(int l) const {
        const int n = degree + 1;
        const int kx = l % n;
        const int ky = (dim == 1) ? 0 : l / n;
        return {static_cast<double>(kx) / degree,
                dim == 1 ? 0.0 : static_cast<double>(ky) / degree};
    }

    /// Values of all basis functions at reference point x.
    void values(const Vec2& x, double* out) const {
        const int n = degree + 1;
        std::vector<double> bx(n), by(n);
        eval_1d(x[0], bx.data());
        if (dim == 1) {
            for (int k = 0; k < n; ++k) out[k] = bx[k];
            return;
        }
        eval_1d(x[1], by.data());
        for (int ky = 0; ky < n; ++ky)
            for (int kx = 0; kx < n; ++kx) out[ky * n + kx] = bx[kx] * by[ky];
    }

    /// Reference-space gradients of all basis functions at x.
    void gradients(const Vec2& x, Vec2* out) const {
        const int n = degree + 1;
        std::vector<double> bx(n), by(n), dx(n), dy(n);
        eval_1d(x[0], bx.data());
        deriv_1d(x[0], dx.data());
        if (dim == 1) {
            for (int k = 0; k < n; ++k) out[k] = {dx[k], 0.0};
            return;
        }
        eval_1d(x[1], by.data());
        deriv_1d(x[1], dy.data());
        for (int ky = 0; ky < n; ++ky)
            for (int kx = 0; kx < n; ++kx)
                out[ky * n + kx] = {dx[kx] * by[ky], bx[kx] * dy[ky]};
    }

  private:
    void eval_1d(double x, double* out) const {
        if (type == BasisType::bernstein)
            bernstein_values(degree, x, out);
        else
            lagrange_values(degree, x, out);
    }
    void deriv_1d(double x, double* out) const {
        if (type == BasisType::bernstein)
            bernstein_derivatives(degree, x, out);
        else
            lagrange_derivatives(degree, x, out);
    }
};

}  // namespace entropycg
