#pragma once

/// @file quadrature.hpp
/// @brief Gauss-Legendre rules on the reference interval and square.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "entropycg/linalg.hpp"

namespace entropycg {

/// One-dimensional quadrature rule on [0,1].
struct QuadratureRule1D {
    std::vector<double> points;
    std::vector<double> weights;
    int size() const { return static_cast<int>(points.size()); }
};

/// n-point Gauss-Legendre rule on [0,1]; exact for degree <= 2n-1.
/// Nodes are Newton-refined roots of the Legendre polynomial P_n.
inline QuadratureRule1D gauss_legendre(int n) {
    if (n < 1 || n > 64) throw std::invalid_argument("gauss_legendre: order out of range");
    QuadratureRule1D rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    for (int k = 0; k < n; ++k) {
        // Chebyshev-based initial guess for the k-th root on [-1,1].
        double x = std::cos(M_PI * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            // Evaluate P_n and P_n' by the three-term recurrence.
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        // Polish once more to refresh dp at the converged node.
        {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.points[n - 1 - k] = 0.5 * (x + 1.0);
        rule.weights[n - 1 - k] = 0.5 * w;
    }
    return rule;
}

/// Tensor-product quadrature on [0,1]^dim (dim = 1 or 2), x index fastest.
struct QuadratureRule {
    int dim = 1;
    std::vector<Vec2> points;
    std::vector<double> weights;
    int size() const { return static_cast<int>(points.size()); }
};

inline QuadratureRule tensor_gauss(int n_per_dir, int dim) {
    if (dim < 1 || dim > 2) throw std::invalid_argument("tensor_gauss: dim must be 1 or 2");
    const QuadratureRule1D line = gauss_legendre(n_per_dir);
    QuadratureRule rule;
    rule.dim = dim;
    if (dim == 1) {
        for (int i = 0; i < line.size(); ++i) {
            rule.points.push_back({line.points[i], 0.0});
            rule.weights.push_back(line.weights[i]);
        }
    } else {
        for (int j = 0; j < line.size(); ++j)
            for (int i = 0; i < line.size(); ++i) {
                rule.points.push_back({line.points[i], line.points[j]});
                rule.weights.push_back(line.weights[i] * line.weights[j]);
            }
    }
    return rule;
}

}  // namespace entropycg
