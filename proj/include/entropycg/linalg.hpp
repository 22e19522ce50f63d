#pragma once

/// @file linalg.hpp
/// @brief Small dense and banded linear algebra used by the solver.
///
/// Everything here is deterministic: fixed elimination order, no
/// parallel reductions.  Sizes are element-local (dense, <= a few
/// hundred) or one-dimensional global (periodic banded, <= a few
/// thousand), so unblocked algorithms are adequate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace entropycg {

/// Fixed-size spatial vector; component 1 is unused (zero) in 1D.
using Vec2 = std::array<double, 2>;

inline double dot(const Vec2& a, const Vec2& b, int dim) {
    double s = a[0] * b[0];
    if (dim > 1) s += a[1] * b[1];
    return s;
}

inline double norm2(const Vec2& a, int dim) { return std::sqrt(dot(a, a, dim)); }

inline Vec2 scaled(const Vec2& a, double s) { return {a[0] * s, a[1] * s}; }

inline Vec2 minus(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }

inline Vec2 plus(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }

/// Row-major dense matrix.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    DenseMatrix() = default;
    DenseMatrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
};

/// LU factorization with partial pivoting.
class LuFactor {
  public:
    LuFactor() = default;

    static LuFactor factor(const DenseMatrix& m) {
        if (m.rows != m.cols) throw std::invalid_argument("LuFactor: matrix must be square");
        LuFactor f;
        f.n_ = m.rows;
        f.lu_ = m.a;
        f.piv_.resize(f.n_);
        const int n = f.n_;
        auto at = [&](int i, int j) -> double& { return f.lu_[static_cast<size_t>(i) * n + j]; };
        for (int k = 0; k < n; ++k) {
            int p = k;
            double best = std::fabs(at(k, k));
            for (int i = k + 1; i < n; ++i) {
                const double v = std::fabs(at(i, k));
                if (v > best) { best = v; p = i; }
            }
            if (best == 0.0) throw std::runtime_error("LuFactor: singular matrix");
            f.piv_[k] = p;
            if (p != k)
                for (int j = 0; j < n; ++j) std::swap(at(k, j), at(p, j));
            const double inv = 1.0 / at(k, k);
            for (int i = k + 1; i < n; ++i) {
                const double l = at(i, k) * inv;
                at(i, k) = l;
                if (l != 0.0)
                    for (int j = k + 1; j < n; ++j) at(i, j) -= l * at(k, j);
            }
        }
        return f;
    }

    int size() const { return n_; }

    /// Solves in place: x holds b on entry, the solution on exit.
    /// Factorization swaps whole rows, so all interchanges apply to
    /// the right-hand side before the triangular sweeps.
    void solve_inplace(double* x) const {
        const int n = n_;
        for (int k = 0; k < n; ++k)
            if (piv_[k] != k) std::swap(x[k], x[piv_[k]]);
        for (int k = 0; k < n; ++k) {
            const double xk = x[k];
            if (xk != 0.0)
                for (int i = k + 1; i < n; ++i) x[i] -= lu_[static_cast<size_t>(i) * n + k] * xk;
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = x[i];
            const double* row = &lu_[static_cast<size_t>(i) * n];
            for (int j = i + 1; j < n; ++j) s -= row[j] * x[j];
            x[i] = s / row[i];
        }
    }

    std::vector<double> solve(std::vector<double> b) const {
        if (static_cast<int>(b.size()) != n_) throw std::invalid_argument("LuFactor::solve: size mismatch");
        solve_inplace(b.data());
        return b;
    }

  private:
    int n_ = 0;
    std::vector<double> lu_;
    std::vector<int> piv_;
};

/// Direct solver for a periodic banded system: entries may be nonzero
/// only when the cyclic distance between indices is <= hb.  The matrix
/// is split into a linear band plus two corner blocks; the band gets a
/// pivoted banded LU and the corners a low-rank (Woodbury) correction.
/// Small systems, or a band factorization that degenerates, fall back
/// to a dense LU of the full matrix.
class PeriodicBandedSolver {
  public:
    PeriodicBandedSolver() = default;

    PeriodicBandedSolver(const DenseMatrix& m, int hb) {
        if (m.rows != m.cols) throw std::invalid_argument("PeriodicBandedSolver: matrix must be square");
        n_ = m.rows;
        hb_ = hb;
        if (n_ <= 4 * hb + 4 || n_ <= 24) {
            dense_ = LuFactor::factor(m);
            use_dense_ = true;
            return;
        }
        if (!factor_banded(m)) {
            dense_ = LuFactor::factor(m);
            use_dense_ = true;
        }
    }

    int size() const { return n_; }

    void solve_inplace(double* x) const {
        if (use_dense_) {
            dense_.solve_inplace(x);
            return;
        }
        band_solve(x);
        // Woodbury correction for the periodic corners.
        const int r = 2 * hb_;
        std::vector<double> c(r, 0.0);
        for (int k = 0; k < r; ++k) {
            double s = 0.0;
            for (const auto& [j, v] : w_rows_[k]) s += v * x[j];
            c[k] = s;
        }
        cap_.solve_inplace(c.data());
        for (int k = 0; k < r; ++k) {
            const double ck = c[k];
            if (ck == 0.0) continue;
            const double* zk = &z_[static_cast<size_t>(k) * n_];
            for (int i = 0; i < n_; ++i) x[i] -= zk[i] * ck;
        }
    }

    std::vector<double> solve(std::vector<double> b) const {
        solve_inplace(b.data());
        return b;
    }

  private:
    // Band storage: row i holds columns [i-kl, i+kl+ku]; kl = ku = hb.
    int n_ = 0, hb_ = 0, width_ = 0;
    bool use_dense_ = false;
    LuFactor dense_;
    std::vector<double> band_;
    std::vector<int> piv_;
    std::vector<std::vector<std::pair<int, double>>> w_rows_;  // corner rows, sparse
    std::vector<double> z_;                                    // B^{-1} U, r columns of length n
    LuFactor cap_;                                             // I + W B^{-1} U

    double& bat(int i, int j) { return band_[static_cast<size_t>(i) * width_ + (j - (i - hb_))]; }

    bool factor_banded(const DenseMatrix& m) {
        const int n = n_, hb = hb_;
        const int kl = hb, ku = hb;
        width_ = 2 * kl + ku + 1;
        band_.assign(static_cast<size_t>(n) * width_, 0.0);
        piv_.assign(n, 0);

        // Linear band B and corner rows W (top-right and bottom-left blocks).
        w_rows_.assign(2 * hb, {});
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double v = m(i, j);
                if (v == 0.0) continue;
                if (std::abs(i - j) <= hb) {
                    bat(i, j) = v;
                } else if (i < hb && j >= n - hb) {
                    w_rows_[i].push_back({j, v});
                } else if (i >= n - hb && j < hb) {
                    w_rows_[hb + (i - (n - hb))].push_back({j, v});
                } else {
                    throw std::invalid_argument("PeriodicBandedSolver: entry outside cyclic band");
                }
            }
        }

        // Pivoted banded LU of B (Doolittle, band-limited loops).
        for (int k = 0; k < n; ++k) {
            const int imax = std::min(n - 1, k + kl);
            int p = k;
            double best = std::fabs(bat(k, k));
            for (int i = k + 1; i <= imax; ++i) {
                const double v = std::fabs(bat(i, k));
                if (v > best) { best = v; p = i; }
            }
            if (best < 1e-300) return false;
            piv_[k] = p;
            if (p != k) {
                const int jmax = std::min(n - 1, k + kl + ku);
                for (int j = k; j <= jmax; ++j) std::swap(bat(k, j), bat(p, j));
            }
            const double inv = 1.0 / bat(k, k);
            for (int i = k + 1; i <= imax; ++i) {
                const double l = bat(i, k) * inv;
                bat(i, k) = l;
                if (l != 0.0) {
                    const int jmax = std::min(n - 1, k + kl + ku);
                    for (int j = k + 1; j <= jmax; ++j) bat(i, j) -= l * bat(k, j);
                }
            }
        }

        // Z = B^{-1} U with U = unit vectors at the first/last hb rows.
        const int r = 2 * hb;
        z_.assign(static_cast<size_t>(r) * n, 0.0);
        for (int k = 0; k < r; ++k) {
            double* zk = &z_[static_cast<size_t>(k) * n];
            zk[k < hb ? k : n - hb + (k - hb)] = 1.0;
            band_solve(zk);
        }
        // Capacitance K = I + W Z.
        DenseMatrix kmat(r, r);
        for (int a = 0; a < r; ++a)
            for (int b = 0; b < r; ++b) {
                double s = (a == b) ? 1.0 : 0.0;
                for (const auto& [j, v] : w_rows_[a]) s += v * z_[static_cast<size_t>(b) * n + j];
                kmat(a, b) = s;
            }
        try {
            cap_ = LuFactor::factor(kmat);
        } catch (const std::runtime_error&) {
            return false;
        }
        return true;
    }

    const double& bat_c(int i, int j) const { return band_[static_cast<size_t>(i) * width_ + (j - (i - hb_))]; }

    void band_solve(double* x) const {
        const int n = n_, kl = hb_, ku = hb_;
        for (int k = 0; k < n; ++k) {
            if (piv_[k] != k) std::swap(x[k], x[piv_[k]]);
            const double xk = x[k];
            if (xk != 0.0) {
                const int imax = std::min(n - 1, k + kl);
                for (int i = k + 1; i <= imax; ++i) x[i] -= bat_c(i, k) * xk;
            }
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = x[i];
            const int jmax = std::min(n - 1, i + kl + ku);
            for (int j = i + 1; j <= jmax; ++j) s -= bat_c(i, j) * x[j];
            x[i] = s / bat_c(i, i);
        }
    }
};

/// Solver for the global consistent mass matrix on a uniform periodic
/// tensor-product mesh.  The matrix factorizes exactly as a Kronecker
/// product of one-dimensional periodic banded mass matrices (global
/// index x-fastest), so applying the inverse means solving along each
/// direction independently.
class TensorProductSolver {
  public:
    TensorProductSolver() = default;

    /// factors[k] is the 1D matrix for direction k, sizes[k] its order.
    TensorProductSolver(std::vector<DenseMatrix> factors, int hb) {
        for (auto& f : factors) {
            sizes_.push_back(f.rows);
            solvers_.emplace_back(f, hb);
        }
    }

    int dim() const { return static_cast<int>(sizes_.size()); }

    void solve_inplace(std::vector<double>& x) const {
        if (dim() == 1) {
            if (static_cast<int>(x.size()) != sizes_[0])
                throw std::invalid_argument("TensorProductSolver: size mismatch");
            solvers_[0].solve_inplace(x.data());
            return;
        }
        const int nx = sizes_[0], ny = sizes_[1];
        if (static_cast<int>(x.size()) != nx * ny)
            throw std::invalid_argument("TensorProductSolver: size mismatch");
        for (int iy = 0; iy < ny; ++iy) solvers_[0].solve_inplace(&x[static_cast<size_t>(iy) * nx]);
        std::vector<double> col(ny);
        for (int ix = 0; ix < nx; ++ix) {
            for (int iy = 0; iy < ny; ++iy) col[iy] = x[static_cast<size_t>(iy) * nx + ix];
            solvers_[1].solve_inplace(col.data());
            for (int iy = 0; iy < ny; ++iy) x[static_cast<size_t>(iy) * nx + ix] = col[iy];
        }
    }

    std::vector<double> solve(std::vector<double> b) const {
        solve_inplace(b);
        return b;
    }

  private:
    std::vector<int> sizes_;
    std::vector<PeriodicBandedSolver> solvers_;
};

}  // namespace entropycg
