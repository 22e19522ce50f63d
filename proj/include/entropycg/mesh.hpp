#pragma once

/// @file mesh.hpp
/// @brief Uniform periodic tensor-product meshes with a degree-p node lattice.
///
/// Nodes live on the global equispaced lattice with p points per cell
/// per direction; periodic identification is built into the numbering
/// (global lattice indices are taken modulo the period).  Element-local
/// nodes are ordered lexicographically, x index fastest, matching
/// ReferenceBasis.

#include <algorithm>
#include <array>
#include <stdexcept>
#include <vector>

#include "entropycg/linalg.hpp"

namespace entropycg {

struct Mesh {
    int dim = 1;
    int degree = 1;
    Vec2 lower = {0.0, 0.0};
    Vec2 upper = {1.0, 0.0};
    std::array<int, 2> cells = {1, 1};

    std::array<int, 2> nodes_per_dir = {0, 0};  // p * cells
    int n_elements = 0;
    int n_nodes = 0;
    std::vector<Vec2> node_coords;
    std::vector<std::vector<int>> element_nodes;  // N^e, lexicographic local order
    std::vector<std::vector<int>> node_elements;  // E_i, ascending

    Vec2 h() const {
        Vec2 r = {(upper[0] - lower[0]) / cells[0], 0.0};
        if (dim > 1) r[1] = (upper[1] - lower[1]) / cells[1];
        return r;
    }

    int nodes_per_element() const {
        const int n = degree + 1;
        return dim == 1 ? n : n * n;
    }

    /// Canonical node id of global lattice indices (wrapped periodically).
    int wrap_node(int gx, int gy) const {
        const int nx = nodes_per_dir[0];
        gx = ((gx % nx) + nx) % nx;
        if (dim == 1) return gx;
        const int ny = nodes_per_dir[1];
        gy = ((gy % ny) + ny) % ny;
        return gy * nx + gx;
    }

    /// Union of the node sets of all elements containing node i, sorted.
    std::vector<int> full_stencil(int i) const {
        std::vector<int> out;
        for (int e : node_elements[i])
            out.insert(out.end(), element_nodes[e].begin(), element_nodes[e].end());
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

/// Builds a periodic mesh of `cells` uniform cells per direction on the
/// box [lower, upper], carrying a degree-p lattice.  Requires at least
/// two cells per direction so that no element touches itself.
inline Mesh build_mesh(int dim, Vec2 lower, Vec2 upper, std::array<int, 2> cells, int degree) {
    if (dim < 1 || dim > 2) throw std::invalid_argument("build_mesh: dim must be 1 or 2");
    if (degree < 1) throw std::invalid_argument("build_mesh: degree must be >= 1");
    for (int k = 0; k < dim; ++k) {
        if (cells[k] < 2) throw std::invalid_argument("build_mesh: need >= 2 cells per direction");
        if (!(upper[k] > lower[k])) throw std::invalid_argument("build_mesh: empty box");
    }

    Mesh m;
    m.dim = dim;
    m.degree = degree;
    m.lower = lower;
    m.upper = upper;
    m.cells = cells;
    if (dim == 1) {
        m.cells[1] = 1;
        m.upper[1] = 0.0;
        m.lower[1] = 0.0;
    }

    const int p = degree;
    m.nodes_per_dir[0] = p * m.cells[0];
    m.nodes_per_dir[1] = (dim == 1) ? 1 : p * m.cells[1];
    m.n_elements = m.cells[0] * (dim == 1 ? 1 : m.cells[1]);
    m.n_nodes = m.nodes_per_dir[0] * (dim == 1 ? 1 : m.nodes_per_dir[1]);

    const Vec2 h = m.h();
    m.node_coords.resize(m.n_nodes);
    for (int gy = 0; gy < (dim == 1 ? 1 : m.nodes_per_dir[1]); ++gy)
        for (int gx = 0; gx < m.nodes_per_dir[0]; ++gx) {
            const int id = (dim == 1) ? gx : gy * m.nodes_per_dir[0] + gx;
            m.node_coords[id] = {lower[0] + gx * h[0] / p,
                                 dim == 1 ? 0.0 : lower[1] + gy * h[1] / p};
        }

    m.element_nodes.resize(m.n_elements);
    m.node_elements.assign(m.n_nodes, {});
    const int cy = (dim == 1) ? 1 : m.cells[1];
    for (int ey = 0; ey < cy; ++ey)
        for (int ex = 0; ex < m.cells[0]; ++ex) {
            const int e = ey * m.cells[0] + ex;
            auto& nodes = m.element_nodes[e];
            nodes.reserve(m.nodes_per_element());
            for (int ky = 0; ky <= (dim == 1 ? 0 : p); ++ky)
                for (int kx = 0; kx <= p; ++kx)
                    nodes.push_back(m.wrap_node(ex * p + kx, ey * p + ky));
            for (int i : nodes) m.node_elements[i].push_back(e);
        }
    for (auto& es : m.node_elements) std::sort(es.begin(), es.end());
    return m;
}

/// Physical coordinate of the lower corner of element e.
inline Vec2 element_origin(const Mesh& m, int e) {
    const int ex = e % m.cells[0];
    const int ey = (m.dim == 1) ? 0 : e / m.cells[0];
    const Vec2 h = m.h();
    return {m.lower[0] + ex * h[0], m.dim == 1 ? 0.0 : m.lower[1] + ey * h[1]};
}

/// Physical point of reference coordinate xi inside element e.
inline Vec2 element_point(const Mesh& m, int e, const Vec2& xi) {
    const Vec2 o = element_origin(m, e);
    const Vec2 h = m.h();
    return {o[0] + xi[0] * h[0], m.dim == 1 ? 0.0 : o[1] + xi[1] * h[1]};
}

}  // namespace entropycg
