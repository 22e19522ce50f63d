/// @file test_mesh.cpp
/// @brief Periodic lattice meshes: node counts, wrap-around
/// connectivity, stencil sizes, and the element/node incidence duality.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "entropycg/mesh.hpp"

using namespace entropycg;

TEST_CASE("1D linear mesh: four cells carry four nodes") {
    const Mesh m = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {4, 1}, 1);
    CHECK(m.n_elements == 4);
    CHECK(m.n_nodes == 4);
    CHECK(m.nodes_per_dir[0] == 4);
    CHECK(m.h()[0] == Catch::Approx(0.25).margin(1e-15));
    for (int e = 0; e < 4; ++e) {
        REQUIRE(m.element_nodes[e].size() == 2);
        CHECK(m.element_nodes[e][0] == e);
        CHECK(m.element_nodes[e][1] == (e + 1) % 4);
    }
}

TEST_CASE("1D quadratic mesh wraps the last element") {
    const Mesh m = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {4, 1}, 2);
    CHECK(m.n_nodes == 8);
    CHECK(m.nodes_per_element() == 3);
    const auto& last = m.element_nodes[3];
    REQUIRE(last.size() == 3);
    CHECK(last[0] == 6);
    CHECK(last[1] == 7);
    CHECK(last[2] == 0);
}

TEST_CASE("1D quadratic mesh with eight cells has sixteen nodes") {
    const Mesh m = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {8, 1}, 2);
    CHECK(m.n_nodes == 16);
    CHECK(m.n_elements == 8);
}

TEST_CASE("2D linear 4x4 mesh: sixteen nodes, each in four elements") {
    const Mesh m = build_mesh(2, {0.0, 0.0}, {1.0, 1.0}, {4, 4}, 1);
    CHECK(m.n_nodes == 16);
    CHECK(m.n_elements == 16);
    for (int i = 0; i < m.n_nodes; ++i) CHECK(m.node_elements[i].size() == 4);
}

TEST_CASE("2D wrap-around connectivity of the far corner element") {
    const Mesh m = build_mesh(2, {0.0, 0.0}, {1.0, 1.0}, {3, 2}, 1);
    // Element (ex=2, ey=1) wraps in both directions.
    const int e = 1 * 3 + 2;
    const auto& nodes = m.element_nodes[e];
    REQUIRE(nodes.size() == 4);
    CHECK(nodes[0] == 5);
    CHECK(nodes[1] == 3);
    CHECK(nodes[2] == 2);
    CHECK(nodes[3] == 0);
}

TEST_CASE("full stencil sizes: 3 for 1D P1, 5 for 1D P2, 9 for 2D Q1") {
    const Mesh m1 = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {6, 1}, 1);
    for (int i = 0; i < m1.n_nodes; ++i) CHECK(m1.full_stencil(i).size() == 3);

    const Mesh m2 = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {4, 1}, 2);
    // Vertex nodes join two elements (5 nodes), interior nodes one (3).
    for (int i = 0; i < m2.n_nodes; ++i) {
        const size_t expected = (i % 2 == 0) ? 5 : 3;
        CHECK(m2.full_stencil(i).size() == expected);
    }

    const Mesh m3 = build_mesh(2, {0.0, 0.0}, {1.0, 1.0}, {4, 4}, 1);
    for (int i = 0; i < m3.n_nodes; ++i) CHECK(m3.full_stencil(i).size() == 9);
}

TEST_CASE("stencils contain the node itself and are sorted") {
    const Mesh m = build_mesh(2, {0.0, 0.0}, {1.0, 1.0}, {3, 3}, 2);
    for (int i = 0; i < m.n_nodes; ++i) {
        const auto st = m.full_stencil(i);
        bool self = false;
        for (size_t k = 0; k < st.size(); ++k) {
            if (st[k] == i) self = true;
            if (k > 0) CHECK(st[k] > st[k - 1]);
        }
        CHECK(self);
    }
}

TEST_CASE("incidence duality: element node lists mirror node element lists") {
    const Mesh m = build_mesh(2, {0.0, 0.0}, {2.0, 1.0}, {3, 4}, 2);
    size_t from_elements = 0;
    for (int e = 0; e < m.n_elements; ++e) from_elements += m.element_nodes[e].size();
    size_t from_nodes = 0;
    for (int i = 0; i < m.n_nodes; ++i) from_nodes += m.node_elements[i].size();
    CHECK(from_elements == from_nodes);
    for (int e = 0; e < m.n_elements; ++e)
        for (int i : m.element_nodes[e]) {
            bool found = false;
            for (int e2 : m.node_elements[i]) found |= (e2 == e);
            CHECK(found);
        }
}

TEST_CASE("node coordinates are the equispaced lattice") {
    const Mesh m = build_mesh(1, {0.0, 0.0}, {2.0, 0.0}, {4, 1}, 3);
    CHECK(m.n_nodes == 12);
    for (int i = 0; i < m.n_nodes; ++i)
        CHECK(m.node_coords[i][0] == Catch::Approx(i * 2.0 / 12.0).margin(1e-15));

    const Mesh m2 = build_mesh(2, {-1.0, 1.0}, {1.0, 2.0}, {2, 2}, 2);
    const int id = m2.wrap_node(3, 1);
    CHECK(m2.node_coords[id][0] == Catch::Approx(-1.0 + 3.0 * 2.0 / 4.0).margin(1e-15));
    CHECK(m2.node_coords[id][1] == Catch::Approx(1.0 + 1.0 / 4.0).margin(1e-15));
}

TEST_CASE("element geometry helpers") {
    const Mesh m = build_mesh(2, {0.0, 0.0}, {1.0, 1.0}, {4, 4}, 1);
    const int e = 2 * 4 + 3;  // ex=3, ey=2
    const Vec2 o = element_origin(m, e);
    CHECK(o[0] == Catch::Approx(0.75).margin(1e-15));
    CHECK(o[1] == Catch::Approx(0.5).margin(1e-15));
    const Vec2 mid = element_point(m, e, {0.5, 0.5});
    CHECK(mid[0] == Catch::Approx(0.875).margin(1e-15));
    CHECK(mid[1] == Catch::Approx(0.625).margin(1e-15));
}

TEST_CASE("wrap_node is periodic in both directions") {
    const Mesh m = build_mesh(2, {0.0, 0.0}, {1.0, 1.0}, {3, 3}, 2);
    const int nx = m.nodes_per_dir[0];
    CHECK(m.wrap_node(nx, 0) == m.wrap_node(0, 0));
    CHECK(m.wrap_node(-1, 2) == m.wrap_node(nx - 1, 2));
    CHECK(m.wrap_node(2, -1) == m.wrap_node(2, m.nodes_per_dir[1] - 1));
}

TEST_CASE("invalid mesh parameters throw") {
    CHECK_THROWS_AS(build_mesh(3, {0, 0}, {1, 1}, {2, 2}, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_mesh(1, {0, 0}, {1, 0}, {2, 1}, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_mesh(1, {0, 0}, {1, 0}, {1, 1}, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_mesh(1, {1, 0}, {0, 0}, {4, 1}, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_mesh(2, {0, 0}, {1, 1}, {4, 1}, 1), std::invalid_argument);
}
