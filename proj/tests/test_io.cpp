/// @file test_io.cpp
/// @brief Config parsing, CSV/snapshot formats, nodal extraction, and
/// the output-directory lock.

#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "entropycg/io.hpp"

using namespace entropycg;

namespace {

std::filesystem::path temp_dir() {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("entropycg_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("version string is pinned") { CHECK(std::string(kVersion) == "1.0.0"); }

TEST_CASE("config text: comments, blanks, trimming, typed access") {
    const KeyValueConfig cfg = parse_config_text(
        "# run setup\n"
        "\n"
        "  problem = burgers1d  # preset\n"
        "cells=64\n"
        "cfl =  0.125\n"
        "label = fine mesh\n");
    CHECK(cfg.has("problem"));
    CHECK_FALSE(cfg.has("missing"));
    CHECK(cfg.get("problem") == "burgers1d");
    CHECK(cfg.get("label") == "fine mesh");
    CHECK(cfg.get("missing", "fallback") == "fallback");
    CHECK(cfg.get_int("cells", -1) == 64);
    CHECK(cfg.get_double("cfl", 0.0) == 0.125);
    CHECK(cfg.get_double("absent", 0.75) == 0.75);
    CHECK(cfg.get_int("absent", 9) == 9);
}

TEST_CASE("config text: malformed lines raise with their line number") {
    CHECK_THROWS_WITH(parse_config_text("a = 1\nnot a pair\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
    CHECK_THROWS_WITH(parse_config_text("\n\n = orphan\n"),
                      Catch::Matchers::ContainsSubstring("line 3"));
    const KeyValueConfig bad = parse_config_text("cells = twelve\ncfl = 0.2x\n");
    CHECK_THROWS_AS(bad.get_int("cells", 0), std::invalid_argument);
    CHECK_THROWS_AS(bad.get_double("cfl", 0.0), std::invalid_argument);
}

TEST_CASE("config files round-trip through disk in sorted order") {
    const auto dir = temp_dir();
    const auto path = (dir / "config.txt").string();
    KeyValueConfig cfg;
    cfg.set("scheme", "HO-VMS-EV");
    cfg.set_double("cfl", 0.1);
    cfg.set_int("cells", 48);
    cfg.set_double("tiny", 1.0 / 3.0);
    write_config_file(path, cfg);
    const KeyValueConfig back = read_config_file(path);
    CHECK(back.values == cfg.values);
    CHECK(back.get_double("tiny", 0.0) == 1.0 / 3.0);  // %.17g exactness
    // Sorted, canonical "key = value" lines.
    CHECK(slurp(path) ==
          "cells = 48\ncfl = 0.10000000000000001\nscheme = HO-VMS-EV\n"
          "tiny = 0.33333333333333331\n");
    CHECK_THROWS_AS(read_config_file((dir / "no_such_file").string()), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("format_double survives a parse round trip") {
    for (double v : {0.1, -1.0 / 3.0, 2.5e-101, 6.02e23, 0.0, 1.0}) {
        const std::string s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
}

TEST_CASE("csv writer: header, rows, and column checking") {
    const auto dir = temp_dir();
    const auto path = (dir / "series.csv").string();
    {
        CsvWriter csv(path, {"step", "t", "mass"});
        csv.row({1.0, 0.5, 0.25});
        csv.row({2.0, 1.0, 0.25});
        CHECK_THROWS_AS(csv.row({1.0, 2.0}), std::invalid_argument);
    }
    CHECK(slurp(path) == "step,t,mass\n1,0.5,0.25\n2,1,0.25\n");
    std::filesystem::remove_all(dir);
}

TEST_CASE("nodal values: Lagrange passes through, Bernstein evaluates") {
    const Mesh mesh = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {4, 1}, 2);
    const ElementContext lag = build_element_context(mesh, BasisType::lagrange, 4);
    std::vector<double> u(mesh.n_nodes);
    for (int i = 0; i < mesh.n_nodes; ++i) u[i] = 0.1 * i;
    CHECK(nodal_values(lag, u) == u);

    const ElementContext ber = build_element_context(mesh, BasisType::bernstein, 4);
    std::vector<double> c(mesh.n_nodes, 0.0);
    c[1] = 1.0;  // middle control point of element 0
    const std::vector<double> vals = nodal_values(ber, c);
    CHECK(vals[0] == Catch::Approx(0.0).margin(1e-14));
    CHECK(vals[1] == Catch::Approx(0.5).margin(1e-14));  // 2 x (1-x) at x = 1/2
    CHECK(vals[2] == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("1d solution files carry coordinates, coefficients, and values") {
    const auto dir = temp_dir();
    const auto path = (dir / "solution.csv").string();
    const Mesh mesh = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {2, 1}, 1);
    const ElementContext ctx = build_element_context(mesh, BasisType::bernstein, 3);
    write_solution_1d(path, ctx, {0.25, -1.0});
    CHECK(slurp(path) == "x,coefficient,value\n0,0.25,0.25\n0.5,-1,-1\n");
    std::filesystem::remove_all(dir);
}

TEST_CASE("2d snapshots start with the grid header and reject 1D meshes") {
    const auto dir = temp_dir();
    const auto path = (dir / "snapshot.txt").string();
    const Mesh mesh = build_mesh(2, {0.0, -1.0}, {2.0, 1.0}, {2, 2}, 2);
    const ElementContext ctx = build_element_context(mesh, BasisType::bernstein, 4);
    std::vector<double> u(mesh.n_nodes, 0.5);
    write_snapshot_2d(path, ctx, u);
    const std::string text = slurp(path);
    CHECK(text.substr(0, text.find('\n')) == "4 4 2 0 -1 2 1");
    // One line per node plus the header.
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + mesh.n_nodes);
    // Constant fields print identical coefficient and value columns.
    CHECK(text.find("0 -1 0.5 0.5\n") != std::string::npos);

    const Mesh m1 = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {2, 1}, 1);
    const ElementContext c1 = build_element_context(m1, BasisType::bernstein, 3);
    CHECK_THROWS_AS(write_snapshot_2d((dir / "bad.txt").string(), c1, {0.0, 0.0}),
                    std::invalid_argument);
    std::filesystem::remove_all(dir);
}

TEST_CASE("identical writes produce bit-identical files") {
    const auto dir = temp_dir();
    const auto a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
    const Mesh mesh = build_mesh(1, {0.0, 0.0}, {1.0, 0.0}, {8, 1}, 3);
    const ElementContext ctx = build_element_context(mesh, BasisType::bernstein, 5);
    std::vector<double> u(mesh.n_nodes);
    for (int i = 0; i < mesh.n_nodes; ++i) u[i] = std::sin(7.0 * i) / 3.0;
    write_solution_1d(a, ctx, u);
    write_solution_1d(b, ctx, u);
    CHECK(slurp(a) == slurp(b));
    std::filesystem::remove_all(dir);
}

TEST_CASE("directory lock is exclusive, reentrant after release, and cleans up") {
    const auto dir = temp_dir() / "run1";
    const auto lock_file = dir / ".entropy_cg.lock";
    {
        DirectoryLock lock(dir.string());
        CHECK(std::filesystem::exists(lock_file));
        CHECK_THROWS_WITH(DirectoryLock(dir.string()),
                          Catch::Matchers::ContainsSubstring("locked by another run"));
    }
    CHECK_FALSE(std::filesystem::exists(lock_file));
    CHECK_NOTHROW(DirectoryLock(dir.string()));
    std::filesystem::remove_all(dir.parent_path());
}
