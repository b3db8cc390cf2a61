#include <catch2/catch_amalgamated.hpp>

#include "invpot/invpot.hpp"
#include "support.hpp"

using namespace invpot;

TEST_CASE("structured mesh counts and geometry") {
    SECTION("2x2 square grid") {
        const Mesh m = build_structured_mesh(2, 2);
        CHECK(m.node_count() == 9);
        CHECK(m.element_count() == 8);
        int interior = 0;
        for (int i = 0; i < m.node_count(); ++i)
            if (!m.boundary[static_cast<std::size_t>(i)]) ++interior;
        CHECK(interior == 1);
        CHECK(m.nodes[4][0] == Catch::Approx(0.5));
        CHECK(m.nodes[4][1] == Catch::Approx(0.5));
        CHECK_FALSE(m.boundary[4]);
    }
    SECTION("interval M=4") {
        const Mesh m = build_structured_mesh(1, 4);
        REQUIRE(m.node_count() == 5);
        CHECK(m.element_count() == 4);
        const double expect[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
        for (int i = 0; i < 5; ++i) CHECK(m.nodes[static_cast<std::size_t>(i)][0] == Catch::Approx(expect[i]));
        CHECK(m.boundary[0]);
        CHECK(m.boundary[4]);
        CHECK_FALSE(m.boundary[2]);
    }
    SECTION("reference resolution M=36") {
        const Mesh m = build_structured_mesh(2, 36);
        CHECK(m.node_count() == 37 * 37);
        CHECK(m.element_count() == 2 * 36 * 36);
        CHECK(m.h == Catch::Approx(std::sqrt(2.0) / 36.0).epsilon(1e-14));
    }
    SECTION("invalid arguments") {
        CHECK_THROWS_AS(build_structured_mesh(3, 4), ConfigError);
        CHECK_THROWS_AS(build_structured_mesh(2, 0), ConfigError);
    }
}

TEST_CASE("element volumes are positive and tile the domain") {
    for (int dim : {1, 2}) {
        for (int M : {1, 3, 7, 16}) {
            const Mesh m = build_structured_mesh(dim, M);
            double total = 0.0;
            for (int e = 0; e < m.element_count(); ++e) {
                const double v = element_volume(m, e);
                REQUIRE(v > 0.0);
                total += v;
            }
            CHECK(total == Catch::Approx(1.0).margin(1e-12));
        }
    }
    // element node indices distinct and in range
    const Mesh m = build_structured_mesh(2, 5);
    for (const auto& el : m.elements) {
        CHECK(el[0] != el[1]);
        CHECK(el[1] != el[2]);
        CHECK(el[0] != el[2]);
        for (int a = 0; a < 3; ++a) {
            CHECK(el[static_cast<std::size_t>(a)] >= 0);
            CHECK(el[static_cast<std::size_t>(a)] < m.node_count());
        }
    }
}

TEST_CASE("boundary mask marks exactly the nodes touching the boundary") {
    for (int dim : {1, 2}) {
        const Mesh m = build_structured_mesh(dim, 9);
        for (int i = 0; i < m.node_count(); ++i) {
            const auto& p = m.nodes[static_cast<std::size_t>(i)];
            bool on = p[0] == 0.0 || p[0] == 1.0;
            if (dim == 2) on = on || p[1] == 0.0 || p[1] == 1.0;
            CHECK(static_cast<bool>(m.boundary[static_cast<std::size_t>(i)]) == on);
        }
    }
}

TEST_CASE("uniform point lattice") {
    const PointSet p1 = generate_points(1, PointKind::uniform, 5, 0);
    REQUIRE(p1.n() == 5);
    const double expect[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int i = 0; i < 5; ++i) CHECK(p1.points[static_cast<std::size_t>(i)][0] == Catch::Approx(expect[i]));

    const PointSet p2 = generate_points(2, PointKind::uniform, 401, 0);
    CHECK(p2.n() == 401 * 401);

    CHECK_THROWS_AS(generate_points(2, PointKind::uniform, 1, 0), ConfigError);
}

TEST_CASE("perturbed points stay near their element centers") {
    const int k = 8;
    const PointSet ps = generate_points(2, PointKind::perturbed, k, 7);
    REQUIRE(ps.n() == 2 * k * k);

    const Mesh grid = build_structured_mesh(2, k);
    const double bound = 1.0 / (4.0 * k);
    for (int e = 0; e < grid.element_count(); ++e) {
        const auto& el = grid.elements[static_cast<std::size_t>(e)];
        double cx = 0, cy = 0;
        for (int a = 0; a < 3; ++a) {
            cx += grid.nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(a)])][0] / 3.0;
            cy += grid.nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(a)])][1] / 3.0;
        }
        CHECK(std::abs(ps.points[static_cast<std::size_t>(e)][0] - cx) <= bound);
        CHECK(std::abs(ps.points[static_cast<std::size_t>(e)][1] - cy) <= bound);
        CHECK(ps.points[static_cast<std::size_t>(e)][0] > 0.0);
        CHECK(ps.points[static_cast<std::size_t>(e)][0] < 1.0);
    }
}

TEST_CASE("point generators are deterministic in the seed") {
    for (PointKind kind : {PointKind::perturbed, PointKind::radial}) {
        const PointSet a = generate_points(2, kind, 6, 99);
        const PointSet b = generate_points(2, kind, 6, 99);
        const PointSet c = generate_points(2, kind, 6, 100);
        REQUIRE(a.points == b.points);
        CHECK(a.points != c.points);
    }
}

TEST_CASE("perturbed points never coincide") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (int dim : {1, 2}) {
            const PointSet ps = generate_points(dim, PointKind::perturbed, 5, seed);
            const SamplingQuality q = quasi_uniformity(ps, 64);
            CHECK(q.d_min > 0.0);
        }
    }
}

TEST_CASE("radial points stay in the closed domain") {
    const PointSet ps = generate_points(2, PointKind::radial, 16, 3);
    REQUIRE(ps.n() == 256);
    for (const auto& p : ps.points) {
        CHECK(p[0] >= 0.0);
        CHECK(p[0] <= 1.0);
        CHECK(p[1] >= 0.0);
        CHECK(p[1] <= 1.0);
    }
}

TEST_CASE("quasi-uniformity measures") {
    SECTION("unit-square corner lattice") {
        PointSet ps;
        ps.dim = 2;
        ps.points = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
        const SamplingQuality q = quasi_uniformity(ps, 256);
        CHECK(q.d_min == Catch::Approx(1.0).epsilon(1e-14));
        CHECK(q.d_max == Catch::Approx(std::sqrt(2.0) / 2.0).margin(1e-2));
        CHECK(q.ratio == Catch::Approx(0.7071).margin(1e-2));
    }
    SECTION("uniform lattice: d_min exact, ratio bounded by 1") {
        for (int k : {2, 5, 9, 17}) {
            const PointSet ps = generate_points(2, PointKind::uniform, k, 0);
            const SamplingQuality q = quasi_uniformity(ps, 256);
            const double s = 1.0 / (k - 1);
            CHECK(q.d_min == Catch::Approx(s).epsilon(1e-13));
            CHECK(q.d_max == Catch::Approx(s / std::sqrt(2.0)).margin(2.0 * s / 256 + 1e-9));
            CHECK(q.ratio <= 1.0);
        }
    }
    SECTION("radial clustering breaks quasi-uniformity") {
        const SamplingQuality uni = quasi_uniformity(generate_points(2, PointKind::uniform, 32, 1), 128);
        const SamplingQuality rad = quasi_uniformity(generate_points(2, PointKind::radial, 32, 1), 128);
        CHECK(rad.ratio >= 10.0 * uni.ratio);
    }
    SECTION("insufficient points") {
        PointSet ps;
        ps.dim = 2;
        ps.points = {{0.5, 0.5}};
        CHECK_THROWS_AS(quasi_uniformity(ps), ConfigError);
    }
    SECTION("probe resolution floor") {
        CHECK_THROWS_AS(quasi_uniformity(generate_points(2, PointKind::uniform, 3, 0), 32), ConfigError);
    }
}

TEST_CASE("locate: arithmetic lookup agrees with brute force") {
    SECTION("interval") {
        const Mesh m = build_structured_mesh(1, 4);
        const Location loc = locate(m, {0.3, 0.0});
        CHECK(loc.element == 1);
        CHECK(loc.bary[0] == Catch::Approx(0.8).margin(1e-12));
        CHECK(loc.bary[1] == Catch::Approx(0.2).margin(1e-12));
    }
    SECTION("node coordinate hits an incident element with unit weight") {
        const Mesh m = build_structured_mesh(2, 3);
        for (int i : {0, 4, 8, 15}) {
            const Location loc = locate(m, m.nodes[static_cast<std::size_t>(i)]);
            double wmax = 0.0;
            for (double w : loc.bary) wmax = std::max(wmax, w);
            CHECK(wmax == Catch::Approx(1.0).margin(1e-12));
        }
    }
    SECTION("diagonal tie goes to the lower-right triangle") {
        const Mesh m = build_structured_mesh(2, 1);
        CHECK(locate(m, {0.5, 0.5}).element == 0);
        CHECK(locate(m, {0.25, 0.5}).element == 1); // frac_x < frac_y: upper-left
        CHECK(locate(m, {0.5, 0.25}).element == 0);
    }
    SECTION("random points match the brute-force oracle") {
        const Mesh m = build_structured_mesh(2, 5);
        Rng rng(2024);
        for (int t = 0; t < 200; ++t) {
            std::array<double, 2> x{rng.uniform01(), rng.uniform01()};
            const Location loc = locate(m, x);
            const Location ref = testing_support::brute_force_locate(m, x);
            REQUIRE(ref.element >= 0);
            // reconstruct the point from the returned coordinates
            const auto& el = m.elements[static_cast<std::size_t>(loc.element)];
            double rx = 0, ry = 0, sum = 0;
            for (int a = 0; a < 3; ++a) {
                rx += loc.bary[static_cast<std::size_t>(a)] * m.nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(a)])][0];
                ry += loc.bary[static_cast<std::size_t>(a)] * m.nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(a)])][1];
                sum += loc.bary[static_cast<std::size_t>(a)];
                CHECK(loc.bary[static_cast<std::size_t>(a)] >= -1e-12);
            }
            CHECK(sum == Catch::Approx(1.0).margin(1e-12));
            CHECK(rx == Catch::Approx(x[0]).margin(1e-12));
            CHECK(ry == Catch::Approx(x[1]).margin(1e-12));
            // off-edge points must agree on the element itself
            bool on_edge = false;
            for (double w : ref.bary)
                if (std::abs(w) < 1e-9) on_edge = true;
            if (!on_edge) CHECK(loc.element == ref.element);
        }
    }
    SECTION("outside the domain") {
        const Mesh m = build_structured_mesh(2, 2);
        CHECK_THROWS_AS(locate(m, {1.5, 0.5}), ConfigError);
        CHECK_THROWS_AS(locate(m, {0.5, -0.1}), ConfigError);
    }
}

TEST_CASE("locate + interpolation reproduces coordinates") {
    for (int dim : {1, 2}) {
        const Mesh m = build_structured_mesh(dim, 6);
        std::vector<double> xs(static_cast<std::size_t>(m.node_count()));
        for (int i = 0; i < m.node_count(); ++i) xs[static_cast<std::size_t>(i)] = m.nodes[static_cast<std::size_t>(i)][0];
        Rng rng(55);
        for (int t = 0; t < 100; ++t) {
            std::array<double, 2> x{rng.uniform01(), dim == 2 ? rng.uniform01() : 0.0};
            CHECK(interpolate_at(m, xs, x) == Catch::Approx(x[0]).margin(1e-12));
        }
    }
}

TEST_CASE("mesh and point CSV export round-trips") {
    const Mesh m = build_structured_mesh(2, 3);
    const PointSet ps = generate_points(2, PointKind::perturbed, 3, 1);
    const auto dir = std::filesystem::temp_directory_path() / "invpot_mesh_csv";
    std::filesystem::create_directories(dir);
    io::write_nodes_csv(m, dir / "nodes.csv", "h");
    io::write_elements_csv(m, dir / "elements.csv", "h");
    io::write_points_csv(ps, dir / "points.csv", "h");

    const io::CsvTable nodes = io::read_csv(dir / "nodes.csv");
    REQUIRE(nodes.header == std::vector<std::string>{"id", "x", "y"});
    REQUIRE(nodes.rows.size() == static_cast<std::size_t>(m.node_count()));
    CHECK(std::stod(nodes.rows[5][1]) == m.nodes[5][0]);

    const io::CsvTable pts = io::read_csv(dir / "points.csv");
    REQUIRE(pts.rows.size() == static_cast<std::size_t>(ps.n()));
    for (int i = 0; i < ps.n(); ++i)
        CHECK(std::stod(pts.rows[static_cast<std::size_t>(i)][1]) == ps.points[static_cast<std::size_t>(i)][0]);
}
