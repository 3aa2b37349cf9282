#include "doctest.h"

#include "ietidg/errors.hpp"
#include "ietidg/geometry.hpp"

#include <cmath>
#include <numbers>

using namespace ietidg;

namespace {

bool has_neighbor(const PatchTopology& t, int k, int l) {
    const auto n = t.neighbors(k);
    return std::find(n.begin(), n.end(), l) != n.end();
}

}  // namespace

TEST_CASE("identity and affine maps") {
    const auto kv = make_open_knot_vector(2, 2, 1);
    const auto id = interpolate_map(kv, kv, [](double u, double v) { return Point(u, v); });
    for (double u : {0.0, 0.3, 1.0})
        for (double v : {0.1, 0.7}) {
            const auto e = id.eval(u, v);
            CHECK((e.x - Point(u, v)).norm() <= 1e-14);
            CHECK((e.jac - Jacobian::Identity()).norm() <= 1e-13);
            CHECK(e.det == doctest::Approx(1.0));
        }

    const auto scaled = bilinear_patch(Point(0, 0), Point(2, 0), Point(0, 3), Point(2, 3));
    CHECK(scaled.eval(0.4, 0.9).det == doctest::Approx(6.0));

    const auto degenerate = bilinear_patch(Point(0, 0), Point(1, 0), Point(0, 0), Point(1, 0));
    try {
        degenerate.eval(0.25, 0.5);
        FAIL("expected a geometry error");
    } catch (const GeometryError& e) {
        CHECK(e.u() == 0.25);
        CHECK(e.v() == 0.5);
    }
}

TEST_CASE("quarter annulus layout") {
    const auto mp = quarter_annulus_multipatch(8, 4, 1.0, 2.0);
    CHECK(mp.patches.size() == 32);
    CHECK(mp.topology.interfaces().size() == 52);
    int interior = 0;
    for (const auto& c : mp.topology.corners())
        if (c.incidences.size() == 4) ++interior;
    CHECK(interior == 21);

    // 7 * 4 interfaces between angular neighbors, 8 * 3 between radial ones
    int angular = 0;
    for (const auto& f : mp.topology.interfaces())
        if (normal_direction(f.side_k) == 0) ++angular;
    CHECK(angular == 28);

    const auto one = quarter_annulus_multipatch(1, 1, 1.0, 2.0);
    CHECK(one.topology.interfaces().empty());
    CHECK(one.topology.dirichlet_sides(0) == 0xF);

    const auto two = quarter_annulus_multipatch(2, 1, 1.0, 2.0);
    CHECK(two.topology.neighbors(0) == std::vector<int>{1});
    CHECK(two.topology.neighbors(1) == std::vector<int>{0});

    CHECK_THROWS_AS(quarter_annulus_multipatch(2, 1, 2.0, 1.0), ParameterError);
    CHECK_THROWS_AS(quarter_annulus_multipatch(0, 1, 1.0, 2.0), ParameterError);
}

TEST_CASE("annulus patch approximates the polar map") {
    const auto mp = quarter_annulus_multipatch(8, 4, 1.0, 2.0);
    for (std::size_t k = 0; k < mp.patches.size(); ++k) {
        const int b = mp.grid_position[k][1];
        const double r_mid = 1.0 + (b + 0.5) * 0.25;
        const double r = mp.patches[k].point(0.5, 0.5).norm();
        CHECK(std::abs(r - r_mid) <= 0.02 * r_mid);
        CHECK(measure_jacobian_bounds(mp.patches[k]).c1() <= 10.0);
    }
}

TEST_CASE("interfaces trace the same curve") {
    const auto mp = quarter_annulus_multipatch(3, 2, 1.0, 2.0);
    for (const auto& f : mp.topology.interfaces()) {
        const auto& gk = mp.patches[static_cast<std::size_t>(f.k)];
        const auto& gl = mp.patches[static_cast<std::size_t>(f.l)];
        const double h = std::max(gk.diameter(), gl.diameter());
        for (int q = 0; q < 50; ++q) {
            const double t = q / 49.0;
            const auto a = side_point(f.side_k, t);
            const auto b = side_point(f.side_l, f.same_orientation ? t : 1.0 - t);
            CHECK((gk.point(a[0], a[1]) - gl.point(b[0], b[1])).norm() <= 1e-10 * h);
        }
        CHECK(has_neighbor(mp.topology, f.k, f.l));
        CHECK(has_neighbor(mp.topology, f.l, f.k));
    }
}

TEST_CASE("reversed orientation is detected") {
    std::vector<GeometryMap> patches;
    patches.push_back(bilinear_patch(Point(0, 0), Point(1, 0), Point(0, 1), Point(1, 1)));
    // second patch's west side runs from (1,1) down to (1,0)
    patches.push_back(bilinear_patch(Point(1, 1), Point(2, 1), Point(1, 0), Point(2, 0)));
    const auto topo = compute_topology(patches);
    REQUIRE(topo.interfaces().size() == 1);
    CHECK_FALSE(topo.interfaces()[0].same_orientation);
}

TEST_CASE("T-junction is rejected") {
    std::vector<GeometryMap> patches;
    patches.push_back(bilinear_patch(Point(0, 0), Point(1, 0), Point(0, 2), Point(1, 2)));
    patches.push_back(bilinear_patch(Point(1, 0), Point(2, 0), Point(1, 1), Point(2, 1)));
    patches.push_back(bilinear_patch(Point(1, 1), Point(2, 1), Point(1, 2), Point(2, 2)));
    CHECK_THROWS_AS(compute_topology(patches), GeometryError);

    std::vector<GeometryMap> shifted;
    shifted.push_back(bilinear_patch(Point(0, 0), Point(1, 0), Point(0, 1), Point(1, 1)));
    shifted.push_back(bilinear_patch(Point(1, 0.5), Point(2, 0.5), Point(1, 1.5), Point(2, 1.5)));
    CHECK_THROWS_AS(compute_topology(shifted), GeometryError);
}

TEST_CASE("unit square layout and patch sizes") {
    const auto mp = unit_square_multipatch(2, 2);
    CHECK(mp.topology.interfaces().size() == 4);
    CHECK(mp.topology.corners().size() == 9);

    const auto kv = refine_dyadic(make_open_knot_vector(2, 1, 1), 3);
    const auto unit = bilinear_patch(Point(0, 0), Point(1, 0), Point(0, 1), Point(1, 1));
    const auto s = patch_sizes(unit, TensorBasis(kv, kv));
    CHECK(s.h_hat == doctest::Approx(0.125));
    CHECK(s.H == doctest::Approx(std::sqrt(2.0)));
    CHECK(s.h == doctest::Approx(std::sqrt(2.0) / 8));

    const auto k0 = make_open_knot_vector(2, 1, 1);
    CHECK(patch_sizes(unit, TensorBasis(k0, k0)).h_hat == 1.0);
}

TEST_CASE("json round trip") {
    const auto mp = quarter_annulus_multipatch(2, 2, 1.0, 3.0);
    const auto doc = multipatch_to_json(mp);
    const auto back = multipatch_from_json(nlohmann::json::parse(doc.dump()));
    REQUIRE(back.patches.size() == mp.patches.size());
    for (std::size_t k = 0; k < mp.patches.size(); ++k) {
        CHECK(back.patches[k].knots(0) == mp.patches[k].knots(0));
        CHECK(back.patches[k].control_points() == mp.patches[k].control_points());
    }
    CHECK(back.topology.interfaces().size() == mp.topology.interfaces().size());
    CHECK_THROWS_AS(multipatch_from_json(nlohmann::json::parse(R"({"patches":[{"degree":[1]}]})")),
                    ParameterError);
}
