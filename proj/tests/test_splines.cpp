#include "doctest.h"

#include "ietidg/errors.hpp"
#include "ietidg/splines.hpp"

#include <cmath>
#include <random>

using namespace ietidg;

namespace {

std::vector<KnotVector> sample_knot_vectors() {
    std::vector<KnotVector> out;
    for (int p = 1; p <= 5; ++p)
        for (int ne : {1, 3, 8}) {
            out.push_back(make_open_knot_vector(p, ne, p - 1));
            out.push_back(make_open_knot_vector(p, ne, 0));
        }
    out.emplace_back(2, std::vector<double>{0, 0, 0, 0.1, 0.35, 0.35, 0.9, 1, 1, 1});
    return out;
}

// Bernstein polynomials for the single-element space, evaluated directly.
double bernstein(int p, int i, double x) {
    return std::tgamma(p + 1.0) / (std::tgamma(i + 1.0) * std::tgamma(p - i + 1.0)) *
           std::pow(x, i) * std::pow(1.0 - x, p - i);
}

}  // namespace

TEST_CASE("open knot vectors") {
    const auto a = make_open_knot_vector(1, 2, 0);
    CHECK(a.knots() == std::vector<double>{0, 0, 0.5, 1, 1});
    CHECK(a.size() == 3);

    const auto b = make_open_knot_vector(2, 1, 1);
    CHECK(b.knots() == std::vector<double>{0, 0, 0, 1, 1, 1});
    CHECK(b.size() == 3);

    const auto c = make_open_knot_vector(3, 4, 2);
    // |knots| = 2(p+1) + (ne-1)(p-reg)
    CHECK(static_cast<int>(c.knots().size()) == 2 * 4 + 3 * 1);
    CHECK(c.size() == 7);

    CHECK_THROWS_AS(make_open_knot_vector(2, 2, 2), ParameterError);
    CHECK_THROWS_AS(make_open_knot_vector(2, 2, -1), ParameterError);
    CHECK_THROWS_AS(KnotVector(2, {0, 0, 1, 1, 1}), ParameterError);
    CHECK_THROWS_AS(KnotVector(1, {0, 0, 0.7, 0.5, 1, 1}), ParameterError);
    CHECK_THROWS_AS(KnotVector(9, std::vector<double>(20, 0.0)), ParameterError);
}

TEST_CASE("quasi-uniformity ratio") {
    const KnotVector kv(2, {0, 0, 0, 0.25, 1, 1, 1});
    CHECK(kv.max_span() == doctest::Approx(0.75));
    CHECK(kv.min_span() == doctest::Approx(0.25));
    CHECK(kv.quasi_uniformity_ratio() == doctest::Approx(3.0));
}

TEST_CASE("basis evaluation") {
    const KnotVector hat(1, {0, 0, 1, 1});
    const auto e = eval_basis(hat, 0.25);
    CHECK(e.first == 0);
    CHECK(e.values[0] == doctest::Approx(0.75));
    CHECK(e.values[1] == doctest::Approx(0.25));
    CHECK(e.derivatives[0] == doctest::Approx(-1.0));
    CHECK(e.derivatives[1] == doctest::Approx(1.0));

    for (int p = 1; p <= 6; ++p) {
        const auto kv = make_open_knot_vector(p, 1, p - 1);
        for (double x : {0.0, 0.3, 0.5, 1.0}) {
            const auto b = eval_basis(kv, x);
            for (int i = 0; i <= p; ++i)
                CHECK(b.values[static_cast<std::size_t>(i)] ==
                      doctest::Approx(bernstein(p, i, x)).epsilon(1e-13));
        }
    }

    CHECK_THROWS_AS(eval_basis(hat, -0.1), DomainError);
    CHECK_THROWS_AS(eval_basis(hat, 1.0 + 1e-9), DomainError);
}

TEST_CASE("partition of unity and derivative consistency") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (const auto& kv : sample_knot_vectors()) {
        for (int s = 0; s < 1000; ++s) {
            const double x = dist(rng);
            const auto b = eval_basis(kv, x);
            double sv = 0.0, sd = 0.0;
            for (std::size_t i = 0; i < b.values.size(); ++i) {
                sv += b.values[i];
                sd += b.derivatives[i];
            }
            REQUIRE(std::abs(sv - 1.0) <= 1e-13);
            REQUIRE(std::abs(sd) <= 1e-9 * (1.0 + kv.degree() / kv.min_span()));
        }
        // central differences away from knots
        const double h = 1e-6;
        for (int s = 0; s < 50; ++s) {
            const double x = 0.01 + 0.98 * dist(rng);
            const int mu = kv.find_span(x);
            if (x - h < kv.knots()[static_cast<std::size_t>(mu)] ||
                x + h >= kv.knots()[static_cast<std::size_t>(mu) + 1])
                continue;
            const auto b = eval_basis(kv, x);
            const auto bp = eval_basis(kv, x + h);
            const auto bm = eval_basis(kv, x - h);
            double scale = 0.0;
            for (double d : b.derivatives) scale = std::max(scale, std::abs(d));
            for (std::size_t i = 0; i < b.values.size(); ++i) {
                const double fd = (bp.values[i] - bm.values[i]) / (2 * h);
                CHECK(std::abs(fd - b.derivatives[i]) <= 1e-6 * std::max(1.0, scale));
            }
        }
    }
}

TEST_CASE("dyadic refinement") {
    const KnotVector q(2, {0, 0, 0, 1, 1, 1});
    CHECK(refine_dyadic(q, 1).knots() == std::vector<double>{0, 0, 0, 0.5, 1, 1, 1});
    CHECK(refine_dyadic(q, 0) == q);
    const auto r3 = refine_dyadic(q, 3);
    CHECK(r3.num_elements() == 8);
    CHECK(r3.size() == 10);

    // C0 stays C0
    const auto c0 = make_open_knot_vector(2, 2, 0);
    const auto c0r = refine_dyadic(c0, 1);
    CHECK(c0r.knots() == std::vector<double>{0, 0, 0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1, 1, 1});
    CHECK(refine_dyadic(make_open_knot_vector(3, 2, 2), 2) == make_open_knot_vector(3, 8, 2));
    CHECK(refine_dyadic(q, 1).max_span() == doctest::Approx(0.5 * q.max_span()));
}

TEST_CASE("univariate mass and stiffness") {
    const KnotVector hat(1, {0, 0, 1, 1});
    const auto m = univariate_matrices(hat);
    CHECK(m.mass(0, 0) == doctest::Approx(1.0 / 3));
    CHECK(m.mass(0, 1) == doctest::Approx(1.0 / 6));
    CHECK(m.stiffness(0, 0) == doctest::Approx(1.0));
    CHECK(m.stiffness(0, 1) == doctest::Approx(-1.0));

    for (const auto& kv : sample_knot_vectors()) {
        const auto um = univariate_matrices(kv);
        const Vector ones = Vector::Ones(kv.size());
        CHECK((um.stiffness * ones).cwiseAbs().maxCoeff() <= 1e-10 * um.stiffness.cwiseAbs().maxCoeff());
        CHECK(ones.dot(um.mass * ones) == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(asymmetry(um.mass) <= 1e-15);
        CHECK(sym_eig(um.mass).values.minCoeff() > 0.0);
    }

    // Greville coefficients reproduce x; its Dirichlet energy is 1
    for (int p = 1; p <= 3; ++p)
        for (int ne : {1, 4}) {
            const auto kv = make_open_knot_vector(p, ne, p - 1);
            const auto g = kv.greville();
            const Vector c = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
            CHECK(c.dot(univariate_matrices(kv).stiffness * c) == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("gauss legendre exactness") {
    for (int n = 1; n <= 9; ++n) {
        const auto rule = gauss_legendre(n);
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double s = 0.0;
            for (std::size_t q = 0; q < rule.points.size(); ++q)
                s += rule.weights[q] * std::pow(rule.points[q], k);
            CHECK(s == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
        }
    }
}

TEST_CASE("tensor basis with Dirichlet reduction") {
    const auto kv1 = make_open_knot_vector(2, 2, 1);  // n = 4
    const auto kv2 = make_open_knot_vector(1, 3, 0);  // n = 4
    const TensorBasis full(kv1, kv2);
    CHECK(full.num_dofs() == 16);

    SideSet d = 0;
    d = with_side(d, Side::west);
    d = with_side(d, Side::north);
    const TensorBasis red(kv1, kv2, d);
    CHECK(red.num_dofs() == 3 * 3);
    CHECK(red.dof(0, 0) == -1);
    CHECK(red.dof(1, 3) == -1);
    CHECK(red.dof(1, 0) == 0);

    // injective and covering
    std::vector<int> seen(static_cast<std::size_t>(red.num_dofs()), 0);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const int k = red.dof(i, j);
            if (k < 0) continue;
            ++seen[static_cast<std::size_t>(k)];
            CHECK(red.tensor_index(k) == std::array<int, 2>{i, j});
        }
    for (int s : seen) CHECK(s == 1);

    const auto east = red.side_dofs(Side::east);
    CHECK(east.size() == 3);
    CHECK(east.front()[0] == 0);
    CHECK(red.side_dofs(Side::west).empty());

    const KnotVector one(1, {0, 0, 1, 1});
    SideSet both = with_side(with_side(0, Side::west), Side::east);
    CHECK_THROWS_AS(TensorBasis(one, one, both), ParameterError);
}
