#include "doctest.h"

#include "ietidg/errors.hpp"
#include "ietidg/ieti.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace ietidg;

namespace {

Vector random_vector(int n, std::mt19937& rng) {
    std::normal_distribution<double> g;
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

double source(double x, double y) {
    const double pi = std::numbers::pi;
    return 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y);
}

Vector concat(const std::vector<Vector>& parts) {
    Eigen::Index n = 0;
    for (const auto& p : parts) n += p.size();
    Vector out(n);
    n = 0;
    for (const auto& p : parts) {
        out.segment(n, p.size()) = p;
        n += p.size();
    }
    return out;
}

DenseMatrix probe(const std::function<void(const Vector&, Vector&)>& op, int n) {
    DenseMatrix m(n, n);
    Vector y;
    for (int j = 0; j < n; ++j) {
        op(Vector::Unit(n, j), y);
        m.col(j) = y;
    }
    return m;
}

double dg_norm(const DenseMatrix& d, const Vector& v) { return std::sqrt(std::max(0.0, v.dot(d * v))); }

Discretization annulus(int p, int r) {
    auto mp = quarter_annulus_multipatch(2, 2, 1.0, 2.0);
    const auto kv = refine_dyadic(make_open_knot_vector(p, 1, p - 1), r);
    const auto kv2 = refine_dyadic(make_open_knot_vector(p + 1, 1, p), r + 1);
    DGConfig cfg;
    cfg.delta = choose_penalty(p + 1);
    // the oracle integrates with p + 3 points
    cfg.quad_extra = 2;
    return make_discretization(mp, {{kv, kv}, {kv2, kv2}, {kv2, kv2}, {kv, kv}}, cfg);
}

/// Load vector of the library assembly in the monolithic patch ordering; the
/// oracle integrates the source with a different rule.
Vector library_load(const Discretization& disc) {
    std::vector<Vector> parts;
    for (int k = 0; k < disc.num_patches(); ++k) {
        const ExtendedSpace sp(disc, k);
        parts.push_back(sp.to_raw(assemble_local(disc, sp, source).f).head(sp.num_patch_dofs()));
    }
    Eigen::Index n = 0;
    for (const auto& p : parts) n += p.size();
    Vector out(n);
    n = 0;
    for (const auto& p : parts) {
        out.segment(n, p.size()) = p;
        n += p.size();
    }
    return out;
}

const Variant all_variants[] = {Variant::mfd, Variant::mfd2, Variant::mlu, Variant::cglu};

}  // namespace

TEST_CASE("variant names") {
    CHECK(parse_variant("mfd") == Variant::mfd);
    CHECK(parse_variant("MFD-2") == Variant::mfd2);
    CHECK(parse_variant("mfd2") == Variant::mfd2);
    CHECK(parse_variant("Mlu") == Variant::mlu);
    CHECK(parse_variant("cglu") == Variant::cglu);
    CHECK_THROWS_AS(parse_variant("gmres"), ParameterError);
    for (auto v : all_variants) CHECK(parse_variant(variant_name(v)) == v);
}

TEST_CASE("dof classification examples") {
    SUBCASE("single all-Dirichlet patch") {
        const auto disc = oracle::square(1, 1, 1, 1);
        const ExtendedSpace sp(disc, 0);
        CHECK(sp.num_corner() == 0);
        CHECK(sp.num_boundary() == 0);
        CHECK(sp.num_interior() == 1);
    }
    SUBCASE("2x1 strip") {
        const auto disc = oracle::square(2, 1, 2, 1);
        for (int k = 0; k < 2; ++k) CHECK(ExtendedSpace(disc, k).num_corner() == 0);
    }
    SUBCASE("2x2 square") {
        const auto disc = oracle::square(2, 2, 2, 1);
        std::vector<ExtendedSpace> spaces;
        for (int k = 0; k < 4; ++k) {
            spaces.emplace_back(disc, k);
            CHECK(spaces.back().patch_corner_raw().size() == 1);
        }
        // each patch's value at the cross point is its own primal dof, seen by
        // the patch itself and by the two edge neighbours
        const auto pn = number_primal_dofs(spaces);
        CHECK(pn.size == 4);
        for (int k = 0; k < 4; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            CHECK(spaces[uk].num_corner() == 3);
            CHECK(pn.global[uk].size() == 3);
            CHECK(pn.restriction[uk].sum() == spaces[uk].num_corner());
            CHECK((pn.restriction[uk].colwise().sum().array() == 1.0).all());
        }
    }
    SUBCASE("3x3 square") {
        const auto disc = oracle::square(3, 3, 2, 0);
        std::vector<ExtendedSpace> spaces;
        for (int k = 0; k < 9; ++k) spaces.emplace_back(disc, k);
        const auto pn = number_primal_dofs(spaces);
        // four inner cross points, each touched by four patches
        CHECK(pn.size == 16);
        // own four corners plus both end points of four neighbour traces
        CHECK(pn.global[4].size() == 12);
        CHECK(pn.global[0].size() == 3);
    }
}

TEST_CASE("jump matrix structure") {
    SUBCASE("hand count on two patches") {
        const auto disc = oracle::two_patch(1, 1, 1, 1);
        std::vector<ExtendedSpace> spaces{ExtendedSpace(disc, 0), ExtendedSpace(disc, 1)};
        const auto jm = build_jump_matrix(disc, spaces);
        // three trace functions, both end points on the Dirichlet boundary
        CHECK(jm.rows == 2);
    }
    for (const auto& disc : {oracle::square(2, 2, 2, 1), oracle::square(3, 3, 1, 1), annulus(2, 1)}) {
        std::vector<ExtendedSpace> spaces;
        for (int k = 0; k < disc.num_patches(); ++k) spaces.emplace_back(disc, k);
        const auto jm = build_jump_matrix(disc, spaces);
        std::vector<int> count(static_cast<std::size_t>(jm.rows), 0);
        std::vector<double> sum(static_cast<std::size_t>(jm.rows), 0.0);
        for (std::size_t k = 0; k < spaces.size(); ++k) {
            const auto& b = jm.blocks[k];
            for (int r = 0; r < b.outerSize(); ++r)
                for (SparseMatrix::InnerIterator it(b, r); it; ++it) {
                    CHECK(std::abs(it.value()) == 1.0);
                    // corner dofs are handled through the primal space
                    CHECK(it.col() < spaces[k].num_delta());
                    CHECK(it.col() >= spaces[k].num_interior());
                    ++count[static_cast<std::size_t>(r)];
                    sum[static_cast<std::size_t>(r)] += it.value();
                }
        }
        for (int r = 0; r < jm.rows; ++r) {
            CHECK(count[static_cast<std::size_t>(r)] == 2);
            CHECK(sum[static_cast<std::size_t>(r)] == 0.0);
        }
        // consistent extension of arbitrary patch functions has no jump
        std::mt19937 rng(3);
        std::vector<Vector> pc;
        for (int k = 0; k < disc.num_patches(); ++k)
            pc.push_back(random_vector(disc.bases[static_cast<std::size_t>(k)].num_dofs(), rng));
        Vector bu = Vector::Zero(jm.rows);
        for (std::size_t k = 0; k < spaces.size(); ++k)
            bu += jm.blocks[k] * spaces[k].to_solver(extend_from_patches(disc, spaces[k], pc));
        CHECK(bu.norm() <= 1e-14);
    }
}

TEST_CASE("primal basis") {
    const auto disc = oracle::square(2, 2, 2, 2);
    IetiOptions direct_opts{Variant::mlu};
    IetiOptions iter_opts{Variant::mfd};
    iter_opts.eps_c = 1e-12;
    const IetiSolver direct(disc, source, direct_opts);
    const IetiSolver iter(disc, source, iter_opts);
    for (int k = 0; k < 4; ++k) {
        const DenseMatrix& pd = direct.primal_basis(k);
        const DenseMatrix& pi = iter.primal_basis(k);
        REQUIRE(pd.cols() == 3);
        for (Eigen::Index j = 0; j < pd.cols(); ++j)
            CHECK((pd.col(j) - pi.col(j)).norm() <= 1e-8 * pd.col(j).norm());
        // energy-minimizing extension: A_{Delta Delta} Psi + A_{Delta C} R = 0
        const auto& sp = direct.space(k);
        const DenseMatrix a(direct.local_system(k).a);
        const int nd = sp.num_delta();
        const DenseMatrix res = a.topLeftCorner(nd, nd) * pd +
                                a.topRightCorner(nd, sp.num_corner()) * direct.primal().restriction[static_cast<std::size_t>(k)];
        CHECK(res.norm() <= 1e-10 * a.norm());
    }
    CHECK(sym_eig(direct.coarse_matrix()).values.minCoeff() > 0.0);

    // no primal corner on a strip
    const IetiSolver strip(oracle::square(2, 1, 2, 1), source, direct_opts);
    CHECK(strip.num_primal() == 0);
    CHECK(strip.primal_basis(0).cols() == 0);
}

TEST_CASE("saddle operator and preconditioner") {
    std::mt19937 rng(5);
    for (auto v : all_variants) {
        const IetiSolver s(oracle::square(2, 2, 2, 1), source, IetiOptions{v});
        const int n = s.saddle_size();
        CHECK(n == s.num_delta() + s.num_primal() + s.num_lambda());
        Vector y;
        s.apply_saddle(Vector::Zero(n), y);
        CHECK(y.norm() == 0.0);
        for (int t = 0; t < 20; ++t) {
            const Vector a = random_vector(n, rng), b = random_vector(n, rng);
            Vector ab, ba, pb, pa;
            s.apply_saddle(b, ab);
            s.apply_saddle(a, ba);
            CHECK(std::abs(a.dot(ab) - b.dot(ba)) <= 1e-11 * a.norm() * b.norm() * (1.0 + ab.norm() / b.norm()));
            s.apply_preconditioner(b, pb);
            s.apply_preconditioner(a, pa);
            CHECK(std::abs(a.dot(pb) - b.dot(pa)) <= 1e-11 * a.norm() * b.norm() * (1.0 + pb.norm() / b.norm()));
            CHECK(a.dot(pa) > 0.0);
        }
        CHECK_THROWS_AS(s.apply_saddle(Vector::Zero(n + 1), y), ParameterError);
    }
}

TEST_CASE("saddle operator equals explicit block assembly") {
    const auto disc = oracle::two_patch(2, 1, 2, 1);
    const IetiSolver s(disc, source, IetiOptions{Variant::mlu});
    const int n = s.saddle_size(), nd = s.num_delta(), npi = s.num_primal(), nl = s.num_lambda();
    const DenseMatrix got = probe([&](const Vector& x, Vector& y) { s.apply_saddle(x, y); }, n);
    DenseMatrix expect = DenseMatrix::Zero(n, n);
    int off = 0;
    for (int k = 0; k < s.num_patches(); ++k) {
        const auto& sp = s.space(k);
        const int m = sp.num_delta();
        const DenseMatrix a(s.local_system(k).a);
        const DenseMatrix b(s.jump().blocks[static_cast<std::size_t>(k)]);
        expect.block(off, off, m, m) = a.topLeftCorner(m, m);
        expect.block(nd + npi, off, nl, m) = b.leftCols(m);
        expect.block(off, nd + npi, m, nl) = b.leftCols(m).transpose();
        off += m;
    }
    CHECK((got - expect).norm() <= 1e-12 * expect.norm());
}

TEST_CASE("dual operator identity") {
    // F from the solver against B Atilde^{-1} B^T with the partially assembled
    // matrix Atilde over (all Delta dofs, global primal dofs)
    for (const auto& disc : {oracle::square(2, 2, 2, 1), oracle::square(2, 2, 3, 2), annulus(1, 1)}) {
        const IetiSolver s(disc, source, IetiOptions{Variant::cglu});
        const int nd = s.num_delta(), npi = s.num_primal(), nl = s.num_lambda();
        DenseMatrix at = DenseMatrix::Zero(nd + npi, nd + npi);
        DenseMatrix bt = DenseMatrix::Zero(nl, nd + npi);
        int off = 0;
        for (int k = 0; k < s.num_patches(); ++k) {
            const auto& sp = s.space(k);
            const int m = sp.num_delta(), n = sp.num_dofs();
            const auto& glob = s.primal().global[static_cast<std::size_t>(k)];
            DenseMatrix r = DenseMatrix::Zero(n, nd + npi);
            r.block(0, off, m, m).setIdentity();
            const DenseMatrix& rc = s.primal().restriction[static_cast<std::size_t>(k)];
            for (std::size_t j = 0; j < glob.size(); ++j)
                r.block(m, nd + glob[j], n - m, 1) = rc.col(static_cast<Eigen::Index>(j));
            at += r.transpose() * DenseMatrix(s.local_system(k).a) * r;
            bt.middleCols(off, m) = DenseMatrix(s.jump().blocks[static_cast<std::size_t>(k)]).leftCols(m);
            off += m;
        }
        const DenseMatrix expect = bt * at.ldlt().solve(bt.transpose());
        const DenseMatrix got = probe([&](const Vector& x, Vector& y) { s.apply_dual(x, y); }, nl);
        CHECK((got - expect).norm() <= 1e-10 * expect.norm());
    }
    const IetiSolver inexact(oracle::square(2, 2, 2, 1), source, IetiOptions{Variant::mfd});
    Vector y;
    CHECK_THROWS_AS(inexact.apply_dual(Vector::Zero(inexact.num_lambda()), y), ParameterError);
}

TEST_CASE("all variants reproduce the monolithic solve") {
    for (const auto& disc : {oracle::square(2, 2, 2, 1), oracle::square(2, 2, 3, 2), annulus(2, 1)}) {
        const auto gs = oracle::global_system(disc, source);
        const Vector ref = gs.a.lu().solve(library_load(disc));
        const double scale = dg_norm(gs.d, ref);
        std::vector<Vector> sols;
        for (auto v : all_variants) {
            IetiSolver s(disc, source, IetiOptions{v, 1e-8});
            const auto sol = s.solve();
            CHECK(sol.report.converged);
            const Vector u = concat(sol.patch_coeffs);
            REQUIRE(u.size() == ref.size());
            CHECK(dg_norm(gs.d, u - ref) <= 1e-6 * scale);
            sols.push_back(u);
            MESSAGE(variant_name(v) << " it " << sol.report.iterations << " kappa " << sol.report.estimate.kappa);
        }
        // cross-variant agreement
        for (std::size_t i = 0; i < sols.size(); ++i)
            for (std::size_t j = i + 1; j < sols.size(); ++j)
                CHECK(dg_norm(gs.d, sols[i] - sols[j]) <= 10 * 1e-8 * scale);
    }
}

TEST_CASE("multiplier consistency at convergence") {
    const auto disc = annulus(2, 1);
    const IetiSolver s(disc, source, IetiOptions{Variant::mfd});
    LinearOperator a = [&](const Vector& x, Vector& y) { s.apply_saddle(x, y); };
    LinearOperator m = [&](const Vector& x, Vector& y) { s.apply_preconditioner(x, y); };
    const Vector b = s.saddle_rhs();
    const auto res = minres(a, m, b, 1e-10, 5000);
    Vector ax;
    s.apply_saddle(res.x, ax);
    const int nl = s.num_lambda();
    CHECK((ax - b).tail(nl).norm() <= 1e-7 * b.norm());
}

TEST_CASE("single patch problem") {
    const auto disc = oracle::square(1, 1, 2, 2);
    const auto gs = oracle::global_system(disc, source);
    const Vector ref = gs.a.lu().solve(library_load(disc));
    for (auto v : all_variants) {
        IetiSolver s(disc, source, IetiOptions{v, 1e-10});
        CHECK(s.num_lambda() == 0);
        CHECK(s.num_primal() == 0);
        const auto sol = s.solve();
        CHECK((sol.patch_coeffs[0] - ref).norm() <= 1e-8 * ref.norm());
    }
}

TEST_CASE("smallest instances and failures") {
    for (auto v : all_variants) {
        IetiSolver s(oracle::square(2, 2, 1, 0), source, IetiOptions{v});
        CHECK(s.solve().report.converged);
    }
    CHECK_THROWS_AS(IetiSolver(oracle::square(2, 2, 2, 1), source, IetiOptions{Variant::mfd, 0.0}), ParameterError);
    IetiOptions few{Variant::mfd, 1e-12};
    few.maxit = 2;
    IetiSolver s(oracle::square(2, 2, 2, 2), source, few);
    try {
        s.solve();
        FAIL("expected SolverError");
    } catch (const SolverError& e) {
        CHECK(e.iterations() == 2);
        CHECK(e.residual_history().size() == 3);
    }
}

TEST_CASE("deterministic iteration counts and histories") {
    const auto disc = annulus(2, 1);
    for (auto v : all_variants) {
        IetiSolver a(disc, source, IetiOptions{v});
        IetiSolver b(disc, source, IetiOptions{v});
        const auto ra = a.solve(), rb = b.solve();
        CHECK(ra.report.iterations == rb.report.iterations);
        CHECK(ra.report.residual_history == rb.report.residual_history);
    }
}

TEST_CASE("condition estimate matches the dense spectrum") {
    for (int r : {1, 2}) {
        const auto disc = oracle::square(2, 2, 2, r);
        for (auto v : all_variants) {
            const IetiSolver s(disc, source, IetiOptions{v});
            const int n = s.saddle_size(), nl = s.num_lambda();
            const DenseMatrix p = probe([&](const Vector& x, Vector& y) { s.apply_preconditioner(x, y); }, n);
            DenseMatrix a, m;
            if (v == Variant::cglu) {
                a = probe([&](const Vector& x, Vector& y) { s.apply_dual(x, y); }, nl);
                m = p.bottomRightCorner(nl, nl);
            } else {
                a = probe([&](const Vector& x, Vector& y) { s.apply_saddle(x, y); }, n);
                m = p;
            }
            // eigenvalues of M A through the symmetric form L^T A L with M = L L^T
            const Eigen::LLT<DenseMatrix> llt(0.5 * (m + m.transpose()));
            REQUIRE(llt.info() == Eigen::Success);
            const DenseMatrix l = llt.matrixL();
            const DenseMatrix sym = l.transpose() * a * l;
            const Vector ev = Eigen::SelfAdjointEigenSolver<DenseMatrix>(0.5 * (sym + sym.transpose()))
                                  .eigenvalues()
                                  .cwiseAbs();
            const double exact = ev.maxCoeff() / ev.minCoeff();
            const auto est = s.estimate_condition();
            REQUIRE(est.available);
            MESSAGE(variant_name(v) << " r " << r << " est " << est.kappa << " dense " << exact);
            CHECK(std::abs(est.kappa - exact) <= 0.1 * exact);
        }
    }
}
