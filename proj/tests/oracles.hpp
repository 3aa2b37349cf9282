#pragma once

// Slow reference implementations for tests. Basis functions come from the
// recursive Cox-de Boor definition and every form is integrated pointwise,
// independently of the production assembly.

#include "ietidg/assembly.hpp"

#include <cmath>
#include <vector>

namespace oracle {

using namespace ietidg;

inline double naive_basis(const std::vector<double>& t, int i, int p, double x) {
    const auto u = [&](int j) { return t[static_cast<std::size_t>(j)]; };
    if (p == 0) {
        if (u(i) <= x && x < u(i + 1)) return 1.0;
        // closed right end on the last nonzero span
        if (x == 1.0 && u(i) < u(i + 1) && u(i + 1) == 1.0) return 1.0;
        return 0.0;
    }
    double v = 0.0;
    if (u(i + p) > u(i)) v += (x - u(i)) / (u(i + p) - u(i)) * naive_basis(t, i, p - 1, x);
    if (u(i + p + 1) > u(i + 1))
        v += (u(i + p + 1) - x) / (u(i + p + 1) - u(i + 1)) * naive_basis(t, i + 1, p - 1, x);
    return v;
}

inline double naive_derivative(const std::vector<double>& t, int i, int p, double x) {
    const auto u = [&](int j) { return t[static_cast<std::size_t>(j)]; };
    double d = 0.0;
    if (u(i + p) > u(i)) d += p / (u(i + p) - u(i)) * naive_basis(t, i, p - 1, x);
    if (u(i + p + 1) > u(i + 1)) d -= p / (u(i + p + 1) - u(i + 1)) * naive_basis(t, i + 1, p - 1, x);
    return d;
}

struct Univariate {
    std::vector<double> val, der;
};

inline Univariate all_functions(const KnotVector& kv, double x) {
    Univariate out;
    for (int i = 0; i < kv.size(); ++i) {
        out.val.push_back(naive_basis(kv.knots(), i, kv.degree(), x));
        out.der.push_back(naive_derivative(kv.knots(), i, kv.degree(), x));
    }
    return out;
}

/// Values and physical gradients of all active patch functions.
struct PatchPoint {
    std::vector<double> val;
    std::vector<Point> grad;
    Point x;
    Jacobian jac;
    double det = 0.0;
};

inline PatchPoint patch_point(const Discretization& disc, int k, double u, double v) {
    const auto& basis = disc.bases[static_cast<std::size_t>(k)];
    const auto& g = disc.geometry.patches[static_cast<std::size_t>(k)];
    const Univariate a = all_functions(basis.knots(0), u);
    const Univariate b = all_functions(basis.knots(1), v);
    PatchPoint pp;
    // geometry from its own control net
    const Univariate ga = all_functions(g.knots(0), u);
    const Univariate gb = all_functions(g.knots(1), v);
    pp.x = Point::Zero();
    pp.jac = Jacobian::Zero();
    const int gn2 = g.knots(1).size();
    for (int i = 0; i < g.knots(0).size(); ++i)
        for (int j = 0; j < gn2; ++j) {
            const Point& c = g.control_points()[static_cast<std::size_t>(i * gn2 + j)];
            const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
            pp.x += ga.val[ui] * gb.val[uj] * c;
            pp.jac.col(0) += ga.der[ui] * gb.val[uj] * c;
            pp.jac.col(1) += ga.val[ui] * gb.der[uj] * c;
        }
    pp.det = pp.jac.determinant();
    const Jacobian jit = pp.jac.inverse().transpose();
    pp.val.assign(static_cast<std::size_t>(basis.num_dofs()), 0.0);
    pp.grad.assign(static_cast<std::size_t>(basis.num_dofs()), Point::Zero());
    for (int i = 0; i < basis.full_size(0); ++i)
        for (int j = 0; j < basis.full_size(1); ++j) {
            const int d = basis.dof(i, j);
            if (d < 0) continue;
            const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
            pp.val[static_cast<std::size_t>(d)] = a.val[ui] * b.val[uj];
            pp.grad[static_cast<std::size_t>(d)] = jit * Point(a.der[ui] * b.val[uj], a.val[ui] * b.der[uj]);
        }
    return pp;
}

struct Rule {
    std::vector<double> x, w;
};

inline Rule rule_on(const std::vector<double>& breaks, int n) {
    Rule r;
    const auto g = gauss_legendre(n);
    for (std::size_t e = 0; e + 1 < breaks.size(); ++e) map_rule(g, breaks[e], breaks[e + 1], r.x, r.w);
    return r;
}

inline std::vector<double> merged(std::vector<double> a, const std::vector<double>& b, bool flip) {
    for (double x : b) a.push_back(flip ? 1.0 - x : x);
    std::sort(a.begin(), a.end());
    std::vector<double> out;
    for (double x : a)
        if (out.empty() || x - out.back() > 1e-13) out.push_back(x);
    return out;
}

inline Point param_normal(Side s) {
    switch (s) {
        case Side::west: return {-1, 0};
        case Side::east: return {1, 0};
        case Side::south: return {0, -1};
        default: return {0, 1};
    }
}

/// Offsets of each patch in the concatenated global vector.
inline std::vector<int> patch_offsets(const Discretization& disc) {
    std::vector<int> off{0};
    for (const auto& b : disc.bases) off.push_back(off.back() + b.num_dofs());
    return off;
}

struct GlobalSystem {
    DenseMatrix a;  ///< SIPG matrix
    DenseMatrix d;  ///< dG scalar product
    Vector f;
};

/// Monolithic SIPG system over the concatenated patch spaces.
inline GlobalSystem global_system(const Discretization& disc, const SourceFunction& f) {
    const auto off = patch_offsets(disc);
    const int n = off.back();
    GlobalSystem gs{DenseMatrix::Zero(n, n), DenseMatrix::Zero(n, n), Vector::Zero(n)};
    for (int k = 0; k < disc.num_patches(); ++k) {
        const auto& basis = disc.bases[static_cast<std::size_t>(k)];
        const Rule ru = rule_on(basis.knots(0).breaks(), basis.degree(0) + 3);
        const Rule rv = rule_on(basis.knots(1).breaks(), basis.degree(1) + 3);
        const int o = off[static_cast<std::size_t>(k)];
        for (std::size_t a = 0; a < ru.x.size(); ++a)
            for (std::size_t b = 0; b < rv.x.size(); ++b) {
                const auto pp = patch_point(disc, k, ru.x[a], rv.x[b]);
                const double w = ru.w[a] * rv.w[b] * std::abs(pp.det);
                const double fv = f ? f(pp.x.x(), pp.x.y()) : 0.0;
                for (std::size_t i = 0; i < pp.val.size(); ++i) {
                    gs.f[o + static_cast<int>(i)] += w * fv * pp.val[i];
                    for (std::size_t j = 0; j < pp.val.size(); ++j) {
                        const double v = w * pp.grad[i].dot(pp.grad[j]);
                        gs.a(o + static_cast<int>(i), o + static_cast<int>(j)) += v;
                        gs.d(o + static_cast<int>(i), o + static_cast<int>(j)) += v;
                    }
                }
            }
    }
    for (const auto& itf : disc.geometry.topology.interfaces()) {
        const int k = itf.k, l = itf.l;
        const auto& bk = disc.bases[static_cast<std::size_t>(k)];
        const auto& bl = disc.bases[static_cast<std::size_t>(l)];
        const int tk = tangential_direction(itf.side_k), tl = tangential_direction(itf.side_l);
        const auto br = merged(bk.knots(tk).breaks(), bl.knots(tl).breaks(), !itf.same_orientation);
        const Rule r = rule_on(br, std::max(bk.max_degree(), bl.max_degree()) + 3);
        const double sigma = disc.config.delta / disc.physical_interface_size(k, l);
        const int nk = bk.num_dofs(), nl = bl.num_dofs();
        const int ok = off[static_cast<std::size_t>(k)], ol = off[static_cast<std::size_t>(l)];
        for (std::size_t q = 0; q < r.x.size(); ++q) {
            const double s = r.x[q];
            const double t = itf.same_orientation ? s : 1.0 - s;
            const auto pk_uv = side_point(itf.side_k, s);
            const auto pl_uv = side_point(itf.side_l, t);
            const auto pk = patch_point(disc, k, pk_uv[0], pk_uv[1]);
            const auto pl = patch_point(disc, l, pl_uv[0], pl_uv[1]);
            const double ds = r.w[q] * pk.jac.col(tk).norm();
            const Point nkv = (pk.jac.inverse().transpose() * param_normal(itf.side_k)).normalized();
            const Point nlv = (pl.jac.inverse().transpose() * param_normal(itf.side_l)).normalized();
            // global index, jump coefficient (l minus k), k normal derivative, l normal derivative
            std::vector<int> idx;
            std::vector<double> jump, dnk, dnl;
            for (int i = 0; i < nk; ++i) {
                idx.push_back(ok + i);
                jump.push_back(-pk.val[static_cast<std::size_t>(i)]);
                dnk.push_back(nkv.dot(pk.grad[static_cast<std::size_t>(i)]));
                dnl.push_back(0.0);
            }
            for (int i = 0; i < nl; ++i) {
                idx.push_back(ol + i);
                jump.push_back(pl.val[static_cast<std::size_t>(i)]);
                dnk.push_back(0.0);
                dnl.push_back(nlv.dot(pl.grad[static_cast<std::size_t>(i)]));
            }
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < idx.size(); ++j) {
                    // both patches penalize and both contribute a one-sided
                    // consistency term; the jump seen from l has opposite sign
                    const double pen = 2.0 * sigma * jump[i] * jump[j];
                    const double cons = 0.5 * (dnk[i] * jump[j] + jump[i] * dnk[j]) -
                                        0.5 * (dnl[i] * jump[j] + jump[i] * dnl[j]);
                    gs.a(idx[i], idx[j]) += ds * (pen + cons);
                    gs.d(idx[i], idx[j]) += ds * pen;
                }
        }
    }
    return gs;
}

/// a_e^(k)(u, v) for raw-ordered extended vectors, integrated pointwise.
inline double local_form(const Discretization& disc, const ExtendedSpace& sp, const Vector& u,
                         const Vector& v, bool with_consistency = true) {
    const int k = sp.patch();
    const auto& basis = sp.basis();
    const int np = basis.num_dofs();
    double total = 0.0;
    const Rule ru = rule_on(basis.knots(0).breaks(), basis.degree(0) + 3);
    const Rule rv = rule_on(basis.knots(1).breaks(), basis.degree(1) + 3);
    for (std::size_t a = 0; a < ru.x.size(); ++a)
        for (std::size_t b = 0; b < rv.x.size(); ++b) {
            const auto pp = patch_point(disc, k, ru.x[a], rv.x[b]);
            Point gu = Point::Zero(), gv = Point::Zero();
            for (int i = 0; i < np; ++i) {
                gu += u[i] * pp.grad[static_cast<std::size_t>(i)];
                gv += v[i] * pp.grad[static_cast<std::size_t>(i)];
            }
            total += ru.w[a] * rv.w[b] * std::abs(pp.det) * gu.dot(gv);
        }
    for (const auto& blk : sp.traces()) {
        const int td = tangential_direction(blk.side);
        const auto br = merged(basis.knots(td).breaks(), blk.knots.breaks(), !blk.same_orientation);
        const Rule r = rule_on(br, std::max(basis.max_degree(), blk.knots.degree()) + 3);
        const double sigma = disc.config.delta / disc.physical_interface_size(k, blk.neighbor);
        for (std::size_t q = 0; q < r.x.size(); ++q) {
            const auto uv = side_point(blk.side, r.x[q]);
            const auto pp = patch_point(disc, k, uv[0], uv[1]);
            const Point nrm = (pp.jac.inverse().transpose() * param_normal(blk.side)).normalized();
            const Univariate tr = all_functions(blk.knots, blk.neighbor_param(r.x[q]));
            double uk = 0, vk = 0, dnu = 0, dnv = 0, ut = 0, vt = 0;
            for (int i = 0; i < np; ++i) {
                uk += u[i] * pp.val[static_cast<std::size_t>(i)];
                vk += v[i] * pp.val[static_cast<std::size_t>(i)];
                dnu += u[i] * nrm.dot(pp.grad[static_cast<std::size_t>(i)]);
                dnv += v[i] * nrm.dot(pp.grad[static_cast<std::size_t>(i)]);
            }
            for (int t = blk.first; t < blk.end; ++t) {
                const int raw = blk.offset + t - blk.first;
                ut += u[raw] * tr.val[static_cast<std::size_t>(t)];
                vt += v[raw] * tr.val[static_cast<std::size_t>(t)];
            }
            const double ds = r.w[q] * pp.jac.col(td).norm();
            double integrand = sigma * (ut - uk) * (vt - vk);
            if (with_consistency) integrand += 0.5 * (dnu * (vt - vk) + dnv * (ut - uk));
            total += ds * integrand;
        }
    }
    return total;
}

/// Two affine unit-square patches, optionally with different spaces.
inline Discretization two_patch(int p0, int r0, int p1, int r1, double delta = -1.0) {
    auto mp = unit_square_multipatch(2, 1);
    const auto k0 = refine_dyadic(make_open_knot_vector(p0, 1, p0 - 1), r0);
    const auto k1 = refine_dyadic(make_open_knot_vector(p1, 1, p1 - 1), r1);
    DGConfig cfg;
    cfg.delta = delta > 0 ? delta : choose_penalty(std::max(p0, p1));
    return make_discretization(std::move(mp), {{k0, k0}, {k1, k1}}, cfg);
}

/// nx x ny unit-square patches with a uniform space.
inline Discretization square(int nx, int ny, int p, int r) {
    auto mp = unit_square_multipatch(nx, ny);
    const auto kv = refine_dyadic(make_open_knot_vector(p, 1, p - 1), r);
    std::vector<std::array<KnotVector, 2>> kn(mp.patches.size(), {kv, kv});
    DGConfig cfg;
    cfg.delta = choose_penalty(p);
    return make_discretization(std::move(mp), kn, cfg);
}

}  // namespace oracle
