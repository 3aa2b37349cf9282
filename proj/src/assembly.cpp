#include "ietidg/assembly.hpp"

#include "ietidg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ietidg {

double choose_penalty(int p, std::optional<double> override_delta) {
    if (p < 1) throw ParameterError("choose_penalty: degree must be >= 1");
    if (override_delta) {
        if (!(*override_delta > 0.0)) throw ParameterError("choose_penalty: delta must be positive");
        return *override_delta;
    }
    return 2.0 * (p + 1) * (p + 1);
}

double Discretization::physical_interface_size(int k, int l) const {
    return std::min(sizes[static_cast<std::size_t>(k)].h, sizes[static_cast<std::size_t>(l)].h);
}

double Discretization::parameter_interface_size(int k, int l) const {
    return std::min(sizes[static_cast<std::size_t>(k)].h_hat,
                    sizes[static_cast<std::size_t>(l)].h_hat);
}

Discretization make_discretization(MultiPatch geometry,
                                   const std::vector<std::array<KnotVector, 2>>& knots,
                                   DGConfig config) {
    if (knots.size() != geometry.patches.size())
        throw ParameterError("make_discretization: one knot vector pair per patch required");
    if (!(config.delta > 0.0)) throw ParameterError("make_discretization: delta must be positive");
    if (config.quad_extra < 0) throw ParameterError("make_discretization: quad_extra must be >= 0");
    Discretization d;
    d.config = config;
    for (std::size_t k = 0; k < knots.size(); ++k) {
        d.bases.emplace_back(knots[k][0], knots[k][1],
                             geometry.topology.dirichlet_sides(static_cast<int>(k)));
        d.sizes.push_back(patch_sizes(geometry.patches[k], d.bases.back()));
    }
    d.geometry = std::move(geometry);
    return d;
}

// ---------------------------------------------------------------------------
// extended space

ExtendedSpace::ExtendedSpace(const Discretization& disc, int k)
    : patch_(k), basis_(disc.bases[static_cast<std::size_t>(k)]) {
    const auto& topo = disc.geometry.topology;
    int offset = basis_.num_dofs();
    for (Side s : kAllSides) {
        const int i = topo.interface_on(k, s);
        if (i < 0) continue;
        const Interface& f = topo.interfaces()[static_cast<std::size_t>(i)];
        TraceBlock b;
        b.interface = i;
        b.neighbor = f.k == k ? f.l : f.k;
        b.side = s;
        b.neighbor_side = f.k == k ? f.side_l : f.side_k;
        b.same_orientation = f.same_orientation;
        const TensorBasis& nb = disc.bases[static_cast<std::size_t>(b.neighbor)];
        const int td = tangential_direction(b.neighbor_side);
        b.knots = nb.knots(td);
        b.first = nb.first_active(td);
        b.end = nb.end_active(td);
        b.offset = offset;
        offset += b.size();
        traces_.push_back(std::move(b));
    }

    const int n = offset;
    std::vector<DofKind> kind(static_cast<std::size_t>(n), DofKind::interior);
    std::vector<int> corner(static_cast<std::size_t>(n), -1);
    std::vector<int> owner(static_cast<std::size_t>(n), k);
    const int n1 = basis_.full_size(0), n2 = basis_.full_size(1);
    for (int d = 0; d < basis_.num_dofs(); ++d) {
        const auto [i, j] = basis_.tensor_index(d);
        const bool w = i == 0, e = i == n1 - 1, s = j == 0, no = j == n2 - 1;
        if ((w || e) && (s || no)) {
            const Corner c = s ? (w ? Corner::sw : Corner::se) : (w ? Corner::nw : Corner::ne);
            kind[static_cast<std::size_t>(d)] = DofKind::corner;
            corner[static_cast<std::size_t>(d)] = topo.corner_id(k, c);
            patch_corner_raw_.push_back(d);
        } else if (w || e || s || no) {
            kind[static_cast<std::size_t>(d)] = DofKind::boundary;
        }
    }
    for (const auto& b : traces_) {
        const int last = b.knots.size() - 1;
        for (int t = b.first; t < b.end; ++t) {
            const auto raw = static_cast<std::size_t>(b.offset + t - b.first);
            if (t == 0 || t == last) {
                kind[raw] = DofKind::corner;
                corner[raw] = topo.corner_id(b.neighbor, side_corner(b.neighbor_side, t == 0 ? 0 : 1));
                owner[raw] = b.neighbor;
            } else {
                kind[raw] = DofKind::boundary;
            }
        }
    }
    for (DofKind want : {DofKind::interior, DofKind::boundary, DofKind::corner})
        for (int r = 0; r < n; ++r)
            if (kind[static_cast<std::size_t>(r)] == want) order_.push_back(r);
    position_.assign(static_cast<std::size_t>(n), -1);
    for (int p = 0; p < n; ++p) position_[static_cast<std::size_t>(order_[static_cast<std::size_t>(p)])] = p;
    for (int r = 0; r < n; ++r) {
        if (kind[static_cast<std::size_t>(r)] == DofKind::interior) ++n_i_;
        if (kind[static_cast<std::size_t>(r)] == DofKind::boundary) ++n_b_;
    }
    for (int p = n_i_ + n_b_; p < n; ++p) {
        const auto r = static_cast<std::size_t>(order_[static_cast<std::size_t>(p)]);
        corner_points_.push_back(corner[r]);
        corner_owners_.push_back(owner[r]);
    }
}

const TraceBlock* ExtendedSpace::trace_on(Side s) const {
    for (const auto& b : traces_)
        if (b.side == s) return &b;
    return nullptr;
}

DofKind ExtendedSpace::kind(int pos) const {
    if (pos < n_i_) return DofKind::interior;
    if (pos < n_i_ + n_b_) return DofKind::boundary;
    return DofKind::corner;
}

int ExtendedSpace::trace_raw(const TraceBlock& b, int t) const {
    if (t < b.first || t >= b.end) return -1;
    return b.offset + t - b.first;
}

Vector ExtendedSpace::to_solver(const Vector& raw) const {
    if (raw.size() != num_dofs()) throw ParameterError("extended space: size mismatch");
    Vector out(raw.size());
    for (int p = 0; p < num_dofs(); ++p) out[p] = raw[order_[static_cast<std::size_t>(p)]];
    return out;
}

Vector ExtendedSpace::to_raw(const Vector& solver) const {
    if (solver.size() != num_dofs()) throw ParameterError("extended space: size mismatch");
    Vector out(solver.size());
    for (int p = 0; p < num_dofs(); ++p) out[order_[static_cast<std::size_t>(p)]] = solver[p];
    return out;
}

// ---------------------------------------------------------------------------
// quadrature helpers

namespace {

/// Breaks of patch k's tangential knots merged with the mapped breaks of the
/// trace block.
std::vector<double> merged_breaks(const KnotVector& own, const TraceBlock& b) {
    std::vector<double> pts = own.breaks();
    for (double x : b.knots.breaks()) pts.push_back(b.neighbor_param(x));
    std::sort(pts.begin(), pts.end());
    std::vector<double> out;
    for (double x : pts)
        if (out.empty() || x - out.back() > 1e-13) out.push_back(x);
    out.front() = 0.0;
    out.back() = 1.0;
    return out;
}

struct SideQuadrature {
    std::vector<double> s, w;
};

SideQuadrature side_rule(const KnotVector& own, const TraceBlock& b, int npts) {
    SideQuadrature q;
    const auto br = merged_breaks(own, b);
    const GaussRule g = gauss_legendre(npts);
    for (std::size_t e = 0; e + 1 < br.size(); ++e) map_rule(g, br[e], br[e + 1], q.s, q.w);
    return q;
}

Point parametric_normal(Side s) {
    switch (s) {
        case Side::west: return Point(-1.0, 0.0);
        case Side::east: return Point(1.0, 0.0);
        case Side::south: return Point(0.0, -1.0);
        case Side::north: return Point(0.0, 1.0);
    }
    return Point::Zero();
}

/// Active patch functions at one parameter point with values and
/// parametric gradients.
struct PointBasis {
    std::vector<int> dofs;
    std::vector<double> values;
    std::vector<Point> grads;  // parametric
};

void eval_tensor(const TensorBasis& basis, double u, double v, PointBasis& out) {
    out.dofs.clear();
    out.values.clear();
    out.grads.clear();
    const BasisEval e1 = eval_basis(basis.knots(0), u);
    const BasisEval e2 = eval_basis(basis.knots(1), v);
    for (std::size_t a = 0; a < e1.values.size(); ++a)
        for (std::size_t b = 0; b < e2.values.size(); ++b) {
            const int d = basis.dof(e1.first + static_cast<int>(a), e2.first + static_cast<int>(b));
            if (d < 0) continue;
            out.dofs.push_back(d);
            out.values.push_back(e1.values[a] * e2.values[b]);
            out.grads.emplace_back(e1.derivatives[a] * e2.values[b], e1.values[a] * e2.derivatives[b]);
        }
}

void add_dense(std::vector<Triplet>& t, const std::vector<int>& idx, const DenseMatrix& m) {
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j)
            if (m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0)
                t.emplace_back(idx[i], idx[j], m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
}

SparseMatrix permute_to_solver(const ExtendedSpace& sp, const std::vector<Triplet>& raw) {
    std::vector<Triplet> t;
    t.reserve(raw.size());
    for (const auto& e : raw) t.emplace_back(sp.position(e.row()), sp.position(e.col()), e.value());
    return from_triplets(sp.num_dofs(), sp.num_dofs(), t);
}

}  // namespace

// ---------------------------------------------------------------------------
// local system

LocalSystem assemble_local(const Discretization& disc, const ExtendedSpace& space,
                           const SourceFunction& f) {
    const int k = space.patch();
    const auto& g = disc.geometry.patches[static_cast<std::size_t>(k)];
    const TensorBasis& basis = space.basis();
    const int extra = disc.config.quad_extra;

    std::vector<Triplet> vol, pen, cons;
    Vector f_raw = Vector::Zero(space.num_dofs());

    // volume terms
    const auto b1 = basis.knots(0).breaks();
    const auto b2 = basis.knots(1).breaks();
    const GaussRule g1 = gauss_legendre(basis.degree(0) + 1 + extra);
    const GaussRule g2 = gauss_legendre(basis.degree(1) + 1 + extra);
    PointBasis pb;
    for (std::size_t e1 = 0; e1 + 1 < b1.size(); ++e1) {
        std::vector<double> u, wu;
        map_rule(g1, b1[e1], b1[e1 + 1], u, wu);
        for (std::size_t e2 = 0; e2 + 1 < b2.size(); ++e2) {
            std::vector<double> v, wv;
            map_rule(g2, b2[e2], b2[e2 + 1], v, wv);
            std::vector<int> idx;
            DenseMatrix loc;
            for (std::size_t qa = 0; qa < u.size(); ++qa)
                for (std::size_t qb = 0; qb < v.size(); ++qb) {
                    const auto ge = g.eval(u[qa], v[qb]);
                    eval_tensor(basis, u[qa], v[qb], pb);
                    if (idx.empty()) {
                        idx = pb.dofs;
                        loc = DenseMatrix::Zero(static_cast<Eigen::Index>(idx.size()),
                                                static_cast<Eigen::Index>(idx.size()));
                    }
                    const double w = wu[qa] * wv[qb] * std::abs(ge.det);
                    const Jacobian jit = ge.jac.inverse().transpose();
                    std::vector<Point> grads(pb.grads.size());
                    for (std::size_t a = 0; a < grads.size(); ++a) grads[a] = jit * pb.grads[a];
                    for (std::size_t a = 0; a < grads.size(); ++a)
                        for (std::size_t c = 0; c < grads.size(); ++c)
                            loc(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) +=
                                w * grads[a].dot(grads[c]);
                    if (f) {
                        const double fv = f(ge.x.x(), ge.x.y());
                        for (std::size_t a = 0; a < pb.dofs.size(); ++a)
                            f_raw[pb.dofs[a]] += w * fv * pb.values[a];
                    }
                }
            add_dense(vol, idx, loc);
        }
    }

    // interface terms
    for (const auto& blk : space.traces()) {
        const int td = tangential_direction(blk.side);
        const int pmax = std::max({basis.max_degree(), blk.knots.degree()});
        const auto q = side_rule(basis.knots(td), blk, pmax + 1 + extra);
        const double sigma = disc.config.delta / disc.physical_interface_size(k, blk.neighbor);
        const Point n_hat = parametric_normal(blk.side);
        for (std::size_t iq = 0; iq < q.s.size(); ++iq) {
            const auto uv = side_point(blk.side, q.s[iq]);
            const auto ge = g.eval(uv[0], uv[1]);
            const double ds = q.w[iq] * ge.jac.col(td).norm();
            const Jacobian jit = ge.jac.inverse().transpose();
            const Point normal = (jit * n_hat).normalized();
            eval_tensor(basis, uv[0], uv[1], pb);
            const BasisEval te = eval_basis(blk.knots, blk.neighbor_param(q.s[iq]));

            // jump coefficients (trace minus patch) and normal derivatives
            std::vector<int> idx;
            std::vector<double> jump, dn;
            for (std::size_t a = 0; a < pb.dofs.size(); ++a) {
                idx.push_back(pb.dofs[a]);
                jump.push_back(-pb.values[a]);
                dn.push_back(normal.dot(jit * pb.grads[a]));
            }
            for (std::size_t a = 0; a < te.values.size(); ++a) {
                const int r = space.trace_raw(blk, te.first + static_cast<int>(a));
                if (r < 0) continue;
                idx.push_back(r);
                jump.push_back(te.values[a]);
                dn.push_back(0.0);
            }
            const auto m = static_cast<Eigen::Index>(idx.size());
            DenseMatrix lp(m, m), lc(m, m);
            for (Eigen::Index a = 0; a < m; ++a)
                for (Eigen::Index c = 0; c < m; ++c) {
                    const auto ua = static_cast<std::size_t>(a), uc = static_cast<std::size_t>(c);
                    lp(a, c) = ds * sigma * jump[ua] * jump[uc];
                    lc(a, c) = ds * 0.5 * (dn[ua] * jump[uc] + jump[ua] * dn[uc]);
                }
            add_dense(pen, idx, lp);
            add_dense(cons, idx, lc);
        }
    }

    LocalSystem ls;
    const SparseMatrix a_vol = permute_to_solver(space, vol);
    ls.r = permute_to_solver(space, pen);
    const SparseMatrix m = permute_to_solver(space, cons);
    ls.d = a_vol + ls.r;
    ls.a = ls.d + m;
    ls.a.makeCompressed();
    ls.d.makeCompressed();
    ls.f = space.to_solver(f_raw);
    return ls;
}

// ---------------------------------------------------------------------------
// edge projection

EdgeProjection::EdgeProjection(const ExtendedSpace& space, const TraceBlock& block) {
    const TensorBasis& basis = space.basis();
    const int td = tangential_direction(block.side);
    const auto side = basis.side_dofs(block.side);
    std::vector<int> tang;
    for (const auto& [t, d] : side) {
        side_dofs_.push_back(d);
        tang.push_back(t);
    }
    const KnotVector& own = basis.knots(td);
    const int first_own = tang.empty() ? 0 : tang.front();

    edge_mass_ = strip_ends(univariate_matrices(block.knots).mass, block.first == 1,
                            block.end == block.knots.size() - 1);
    mixed_ = DenseMatrix::Zero(block.size(), static_cast<Eigen::Index>(side.size()));
    const int pmax = std::max(own.degree(), block.knots.degree());
    const auto q = side_rule(own, block, pmax + 1);
    for (std::size_t iq = 0; iq < q.s.size(); ++iq) {
        const BasisEval eo = eval_basis(own, q.s[iq]);
        const BasisEval et = eval_basis(block.knots, block.neighbor_param(q.s[iq]));
        for (std::size_t a = 0; a < et.values.size(); ++a) {
            const int row = et.first + static_cast<int>(a) - block.first;
            if (row < 0 || row >= block.size()) continue;
            for (std::size_t c = 0; c < eo.values.size(); ++c) {
                const int col = eo.first + static_cast<int>(c) - first_own;
                if (col < 0 || col >= static_cast<int>(side.size())) continue;
                mixed_(row, col) += q.w[iq] * et.values[a] * eo.values[c];
            }
        }
    }
    try {
        chol_ = DenseCholesky(edge_mass_);
    } catch (const FactorizationError&) {
        throw AssemblyError("edge projection: singular edge mass matrix");
    }
}

Vector EdgeProjection::apply(const Vector& side_coeffs) const {
    if (side_coeffs.size() != mixed_.cols()) throw ParameterError("edge projection: size mismatch");
    return chol_.solve(Vector(mixed_ * side_coeffs));
}

Vector EdgeProjection::apply_transpose(const Vector& trace_coeffs) const {
    if (trace_coeffs.size() != mixed_.rows()) throw ParameterError("edge projection: size mismatch");
    return mixed_.transpose() * chol_.solve(trace_coeffs);
}

DenseMatrix EdgeProjection::matrix() const { return chol_.solve(mixed_); }

// ---------------------------------------------------------------------------
// parameter matrices

DenseMatrix ParameterMatrices::dense_d1() const {
    return kron(k1, m2) + kron(m1, k2) + alpha * kron(m1, m2);
}

ParameterMatrices assemble_parameter_matrices(const Discretization& disc,
                                              const ExtendedSpace& space) {
    const int k = space.patch();
    const TensorBasis& basis = space.basis();
    ParameterMatrices pm;
    DenseMatrix mf[2], kf[2];
    for (int dir = 0; dir < 2; ++dir) {
        const auto um = univariate_matrices(basis.knots(dir));
        const bool lo = basis.first_active(dir) == 1;
        const bool hi = basis.end_active(dir) == basis.full_size(dir) - 1;
        mf[dir] = strip_ends(um.mass, lo, hi);
        kf[dir] = strip_ends(um.stiffness, lo, hi);
    }
    pm.m1 = mf[0];
    pm.k1 = kf[0];
    pm.m2 = mf[1];
    pm.k2 = kf[1];
    pm.alpha = basis.dirichlet() == 0 ? 1.0 : 0.0;

    const int n1 = basis.reduced_size(0), n2 = basis.reduced_size(1);
    std::vector<Triplet> dt, mt;
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
            for (int ii = std::max(0, i - basis.degree(0)); ii < std::min(n1, i + basis.degree(0) + 1); ++ii)
                for (int jj = std::max(0, j - basis.degree(1)); jj < std::min(n2, j + basis.degree(1) + 1); ++jj) {
                    const double grad = pm.k1(i, ii) * pm.m2(j, jj) + pm.m1(i, ii) * pm.k2(j, jj);
                    const double mass = pm.m1(i, ii) * pm.m2(j, jj);
                    dt.emplace_back(i * n2 + j, ii * n2 + jj, grad);
                    mt.emplace_back(i * n2 + j, ii * n2 + jj, mass);
                }

    for (const auto& blk : space.traces()) {
        const double sigma = disc.config.delta / disc.parameter_interface_size(k, blk.neighbor);
        EdgeProjection proj(space, blk);
        pm.trace_mass.push_back(sigma * proj.edge_mass());

        // side-side block: own tangential mass along the side
        const int td = tangential_direction(blk.side);
        const auto um = univariate_matrices(basis.knots(td)).mass;
        const auto side = basis.side_dofs(blk.side);
        for (std::size_t a = 0; a < side.size(); ++a)
            for (std::size_t c = 0; c < side.size(); ++c) {
                const double v = um(side[a][0], side[c][0]);
                if (v != 0.0) dt.emplace_back(side[a][1], side[c][1], sigma * v);
            }
        const DenseMatrix& mix = proj.mixed_mass();
        for (Eigen::Index r = 0; r < mix.rows(); ++r)
            for (Eigen::Index c = 0; c < mix.cols(); ++c) {
                const double v = mix(r, c);
                if (v == 0.0) continue;
                const int tr = blk.offset + static_cast<int>(r);
                const int pd = proj.side_dofs()[static_cast<std::size_t>(c)];
                dt.emplace_back(tr, pd, -sigma * v);
                dt.emplace_back(pd, tr, -sigma * v);
            }
        const DenseMatrix& em = proj.edge_mass();
        for (Eigen::Index r = 0; r < em.rows(); ++r)
            for (Eigen::Index c = 0; c < em.cols(); ++c)
                if (em(r, c) != 0.0)
                    dt.emplace_back(blk.offset + static_cast<int>(r), blk.offset + static_cast<int>(c),
                                    sigma * em(r, c));
        pm.projections.push_back(std::move(proj));
    }
    pm.d_hat = from_triplets(space.num_dofs(), space.num_dofs(), dt);
    pm.mass_hat = from_triplets(basis.num_dofs(), basis.num_dofs(), mt);
    return pm;
}

// ---------------------------------------------------------------------------

Vector extend_from_patches(const Discretization& disc, const ExtendedSpace& space,
                           const std::vector<Vector>& patch_coeffs) {
    const int k = space.patch();
    Vector out = Vector::Zero(space.num_dofs());
    out.head(space.num_patch_dofs()) = patch_coeffs[static_cast<std::size_t>(k)];
    for (const auto& blk : space.traces()) {
        const TensorBasis& nb = disc.bases[static_cast<std::size_t>(blk.neighbor)];
        const Vector& nc = patch_coeffs[static_cast<std::size_t>(blk.neighbor)];
        for (const auto& [t, d] : nb.side_dofs(blk.neighbor_side)) {
            const int r = space.trace_raw(blk, t);
            if (r >= 0) out[r] = nc[d];
        }
    }
    return out;
}

PatchError patch_error(const Discretization& disc, int k, const Vector& coeffs,
                       const SourceFunction& exact, const GradientFunction& exact_grad) {
    const auto& g = disc.geometry.patches[static_cast<std::size_t>(k)];
    const TensorBasis& basis = disc.bases[static_cast<std::size_t>(k)];
    if (coeffs.size() != basis.num_dofs()) throw ParameterError("patch_error: size mismatch");
    const auto b1 = basis.knots(0).breaks();
    const auto b2 = basis.knots(1).breaks();
    const GaussRule g1 = gauss_legendre(basis.degree(0) + 3);
    const GaussRule g2 = gauss_legendre(basis.degree(1) + 3);
    PatchError err;
    PointBasis pb;
    for (std::size_t e1 = 0; e1 + 1 < b1.size(); ++e1) {
        std::vector<double> u, wu;
        map_rule(g1, b1[e1], b1[e1 + 1], u, wu);
        for (std::size_t e2 = 0; e2 + 1 < b2.size(); ++e2) {
            std::vector<double> v, wv;
            map_rule(g2, b2[e2], b2[e2 + 1], v, wv);
            for (std::size_t qa = 0; qa < u.size(); ++qa)
                for (std::size_t qb = 0; qb < v.size(); ++qb) {
                    const auto ge = g.eval(u[qa], v[qb]);
                    eval_tensor(basis, u[qa], v[qb], pb);
                    const Jacobian jit = ge.jac.inverse().transpose();
                    double uh = 0.0;
                    Point gh = Point::Zero();
                    for (std::size_t a = 0; a < pb.dofs.size(); ++a) {
                        uh += coeffs[pb.dofs[a]] * pb.values[a];
                        gh += coeffs[pb.dofs[a]] * (jit * pb.grads[a]);
                    }
                    const double w = wu[qa] * wv[qb] * std::abs(ge.det);
                    const double e = exact(ge.x.x(), ge.x.y()) - uh;
                    err.l2_sq += w * e * e;
                    if (exact_grad) err.h1_semi_sq += w * (exact_grad(ge.x.x(), ge.x.y()) - gh).squaredNorm();
                }
        }
    }
    return err;
}

}  // namespace ietidg
