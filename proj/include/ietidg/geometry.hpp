#pragma once

#include "ietidg/splines.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <array>
#include <string>
#include <vector>

namespace ietidg {

using Point = Eigen::Vector2d;
using Jacobian = Eigen::Matrix2d;

/// B-spline patch parameterization G_k: [0,1]^2 -> R^2.
class GeometryMap {
public:
    struct Eval {
        Point x;
        Jacobian jac;  ///< jac(r, c) = d x_r / d xi_c
        double det;
    };

    GeometryMap() = default;
    /// Control points are indexed i * n2 + j like TensorBasis dofs.
    GeometryMap(KnotVector kv1, KnotVector kv2, std::vector<Point> control_points);

    const KnotVector& knots(int dir) const { return dir == 0 ? kv1_ : kv2_; }
    const std::vector<Point>& control_points() const noexcept { return cps_; }

    /// Physical point, Jacobian and its determinant. Throws GeometryError if
    /// the Jacobian is singular at (u, v).
    Eval eval(double u, double v) const;
    Point point(double u, double v) const;

    /// Diameter proxy H_k: diagonal of the control-point bounding box.
    double diameter() const;

private:
    KnotVector kv1_, kv2_;
    std::vector<Point> cps_;
};

/// Bilinear patch with corners p00 (u=0,v=0), p10, p01, p11.
GeometryMap bilinear_patch(const Point& p00, const Point& p10, const Point& p01,
                           const Point& p11);

/// Degree-(p1,p2) interpolant at the Greville points of an arbitrary map,
/// on the given knot vectors.
template <class F>
GeometryMap interpolate_map(const KnotVector& kv1, const KnotVector& kv2, F&& f);

struct Interface {
    int k = 0, l = 0;
    Side side_k = Side::west, side_l = Side::west;
    /// True if both side parameterizations traverse the edge in the same
    /// direction, i.e. G_k(side_k, t) == G_l(side_l, t).
    bool same_orientation = true;
};

struct CornerIncidence {
    int patch = 0;
    Corner corner = Corner::sw;
};

struct PhysicalCorner {
    Point point;
    std::vector<CornerIncidence> incidences;
};

/// Interfaces, corners and boundary sides of a multi-patch domain.
class PatchTopology {
public:
    int num_patches() const { return static_cast<int>(dirichlet_.size()); }
    const std::vector<Interface>& interfaces() const noexcept { return interfaces_; }
    const std::vector<PhysicalCorner>& corners() const noexcept { return corners_; }
    SideSet dirichlet_sides(int k) const { return dirichlet_[static_cast<std::size_t>(k)]; }

    /// Neighbor patches sharing an edge with k, in the order of k's sides
    /// (west, east, south, north).
    std::vector<int> neighbors(int k) const;
    /// Interface index on side s of patch k, or -1 on the boundary.
    int interface_on(int k, Side s) const;
    /// Physical corner index of a patch corner.
    int corner_id(int k, Corner c) const;

    friend PatchTopology compute_topology(const std::vector<GeometryMap>& patches,
                                          double rel_tol);

private:
    std::vector<Interface> interfaces_;
    std::vector<PhysicalCorner> corners_;
    std::vector<SideSet> dirichlet_;
    std::vector<std::array<int, 4>> side_interface_;
    std::vector<std::array<int, 4>> corner_ids_;
};

/// Derives the topology from the geometry. Sides are matched when the two
/// side curves coincide at 50 sample points within rel_tol * H; unmatched
/// sides form the Dirichlet boundary. Throws GeometryError on configurations
/// violating the conforming-layout assumption (T-junctions, partial overlaps)
/// or on coincident edges with incompatible parameterizations.
PatchTopology compute_topology(const std::vector<GeometryMap>& patches,
                               double rel_tol = 1e-10);

struct MultiPatch {
    std::vector<GeometryMap> patches;
    PatchTopology topology;
    /// Logical (column, row) position for grid-generated layouts; empty
    /// otherwise. Used only for the patch coloring scheme.
    std::vector<std::array<int, 2>> grid_position;
};

/// n_angular x n_radial patches approximating the quarter annulus
/// r_inner <= |x| <= r_outer, x, y >= 0. Each patch is the biquadratic
/// single-element Greville interpolant of the polar map. Patch index is
/// b * n_angular + a for angular index a and radial index b; u runs in the
/// angular and v in the radial direction.
MultiPatch quarter_annulus_multipatch(int n_angular, int n_radial, double r_inner,
                                      double r_outer);

/// Unit square split into nx x ny affine patches; patch index b * nx + a.
MultiPatch unit_square_multipatch(int nx, int ny);

struct PatchSizes {
    double H;      ///< patch diameter proxy
    double h_hat;  ///< parameter mesh size
    double h;      ///< physical mesh size h_hat * H
};

PatchSizes patch_sizes(const GeometryMap& map, const TensorBasis& basis);

/// Measured proxies of the geometry-regularity constant:
/// sup |grad G| / H and sup |grad G^{-1}| * H over a sample grid.
struct JacobianBounds {
    double grad_over_h;
    double inv_times_h;
    double c1() const { return std::max(grad_over_h, inv_times_h); }
};
JacobianBounds measure_jacobian_bounds(const GeometryMap& map, int samples = 21);

/// JSON document: {"patches": [{"degree": [p1,p2], "knots": [[...],[...]],
/// "control_points": [[x,y], ...]}, ...]}. Topology is recomputed on load.
nlohmann::json multipatch_to_json(const MultiPatch& mp);
MultiPatch multipatch_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------

template <class F>
GeometryMap interpolate_map(const KnotVector& kv1, const KnotVector& kv2, F&& f) {
    const auto g1 = kv1.greville();
    const auto g2 = kv2.greville();
    const int n1 = kv1.size();
    const int n2 = kv2.size();
    DenseMatrix c1 = DenseMatrix::Zero(n1, n1), c2 = DenseMatrix::Zero(n2, n2);
    for (int i = 0; i < n1; ++i) {
        const BasisEval e = eval_basis(kv1, g1[static_cast<std::size_t>(i)]);
        for (int a = 0; a <= kv1.degree(); ++a) c1(i, e.first + a) = e.values[static_cast<std::size_t>(a)];
    }
    for (int j = 0; j < n2; ++j) {
        const BasisEval e = eval_basis(kv2, g2[static_cast<std::size_t>(j)]);
        for (int a = 0; a <= kv2.degree(); ++a) c2(j, e.first + a) = e.values[static_cast<std::size_t>(a)];
    }
    DenseMatrix vx(n1, n2), vy(n1, n2);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            const Point p = f(g1[static_cast<std::size_t>(i)], g2[static_cast<std::size_t>(j)]);
            vx(i, j) = p.x();
            vy(i, j) = p.y();
        }
    // C1 X C2^T = V
    const Eigen::PartialPivLU<DenseMatrix> lu1(c1), lu2(c2);
    const DenseMatrix cx = lu2.solve(lu1.solve(vx).transpose()).transpose();
    const DenseMatrix cy = lu2.solve(lu1.solve(vy).transpose()).transpose();
    std::vector<Point> cps(static_cast<std::size_t>(n1 * n2));
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) cps[static_cast<std::size_t>(i * n2 + j)] = Point(cx(i, j), cy(i, j));
    return GeometryMap(kv1, kv2, std::move(cps));
}

}  // namespace ietidg
