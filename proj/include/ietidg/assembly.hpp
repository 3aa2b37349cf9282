#pragma once

#include "ietidg/geometry.hpp"
#include "ietidg/linalg.hpp"
#include "ietidg/splines.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ietidg {

using SourceFunction = std::function<double(double, double)>;

/// Default interior penalty 2(p+1)^2, or the override when given.
double choose_penalty(int p, std::optional<double> override_delta = std::nullopt);

struct DGConfig {
    double delta = 18.0;
    /// Gauss points per span are p+1+quad_extra.
    int quad_extra = 0;
};

/// Geometry plus one Dirichlet-reduced tensor basis per patch.
struct Discretization {
    MultiPatch geometry;
    std::vector<TensorBasis> bases;
    std::vector<PatchSizes> sizes;
    DGConfig config;

    int num_patches() const { return static_cast<int>(bases.size()); }
    /// h_kl = min(h_k, h_l)
    double physical_interface_size(int k, int l) const;
    /// parameter analogue min(h_hat_k, h_hat_l)
    double parameter_interface_size(int k, int l) const;
};

/// Builds the bases from per-patch knot vector pairs; Dirichlet sides come
/// from the topology.
Discretization make_discretization(MultiPatch geometry,
                                   const std::vector<std::array<KnotVector, 2>>& knots,
                                   DGConfig config);

/// Copy of a neighbor's trace space stored on patch k.
struct TraceBlock {
    int interface = -1;
    int neighbor = -1;
    Side side = Side::west;           ///< side of patch k
    Side neighbor_side = Side::west;  ///< side of the neighbor
    bool same_orientation = true;
    KnotVector knots;  ///< neighbor's tangential knot vector
    int first = 0;     ///< first active univariate index (neighbor numbering)
    int end = 0;       ///< one past the last active index
    int offset = 0;    ///< position of the block in the raw extended ordering

    int size() const { return end - first; }
    /// Neighbor tangential parameter for parameter s along patch k's side.
    double neighbor_param(double s) const { return same_orientation ? s : 1.0 - s; }
};

enum class DofKind { interior, boundary, corner };

/// Patch space times the copies of all neighbor trace spaces.
///
/// The raw ordering lists the patch dofs followed by the trace blocks in
/// side order. The solver ordering puts interior dofs first, then boundary
/// (B) dofs, then corner (C) dofs. C holds the active patch corner functions
/// and the active end point functions of the trace blocks; every C dof is
/// the value at a physical corner of the patch that owns the function.
class ExtendedSpace {
public:
    ExtendedSpace() = default;
    ExtendedSpace(const Discretization& disc, int k);

    int patch() const noexcept { return patch_; }
    const TensorBasis& basis() const noexcept { return basis_; }
    const std::vector<TraceBlock>& traces() const noexcept { return traces_; }
    /// Trace block on side s or nullptr.
    const TraceBlock* trace_on(Side s) const;

    int num_patch_dofs() const { return basis_.num_dofs(); }
    int num_dofs() const { return static_cast<int>(order_.size()); }
    int num_interior() const { return n_i_; }
    int num_boundary() const { return n_b_; }
    int num_corner() const { return num_dofs() - n_i_ - n_b_; }
    int num_delta() const { return n_i_ + n_b_; }
    int num_gamma() const { return num_dofs() - n_i_; }

    /// Raw index of a solver-ordered dof, and the inverse map.
    int raw_index(int pos) const { return order_[static_cast<std::size_t>(pos)]; }
    int position(int raw) const { return position_[static_cast<std::size_t>(raw)]; }
    DofKind kind(int pos) const;
    /// Physical corner of a C dof, c in [0, num_corner()).
    int corner_point(int c) const { return corner_points_[static_cast<std::size_t>(c)]; }
    /// Patch whose function the C dof copies (the patch itself or a neighbor).
    int corner_owner(int c) const { return corner_owners_[static_cast<std::size_t>(c)]; }

    /// Raw index of the trace dof with neighbor tangential index t, or -1.
    int trace_raw(const TraceBlock& b, int t) const;

    /// Raw indices of the patch-basis C dofs, ascending.
    const std::vector<int>& patch_corner_raw() const noexcept { return patch_corner_raw_; }

    /// Permutes a raw-ordered vector into solver order and back.
    Vector to_solver(const Vector& raw) const;
    Vector to_raw(const Vector& solver) const;

private:
    int patch_ = -1;
    TensorBasis basis_;
    std::vector<TraceBlock> traces_;
    std::vector<int> order_, position_;
    std::vector<int> corner_points_, corner_owners_;
    std::vector<int> patch_corner_raw_;
    int n_i_ = 0, n_b_ = 0;
};

/// Local SIPG system in solver ordering.
struct LocalSystem {
    SparseMatrix a;  ///< a + m + r
    Vector f;
    SparseMatrix d;  ///< a + r (localized dG scalar product)
    SparseMatrix r;  ///< penalty part only
};

LocalSystem assemble_local(const Discretization& disc, const ExtendedSpace& space,
                           const SourceFunction& f);

/// L2 projection of patch k's own trace into the neighbor trace block.
class EdgeProjection {
public:
    EdgeProjection() = default;
    EdgeProjection(const ExtendedSpace& space, const TraceBlock& block);

    /// Patch side dofs (raw patch indices) in tangential order.
    const std::vector<int>& side_dofs() const noexcept { return side_dofs_; }
    const DenseMatrix& edge_mass() const noexcept { return edge_mass_; }
    /// rows: trace block functions, cols: patch side functions
    const DenseMatrix& mixed_mass() const noexcept { return mixed_; }

    /// Trace-block coefficients of the projection of the side trace.
    Vector apply(const Vector& side_coeffs) const;
    Vector apply_transpose(const Vector& trace_coeffs) const;
    DenseMatrix matrix() const;

private:
    std::vector<int> side_dofs_;
    DenseMatrix edge_mass_, mixed_;
    DenseCholesky chol_;
};

/// Parameter-domain surrogate matrices of one patch.
struct ParameterMatrices {
    // Kronecker factors of the patch surrogate on the reduced patch basis
    DenseMatrix m1, k1, m2, k2;
    double alpha = 0.0;
    /// One weighted edge mass block per trace block.
    std::vector<DenseMatrix> trace_mass;
    /// Parameter-domain dG scalar product in raw ordering.
    SparseMatrix d_hat;
    /// Parameter-domain mass of the patch basis.
    SparseMatrix mass_hat;
    std::vector<EdgeProjection> projections;

    /// K1 x M2 + M1 x K2 + alpha M1 x M2, formed densely (tests only).
    DenseMatrix dense_d1() const;
};

ParameterMatrices assemble_parameter_matrices(const Discretization& disc,
                                              const ExtendedSpace& space);

/// Extended coefficient vector (raw ordering) of patch k built from the
/// global patch-wise coefficients: the trace blocks take the neighbor's
/// boundary coefficients.
Vector extend_from_patches(const Discretization& disc, const ExtendedSpace& space,
                           const std::vector<Vector>& patch_coeffs);

using GradientFunction = std::function<Point(double, double)>;

struct PatchError {
    double l2_sq = 0.0;
    double h1_semi_sq = 0.0;
};

/// Squared L2 and H1-seminorm errors of a patch function against an exact
/// solution, with p+3 Gauss points per span.
PatchError patch_error(const Discretization& disc, int k, const Vector& coeffs,
                       const SourceFunction& exact, const GradientFunction& exact_grad);

}  // namespace ietidg
