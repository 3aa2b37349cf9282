#pragma once

#include "ietidg/linalg.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace ietidg {

inline constexpr int kMaxDegree = 8;

/// p-open knot vector on [0, 1].
class KnotVector {
public:
    KnotVector() = default;

    /// Validates: 1 <= p <= kMaxDegree, nondecreasing, first and last p+1
    /// knots equal 0 and 1, and at least p+1 basis functions.
    KnotVector(int degree, std::vector<double> knots);

    int degree() const noexcept { return degree_; }
    const std::vector<double>& knots() const noexcept { return knots_; }
    /// Number of basis functions n = |knots| - p - 1.
    int size() const noexcept { return static_cast<int>(knots_.size()) - degree_ - 1; }

    /// Distinct knot values (element boundaries), ascending.
    std::vector<double> breaks() const;
    int num_elements() const { return static_cast<int>(breaks().size()) - 1; }

    /// Largest nonzero span width (h-hat).
    double max_span() const;
    double min_span() const;
    /// max_span / min_span; the measured quasi-uniformity constant.
    double quasi_uniformity_ratio() const { return max_span() / min_span(); }

    /// Index mu with knots[mu] <= x < knots[mu+1]; x == 1 maps to the last
    /// nonzero span.
    int find_span(double x) const;

    std::vector<double> greville() const;

    bool operator==(const KnotVector& other) const = default;

private:
    int degree_ = 0;
    std::vector<double> knots_;
};

struct BasisEval {
    int first = 0;                    ///< index of the first nonzero function
    std::vector<double> values;       ///< p+1 values
    std::vector<double> derivatives;  ///< p+1 first derivatives
};

/// Open knot vector with n_elements uniform spans and interior multiplicity
/// p - regularity.
KnotVector make_open_knot_vector(int degree, int n_elements, int regularity);

/// Values and first derivatives of the p+1 B-splines supported at x.
BasisEval eval_basis(const KnotVector& kv, double x);

/// Bisects every nonzero span `levels` times, keeping interior multiplicity.
KnotVector refine_dyadic(const KnotVector& kv, int levels);

struct UnivariateMatrices {
    DenseMatrix mass;
    DenseMatrix stiffness;
};

/// Galerkin mass and stiffness matrices of the full univariate basis.
UnivariateMatrices univariate_matrices(const KnotVector& kv);

/// Removes the first and/or last row and column.
DenseMatrix strip_ends(const DenseMatrix& a, bool first, bool last);

struct GaussRule {
    std::vector<double> points;   ///< on [0, 1]
    std::vector<double> weights;  ///< sum to 1
};

/// n-point Gauss-Legendre rule on [0, 1].
GaussRule gauss_legendre(int n);

/// Tensor rule on [a, b] built from the reference rule.
void map_rule(const GaussRule& ref, double a, double b, std::vector<double>& points,
              std::vector<double>& weights);

// Patch sides in the parameter domain: west u=0, east u=1, south v=0, north v=1.
enum class Side : std::uint8_t { west = 0, east = 1, south = 2, north = 3 };
// Corners: sw (0,0), se (1,0), nw (0,1), ne (1,1).
enum class Corner : std::uint8_t { sw = 0, se = 1, nw = 2, ne = 3 };

inline constexpr std::array<Side, 4> kAllSides{Side::west, Side::east, Side::south, Side::north};
inline constexpr std::array<Corner, 4> kAllCorners{Corner::sw, Corner::se, Corner::nw,
                                                   Corner::ne};

/// Parametric direction (0 = u, 1 = v) normal to a side.
inline int normal_direction(Side s) { return (s == Side::west || s == Side::east) ? 0 : 1; }
inline int tangential_direction(Side s) { return 1 - normal_direction(s); }
/// True for the side at parameter value 1 of its normal direction.
inline bool is_upper(Side s) { return s == Side::east || s == Side::north; }
/// Corner at tangential parameter 0 (end = 0) or 1 (end = 1) of a side.
Corner side_corner(Side s, int end);
/// Parameter coordinates of a corner.
std::array<double, 2> corner_param(Corner c);
/// Parameter point on a side at tangential coordinate t.
std::array<double, 2> side_point(Side s, double t);
const char* side_name(Side s);

using SideSet = std::uint8_t;  ///< bit mask over Side values
inline bool has_side(SideSet set, Side s) { return (set >> static_cast<int>(s)) & 1U; }
inline SideSet with_side(SideSet set, Side s) {
    return static_cast<SideSet>(set | (1U << static_cast<int>(s)));
}

/// Tensor-product spline space with Dirichlet reduction. Active dofs are
/// numbered lexicographically over the reduced grid: dof = i * n2r + j where
/// i runs over direction 1 (u) and j over direction 2 (v).
class TensorBasis {
public:
    TensorBasis() = default;
    TensorBasis(KnotVector kv1, KnotVector kv2, SideSet dirichlet = 0);

    const KnotVector& knots(int dir) const { return dir == 0 ? kv1_ : kv2_; }
    SideSet dirichlet() const noexcept { return dirichlet_; }
    int degree(int dir) const { return knots(dir).degree(); }
    int max_degree() const { return std::max(kv1_.degree(), kv2_.degree()); }

    /// Univariate basis count in one direction, before reduction.
    int full_size(int dir) const { return knots(dir).size(); }
    /// First active univariate index in a direction (0 or 1).
    int first_active(int dir) const { return lo_[static_cast<std::size_t>(dir)]; }
    /// One past the last active univariate index.
    int end_active(int dir) const { return hi_[static_cast<std::size_t>(dir)]; }
    int reduced_size(int dir) const { return end_active(dir) - first_active(dir); }

    int num_dofs() const { return reduced_size(0) * reduced_size(1); }

    /// Active dof of tensor index (i, j) or -1 if removed by Dirichlet.
    int dof(int i, int j) const;
    /// Tensor index of an active dof.
    std::array<int, 2> tensor_index(int dof) const;

    /// Active dofs whose functions are nonzero on a side, ordered by the
    /// tangential univariate index; entries hold (tangential index, dof).
    std::vector<std::array<int, 2>> side_dofs(Side s) const;

    /// Max span width over both directions.
    double mesh_size() const { return std::max(kv1_.max_span(), kv2_.max_span()); }

private:
    KnotVector kv1_, kv2_;
    SideSet dirichlet_ = 0;
    std::array<int, 2> lo_{0, 0}, hi_{0, 0};
};

}  // namespace ietidg
