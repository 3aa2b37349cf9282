#include "ietidg/splines.hpp"

#include "ietidg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ietidg {

KnotVector::KnotVector(int degree, std::vector<double> knots)
    : degree_(degree), knots_(std::move(knots)) {
    if (degree_ < 1 || degree_ > kMaxDegree)
        throw ParameterError("knot vector: degree " + std::to_string(degree_) +
                             " outside supported range [1, 8]");
    const auto p = static_cast<std::size_t>(degree_);
    if (knots_.size() < 2 * (p + 1))
        throw ParameterError("knot vector: fewer than p+1 basis functions");
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (knots_[i] < knots_[i - 1]) throw ParameterError("knot vector: knots decrease");
    for (std::size_t i = 0; i <= p; ++i) {
        if (knots_[i] != 0.0 || knots_[knots_.size() - 1 - i] != 1.0)
            throw ParameterError("knot vector: not p-open on [0, 1]");
    }
    // interior multiplicity at most p keeps the basis continuous
    std::size_t run = 1;
    for (std::size_t i = p + 2; i + p + 1 < knots_.size(); ++i) {
        run = (knots_[i] == knots_[i - 1]) ? run + 1 : 1;
        if (run > p) throw ParameterError("knot vector: interior multiplicity exceeds degree");
    }
}

std::vector<double> KnotVector::breaks() const {
    std::vector<double> b;
    for (double k : knots_)
        if (b.empty() || k != b.back()) b.push_back(k);
    return b;
}

double KnotVector::max_span() const {
    const auto b = breaks();
    double h = 0.0;
    for (std::size_t i = 1; i < b.size(); ++i) h = std::max(h, b[i] - b[i - 1]);
    return h;
}

double KnotVector::min_span() const {
    const auto b = breaks();
    double h = 1.0;
    for (std::size_t i = 1; i < b.size(); ++i) h = std::min(h, b[i] - b[i - 1]);
    return h;
}

int KnotVector::find_span(double x) const {
    const int n = size();
    if (x >= knots_[static_cast<std::size_t>(n)]) return n - 1;
    // last index mu in [p, n-1] with knots[mu] <= x
    auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n, x);
    return static_cast<int>(it - knots_.begin()) - 1;
}

std::vector<double> KnotVector::greville() const {
    std::vector<double> g(static_cast<std::size_t>(size()));
    for (int i = 0; i < size(); ++i) {
        double s = 0.0;
        for (int j = 1; j <= degree_; ++j) s += knots_[static_cast<std::size_t>(i + j)];
        g[static_cast<std::size_t>(i)] = s / degree_;
    }
    return g;
}

KnotVector make_open_knot_vector(int degree, int n_elements, int regularity) {
    if (degree < 1) throw ParameterError("make_open_knot_vector: degree must be >= 1");
    if (n_elements < 1) throw ParameterError("make_open_knot_vector: need at least one element");
    if (regularity < 0 || regularity > degree - 1)
        throw ParameterError("make_open_knot_vector: regularity must lie in [0, p-1]");
    std::vector<double> k(static_cast<std::size_t>(degree + 1), 0.0);
    const int mult = degree - regularity;
    for (int e = 1; e < n_elements; ++e) {
        const double x = static_cast<double>(e) / n_elements;
        for (int m = 0; m < mult; ++m) k.push_back(x);
    }
    for (int i = 0; i <= degree; ++i) k.push_back(1.0);
    return KnotVector(degree, std::move(k));
}

BasisEval eval_basis(const KnotVector& kv, double x) {
    if (!(x >= 0.0 && x <= 1.0))
        throw DomainError("eval_basis: x = " + std::to_string(x) + " outside [0, 1]");
    const int p = kv.degree();
    const auto& t = kv.knots();
    const int mu = kv.find_span(x);
    const auto up = static_cast<std::size_t>(p);

    // Cox-de Boor triangle; ndu[j][r] holds degree-j values, ndu[r][j] (r>j)
    // the knot differences.
    std::vector<double> left(up + 1), right(up + 1);
    std::vector<std::vector<double>> ndu(up + 1, std::vector<double>(up + 1));
    ndu[0][0] = 1.0;
    for (std::size_t j = 1; j <= up; ++j) {
        left[j] = x - t[static_cast<std::size_t>(mu) + 1 - j];
        right[j] = t[static_cast<std::size_t>(mu) + j] - x;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double tmp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        ndu[j][j] = saved;
    }

    BasisEval out;
    out.first = mu - p;
    out.values.resize(up + 1);
    out.derivatives.resize(up + 1);
    for (std::size_t r = 0; r <= up; ++r) out.values[r] = ndu[r][up];
    // first derivative: p * (N_{r,p-1}/(t_{r+p}-t_r) - N_{r+1,p-1}/(t_{r+p+1}-t_{r+1}))
    for (std::size_t r = 0; r <= up; ++r) {
        double d = 0.0;
        if (r >= 1) d += ndu[r - 1][up - 1] / ndu[up][r - 1];
        if (r <= up - 1) d -= ndu[r][up - 1] / ndu[up][r];
        out.derivatives[r] = p * d;
    }
    return out;
}

KnotVector refine_dyadic(const KnotVector& kv, int levels) {
    if (levels < 0) throw ParameterError("refine_dyadic: levels must be >= 0");
    KnotVector cur = kv;
    for (int l = 0; l < levels; ++l) {
        const auto& k = cur.knots();
        const auto b = cur.breaks();
        // interior multiplicity of the existing knots; a single element is
        // refined with maximum smoothness
        const int mult = b.size() > 2 ? static_cast<int>(std::count(k.begin(), k.end(), b[1])) : 1;
        std::vector<double> nk(static_cast<std::size_t>(cur.degree() + 1), 0.0);
        for (std::size_t i = 1; i < b.size(); ++i) {
            const double mid = 0.5 * (b[i - 1] + b[i]);
            for (int m = 0; m < mult; ++m) nk.push_back(mid);
            if (i + 1 < b.size())
                for (int m = 0; m < mult; ++m) nk.push_back(b[i]);
        }
        for (int i = 0; i <= cur.degree(); ++i) nk.push_back(1.0);
        cur = KnotVector(cur.degree(), std::move(nk));
    }
    return cur;
}

DenseMatrix strip_ends(const DenseMatrix& a, bool first, bool last) {
    const Eigen::Index lo = first ? 1 : 0;
    const Eigen::Index n = a.rows() - lo - (last ? 1 : 0);
    return a.block(lo, lo, n, n);
}

GaussRule gauss_legendre(int n) {
    if (n < 1) throw ParameterError("gauss_legendre: need at least one point");
    GaussRule rule;
    rule.points.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    // Newton iteration on the Legendre polynomial P_n on [-1, 1]
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute the derivative at the converged node
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n - 1 - i);
        rule.points[lo] = 0.5 * (1.0 - z);
        rule.points[hi] = 0.5 * (1.0 + z);
        rule.weights[lo] = 0.5 * w;
        rule.weights[hi] = 0.5 * w;
    }
    return rule;
}

void map_rule(const GaussRule& ref, double a, double b, std::vector<double>& points,
              std::vector<double>& weights) {
    const double h = b - a;
    for (std::size_t q = 0; q < ref.points.size(); ++q) {
        points.push_back(a + h * ref.points[q]);
        weights.push_back(h * ref.weights[q]);
    }
}

UnivariateMatrices univariate_matrices(const KnotVector& kv) {
    const int n = kv.size();
    const int p = kv.degree();
    UnivariateMatrices m{DenseMatrix::Zero(n, n), DenseMatrix::Zero(n, n)};
    const GaussRule g = gauss_legendre(p + 1);
    const auto b = kv.breaks();
    for (std::size_t e = 0; e + 1 < b.size(); ++e) {
        std::vector<double> pts, wts;
        map_rule(g, b[e], b[e + 1], pts, wts);
        for (std::size_t q = 0; q < pts.size(); ++q) {
            const BasisEval ev = eval_basis(kv, pts[q]);
            for (int i = 0; i <= p; ++i)
                for (int j = 0; j <= p; ++j) {
                    const auto ui = static_cast<std::size_t>(i);
                    const auto uj = static_cast<std::size_t>(j);
                    m.mass(ev.first + i, ev.first + j) += wts[q] * ev.values[ui] * ev.values[uj];
                    m.stiffness(ev.first + i, ev.first + j) +=
                        wts[q] * ev.derivatives[ui] * ev.derivatives[uj];
                }
        }
    }
    return m;
}

Corner side_corner(Side s, int end) {
    switch (s) {
        case Side::west: return end == 0 ? Corner::sw : Corner::nw;
        case Side::east: return end == 0 ? Corner::se : Corner::ne;
        case Side::south: return end == 0 ? Corner::sw : Corner::se;
        case Side::north: return end == 0 ? Corner::nw : Corner::ne;
    }
    return Corner::sw;
}

std::array<double, 2> corner_param(Corner c) {
    switch (c) {
        case Corner::sw: return {0.0, 0.0};
        case Corner::se: return {1.0, 0.0};
        case Corner::nw: return {0.0, 1.0};
        case Corner::ne: return {1.0, 1.0};
    }
    return {0.0, 0.0};
}

std::array<double, 2> side_point(Side s, double t) {
    switch (s) {
        case Side::west: return {0.0, t};
        case Side::east: return {1.0, t};
        case Side::south: return {t, 0.0};
        case Side::north: return {t, 1.0};
    }
    return {0.0, 0.0};
}

const char* side_name(Side s) {
    switch (s) {
        case Side::west: return "west";
        case Side::east: return "east";
        case Side::south: return "south";
        case Side::north: return "north";
    }
    return "?";
}

TensorBasis::TensorBasis(KnotVector kv1, KnotVector kv2, SideSet dirichlet)
    : kv1_(std::move(kv1)), kv2_(std::move(kv2)), dirichlet_(dirichlet) {
    lo_ = {has_side(dirichlet, Side::west) ? 1 : 0, has_side(dirichlet, Side::south) ? 1 : 0};
    hi_ = {kv1_.size() - (has_side(dirichlet, Side::east) ? 1 : 0),
           kv2_.size() - (has_side(dirichlet, Side::north) ? 1 : 0)};
    if (hi_[0] <= lo_[0] || hi_[1] <= lo_[1])
        throw ParameterError("tensor basis: Dirichlet reduction leaves no functions");
}

int TensorBasis::dof(int i, int j) const {
    if (i < lo_[0] || i >= hi_[0] || j < lo_[1] || j >= hi_[1]) return -1;
    return (i - lo_[0]) * reduced_size(1) + (j - lo_[1]);
}

std::array<int, 2> TensorBasis::tensor_index(int dof) const {
    const int n2 = reduced_size(1);
    return {dof / n2 + lo_[0], dof % n2 + lo_[1]};
}

std::vector<std::array<int, 2>> TensorBasis::side_dofs(Side s) const {
    std::vector<std::array<int, 2>> out;
    const int nd = normal_direction(s);
    const int td = 1 - nd;
    const int normal_index = is_upper(s) ? full_size(nd) - 1 : 0;
    for (int t = 0; t < full_size(td); ++t) {
        const int d = nd == 0 ? dof(normal_index, t) : dof(t, normal_index);
        if (d >= 0) out.push_back({t, d});
    }
    return out;
}

}  // namespace ietidg
