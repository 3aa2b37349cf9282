#include "ietidg/geometry.hpp"

#include "ietidg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ietidg {

GeometryMap::GeometryMap(KnotVector kv1, KnotVector kv2, std::vector<Point> control_points)
    : kv1_(std::move(kv1)), kv2_(std::move(kv2)), cps_(std::move(control_points)) {
    if (static_cast<int>(cps_.size()) != kv1_.size() * kv2_.size())
        throw ParameterError("geometry map: control point count does not match the basis");
}

GeometryMap::Eval GeometryMap::eval(double u, double v) const {
    const BasisEval e1 = eval_basis(kv1_, u);
    const BasisEval e2 = eval_basis(kv2_, v);
    const int n2 = kv2_.size();
    Eval out{Point::Zero(), Jacobian::Zero(), 0.0};
    for (std::size_t a = 0; a < e1.values.size(); ++a)
        for (std::size_t b = 0; b < e2.values.size(); ++b) {
            const Point& c =
                cps_[static_cast<std::size_t>((e1.first + static_cast<int>(a)) * n2 + e2.first +
                                              static_cast<int>(b))];
            out.x += e1.values[a] * e2.values[b] * c;
            out.jac.col(0) += e1.derivatives[a] * e2.values[b] * c;
            out.jac.col(1) += e1.values[a] * e2.derivatives[b] * c;
        }
    out.det = out.jac.determinant();
    const double scale = out.jac.col(0).norm() * out.jac.col(1).norm();
    if (!(std::abs(out.det) > 1e-12 * scale) || scale == 0.0) {
        std::ostringstream os;
        os << "geometry map: singular Jacobian at (" << u << ", " << v << ")";
        throw GeometryError(os.str(), u, v);
    }
    return out;
}

Point GeometryMap::point(double u, double v) const {
    const BasisEval e1 = eval_basis(kv1_, u);
    const BasisEval e2 = eval_basis(kv2_, v);
    const int n2 = kv2_.size();
    Point x = Point::Zero();
    for (std::size_t a = 0; a < e1.values.size(); ++a)
        for (std::size_t b = 0; b < e2.values.size(); ++b)
            x += e1.values[a] * e2.values[b] *
                 cps_[static_cast<std::size_t>((e1.first + static_cast<int>(a)) * n2 + e2.first +
                                               static_cast<int>(b))];
    return x;
}

double GeometryMap::diameter() const {
    Point lo = cps_.front(), hi = cps_.front();
    for (const auto& c : cps_) {
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
    }
    return (hi - lo).norm();
}

GeometryMap bilinear_patch(const Point& p00, const Point& p10, const Point& p01,
                           const Point& p11) {
    const KnotVector kv(1, {0.0, 0.0, 1.0, 1.0});
    return GeometryMap(kv, kv, {p00, p01, p10, p11});
}

// ---------------------------------------------------------------------------
// topology

std::vector<int> PatchTopology::neighbors(int k) const {
    std::vector<int> out;
    for (Side s : kAllSides) {
        const int i = interface_on(k, s);
        if (i < 0) continue;
        const Interface& f = interfaces_[static_cast<std::size_t>(i)];
        out.push_back(f.k == k ? f.l : f.k);
    }
    return out;
}

int PatchTopology::interface_on(int k, Side s) const {
    return side_interface_[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)];
}

int PatchTopology::corner_id(int k, Corner c) const {
    return corner_ids_[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
}

namespace {

Point side_eval(const GeometryMap& g, Side s, double t) {
    const auto uv = side_point(s, t);
    return g.point(uv[0], uv[1]);
}

/// Distance from x to a side curve and the curve parameter of the closest
/// sample (refined by golden-section search).
std::pair<double, double> closest_on_side(const GeometryMap& g, Side s, const Point& x) {
    constexpr int n = 64;
    int best = 0;
    double best_d = (side_eval(g, s, 0.0) - x).norm();
    for (int i = 1; i <= n; ++i) {
        const double d = (side_eval(g, s, static_cast<double>(i) / n) - x).norm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    if (best_d > 0.25 * g.diameter()) return {best_d, static_cast<double>(best) / n};
    double a = std::max(0.0, (best - 1.0) / n), b = std::min(1.0, (best + 1.0) / n);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 80; ++it) {
        const double c = b - phi * (b - a), d = a + phi * (b - a);
        if ((side_eval(g, s, c) - x).norm() < (side_eval(g, s, d) - x).norm())
            b = d;
        else
            a = c;
    }
    const double t = 0.5 * (a + b);
    const double dist = (side_eval(g, s, t) - x).norm();
    return dist < best_d ? std::make_pair(dist, t)
                         : std::make_pair(best_d, static_cast<double>(best) / n);
}

}  // namespace

PatchTopology compute_topology(const std::vector<GeometryMap>& patches, double rel_tol) {
    const int np = static_cast<int>(patches.size());
    PatchTopology topo;
    topo.dirichlet_.assign(static_cast<std::size_t>(np), 0);
    topo.side_interface_.assign(static_cast<std::size_t>(np), {-1, -1, -1, -1});
    topo.corner_ids_.assign(static_cast<std::size_t>(np), {-1, -1, -1, -1});
    if (np == 0) return topo;

    std::vector<double> diam(static_cast<std::size_t>(np));
    for (int k = 0; k < np; ++k) diam[static_cast<std::size_t>(k)] = patches[static_cast<std::size_t>(k)].diameter();
    auto tol_for = [&](int k, int l) {
        return rel_tol * std::max(diam[static_cast<std::size_t>(k)], diam[static_cast<std::size_t>(l)]);
    };

    // corners by geometric coincidence
    for (int k = 0; k < np; ++k) {
        for (Corner c : kAllCorners) {
            const auto uv = corner_param(c);
            const Point x = patches[static_cast<std::size_t>(k)].point(uv[0], uv[1]);
            int found = -1;
            for (std::size_t i = 0; i < topo.corners_.size(); ++i) {
                const auto& pc = topo.corners_[i];
                if ((pc.point - x).norm() <= tol_for(k, pc.incidences.front().patch)) {
                    found = static_cast<int>(i);
                    break;
                }
            }
            if (found < 0) {
                found = static_cast<int>(topo.corners_.size());
                topo.corners_.push_back({x, {}});
            }
            topo.corners_[static_cast<std::size_t>(found)].incidences.push_back({k, c});
            topo.corner_ids_[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = found;
        }
    }

    // T-junctions and partial overlaps: a corner strictly inside another
    // patch's side
    for (const auto& pc : topo.corners_) {
        for (int l = 0; l < np; ++l) {
            bool own = false;
            for (const auto& inc : pc.incidences) own = own || inc.patch == l;
            if (own) continue;
            const auto& g = patches[static_cast<std::size_t>(l)];
            for (Side s : kAllSides) {
                const auto [dist, t] = closest_on_side(g, s, pc.point);
                const double tol = tol_for(l, pc.incidences.front().patch);
                if (dist <= std::max(tol, 1e-9 * diam[static_cast<std::size_t>(l)]) && t > 1e-6 &&
                    t < 1.0 - 1e-6) {
                    std::ostringstream os;
                    os << "topology: corner (" << pc.point.x() << ", " << pc.point.y()
                       << ") lies inside side " << side_name(s) << " of patch " << l
                       << " (T-junction)";
                    throw GeometryError(os.str());
                }
            }
        }
    }

    // interfaces: sides whose endpoints are the same physical corners
    for (int k = 0; k < np; ++k) {
        for (Side sk : kAllSides) {
            const int a0 = topo.corner_id(k, side_corner(sk, 0));
            const int a1 = topo.corner_id(k, side_corner(sk, 1));
            for (int l = k + 1; l < np; ++l) {
                for (Side sl : kAllSides) {
                    const int b0 = topo.corner_id(l, side_corner(sl, 0));
                    const int b1 = topo.corner_id(l, side_corner(sl, 1));
                    bool same;
                    if (a0 == b0 && a1 == b1)
                        same = true;
                    else if (a0 == b1 && a1 == b0)
                        same = false;
                    else
                        continue;
                    const auto& gk = patches[static_cast<std::size_t>(k)];
                    const auto& gl = patches[static_cast<std::size_t>(l)];
                    const double tol = tol_for(k, l);
                    bool match = true;
                    for (int q = 0; q <= 50 && match; ++q) {
                        const double t = q / 50.0;
                        match = (side_eval(gk, sk, t) - side_eval(gl, sl, same ? t : 1.0 - t)).norm() <= tol;
                    }
                    if (!match) {
                        std::ostringstream os;
                        os << "topology: patches " << k << " and " << l
                           << " share both end points of an edge but the edge "
                              "parameterizations do not coincide";
                        throw GeometryError(os.str());
                    }
                    if (topo.interface_on(k, sk) >= 0 || topo.interface_on(l, sl) >= 0)
                        throw GeometryError("topology: side shared by more than two patches");
                    const int idx = static_cast<int>(topo.interfaces_.size());
                    topo.interfaces_.push_back({k, l, sk, sl, same});
                    topo.side_interface_[static_cast<std::size_t>(k)][static_cast<std::size_t>(sk)] = idx;
                    topo.side_interface_[static_cast<std::size_t>(l)][static_cast<std::size_t>(sl)] = idx;
                }
            }
        }
    }

    // two patches meeting in more than one vertex must share an edge
    for (int k = 0; k < np; ++k)
        for (int l = k + 1; l < np; ++l) {
            int shared = 0;
            for (Corner c : kAllCorners)
                for (Corner d : kAllCorners)
                    shared += topo.corner_id(k, c) == topo.corner_id(l, d) ? 1 : 0;
            bool edge = false;
            for (Side s : kAllSides) {
                const int i = topo.interface_on(k, s);
                if (i >= 0) {
                    const auto& f = topo.interfaces_[static_cast<std::size_t>(i)];
                    edge = edge || f.k == l || f.l == l;
                }
            }
            if (shared > 2 || (shared == 2 && !edge)) {
                std::ostringstream os;
                os << "topology: patches " << k << " and " << l
                   << " intersect in neither a common edge nor a single vertex";
                throw GeometryError(os.str());
            }
        }

    for (int k = 0; k < np; ++k)
        for (Side s : kAllSides)
            if (topo.interface_on(k, s) < 0)
                topo.dirichlet_[static_cast<std::size_t>(k)] =
                    with_side(topo.dirichlet_[static_cast<std::size_t>(k)], s);
    return topo;
}

// ---------------------------------------------------------------------------
// generators

MultiPatch quarter_annulus_multipatch(int n_angular, int n_radial, double r_inner,
                                      double r_outer) {
    if (n_angular < 1 || n_radial < 1)
        throw ParameterError("quarter annulus: patch counts must be >= 1");
    if (!(r_inner > 0.0) || !(r_outer > r_inner))
        throw ParameterError("quarter annulus: need 0 < r_inner < r_outer");
    const KnotVector kv(2, {0.0, 0.0, 0.0, 1.0, 1.0, 1.0});
    MultiPatch mp;
    const double dtheta = 0.5 * std::numbers::pi / n_angular;
    const double dr = (r_outer - r_inner) / n_radial;
    for (int b = 0; b < n_radial; ++b)
        for (int a = 0; a < n_angular; ++a) {
            const double t0 = a * dtheta;
            const double r0 = r_inner + b * dr;
            mp.patches.push_back(interpolate_map(kv, kv, [&](double u, double v) {
                const double th = t0 + u * dtheta;
                const double r = r0 + v * dr;
                return Point(r * std::cos(th), r * std::sin(th));
            }));
            mp.grid_position.push_back({a, b});
        }
    mp.topology = compute_topology(mp.patches);
    return mp;
}

MultiPatch unit_square_multipatch(int nx, int ny) {
    if (nx < 1 || ny < 1) throw ParameterError("unit square: patch counts must be >= 1");
    MultiPatch mp;
    for (int b = 0; b < ny; ++b)
        for (int a = 0; a < nx; ++a) {
            const double x0 = static_cast<double>(a) / nx, x1 = static_cast<double>(a + 1) / nx;
            const double y0 = static_cast<double>(b) / ny, y1 = static_cast<double>(b + 1) / ny;
            mp.patches.push_back(
                bilinear_patch(Point(x0, y0), Point(x1, y0), Point(x0, y1), Point(x1, y1)));
            mp.grid_position.push_back({a, b});
        }
    mp.topology = compute_topology(mp.patches);
    return mp;
}

PatchSizes patch_sizes(const GeometryMap& map, const TensorBasis& basis) {
    PatchSizes s{};
    s.H = map.diameter();
    s.h_hat = basis.mesh_size();
    s.h = s.h_hat * s.H;
    return s;
}

JacobianBounds measure_jacobian_bounds(const GeometryMap& map, int samples) {
    const double h = map.diameter();
    JacobianBounds b{0.0, 0.0};
    for (int i = 0; i < samples; ++i)
        for (int j = 0; j < samples; ++j) {
            const auto e = map.eval(static_cast<double>(i) / (samples - 1),
                                    static_cast<double>(j) / (samples - 1));
            const Eigen::JacobiSVD<Jacobian> svd(e.jac);
            const auto sv = svd.singularValues();
            b.grad_over_h = std::max(b.grad_over_h, sv(0) / h);
            b.inv_times_h = std::max(b.inv_times_h, h / sv(1));
        }
    return b;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json multipatch_to_json(const MultiPatch& mp) {
    nlohmann::json doc;
    doc["patches"] = nlohmann::json::array();
    for (const auto& g : mp.patches) {
        nlohmann::json p;
        p["degree"] = {g.knots(0).degree(), g.knots(1).degree()};
        p["knots"] = {g.knots(0).knots(), g.knots(1).knots()};
        nlohmann::json cps = nlohmann::json::array();
        for (const auto& c : g.control_points()) cps.push_back({c.x(), c.y()});
        p["control_points"] = std::move(cps);
        doc["patches"].push_back(std::move(p));
    }
    return doc;
}

MultiPatch multipatch_from_json(const nlohmann::json& doc) {
    MultiPatch mp;
    try {
        for (const auto& p : doc.at("patches")) {
            const auto deg = p.at("degree").get<std::array<int, 2>>();
            const auto knots = p.at("knots").get<std::array<std::vector<double>, 2>>();
            std::vector<Point> cps;
            for (const auto& c : p.at("control_points")) {
                const auto xy = c.get<std::array<double, 2>>();
                cps.emplace_back(xy[0], xy[1]);
            }
            mp.patches.emplace_back(KnotVector(deg[0], knots[0]), KnotVector(deg[1], knots[1]),
                                    std::move(cps));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("multipatch json: ") + e.what());
    }
    mp.topology = compute_topology(mp.patches);
    return mp;
}

}  // namespace ietidg
