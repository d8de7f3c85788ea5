#include "kv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace kv {

double norm(Point2 p) { return std::hypot(p.x1, p.x2); }

BoundaryCase parse_boundary_case(const std::string& id) {
    if (id == "B1") return BoundaryCase::B1;
    if (id == "B2") return BoundaryCase::B2;
    if (id == "B3") return BoundaryCase::B3;
    throw GeometryError("unknown boundary case '" + id + "' (expected B1, B2 or B3)");
}

AdmittanceCase parse_admittance_case(const std::string& id) {
    if (id == "A1") return AdmittanceCase::A1;
    if (id == "A2") return AdmittanceCase::A2;
    if (id == "A3") return AdmittanceCase::A3;
    throw GeometryError("unknown admittance case '" + id + "' (expected A1, A2 or A3)");
}

std::string to_string(BoundaryCase c) {
    switch (c) {
    case BoundaryCase::B1: return "B1";
    case BoundaryCase::B2: return "B2";
    case BoundaryCase::B3: return "B3";
    }
    throw GeometryError("invalid boundary case value");
}

std::string to_string(AdmittanceCase c) {
    switch (c) {
    case AdmittanceCase::A1: return "A1";
    case AdmittanceCase::A2: return "A2";
    case AdmittanceCase::A3: return "A3";
    }
    throw GeometryError("invalid admittance case value");
}

Point2 eval_case_curve(BoundaryCase c, double t) {
    if (!std::isfinite(t)) throw GeometryError("curve parameter must be finite");
    switch (c) {
    case BoundaryCase::B1:
        return {0.1 + 0.7 * std::cos(t), 0.2 + 0.5 * std::sin(t)};
    case BoundaryCase::B2:
        return {0.6 * std::cos(t), 0.5 * std::sin(t) * (1.8 + std::cos(2.0 * t))};
    case BoundaryCase::B3: {
        const double r = (0.6 + 0.54 * std::cos(t) + 0.06 * std::sin(2.0 * t)) /
                         (1.0 + 0.75 * std::cos(t));
        return {-0.25 + r * std::cos(t), 0.05 + r * std::sin(t)};
    }
    }
    throw GeometryError("invalid boundary case value");
}

double eval_case_admittance(AdmittanceCase c, Point2 p) {
    const double pi = std::acos(-1.0);
    switch (c) {
    case AdmittanceCase::A1: return std::exp(p.x1 * p.x2);
    case AdmittanceCase::A2: return 1.0 + 0.5 * p.x1 * p.x2;
    case AdmittanceCase::A3: return 1.0 + 0.5 * std::sin(pi * p.x1) * std::sin(pi * p.x2);
    }
    throw GeometryError("invalid admittance case value");
}

ClosedPolyline sample_case_polyline(BoundaryCase c, std::size_t n) {
    const double pi = std::acos(-1.0);
    ClosedPolyline curve;
    curve.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        curve.nodes[i] = eval_case_curve(c, 2.0 * pi * double(i) / double(n));
    return curve;
}

ClosedPolyline circle_polyline(std::size_t n, double r, Point2 center) {
    const double pi = std::acos(-1.0);
    ClosedPolyline curve;
    curve.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 2.0 * pi * double(i) / double(n);
        curve.nodes[i] = {center.x1 + r * std::cos(t), center.x2 + r * std::sin(t)};
    }
    return curve;
}

double signed_area(const ClosedPolyline& curve) {
    double a = 0.0;
    const std::size_t n = curve.size();
    for (std::size_t i = 0; i < n; ++i)
        a += cross(curve[i], curve[(i + 1) % n]);
    return 0.5 * a;
}

double total_arclength(const ClosedPolyline& curve) {
    double len = 0.0;
    const std::size_t n = curve.size();
    for (std::size_t i = 0; i < n; ++i)
        len += norm(curve[(i + 1) % n] - curve[i]);
    return len;
}

std::vector<double> cumulative_arclength(const ClosedPolyline& curve) {
    const std::size_t n = curve.size();
    std::vector<double> s(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        s[i + 1] = s[i] + norm(curve[(i + 1) % n] - curve[i]);
    return s;
}

namespace {

// Proper segment intersection including touching interiors.
bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
    const auto orient = [](Point2 p, Point2 q, Point2 r) {
        const double v = cross(q - p, r - p);
        if (v > 0) return 1;
        if (v < 0) return -1;
        return 0;
    };
    const int o1 = orient(a, b, c);
    const int o2 = orient(a, b, d);
    const int o3 = orient(c, d, a);
    const int o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    const auto on_segment = [](Point2 p, Point2 q, Point2 r) {
        return std::min(p.x1, r.x1) <= q.x1 && q.x1 <= std::max(p.x1, r.x1) &&
               std::min(p.x2, r.x2) <= q.x2 && q.x2 <= std::max(p.x2, r.x2);
    };
    if (o1 == 0 && on_segment(a, c, b)) return true;
    if (o2 == 0 && on_segment(a, d, b)) return true;
    if (o3 == 0 && on_segment(c, a, d)) return true;
    if (o4 == 0 && on_segment(c, b, d)) return true;
    return false;
}

} // namespace

bool is_simple(const ClosedPolyline& curve) {
    const std::size_t n = curve.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 a = curve[i];
        const Point2 b = curve[(i + 1) % n];
        if (norm(b - a) == 0.0) return false;
        for (std::size_t j = i + 1; j < n; ++j) {
            // skip the segment itself and the two neighbours sharing a node
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            if (segments_intersect(a, b, curve[j], curve[(j + 1) % n])) return false;
        }
    }
    return true;
}

bool point_inside(const ClosedPolyline& curve, Point2 p) {
    bool inside = false;
    const std::size_t n = curve.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2 a = curve[i];
        const Point2 b = curve[j];
        if ((a.x2 > p.x2) != (b.x2 > p.x2)) {
            const double xint = a.x1 + (p.x2 - a.x2) / (b.x2 - a.x2) * (b.x1 - a.x1);
            if (p.x1 < xint) inside = !inside;
        }
    }
    return inside;
}

std::vector<Vec2> outward_normals(const ClosedPolyline& curve, Ring ring) {
    const std::size_t n = curve.size();
    std::vector<Vec2> normals(n);
    // Edge normal of a counterclockwise loop: (dy,-dx) points away from the
    // enclosed region. On Gamma the annulus lies outside the loop, so the
    // Omega-outward normal is the opposite rotation.
    const double sign = (ring == Ring::Sigma) ? 1.0 : -1.0;
    std::vector<Vec2> edge_normal(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 e = curve[(i + 1) % n] - curve[i];
        const double len = norm(e);
        if (len == 0.0) throw GeometryError("degenerate zero-length edge at node " + std::to_string(i));
        edge_normal[i] = {sign * e.x2 / len, -sign * e.x1 / len};
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 prev = edge_normal[(i + n - 1) % n];
        const Vec2 next = edge_normal[i];
        Vec2 v = prev + next;
        const double len = norm(v);
        if (len == 0.0) throw GeometryError("degenerate normal (reversing edges) at node " + std::to_string(i));
        normals[i] = {v.x1 / len, v.x2 / len};
    }
    return normals;
}

std::vector<double> discrete_curvature(const ClosedPolyline& curve, Ring ring) {
    const std::size_t n = curve.size();
    std::vector<double> kappa(n, 0.0);
    const double ring_sign = (ring == Ring::Sigma) ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 a = curve[(i + n - 1) % n];
        const Point2 b = curve[i];
        const Point2 c = curve[(i + 1) % n];
        const double twice_area = cross(b - a, c - b);
        const double la = norm(b - a);
        const double lb = norm(c - b);
        const double lc = norm(c - a);
        const double denom = la * lb * lc;
        if (denom == 0.0) throw GeometryError("degenerate zero-length edge at node " + std::to_string(i));
        // Menger curvature 4*area/(la*lb*lc); cross sign = turning direction.
        kappa[i] = ring_sign * 2.0 * twice_area / denom;
    }
    return kappa;
}

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
    const Point2 ab = b - a;
    const double len_sq = dot(ab, ab);
    if (len_sq == 0.0) return norm(p - a);
    double t = dot(p - a, ab) / len_sq;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

namespace {

double directed_hausdorff(const ClosedPolyline& from, const ClosedPolyline& to) {
    const std::size_t n = from.size();
    const std::size_t m = to.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j)
            best = std::min(best, point_segment_distance(from[i], to[j], to[(j + 1) % m]));
        worst = std::max(worst, best);
    }
    return worst;
}

} // namespace

double hausdorff_distance(const ClosedPolyline& a, const ClosedPolyline& b) {
    return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

namespace {

// Catmull-Rom point on [p1, p2] with neighbours p0, p3. Chordal
// subdivision cuts every corner, so repeated resampling of a curved
// boundary erodes its concave features; the cubic interpolant does not.
Point2 curve_point(Point2 p0, Point2 p1, Point2 p2, Point2 p3, double u) {
    const double u2 = u * u;
    const double u3 = u2 * u;
    return (-0.5 * u3 + u2 - 0.5 * u) * p0 + (1.5 * u3 - 2.5 * u2 + 1.0) * p1 +
           (-1.5 * u3 + 2.0 * u2 + 0.5 * u) * p2 + (0.5 * u3 - 0.5 * u2) * p3;
}

ClosedPolyline resample_impl(const ClosedPolyline& curve, std::size_t n_out,
                             std::vector<double>* new_arclengths) {
    const std::size_t n = curve.size();
    const std::vector<double> s = cumulative_arclength(curve);
    const double total = s[n];
    if (total == 0.0) throw GeometryError("cannot resample a degenerate curve");
    ClosedPolyline out;
    out.nodes.resize(n_out);
    if (new_arclengths) new_arclengths->resize(n_out);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < n_out; ++i) {
        const double target = total * double(i) / double(n_out);
        while (seg + 1 < n && s[seg + 1] < target) ++seg;
        const double seg_len = s[seg + 1] - s[seg];
        const double w = seg_len > 0.0 ? (target - s[seg]) / seg_len : 0.0;
        if (w == 0.0) {
            out.nodes[i] = curve[seg];
        } else {
            out.nodes[i] = curve_point(curve[(seg + n - 1) % n], curve[seg],
                                       curve[(seg + 1) % n], curve[(seg + 2) % n], w);
        }
        if (new_arclengths) (*new_arclengths)[i] = target;
    }
    return out;
}

} // namespace

ClosedPolyline resample_by_arclength(const ClosedPolyline& curve,
                                     std::vector<double>* new_arclengths) {
    return resample_impl(curve, curve.size(), new_arclengths);
}

ClosedPolyline resample_to_count(const ClosedPolyline& curve, std::size_t n) {
    return resample_impl(curve, n, nullptr);
}

void write_polyline_csv(const ClosedPolyline& curve, std::ostream& os) {
    os << "index,x1,x2\n";
    char buf[80];
    for (std::size_t i = 0; i < curve.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i, curve[i].x1, curve[i].x2);
        os << buf;
    }
}

void write_polyline_csv(const ClosedPolyline& curve, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw GeometryError("cannot open '" + path + "' for writing");
    write_polyline_csv(curve, os);
}

ClosedPolyline read_polyline_csv(std::istream& is) {
    ClosedPolyline curve;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("index", 0) == 0) continue;
        std::istringstream ss(line);
        std::string idx, x1, x2;
        if (!std::getline(ss, idx, ',') || !std::getline(ss, x1, ',') || !std::getline(ss, x2))
            throw GeometryError("malformed polyline CSV at line " + std::to_string(lineno));
        try {
            curve.nodes.push_back({std::stod(x1), std::stod(x2)});
        } catch (const std::exception&) {
            throw GeometryError("malformed polyline CSV at line " + std::to_string(lineno));
        }
    }
    return curve;
}

ClosedPolyline read_polyline_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw GeometryError("cannot open '" + path + "' for reading");
    return read_polyline_csv(is);
}

} // namespace kv
