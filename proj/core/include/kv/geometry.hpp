////////////////////////////////////////////////////////////////////////////
// geometry.hpp
//
// Parametric test-case curves and admittance fields (cases A1-A3, B1-B3)
// together with the discrete differential geometry of closed polylines:
// outward normals, signed curvature, Hausdorff distance, resampling.
////////////////////////////////////////////////////////////////////////////
#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace kv {

struct Point2 {
    double x1 = 0.0;
    double x2 = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x1, s * p.x2}; }
inline double dot(Point2 a, Point2 b) { return a.x1 * b.x1 + a.x2 * b.x2; }
inline double cross(Point2 a, Point2 b) { return a.x1 * b.x2 - a.x2 * b.x1; }
double norm(Point2 p);

/// Vector-valued quantities share the Point2 layout.
using Vec2 = Point2;

/// Which boundary ring of the annulus a curve or trace belongs to.
/// Sigma is the accessible outer boundary, Gamma the unknown inner one.
enum class Ring { Sigma, Gamma };

/// Ordered closed loop of nodes, counterclockwise, node m connects to node 0.
struct ClosedPolyline {
    std::vector<Point2> nodes;

    std::size_t size() const { return nodes.size(); }
    const Point2& operator[](std::size_t i) const { return nodes[i]; }
    Point2& operator[](std::size_t i) { return nodes[i]; }
};

class GeometryError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class BoundaryCase { B1, B2, B3 };
enum class AdmittanceCase { A1, A2, A3 };

BoundaryCase parse_boundary_case(const std::string& id);
AdmittanceCase parse_admittance_case(const std::string& id);
std::string to_string(BoundaryCase c);
std::string to_string(AdmittanceCase c);

/// Parametric point of an inner-boundary test case at angle t in [0, 2pi).
Point2 eval_case_curve(BoundaryCase c, double t);

/// Closed-form exact Robin coefficient of a test case at a point.
double eval_case_admittance(AdmittanceCase c, Point2 p);

/// Case curve sampled at n uniformly spaced parameter values (t_i = 2 pi i / n).
ClosedPolyline sample_case_polyline(BoundaryCase c, std::size_t n);

/// Circle of radius r about center, n nodes, counterclockwise, node 0 at angle 0.
ClosedPolyline circle_polyline(std::size_t n, double r, Point2 center = {0.0, 0.0});

double signed_area(const ClosedPolyline& curve);
double total_arclength(const ClosedPolyline& curve);

/// Cumulative arclength per node; s[0] = 0, s[n] = total length.
std::vector<double> cumulative_arclength(const ClosedPolyline& curve);

/// Segment-pair test, O(n^2). Adjacent segments share only their endpoint.
bool is_simple(const ClosedPolyline& curve);

/// Crossing-number point-in-polygon test (boundary counts as outside).
bool point_inside(const ClosedPolyline& curve, Point2 p);

/// Per-node unit normals, outward with respect to the annulus Omega:
/// on Sigma they point away from the enclosed region, on Gamma into the
/// hole omega. Node normal = bisector of the two adjacent edge normals.
std::vector<Vec2> outward_normals(const ClosedPolyline& curve, Ring ring);

/// Signed curvature kappa = div_Gamma n with n outward to Omega, so a
/// circular hole of radius r carries kappa = -1/r on Gamma and a circle
/// of radius r on Sigma carries +1/r. Menger three-point circumradius
/// estimate, signed by the turning direction; collinear nodes give 0.
std::vector<double> discrete_curvature(const ClosedPolyline& curve, Ring ring);

/// Symmetric Hausdorff distance between the node sets, measured against
/// the opposite polyline with point-to-segment projection.
double hausdorff_distance(const ClosedPolyline& a, const ClosedPolyline& b);

/// Same node count, nodes re-equidistributed by arclength along the input,
/// starting from node 0. Returns the resampled curve and, for each new node,
/// its arclength coordinate on the input curve.
ClosedPolyline resample_by_arclength(const ClosedPolyline& curve,
                                     std::vector<double>* new_arclengths = nullptr);

/// Resample to exactly n nodes, equidistributed by arclength from node 0.
ClosedPolyline resample_to_count(const ClosedPolyline& curve, std::size_t n);

double point_segment_distance(Point2 p, Point2 a, Point2 b);

/// CSV with header `index,x1,x2`, nodes in counterclockwise order.
void write_polyline_csv(const ClosedPolyline& curve, std::ostream& os);
void write_polyline_csv(const ClosedPolyline& curve, const std::string& path);
ClosedPolyline read_polyline_csv(std::istream& is);
ClosedPolyline read_polyline_csv(const std::string& path);

} // namespace kv
