////////////////////////////////////////////////////////////////////////////
// mesh.hpp
//
// Triangulated annulus Omega between the accessible outer boundary Sigma
// and the unknown inner boundary Gamma. The mesh is a structured
// transfinite construction: rings of nodes interpolate Gamma to Sigma per
// matched parameter, each quad split along its shorter diagonal. Node
// count and topology stay fixed across the shape iteration; only
// coordinates move.
////////////////////////////////////////////////////////////////////////////
#pragma once

#include "kv/geometry.hpp"

#include <array>
#include <cstddef>
#include <iosfwd>

namespace kv {

class MeshError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Gamma crossed itself: the reconstruction cannot continue.
class GammaSelfIntersection : public MeshError {
  public:
    using MeshError::MeshError;
};

struct AnnularMesh {
    std::vector<Point2> nodes;
    std::vector<std::array<int, 3>> triangles; // counterclockwise
    std::vector<int> sigma_ring;               // ordered node indices on Sigma
    std::vector<int> gamma_ring;               // ordered node indices on Gamma
    double h_target = 0.0;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t boundary_count() const { return gamma_ring.size(); }
};

/// One 2-vector per mesh node; zero on sigma_ring when used as a deformation.
using VectorNodalField = std::vector<Vec2>;

struct MeshQualityReport {
    double min_signed_area = 0.0;
    double min_angle_deg = 0.0;
    int inverted_count = 0;
};

/// Structured transfinite mesh between inner (Gamma) and outer (Sigma)
/// curves paired per matched parameter. Curves with a node count other
/// than n_boundary are resampled by arclength first. n_layers+1 rings,
/// ring 0 on Gamma, ring n_layers on Sigma.
AnnularMesh build_annular_mesh(const ClosedPolyline& outer, const ClosedPolyline& inner,
                               std::size_t n_boundary, std::size_t n_layers);

/// node_i + t * theta_i for all nodes; Sigma coordinates are left untouched
/// and connectivity is unchanged. Validity is checked separately.
AnnularMesh deform_mesh(const AnnularMesh& mesh, const VectorNodalField& theta, double t);

/// Exact signed-area and angle scan over all triangles.
MeshQualityReport validate_mesh(const AnnularMesh& mesh);

/// Re-equidistribute the Gamma nodes by arclength and rebuild the
/// transfinite mesh against the unchanged Sigma ring. Nodal values given in
/// `gamma_values` (e.g. the admittance) are transferred by linear
/// interpolation in the arclength parameter. Throws MeshError when Gamma
/// has self-intersected (reconstruction breakdown).
AnnularMesh resample_gamma(const AnnularMesh& mesh,
                           std::vector<double>* gamma_values = nullptr);

/// Validated Laplacian smoothing of the interior lattice; both boundary
/// rings stay fixed. Stops early if a pass would invert a triangle.
void smooth_interior(AnnularMesh& mesh, int passes = 5);

ClosedPolyline ring_polyline(const AnnularMesh& mesh, Ring ring);

/// Text format: one-line header `h_target <value>`, then sections
/// `#nodes` (index,x1,x2), `#triangles` (i,j,k) and `#rings`
/// (ring name followed by the ordered indices).
void write_mesh(const AnnularMesh& mesh, std::ostream& os);
void write_mesh(const AnnularMesh& mesh, const std::string& path);
AnnularMesh read_mesh(std::istream& is);
AnnularMesh read_mesh(const std::string& path);

} // namespace kv
