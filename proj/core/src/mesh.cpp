#include "kv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace kv {

namespace {

double triangle_signed_area(Point2 a, Point2 b, Point2 c) {
    return 0.5 * cross(b - a, c - a);
}

double pi() { return std::acos(-1.0); }

} // namespace

AnnularMesh build_annular_mesh(const ClosedPolyline& outer, const ClosedPolyline& inner,
                               std::size_t n_boundary, std::size_t n_layers) {
    if (n_boundary < 8) throw MeshError("need at least 8 boundary nodes");
    if (n_layers < 1) throw MeshError("need at least one layer");

    const ClosedPolyline in = inner.size() == n_boundary ? inner : resample_to_count(inner, n_boundary);
    const ClosedPolyline out = outer.size() == n_boundary ? outer : resample_to_count(outer, n_boundary);

    if (signed_area(in) <= 0.0 || signed_area(out) <= 0.0)
        throw MeshError("boundary curves must be counterclockwise with positive area");
    for (std::size_t i = 0; i < n_boundary; ++i)
        if (!point_inside(out, in[i]))
            throw MeshError("inner boundary is not strictly inside the outer one near parameter t=" +
                            std::to_string(2.0 * pi() * double(i) / double(n_boundary)));

    AnnularMesh mesh;
    const std::size_t n_rings = n_layers + 1;
    mesh.nodes.resize(n_rings * n_boundary);
    for (std::size_t j = 0; j < n_rings; ++j) {
        const double w = double(j) / double(n_layers);
        for (std::size_t i = 0; i < n_boundary; ++i) {
            // boundary rings carry the input coordinates bit-exactly
            if (j == 0) mesh.nodes[i] = in[i];
            else if (j == n_layers) mesh.nodes[j * n_boundary + i] = out[i];
            else mesh.nodes[j * n_boundary + i] = in[i] + w * (out[i] - in[i]);
        }
    }
    mesh.gamma_ring.resize(n_boundary);
    mesh.sigma_ring.resize(n_boundary);
    for (std::size_t i = 0; i < n_boundary; ++i) {
        mesh.gamma_ring[i] = int(i);
        mesh.sigma_ring[i] = int(n_layers * n_boundary + i);
    }

    mesh.triangles.reserve(2 * n_layers * n_boundary);
    for (std::size_t j = 0; j < n_layers; ++j) {
        for (std::size_t i = 0; i < n_boundary; ++i) {
            const int a = int(j * n_boundary + i);                       // inner-left
            const int b = int(j * n_boundary + (i + 1) % n_boundary);    // inner-right
            const int c = int((j + 1) * n_boundary + i);                 // outer-left
            const int d = int((j + 1) * n_boundary + (i + 1) % n_boundary); // outer-right
            const double diag_ad = norm(mesh.nodes[d] - mesh.nodes[a]);
            const double diag_cb = norm(mesh.nodes[b] - mesh.nodes[c]);
            if (diag_ad <= diag_cb) {
                mesh.triangles.push_back({a, c, d});
                mesh.triangles.push_back({a, d, b});
            } else {
                mesh.triangles.push_back({a, c, b});
                mesh.triangles.push_back({c, d, b});
            }
        }
    }

    // Radial spacing doubles as the nominal mesh size of the construction.
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_boundary; ++i)
        min_gap = std::min(min_gap, norm(out[i] - in[i]));
    mesh.h_target = min_gap / double(n_layers);

    for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
        const auto& t = mesh.triangles[k];
        if (triangle_signed_area(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]) <= 0.0) {
            const std::size_t i = (k / 2) % n_boundary;
            throw MeshError("transfinite construction produced an inverted triangle near parameter t in [" +
                            std::to_string(2.0 * pi() * double(i) / double(n_boundary)) + ", " +
                            std::to_string(2.0 * pi() * double(i + 1) / double(n_boundary)) +
                            "] (curves too close or pairing not star-shaped)");
        }
    }
    return mesh;
}

AnnularMesh deform_mesh(const AnnularMesh& mesh, const VectorNodalField& theta, double t) {
    if (theta.size() != mesh.nodes.size())
        throw MeshError("deformation field length does not match node count");
    AnnularMesh out = mesh;
    std::vector<char> on_sigma(mesh.nodes.size(), 0);
    for (int i : mesh.sigma_ring) on_sigma[std::size_t(i)] = 1;
    for (std::size_t i = 0; i < out.nodes.size(); ++i) {
        if (on_sigma[i]) continue; // Sigma stays bit-identical
        out.nodes[i].x1 += t * theta[i].x1;
        out.nodes[i].x2 += t * theta[i].x2;
    }
    return out;
}

MeshQualityReport validate_mesh(const AnnularMesh& mesh) {
    MeshQualityReport report;
    report.min_signed_area = std::numeric_limits<double>::infinity();
    report.min_angle_deg = 180.0;
    for (const auto& t : mesh.triangles) {
        const Point2 a = mesh.nodes[t[0]];
        const Point2 b = mesh.nodes[t[1]];
        const Point2 c = mesh.nodes[t[2]];
        const double area = triangle_signed_area(a, b, c);
        report.min_signed_area = std::min(report.min_signed_area, area);
        if (area <= 0.0) {
            ++report.inverted_count;
            report.min_angle_deg = 0.0;
            continue;
        }
        const Point2 v[3] = {a, b, c};
        for (int i = 0; i < 3; ++i) {
            const Point2 u = v[(i + 1) % 3] - v[i];
            const Point2 w = v[(i + 2) % 3] - v[i];
            const double lu = norm(u), lw = norm(w);
            if (lu == 0.0 || lw == 0.0) {
                report.min_angle_deg = 0.0;
                continue;
            }
            const double cosang = std::clamp(dot(u, w) / (lu * lw), -1.0, 1.0);
            report.min_angle_deg = std::min(report.min_angle_deg, std::acos(cosang) * 180.0 / pi());
        }
    }
    if (mesh.triangles.empty()) {
        report.min_signed_area = 0.0;
        report.min_angle_deg = 0.0;
    }
    return report;
}

void smooth_interior(AnnularMesh& mesh, int passes) {
    const std::size_t n = mesh.gamma_ring.size();
    const std::size_t n_layers = mesh.nodes.size() / n - 1;
    for (int pass = 0; pass < passes; ++pass) {
        AnnularMesh trial = mesh;
        for (std::size_t j = 1; j < n_layers; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                const Point2 left = mesh.nodes[j * n + (i + n - 1) % n];
                const Point2 right = mesh.nodes[j * n + (i + 1) % n];
                const Point2 down = mesh.nodes[(j - 1) * n + i];
                const Point2 up = mesh.nodes[(j + 1) * n + i];
                const Point2 average = 0.25 * (left + right + down + up);
                const Point2 old = mesh.nodes[j * n + i];
                trial.nodes[j * n + i] = old + 0.5 * (average - old);
            }
        }
        if (validate_mesh(trial).inverted_count != 0) return;
        mesh = std::move(trial);
    }
}

AnnularMesh resample_gamma(const AnnularMesh& mesh, std::vector<double>* gamma_values) {
    const ClosedPolyline gamma = ring_polyline(mesh, Ring::Gamma);
    if (!is_simple(gamma))
        throw GammaSelfIntersection("Gamma has self-intersected; reconstruction breakdown");
    const std::size_t n = gamma.size();

    std::vector<double> new_s;
    const ClosedPolyline resampled = resample_by_arclength(gamma, &new_s);

    if (gamma_values) {
        if (gamma_values->size() != n) throw MeshError("gamma value array length mismatch");
        const std::vector<double> old_s = cumulative_arclength(gamma);
        std::vector<double> vals(n);
        std::size_t seg = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double target = new_s[i];
            while (seg + 1 < n && old_s[seg + 1] < target) ++seg;
            const double len = old_s[seg + 1] - old_s[seg];
            const double w = len > 0 ? (target - old_s[seg]) / len : 0.0;
            vals[i] = (1.0 - w) * (*gamma_values)[seg] + w * (*gamma_values)[(seg + 1) % n];
        }
        *gamma_values = vals;
    }

    const ClosedPolyline sigma = ring_polyline(mesh, Ring::Sigma);
    const std::size_t n_layers = mesh.nodes.size() / n - 1;
    try {
        return build_annular_mesh(sigma, resampled, n, n_layers);
    } catch (const MeshError&) {
        // The fresh transfinite pairing can fold on strongly non-circular
        // boundaries even though the evolved mesh is fine. Relax the
        // existing mesh toward the equidistributed positions instead:
        // validated partial slides, displacement decaying linearly in the
        // ring index, finished by an exact snap of the Gamma ring.
        AnnularMesh current = mesh;
        smooth_interior(current, 3); // fatten slivers before sliding
        bool landed = false;
        for (int round = 0; round < 60 && !landed; ++round) {
            const ClosedPolyline g_now = ring_polyline(current, Ring::Gamma);
            bool advanced = false;
            for (double blend : {1.0, 0.5, 0.25, 0.125, 0.0625}) {
                AnnularMesh trial = current;
                for (std::size_t j = 0; j < n_layers; ++j) {
                    const double weight = (1.0 - double(j) / double(n_layers)) * blend;
                    for (std::size_t i = 0; i < n; ++i)
                        trial.nodes[j * n + i] =
                            trial.nodes[j * n + i] + weight * (resampled[i] - g_now[i]);
                }
                if (blend == 1.0) // land the ring on the targets exactly
                    for (std::size_t i = 0; i < n; ++i) trial.nodes[i] = resampled[i];
                if (validate_mesh(trial).inverted_count == 0) {
                    current = std::move(trial);
                    if (blend == 1.0) landed = true;
                    advanced = true;
                    break;
                }
            }
            if (!advanced)
                throw MeshError("gamma resampling folded the mesh; reconstruction breakdown");
        }
        if (!landed)
            throw MeshError("gamma resampling did not converge; reconstruction breakdown");
        smooth_interior(current, 10);
        return current;
    }
}

ClosedPolyline ring_polyline(const AnnularMesh& mesh, Ring ring) {
    const auto& idx = (ring == Ring::Sigma) ? mesh.sigma_ring : mesh.gamma_ring;
    ClosedPolyline curve;
    curve.nodes.reserve(idx.size());
    for (int i : idx) curve.nodes.push_back(mesh.nodes[std::size_t(i)]);
    return curve;
}

void write_mesh(const AnnularMesh& mesh, std::ostream& os) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "h_target %.17g\n", mesh.h_target);
    os << buf << "#nodes\n";
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i, mesh.nodes[i].x1, mesh.nodes[i].x2);
        os << buf;
    }
    os << "#triangles\n";
    for (const auto& t : mesh.triangles)
        os << t[0] << ',' << t[1] << ',' << t[2] << '\n';
    os << "#rings\n";
    for (const char* name : {"sigma", "gamma"}) {
        const auto& ring = name[0] == 's' ? mesh.sigma_ring : mesh.gamma_ring;
        os << name;
        for (int i : ring) os << ',' << i;
        os << '\n';
    }
}

void write_mesh(const AnnularMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw MeshError("cannot open '" + path + "' for writing");
    write_mesh(mesh, os);
}

AnnularMesh read_mesh(std::istream& is) {
    AnnularMesh mesh;
    std::string line;
    std::size_t lineno = 0;
    enum { Header, Nodes, Triangles, Rings } section = Header;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line == "#nodes") { section = Nodes; continue; }
        if (line == "#triangles") { section = Triangles; continue; }
        if (line == "#rings") { section = Rings; continue; }
        std::istringstream ss(line);
        try {
            switch (section) {
            case Header: {
                std::string key;
                ss >> key >> mesh.h_target;
                if (key != "h_target") throw MeshError("");
                break;
            }
            case Nodes: {
                std::string idx, x1, x2;
                if (!std::getline(ss, idx, ',') || !std::getline(ss, x1, ',') || !std::getline(ss, x2))
                    throw MeshError("");
                mesh.nodes.push_back({std::stod(x1), std::stod(x2)});
                break;
            }
            case Triangles: {
                std::string i, j, k;
                if (!std::getline(ss, i, ',') || !std::getline(ss, j, ',') || !std::getline(ss, k))
                    throw MeshError("");
                mesh.triangles.push_back({std::stoi(i), std::stoi(j), std::stoi(k)});
                break;
            }
            case Rings: {
                std::string name;
                std::getline(ss, name, ',');
                auto& ring = name == "sigma" ? mesh.sigma_ring : mesh.gamma_ring;
                if (name != "sigma" && name != "gamma") throw MeshError("");
                std::string tok;
                while (std::getline(ss, tok, ',')) ring.push_back(std::stoi(tok));
                break;
            }
            }
        } catch (const std::exception&) {
            throw MeshError("malformed mesh file at line " + std::to_string(lineno));
        }
    }
    if (mesh.nodes.empty() || mesh.triangles.empty() || mesh.sigma_ring.empty() || mesh.gamma_ring.empty())
        throw MeshError("mesh file is missing a required section");
    return mesh;
}

AnnularMesh read_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MeshError("cannot open '" + path + "' for reading");
    return read_mesh(is);
}

} // namespace kv
