#include "kv/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace kv {

namespace {

double two_pi() { return 2.0 * std::acos(-1.0); }

// Linear interpolation of a periodic trace sampled at uniform angles onto
// a target uniform angular grid.
std::vector<double> interp_angular(const std::vector<double>& src, std::size_t n_target) {
    const std::size_t n = src.size();
    std::vector<double> out(n_target);
    for (std::size_t i = 0; i < n_target; ++i) {
        const double pos = double(i) * double(n) / double(n_target);
        const std::size_t j = std::size_t(pos) % n;
        const double w = pos - std::floor(pos);
        out[i] = (1.0 - w) * src[j] + w * src[(j + 1) % n];
    }
    return out;
}

} // namespace

std::array<CauchyPair, 2> generate_pairs(const ClosedPolyline& gamma_star,
                                         const std::function<double(Point2)>& alpha_star,
                                         std::size_t forward_n_boundary,
                                         std::size_t forward_n_layers,
                                         std::size_t inversion_n_boundary,
                                         double solver_tol) {
    const ClosedPolyline sigma = circle_polyline(forward_n_boundary, 1.0);
    AnnularMesh mesh;
    try {
        mesh = build_annular_mesh(sigma, gamma_star, forward_n_boundary, forward_n_layers);
    } catch (const MeshError& e) {
        throw DataError(std::string("forward mesh construction failed: ") + e.what());
    }

    std::vector<double> alpha_values(forward_n_boundary);
    for (std::size_t i = 0; i < forward_n_boundary; ++i)
        alpha_values[i] = alpha_star(mesh.nodes[std::size_t(mesh.gamma_ring[i])]);
    const AdmittanceField alpha = AdmittanceField::clipped(std::move(alpha_values));

    std::array<CauchyPair, 2> pairs;
    for (int k = 1; k <= 2; ++k) {
        BoundaryTrace f;
        f.ring = Ring::Sigma;
        f.values.resize(forward_n_boundary);
        for (std::size_t i = 0; i < forward_n_boundary; ++i) {
            const double t = two_pi() * double(i) / double(forward_n_boundary);
            f.values[i] = (k == 1) ? std::cos(t) : std::sin(t);
        }
        const NodalField u = solve_dirichlet_state(mesh, alpha, f, solver_tol);
        const BoundaryTrace g = extract_neumann_trace(mesh, alpha, u, solver_tol);

        CauchyPair& pair = pairs[std::size_t(k - 1)];
        pair.k = k;
        pair.f.ring = Ring::Sigma;
        pair.g.ring = Ring::Sigma;
        pair.f.values = interp_angular(f.values, inversion_n_boundary);
        pair.g.values = interp_angular(g.values, inversion_n_boundary);
        double f_inf = 0.0;
        for (double v : pair.f.values) f_inf = std::max(f_inf, std::abs(v));
        if (f_inf == 0.0) throw DataError("Dirichlet input is identically zero");
    }
    return pairs;
}

std::array<CauchyPair, 2> generate_cauchy_data(AdmittanceCase admittance, BoundaryCase boundary) {
    DatasetManifest manifest;
    manifest.admittance_case = to_string(admittance);
    manifest.boundary_case = to_string(boundary);
    return generate_dataset(manifest).pairs;
}

Dataset generate_dataset(const DatasetManifest& manifest) {
    const BoundaryCase bcase = parse_boundary_case(manifest.boundary_case);
    const AdmittanceCase acase = parse_admittance_case(manifest.admittance_case);
    const ClosedPolyline gamma_star = sample_case_polyline(bcase, manifest.forward_n_boundary);
    Dataset dataset;
    dataset.manifest = manifest;
    dataset.pairs = generate_pairs(
        gamma_star, [acase](Point2 p) { return eval_case_admittance(acase, p); },
        manifest.forward_n_boundary, manifest.forward_n_layers, manifest.inversion_n_boundary);
    if (manifest.noise_delta > 0.0) {
        for (auto& pair : dataset.pairs) {
            // decorrelate the two measurements with distinct derived seeds
            const std::uint64_t seed = manifest.rng_seed * 2ULL + std::uint64_t(pair.k);
            pair.g = add_noise(pair.g, manifest.noise_delta, seed);
        }
    }
    return dataset;
}

BoundaryTrace add_noise(const BoundaryTrace& g, double delta, std::uint64_t seed) {
    if (delta < 0.0) throw DataError("noise weight must be nonnegative");
    BoundaryTrace out = g;
    if (delta == 0.0) return out;
    double ginf = 0.0;
    for (double v : g.values) ginf = std::max(ginf, std::abs(v));

    std::mt19937_64 rng(seed);
    const auto uniform01 = [&rng] {
        // strictly inside (0,1]; avoids log(0)
        return (double(rng() >> 11) + 1.0) * 0x1.0p-53;
    };
    bool have_spare = false;
    double spare = 0.0;
    const auto normal = [&] {
        if (have_spare) {
            have_spare = false;
            return spare;
        }
        const double u = uniform01();
        const double v = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double angle = two_pi() * v;
        spare = r * std::sin(angle);
        have_spare = true;
        return r * std::cos(angle);
    };
    for (double& v : out.values) v += delta * ginf * 0.5 * normal();
    return out;
}

namespace {

void write_pair_section(std::ostream& os, const CauchyPair& pair) {
    os << "#pair k=" << pair.k << '\n';
    char buf[120];
    const std::size_t n = pair.f.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double t = two_pi() * double(i) / double(n);
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", t, pair.f[i], pair.g[i]);
        os << buf;
    }
}

} // namespace

void serialize_dataset(const Dataset& dataset, std::ostream& os) {
    const DatasetManifest& m = dataset.manifest;
    os << "#manifest\n";
    os << "admittance_case=" << m.admittance_case << '\n';
    os << "boundary_case=" << m.boundary_case << '\n';
    os << "forward_n_boundary=" << m.forward_n_boundary << '\n';
    os << "forward_n_layers=" << m.forward_n_layers << '\n';
    os << "inversion_n_boundary=" << m.inversion_n_boundary << '\n';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", m.noise_delta);
    os << "noise_delta=" << buf << '\n';
    os << "rng_seed=" << m.rng_seed << '\n';
    write_pair_section(os, dataset.pairs[0]);
    write_pair_section(os, dataset.pairs[1]);
}

void serialize_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    serialize_dataset(dataset, os);
}

Dataset load_dataset(std::istream& is) {
    Dataset dataset;
    std::string line;
    std::size_t lineno = 0;
    int section = -1; // -1 none, 0 manifest, 1/2 pairs
    bool saw_pair[2] = {false, false};
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line == "#manifest") { section = 0; continue; }
        if (line.rfind("#pair k=", 0) == 0) {
            const int k = line[8] - '0';
            if (k != 1 && k != 2)
                throw DataError("bad pair label at line " + std::to_string(lineno));
            section = k;
            saw_pair[k - 1] = true;
            auto& pair = dataset.pairs[std::size_t(k - 1)];
            pair.k = k;
            pair.f.ring = Ring::Sigma;
            pair.g.ring = Ring::Sigma;
            continue;
        }
        std::istringstream ss(line);
        try {
            if (section == 0) {
                const auto eq = line.find('=');
                if (eq == std::string::npos) throw DataError("");
                const std::string key = line.substr(0, eq);
                const std::string value = line.substr(eq + 1);
                DatasetManifest& m = dataset.manifest;
                if (key == "admittance_case") m.admittance_case = value;
                else if (key == "boundary_case") m.boundary_case = value;
                else if (key == "forward_n_boundary") m.forward_n_boundary = std::stoul(value);
                else if (key == "forward_n_layers") m.forward_n_layers = std::stoul(value);
                else if (key == "inversion_n_boundary") m.inversion_n_boundary = std::stoul(value);
                else if (key == "noise_delta") m.noise_delta = std::stod(value);
                else if (key == "rng_seed") m.rng_seed = std::stoull(value);
                else throw DataError("");
            } else if (section == 1 || section == 2) {
                std::string t, f, g;
                if (!std::getline(ss, t, ',') || !std::getline(ss, f, ',') || !std::getline(ss, g))
                    throw DataError("");
                auto& pair = dataset.pairs[std::size_t(section - 1)];
                pair.f.values.push_back(std::stod(f));
                pair.g.values.push_back(std::stod(g));
            } else {
                throw DataError("");
            }
        } catch (const std::exception&) {
            throw DataError("malformed dataset file at line " + std::to_string(lineno));
        }
    }
    if (!saw_pair[0] || !saw_pair[1])
        throw DataError("dataset file is missing a pair section");
    const std::size_t n = dataset.manifest.inversion_n_boundary;
    for (const auto& pair : dataset.pairs)
        if (pair.f.size() != n || pair.g.size() != n)
            throw DataError("dataset trace length does not match the manifest");
    return dataset;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path + "' for reading");
    return load_dataset(is);
}

bool pairs_linearly_independent(const std::array<CauchyPair, 2>& pairs, double tol) {
    const auto& a = pairs[0].f.values;
    const auto& b = pairs[1].f.values;
    if (a.size() != b.size() || a.empty()) return false;
    double aa = 0.0, ab = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa += a[i] * a[i];
        ab += a[i] * b[i];
        bb += b[i] * b[i];
    }
    // singular values of the 2xN matrix from the 2x2 Gram eigenvalues
    const double tr = aa + bb;
    const double det = aa * bb - ab * ab;
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
    const double smin = std::sqrt(std::max(0.0, 0.5 * (tr - disc)));
    const double smax = std::sqrt(0.5 * (tr + disc));
    return smax > 0.0 && smin / smax > tol;
}

} // namespace kv
