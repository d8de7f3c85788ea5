////////////////////////////////////////////////////////////////////////////
// data.hpp
//
// Synthetic Cauchy-pair generation on a finer forward mesh, noise
// injection and dataset serialization. The forward solve runs on a mesh
// with twice the boundary resolution and layering of the inversion mesh,
// so inversion never sees data produced by its own discretization.
////////////////////////////////////////////////////////////////////////////
#pragma once

#include "kv/fem.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>

namespace kv {

class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// One Dirichlet input / Neumann measurement pair on Sigma; k in {1,2}.
struct CauchyPair {
    BoundaryTrace f;
    BoundaryTrace g;
    int k = 1;
};

struct DatasetManifest {
    std::string admittance_case = "A2";
    std::string boundary_case = "B1";
    std::size_t forward_n_boundary = 300;
    std::size_t forward_n_layers = 20;
    std::size_t inversion_n_boundary = 150;
    double noise_delta = 0.0;
    std::uint64_t rng_seed = 0;
};

struct Dataset {
    DatasetManifest manifest;
    std::array<CauchyPair, 2> pairs;
};

/// Forward solves with Dirichlet inputs f1 = cos t, f2 = sin t on the unit
/// circle, variational flux extraction, restriction to the inversion Sigma
/// ring by angular interpolation. gamma_star is the exact inner boundary;
/// alpha_star evaluates the exact admittance at a point.
std::array<CauchyPair, 2> generate_pairs(const ClosedPolyline& gamma_star,
                                         const std::function<double(Point2)>& alpha_star,
                                         std::size_t forward_n_boundary,
                                         std::size_t forward_n_layers,
                                         std::size_t inversion_n_boundary,
                                         double solver_tol = 1e-12);

/// Exact (noise-free) pairs for a named case combination at the default
/// forward/inversion resolutions.
std::array<CauchyPair, 2> generate_cauchy_data(AdmittanceCase admittance, BoundaryCase boundary);

/// Full deterministic pipeline: generate per the manifest, then perturb g
/// when manifest.noise_delta > 0. Regenerating from an identical manifest
/// reproduces the dataset bit for bit.
Dataset generate_dataset(const DatasetManifest& manifest);

/// g_i + delta * ||g||_inf * eta_i with eta_i i.i.d. normal(0, 0.5^2) from a
/// seeded generator (Box-Muller over mt19937_64, stable across platforms).
BoundaryTrace add_noise(const BoundaryTrace& g, double delta, std::uint64_t seed);

/// Text container: `#manifest` key=value lines, then `#pair k=1` and
/// `#pair k=2` sections of `t,f,g` rows at the inversion Sigma nodes,
/// 17 significant digits.
void serialize_dataset(const Dataset& dataset, std::ostream& os);
void serialize_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(std::istream& is);
Dataset load_dataset(const std::string& path);

/// Numerical rank-2 test of the two Sigma input traces (identifiability
/// needs two linearly independent pairs).
bool pairs_linearly_independent(const std::array<CauchyPair, 2>& pairs, double tol = 1e-8);

} // namespace kv
