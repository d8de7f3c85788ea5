////////////////////////////////////////////////////////////////////////////
// objective.hpp
//
// Kohn-Vogelius energy-gap functional
//   J = sum_k [ 1/2 int_Omega |grad w_k|^2 + 1/2 int_Gamma alpha w_k^2 ],
//   w_k = u_D,k - u_N,k,
// its shape-gradient density on Gamma, its admittance gradient, the
// Tikhonov regularization term and the balancing-principle parameter.
//
// Normal derivatives of the states on Gamma are taken through the Robin
// identity d_n u = -alpha u rather than by differentiating P1 fields;
// the admittance is extended constant along normals, so its own normal
// derivative drops out of the density.
////////////////////////////////////////////////////////////////////////////
#pragma once

#include "kv/data.hpp"

#include <span>

namespace kv {

/// Both states of both Cauchy pairs solved on one (mesh, alpha), the
/// cached gaps w_k and the assembled Robin operator they satisfy.
struct StatePack {
    AnnularMesh mesh;
    AdmittanceField alpha;
    SparseOperator op; // K + M_Gamma(alpha)
    std::array<NodalField, 2> u_N;
    std::array<NodalField, 2> u_D;
    std::array<NodalField, 2> w;
};

/// Solve the four states (2 per pair). A previous pack on the same mesh
/// topology warm-starts the conjugate-gradient iterations.
StatePack solve_states(const AnnularMesh& mesh, const AdmittanceField& alpha,
                       std::span<const CauchyPair> pairs, double tol = 1e-10,
                       const StatePack* warm = nullptr);

/// J >= 0, zero exactly when both gaps vanish.
double kohn_vogelius_cost(const StatePack& states);

/// Shape-gradient density G on Gamma, summed over both pairs:
///   G = -F(u_N, w) + 1/2 |grad w|^2 + (alpha/2)(2 w d_n w + kappa w^2),
///   F(v, q) = -grad_G v . grad_G q - alpha (d_n v + kappa v) q,
/// with tangential gradients by arclength central differences and
/// |grad w|^2 = |grad_G w|^2 + (alpha w)^2 on Gamma. The 1/2 on the
/// gradient term is pinned by analytic directional-derivative oracles
/// (radial and two-mode annulus families).
BoundaryTrace shape_gradient_density(const StatePack& states,
                                     const std::vector<double>& kappa_gamma);

/// Convenience overload computing kappa from the current Gamma ring with
/// smoothed_gamma_curvature.
BoundaryTrace shape_gradient_density(const StatePack& states);

/// Menger curvature of the Gamma ring passed twice through a [1,2,1]/4
/// moving average. On smooth curves this only adds an O(h^2) bias; on a
/// polyline perturbed at node scale it estimates the underlying curve's
/// curvature instead of the sawtooth's, which keeps the curvature terms
/// of G from amplifying boundary noise.
std::vector<double> smoothed_gamma_curvature(const AnnularMesh& mesh);

/// Nodal density of the admittance gradient: 1/2 sum_k (u_D^2 - u_N^2) on
/// Gamma.
BoundaryTrace admittance_gradient(const StatePack& states);

/// dJ(alpha)[rho] by exact edge quadrature of the closed-form density.
double admittance_directional_derivative(const StatePack& states, const BoundaryTrace& rho);

/// Same derivative through the sensitivity equation:
///   sum_k [ a(alpha; dw_k, w_k) + 1/2 int_Gamma rho w_k^2 ],
/// two extra solves per pair. Agrees with the closed form at solver
/// tolerance; kept as an independent route for validation.
double admittance_directional_via_sensitivity(const StatePack& states, const BoundaryTrace& rho,
                                              double tol = 1e-12);

/// Balancing-principle parameter: tau = 2 (beta - 1) J / ||alpha||^2_L2(Gamma),
/// trapezoidal Gamma quadrature. Throws on a vanishing admittance norm.
double balancing_tau(double cost, const AdmittanceField& alpha, double beta,
                     const AnnularMesh& mesh);

/// Tikhonov term (tau/2) ||alpha||^2_L2(Gamma), same quadrature as
/// balancing_tau.
double regularization_value(const AnnularMesh& mesh, const AdmittanceField& alpha, double tau);

/// Everything one outer iteration needs from the current state.
struct GradientBundle {
    BoundaryTrace G;        // shape-gradient density on Gamma
    BoundaryTrace dJ_alpha; // admittance-gradient density on Gamma
    double J = 0.0;
    double tau = 0.0;
};

GradientBundle compute_gradient_bundle(const StatePack& states, double beta);

} // namespace kv
