////////////////////////////////////////////////////////////////////////////
// descent.hpp
//
// Sobolev-gradient extension of the shape-gradient density, the two
// line searches and the outer loop that simultaneously evolves the inner
// boundary and the admittance.
//
// Per iteration: solve the four states, evaluate cost and gradients,
// extend -G n to a volumetric H^1 deformation vanishing on Sigma, take a
// backtracked shape step (mesh must stay valid and the cost must drop),
// recompute the balancing parameter, then take an Armijo step on the
// admittance against the Tikhonov-regularized cost.
////////////////////////////////////////////////////////////////////////////
#pragma once

#include "kv/objective.hpp"

#include <functional>
#include <limits>

namespace kv {

struct RunConfig {
    std::size_t n_boundary = 150;
    std::size_t n_layers = 10;
    double mu = 0.5;   // shape step scaling
    double beta = 1.5; // balancing constant, > 1
    int max_iter = 500;
    double r0 = 0.5;     // initial Gamma radius
    double alpha0 = 1.0; // initial admittance
    double armijo_c = 1e-4;
    int resample_period = 25;
    double solver_tol = 1e-10;
    double sobolev_tol = 1e-12;
    std::uint64_t rng_seed = 0;
    double alpha_lo = 0.01;
    double alpha_hi = 100.0;
    int max_backtracks = 20;
    int max_armijo_halvings = 30;
    // Initial Armijo step for the admittance. Full-speed admittance
    // updates let alpha absorb the data residual before the shape can
    // follow, parking the pair in a spurious flat valley; much slower
    // updates leave the early data mismatch to destabilize the boundary.
    double eps0 = 0.05;
    int stagnation_window = 10;

    void validate() const;
};

struct SobolevField {
    VectorNodalField theta;
    double norm_h1_sq = 0.0;
};

/// Component-wise P1 solve of
///   int_Omega (grad theta : grad phi + theta . phi) = -int_Gamma G n . phi
/// over fields vanishing on Sigma. The returned H^1 norm uses the full
/// (unreduced) operator, so <G, theta_n> = -norm_h1_sq holds at solver
/// tolerance.
SobolevField sobolev_extension(const AnnularMesh& mesh, const BoundaryTrace& G,
                               double tol = 1e-12, const VectorNodalField* warm = nullptr);

/// <G, theta_n>_Gamma with the same discrete pairing the extension load
/// uses (nodal G n interpolated linearly per component).
double shape_directional_value(const AnnularMesh& mesh, const BoundaryTrace& G,
                               const VectorNodalField& theta);

/// t = mu J / ||theta||^2_H1; zero signals a converged shape.
double shape_step_size(double cost, double theta_norm_sq, double mu);

struct ShapeStepResult {
    double t = 0.0;
    StatePack states;
    double cost = 0.0;
    bool moved = false;
};

/// Halve from t0 until the deformed mesh has no inverted triangle and the
/// cost decreases; at most config.max_backtracks halvings, else the
/// iteration skips the shape update.
ShapeStepResult backtrack_shape_step(const StatePack& current, double current_cost,
                                     const SobolevField& field, double t0,
                                     std::span<const CauchyPair> pairs, const RunConfig& config);

struct AlphaStepResult {
    double eps = 0.0;
    StatePack states;
    double cost = 0.0;
    bool moved = false;
};

/// Armijo line search along d = -(dJ_alpha + tau alpha) against
/// J_reg = J + (tau/2)||alpha||^2, candidates clipped into the admittance
/// bounds. A candidate must also keep the unregularized cost from
/// increasing, so accepted histories stay monotone.
AlphaStepResult armijo_alpha_step(const StatePack& current, double current_cost, double tau,
                                  double eps_start, std::span<const CauchyPair> pairs,
                                  const RunConfig& config);

struct HistoryRow {
    int iter = 0;
    double J = 0.0;
    double theta_norm_sq = 0.0;
    double t = 0.0;
    double eps = 0.0;
    double tau = 0.0;
    double hausdorff = std::numeric_limits<double>::quiet_NaN(); // NaN when no truth
};

struct ConvergenceHistory {
    std::vector<HistoryRow> rows;
};

/// CSV `iter,J,theta_norm_sq,t,eps,tau,hausdorff`; the hausdorff column is
/// empty when no truth was supplied.
void write_history_csv(const ConvergenceHistory& history, std::ostream& os);
void write_history_csv(const ConvergenceHistory& history, const std::string& path);

struct ReconstructionState {
    StatePack states;
    int iteration = 0;
    ConvergenceHistory history;
    bool breakdown = false;
    std::string breakdown_reason;
    int resample_count = 0;
    // iterations right after which Gamma was re-equidistributed; the cost
    // recorded at the next row reflects the reparametrized mesh
    std::vector<int> resample_iterations;
    // worst per-iteration residuals, for the validation suites
    double max_descent_identity_rel = 0.0;
    double max_balancing_residual = 0.0; // |(beta-1)J - (tau/2)||alpha||^2| / max(1, J)

    const AnnularMesh& mesh() const { return states.mesh; }
    const AdmittanceField& alpha() const { return states.alpha; }
};

using IterationObserver = std::function<void(const ReconstructionState&)>;

/// The full loop. `truth`, when given, feeds the per-iteration Hausdorff
/// column. The observer runs after every completed iteration.
ReconstructionState run_reconstruction(const RunConfig& config, std::span<const CauchyPair> pairs,
                                       const ClosedPolyline* truth = nullptr,
                                       const IterationObserver& observer = {});

} // namespace kv
