////////////////////////////////////////////////////////////////////////////
// fem.hpp
//
// P1 finite elements on the annular mesh: assembly of the bilinear form
//   a(alpha; u, v) = int_Omega grad u . grad v + int_Gamma alpha u v,
// the Dirichlet and Neumann state solves, variational flux extraction on
// Sigma and the admittance sensitivity problem. All systems are symmetric
// positive definite and solved with Jacobi-preconditioned CG.
//
// Quadrature is exact for every integrand that appears: piecewise-linear
// alpha times two hats on a Gamma edge is cubic (3-point Gauss), the
// Sigma load g times a hat is quadratic (2-point Gauss).
////////////////////////////////////////////////////////////////////////////
#pragma once

#include "kv/mesh.hpp"

#include <optional>
#include <span>
#include <vector>

namespace kv {

class FemError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class SolverError : public FemError {
  public:
    using FemError::FemError;
};

/// One scalar per mesh node.
using NodalField = std::vector<double>;

/// One scalar per node of a designated boundary ring.
struct BoundaryTrace {
    Ring ring = Ring::Sigma;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
};

/// Positive admittance values on the gamma ring, clipped into [lo, hi].
struct AdmittanceField {
    std::vector<double> values;
    double lo = 0.01;
    double hi = 100.0;

    static AdmittanceField constant(std::size_t n, double value,
                                    double lo = 0.01, double hi = 100.0);
    static AdmittanceField clipped(std::vector<double> values,
                                   double lo = 0.01, double hi = 100.0);
    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

/// Symmetric sparse matrix, compressed-row layout.
struct SparseOperator {
    int n = 0;
    std::vector<int> row_start; // n+1 entries
    std::vector<int> col_idx;
    std::vector<double> vals;

    void apply(std::span<const double> x, std::span<double> y) const;
    std::vector<double> apply(const std::vector<double>& x) const;
    std::vector<double> diagonal() const;
    double quadratic_form(std::span<const double> x) const; // x' A x
    bool is_symmetric(double tol = 0.0) const;
};

/// Triplet accumulator; duplicates are summed in deterministic order.
struct SparseBuilder {
    explicit SparseBuilder(int n) : n(n) {}
    void add(int i, int j, double v) { entries.push_back({i, j, v}); }
    SparseOperator compress() const;

    int n;
    struct Entry { int i, j; double v; };
    std::vector<Entry> entries;
};

SparseOperator add_operators(const SparseOperator& a, const SparseOperator& b);

/// P1 stiffness matrix, exact per-triangle gradients. Throws on an
/// inverted triangle.
SparseOperator assemble_stiffness(const AnnularMesh& mesh);

/// Domain P1 mass matrix (int phi_i phi_j), exact.
SparseOperator assemble_domain_mass(const AnnularMesh& mesh);

/// Gamma-edge mass matrix with piecewise-linear alpha, 3-point Gauss.
SparseOperator assemble_gamma_mass(const AnnularMesh& mesh, const AdmittanceField& alpha);

/// K + M_Gamma(alpha), the full Robin bilinear form.
SparseOperator assemble_bilinear(const AnnularMesh& mesh, const AdmittanceField& alpha);

/// Mass matrix of the Sigma ring alone (indices local to sigma_ring order).
SparseOperator assemble_sigma_mass(const AnnularMesh& mesh);

/// Load vector int_Sigma g phi_i (2-point Gauss), full node dimension.
NodalField sigma_load_vector(const AnnularMesh& mesh, const BoundaryTrace& g);

/// Load vector -int_Gamma rho u phi_i (3-point Gauss), full node dimension.
NodalField gamma_sensitivity_load(const AnnularMesh& mesh, const BoundaryTrace& rho,
                                  const NodalField& u);

/// Jacobi-preconditioned conjugate gradients down to a relative residual
/// ||A u - b|| / ||b|| <= tol. An optional warm start cuts the iteration
/// count dramatically inside the descent loop. Throws SolverError after
/// 10 n iterations.
NodalField solve_spd(const SparseOperator& op, const NodalField& rhs, double tol = 1e-10,
                     const NodalField* warm_start = nullptr);

/// Symmetric row/column elimination of the Sigma ring: solves the reduced
/// SPD system on the free nodes, keeping V(Omega) test-space semantics
/// exact. Reusable across right-hand sides for a fixed (mesh, alpha).
class SigmaEliminatedSystem {
  public:
    SigmaEliminatedSystem(const SparseOperator& full, const AnnularMesh& mesh);

    /// Solve a(u, phi_i) = rhs_i for free i with u = boundary_values on Sigma.
    /// boundary_values may be empty for a homogeneous condition.
    NodalField solve(const NodalField& rhs, const BoundaryTrace& boundary_values,
                     double tol, const NodalField* warm_start = nullptr) const;

  private:
    const AnnularMesh& mesh_;
    SparseOperator full_;
    SparseOperator reduced_;
    std::vector<int> free_of_global_; // -1 on Sigma
    std::vector<int> global_of_free_;
};

/// Dirichlet state: u = f on Sigma exactly, Robin(alpha) on Gamma.
NodalField solve_dirichlet_state(const AnnularMesh& mesh, const AdmittanceField& alpha,
                                 const BoundaryTrace& f, double tol = 1e-10,
                                 const NodalField* warm_start = nullptr);

/// Neumann state: flux g on Sigma, Robin(alpha) on Gamma.
NodalField solve_neumann_state(const AnnularMesh& mesh, const AdmittanceField& alpha,
                               const BoundaryTrace& g, double tol = 1e-10,
                               const NodalField* warm_start = nullptr);

/// Variational (consistent) flux on Sigma: solves M_Sigma g = r with
/// r_i = a(alpha; u, phi_i) over Sigma hat functions.
BoundaryTrace extract_neumann_trace(const AnnularMesh& mesh, const AdmittanceField& alpha,
                                    const NodalField& u, double tol = 1e-12);

enum class StateKind { Dirichlet, Neumann };

/// Sensitivity of a state with respect to an admittance perturbation rho:
///   a(alpha; du, psi) = -int_Gamma rho u psi,
/// with du = 0 on Sigma for the Dirichlet kind and free for Neumann.
NodalField solve_alpha_sensitivity(const AnnularMesh& mesh, const AdmittanceField& alpha,
                                   const NodalField& u, const BoundaryTrace& rho,
                                   StateKind kind, double tol = 1e-10);

/// Restrict a nodal field to a boundary ring.
BoundaryTrace trace_on_ring(const AnnularMesh& mesh, const NodalField& u, Ring ring);

/// L2(ring) inner product of two nodal traces, both piecewise linear.
double ring_inner_product(const AnnularMesh& mesh, const BoundaryTrace& a,
                          const BoundaryTrace& b);

/// Trapezoidal edge quadrature of int_ring v^2 ds.
double ring_l2_sq_trapezoid(const AnnularMesh& mesh, const BoundaryTrace& v);

} // namespace kv
