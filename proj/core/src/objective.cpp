#include "kv/objective.hpp"

#include <cmath>

namespace kv {

StatePack solve_states(const AnnularMesh& mesh, const AdmittanceField& alpha,
                       std::span<const CauchyPair> pairs, double tol, const StatePack* warm) {
    if (pairs.size() != 2) throw FemError("exactly two Cauchy pairs are required");
    if (alpha.size() != mesh.gamma_ring.size())
        throw FemError("admittance field length does not match gamma ring");
    StatePack pack;
    pack.mesh = mesh;
    pack.alpha = alpha;
    pack.op = assemble_bilinear(mesh, alpha);
    const SigmaEliminatedSystem dirichlet(pack.op, pack.mesh);
    const NodalField zero(mesh.node_count(), 0.0);
    const bool can_warm = warm && warm->mesh.node_count() == mesh.node_count();
    for (std::size_t k = 0; k < 2; ++k) {
        const CauchyPair& pair = pairs[k];
        if (pair.f.ring != Ring::Sigma || pair.g.ring != Ring::Sigma ||
            pair.f.size() != mesh.sigma_ring.size() || pair.g.size() != mesh.sigma_ring.size())
            throw FemError("Cauchy pair traces do not match the Sigma ring");
        pack.u_D[k] = dirichlet.solve(zero, pair.f, tol, can_warm ? &warm->u_D[k] : nullptr);
        const NodalField load = sigma_load_vector(mesh, pair.g);
        pack.u_N[k] = solve_spd(pack.op, load, tol, can_warm ? &warm->u_N[k] : nullptr);
        pack.w[k].resize(mesh.node_count());
        for (std::size_t i = 0; i < mesh.node_count(); ++i)
            pack.w[k][i] = pack.u_D[k][i] - pack.u_N[k][i];
    }
    return pack;
}

double kohn_vogelius_cost(const StatePack& states) {
    // 1/2 w' (K + M_Gamma(alpha)) w reproduces both integrals exactly
    double cost = 0.0;
    for (std::size_t k = 0; k < 2; ++k)
        cost += 0.5 * states.op.quadratic_form(states.w[k]);
    return cost;
}

BoundaryTrace shape_gradient_density(const StatePack& states,
                                     const std::vector<double>& kappa_gamma) {
    const AnnularMesh& mesh = states.mesh;
    const std::size_t m = mesh.gamma_ring.size();
    if (kappa_gamma.size() != m) throw FemError("curvature array length mismatch");

    const ClosedPolyline gamma = ring_polyline(mesh, Ring::Gamma);
    std::vector<double> edge_len(m);
    for (std::size_t i = 0; i < m; ++i)
        edge_len[i] = norm(gamma[(i + 1) % m] - gamma[i]);

    BoundaryTrace density;
    density.ring = Ring::Gamma;
    density.values.assign(m, 0.0);

    for (std::size_t k = 0; k < 2; ++k) {
        const BoundaryTrace uN = trace_on_ring(mesh, states.u_N[k], Ring::Gamma);
        const BoundaryTrace wt = trace_on_ring(mesh, states.w[k], Ring::Gamma);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t prev = (i + m - 1) % m;
            const std::size_t next = (i + 1) % m;
            const double ds = edge_len[prev] + edge_len[i];
            const double duN_ds = (uN[next] - uN[prev]) / ds;
            const double dw_ds = (wt[next] - wt[prev]) / ds;
            const double a = states.alpha[i];
            const double kappa = kappa_gamma[i];
            const double w = wt[i];
            const double un = uN[i];
            const double dn_w = -a * w;   // Robin: d_n u = -alpha u
            const double dn_uN = -a * un;
            const double f_term = -duN_ds * dw_ds - a * (dn_uN + kappa * un) * w;
            const double grad_w_sq = dw_ds * dw_ds + (a * w) * (a * w);
            density.values[i] += -f_term + 0.5 * grad_w_sq + 0.5 * a * (2.0 * w * dn_w + kappa * w * w);
        }
    }
    return density;
}

BoundaryTrace shape_gradient_density(const StatePack& states) {
    return shape_gradient_density(states, smoothed_gamma_curvature(states.mesh));
}

std::vector<double> smoothed_gamma_curvature(const AnnularMesh& mesh) {
    const ClosedPolyline gamma = ring_polyline(mesh, Ring::Gamma);
    std::vector<double> kappa = discrete_curvature(gamma, Ring::Gamma);
    const std::size_t m = kappa.size();
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> next(m);
        for (std::size_t i = 0; i < m; ++i)
            next[i] = 0.25 * kappa[(i + m - 1) % m] + 0.5 * kappa[i] + 0.25 * kappa[(i + 1) % m];
        kappa = std::move(next);
    }
    return kappa;
}

BoundaryTrace admittance_gradient(const StatePack& states) {
    const AnnularMesh& mesh = states.mesh;
    const std::size_t m = mesh.gamma_ring.size();
    BoundaryTrace density;
    density.ring = Ring::Gamma;
    density.values.assign(m, 0.0);
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t node = std::size_t(mesh.gamma_ring[i]);
            const double ud = states.u_D[k][node];
            const double un = states.u_N[k][node];
            density.values[i] += 0.5 * (ud * ud - un * un);
        }
    }
    return density;
}

namespace {

// 3-point Gauss on [0,1], exact through degree 5.
constexpr double kG3X[3] = {0.1127016653792583, 0.5, 0.8872983346207417};
constexpr double kG3W[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

// int_Gamma rho * (p^2 - q^2) with all factors piecewise linear; the
// integrand is cubic per edge, so the rule is exact.
double gamma_weighted_square_gap(const AnnularMesh& mesh, const BoundaryTrace& rho,
                                 const BoundaryTrace& p, const BoundaryTrace& q) {
    const auto& ring = mesh.gamma_ring;
    const std::size_t m = ring.size();
    double acc = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
        const std::size_t f = (e + 1) % m;
        const double len = norm(mesh.nodes[std::size_t(ring[f])] - mesh.nodes[std::size_t(ring[e])]);
        for (int g = 0; g < 3; ++g) {
            const double x = kG3X[g];
            const double rv = rho[e] * (1.0 - x) + rho[f] * x;
            const double pv = p[e] * (1.0 - x) + p[f] * x;
            const double qv = q[e] * (1.0 - x) + q[f] * x;
            acc += kG3W[g] * len * rv * (pv * pv - qv * qv);
        }
    }
    return acc;
}

} // namespace

double admittance_directional_derivative(const StatePack& states, const BoundaryTrace& rho) {
    if (rho.ring != Ring::Gamma) throw FemError("perturbation must live on Gamma");
    double acc = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        const BoundaryTrace ud = trace_on_ring(states.mesh, states.u_D[k], Ring::Gamma);
        const BoundaryTrace un = trace_on_ring(states.mesh, states.u_N[k], Ring::Gamma);
        acc += 0.5 * gamma_weighted_square_gap(states.mesh, rho, ud, un);
    }
    return acc;
}

double admittance_directional_via_sensitivity(const StatePack& states, const BoundaryTrace& rho,
                                              double tol) {
    if (rho.ring != Ring::Gamma) throw FemError("perturbation must live on Gamma");
    double acc = 0.0;
    const BoundaryTrace zero{Ring::Gamma, std::vector<double>(states.mesh.gamma_ring.size(), 0.0)};
    for (std::size_t k = 0; k < 2; ++k) {
        const NodalField du_D = solve_alpha_sensitivity(states.mesh, states.alpha, states.u_D[k],
                                                        rho, StateKind::Dirichlet, tol);
        const NodalField du_N = solve_alpha_sensitivity(states.mesh, states.alpha, states.u_N[k],
                                                        rho, StateKind::Neumann, tol);
        NodalField dw(du_D.size());
        for (std::size_t i = 0; i < dw.size(); ++i) dw[i] = du_D[i] - du_N[i];
        const NodalField aw = states.op.apply(states.w[k]);
        double bilinear = 0.0;
        for (std::size_t i = 0; i < dw.size(); ++i) bilinear += dw[i] * aw[i];
        const BoundaryTrace wt = trace_on_ring(states.mesh, states.w[k], Ring::Gamma);
        acc += bilinear + 0.5 * gamma_weighted_square_gap(states.mesh, rho, wt, zero);
    }
    return acc;
}

double balancing_tau(double cost, const AdmittanceField& alpha, double beta,
                     const AnnularMesh& mesh) {
    if (!(beta > 1.0)) throw FemError("balancing constant must exceed 1");
    BoundaryTrace trace;
    trace.ring = Ring::Gamma;
    trace.values = alpha.values;
    const double norm_sq = ring_l2_sq_trapezoid(mesh, trace);
    if (norm_sq <= 0.0) throw FemError("admittance norm vanishes; balancing undefined");
    return 2.0 * (beta - 1.0) * cost / norm_sq;
}

double regularization_value(const AnnularMesh& mesh, const AdmittanceField& alpha, double tau) {
    BoundaryTrace trace;
    trace.ring = Ring::Gamma;
    trace.values = alpha.values;
    return 0.5 * tau * ring_l2_sq_trapezoid(mesh, trace);
}

GradientBundle compute_gradient_bundle(const StatePack& states, double beta) {
    GradientBundle bundle;
    bundle.J = kohn_vogelius_cost(states);
    bundle.G = shape_gradient_density(states);
    bundle.dJ_alpha = admittance_gradient(states);
    bundle.tau = balancing_tau(bundle.J, states.alpha, beta, states.mesh);
    return bundle;
}

} // namespace kv
