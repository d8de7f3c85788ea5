#include "kv/descent.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace kv {

void RunConfig::validate() const {
    if (n_boundary < 8) throw FemError("n_boundary must be at least 8");
    if (n_layers < 1) throw FemError("n_layers must be at least 1");
    if (!(mu > 0.0)) throw FemError("mu must be positive");
    if (!(beta > 1.0)) throw FemError("beta must exceed 1");
    if (max_iter < 0) throw FemError("max_iter must be nonnegative");
    if (!(r0 > 0.0 && r0 < 1.0)) throw FemError("r0 must lie in (0, 1)");
    if (!(alpha0 > 0.0)) throw FemError("alpha0 must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw FemError("armijo_c must lie in (0, 1)");
    if (!(solver_tol > 0.0) || !(sobolev_tol > 0.0)) throw FemError("solver tolerances must be positive");
    if (!(alpha_lo > 0.0 && alpha_hi > alpha_lo)) throw FemError("admittance bounds must satisfy 0 < lo < hi");
    if (!(eps0 > 0.0)) throw FemError("eps0 must be positive");
    if (max_backtracks < 1 || max_armijo_halvings < 1) throw FemError("line-search limits must be positive");
    if (stagnation_window < 1) throw FemError("stagnation window must be positive");
}

SobolevField sobolev_extension(const AnnularMesh& mesh, const BoundaryTrace& G, double tol,
                               const VectorNodalField* warm) {
    if (G.ring != Ring::Gamma || G.size() != mesh.gamma_ring.size())
        throw FemError("shape-gradient density must live on the gamma ring");
    const SparseOperator a = add_operators(assemble_stiffness(mesh), assemble_domain_mass(mesh));
    const SigmaEliminatedSystem system(a, mesh);
    const ClosedPolyline gamma = ring_polyline(mesh, Ring::Gamma);
    const std::vector<Vec2> normals = outward_normals(gamma, Ring::Gamma);
    const NodalField ones(mesh.node_count(), 1.0);
    const BoundaryTrace no_bc{Ring::Sigma, {}};

    SobolevField field;
    field.theta.assign(mesh.node_count(), Vec2{0.0, 0.0});
    for (int c = 0; c < 2; ++c) {
        BoundaryTrace g_n;
        g_n.ring = Ring::Gamma;
        g_n.values.resize(G.size());
        for (std::size_t i = 0; i < G.size(); ++i)
            g_n.values[i] = G[i] * (c == 0 ? normals[i].x1 : normals[i].x2);
        // gamma_sensitivity_load(rho, 1) assembles exactly -int_Gamma rho phi_i
        const NodalField rhs = gamma_sensitivity_load(mesh, g_n, ones);
        NodalField warm_c;
        const NodalField* warm_ptr = nullptr;
        if (warm && warm->size() == mesh.node_count()) {
            warm_c.resize(mesh.node_count());
            for (std::size_t i = 0; i < warm_c.size(); ++i)
                warm_c[i] = (c == 0) ? (*warm)[i].x1 : (*warm)[i].x2;
            warm_ptr = &warm_c;
        }
        const NodalField theta_c = system.solve(rhs, no_bc, tol, warm_ptr);
        field.norm_h1_sq += a.quadratic_form(theta_c);
        for (std::size_t i = 0; i < theta_c.size(); ++i) {
            if (c == 0) field.theta[i].x1 = theta_c[i];
            else field.theta[i].x2 = theta_c[i];
        }
    }
    return field;
}

double shape_directional_value(const AnnularMesh& mesh, const BoundaryTrace& G,
                               const VectorNodalField& theta) {
    const ClosedPolyline gamma = ring_polyline(mesh, Ring::Gamma);
    const std::vector<Vec2> normals = outward_normals(gamma, Ring::Gamma);
    const std::size_t m = mesh.gamma_ring.size();
    double acc = 0.0;
    for (int c = 0; c < 2; ++c) {
        BoundaryTrace g_n, theta_c;
        g_n.ring = theta_c.ring = Ring::Gamma;
        g_n.values.resize(m);
        theta_c.values.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            const Vec2 th = theta[std::size_t(mesh.gamma_ring[i])];
            g_n.values[i] = G[i] * (c == 0 ? normals[i].x1 : normals[i].x2);
            theta_c.values[i] = (c == 0 ? th.x1 : th.x2);
        }
        acc += ring_inner_product(mesh, g_n, theta_c);
    }
    return acc;
}

double shape_step_size(double cost, double theta_norm_sq, double mu) {
    if (theta_norm_sq <= 0.0) return 0.0; // converged shape
    return mu * cost / theta_norm_sq;
}

ShapeStepResult backtrack_shape_step(const StatePack& current, double current_cost,
                                     const SobolevField& field, double t0,
                                     std::span<const CauchyPair> pairs, const RunConfig& config) {
    ShapeStepResult result;
    result.states = current;
    result.cost = current_cost;
    if (t0 <= 0.0 || field.norm_h1_sq <= 0.0) return result;

    double t = t0;
    for (int attempt = 0; attempt <= config.max_backtracks; ++attempt) {
        const AnnularMesh trial_mesh = deform_mesh(current.mesh, field.theta, t);
        // a crossed Gamma keeps all cells positive yet is not a valid shape
        if (validate_mesh(trial_mesh).inverted_count == 0 &&
            is_simple(ring_polyline(trial_mesh, Ring::Gamma))) {
            StatePack trial = solve_states(trial_mesh, current.alpha, pairs, config.solver_tol, &current);
            const double trial_cost = kohn_vogelius_cost(trial);
            if (trial_cost < current_cost) {
                result.t = t;
                result.states = std::move(trial);
                result.cost = trial_cost;
                result.moved = true;
                return result;
            }
        }
        t *= 0.5;
    }
    return result; // stagnation: shape update skipped this iteration
}

AlphaStepResult armijo_alpha_step(const StatePack& current, double current_cost, double tau,
                                  double eps_start, std::span<const CauchyPair> pairs,
                                  const RunConfig& config) {
    AlphaStepResult result;
    result.states = current;
    result.cost = current_cost;

    const std::size_t m = current.mesh.gamma_ring.size();
    const BoundaryTrace dj = admittance_gradient(current);
    BoundaryTrace gradient_reg, direction;
    gradient_reg.ring = direction.ring = Ring::Gamma;
    gradient_reg.values.resize(m);
    direction.values.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        gradient_reg.values[i] = dj[i] + tau * current.alpha[i];
        direction.values[i] = -gradient_reg.values[i];
    }
    const double slope = ring_inner_product(current.mesh, gradient_reg, direction);
    if (!(slope < 0.0)) return result;

    const double reg_current = regularization_value(current.mesh, current.alpha, tau);
    double eps = eps_start > 0.0 ? eps_start : config.eps0;
    for (int attempt = 0; attempt <= config.max_armijo_halvings; ++attempt) {
        std::vector<double> candidate(m);
        for (std::size_t i = 0; i < m; ++i)
            candidate[i] = current.alpha[i] + eps * direction.values[i];
        const AdmittanceField alpha_cand =
            AdmittanceField::clipped(std::move(candidate), config.alpha_lo, config.alpha_hi);
        StatePack trial = solve_states(current.mesh, alpha_cand, pairs, config.solver_tol, &current);
        const double trial_cost = kohn_vogelius_cost(trial);
        const double reg_trial = regularization_value(current.mesh, alpha_cand, tau);
        const bool armijo_ok =
            trial_cost + reg_trial <= current_cost + reg_current + config.armijo_c * eps * slope;
        // the extra guard keeps the recorded cost history non-increasing
        if (armijo_ok && trial_cost <= current_cost) {
            result.eps = eps;
            result.states = std::move(trial);
            result.cost = trial_cost;
            result.moved = true;
            return result;
        }
        eps *= 0.5;
    }
    return result; // alpha unchanged this iteration
}

void write_history_csv(const ConvergenceHistory& history, std::ostream& os) {
    os << "iter,J,theta_norm_sq,t,eps,tau,hausdorff\n";
    char buf[200];
    for (const HistoryRow& row : history.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,", row.iter, row.J,
                      row.theta_norm_sq, row.t, row.eps, row.tau);
        os << buf;
        if (std::isnan(row.hausdorff)) {
            os << '\n';
        } else {
            std::snprintf(buf, sizeof(buf), "%.17g\n", row.hausdorff);
            os << buf;
        }
    }
}

void write_history_csv(const ConvergenceHistory& history, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FemError("cannot open '" + path + "' for writing");
    write_history_csv(history, os);
}

namespace {

double gamma_length_deviation(const AnnularMesh& mesh) {
    const ClosedPolyline gamma = ring_polyline(mesh, Ring::Gamma);
    const std::size_t m = gamma.size();
    double total = 0.0;
    std::vector<double> len(m);
    for (std::size_t i = 0; i < m; ++i) {
        len[i] = norm(gamma[(i + 1) % m] - gamma[i]);
        total += len[i];
    }
    const double mean = total / double(m);
    double dev = 0.0;
    for (double l : len) dev = std::max(dev, std::abs(l - mean) / mean);
    return dev;
}

} // namespace

ReconstructionState run_reconstruction(const RunConfig& config, std::span<const CauchyPair> pairs,
                                       const ClosedPolyline* truth, const IterationObserver& observer) {
    config.validate();
    if (pairs.size() != 2) throw FemError("exactly two Cauchy pairs are required");
    for (const CauchyPair& pair : pairs)
        if (pair.f.size() != config.n_boundary)
            throw FemError("Cauchy data length does not match the inversion boundary resolution");

    const ClosedPolyline sigma = circle_polyline(config.n_boundary, 1.0);
    const ClosedPolyline gamma0 = circle_polyline(config.n_boundary, config.r0);
    const AnnularMesh mesh0 = build_annular_mesh(sigma, gamma0, config.n_boundary, config.n_layers);
    const AdmittanceField alpha0 =
        AdmittanceField::constant(config.n_boundary, config.alpha0, config.alpha_lo, config.alpha_hi);

    ReconstructionState state;
    state.states = solve_states(mesh0, alpha0, pairs, config.solver_tol);

    int stagnant = 0;
    int last_resample = 0;
    double eps_prev = 0.0;
    VectorNodalField theta_prev;

    for (int k = 0;; ++k) {
        const GradientBundle bundle = compute_gradient_bundle(state.states, config.beta);
        const SobolevField field = sobolev_extension(state.states.mesh, bundle.G, config.sobolev_tol,
                                                     theta_prev.empty() ? nullptr : &theta_prev);
        theta_prev = field.theta;

        if (field.norm_h1_sq > 0.0) {
            const double pairing = shape_directional_value(state.states.mesh, bundle.G, field.theta);
            state.max_descent_identity_rel =
                std::max(state.max_descent_identity_rel,
                         std::abs(pairing + field.norm_h1_sq) / field.norm_h1_sq);
        }
        {
            BoundaryTrace alpha_trace{Ring::Gamma, state.states.alpha.values};
            const double reg_norm = ring_l2_sq_trapezoid(state.states.mesh, alpha_trace);
            const double residual =
                std::abs((config.beta - 1.0) * bundle.J - 0.5 * bundle.tau * reg_norm);
            state.max_balancing_residual =
                std::max(state.max_balancing_residual, residual / std::max(1.0, bundle.J));
        }

        HistoryRow row;
        row.iter = k;
        row.J = bundle.J;
        row.theta_norm_sq = field.norm_h1_sq;
        row.tau = bundle.tau;
        if (truth)
            row.hausdorff = hausdorff_distance(ring_polyline(state.states.mesh, Ring::Gamma), *truth);

        if (k >= config.max_iter || stagnant >= config.stagnation_window) {
            state.history.rows.push_back(row);
            state.iteration = k;
            break;
        }

        double t0 = shape_step_size(bundle.J, field.norm_h1_sq, config.mu);
        {
            // trust cap: one mesh cell of Gamma displacement per iteration;
            // unbounded steps along a nearly flat J amplify node-scale noise
            const ClosedPolyline gamma = ring_polyline(state.states.mesh, Ring::Gamma);
            const double h_mean = total_arclength(gamma) / double(gamma.size());
            double theta_inf = 0.0;
            for (int i : state.states.mesh.gamma_ring)
                theta_inf = std::max(theta_inf, norm(field.theta[std::size_t(i)]));
            if (theta_inf > 0.0) t0 = std::min(t0, h_mean / theta_inf);
        }
        ShapeStepResult shape = backtrack_shape_step(state.states, bundle.J, field, t0, pairs, config);

        // doubling warm start for the Armijo scan, never above eps0
        const double eps_start = eps_prev > 0.0 ? std::min(2.0 * eps_prev, config.eps0) : config.eps0;
        AlphaStepResult alpha_step =
            armijo_alpha_step(shape.states, shape.cost, bundle.tau, eps_start, pairs, config);

        row.t = shape.moved ? shape.t : 0.0;
        row.eps = alpha_step.eps;
        state.history.rows.push_back(row);

        state.states = std::move(alpha_step.states);
        state.iteration = k + 1;
        eps_prev = alpha_step.eps;
        stagnant = (!shape.moved && !alpha_step.moved) ? stagnant + 1 : 0;

        // periodic safety net, plus an emergency trigger when the node
        // distribution or cell quality degrades mid-transient
        const bool periodic_due = config.resample_period > 0 &&
                                  (k + 1) % config.resample_period == 0 &&
                                  gamma_length_deviation(state.states.mesh) > 0.1;
        const bool emergency_due =
            config.resample_period > 0 && k + 1 >= last_resample + 2 &&
            (gamma_length_deviation(state.states.mesh) > 0.2 ||
             validate_mesh(state.states.mesh).min_angle_deg < 5.0);
        if (periodic_due || emergency_due) {
            try {
                std::vector<double> alpha_values = state.states.alpha.values;
                const AnnularMesh resampled_mesh = resample_gamma(state.states.mesh, &alpha_values);
                const AdmittanceField resampled_alpha =
                    AdmittanceField::clipped(std::move(alpha_values), config.alpha_lo, config.alpha_hi);
                state.states = solve_states(resampled_mesh, resampled_alpha, pairs,
                                            config.solver_tol, &state.states);
                ++state.resample_count;
                state.resample_iterations.push_back(k + 1);
                last_resample = k + 1;
            } catch (const GammaSelfIntersection& e) {
                state.breakdown = true;
                state.breakdown_reason = e.what();
                break;
            } catch (const MeshError&) {
                // redistribution unavailable right now; the current mesh is
                // still valid, so carry on and retry after the cooldown
                last_resample = k + 1;
            }
        }

        if (observer) observer(state);
    }
    return state;
}

} // namespace kv
