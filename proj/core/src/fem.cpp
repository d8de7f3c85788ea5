#include "kv/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kv {

AdmittanceField AdmittanceField::constant(std::size_t n, double value, double lo, double hi) {
    return clipped(std::vector<double>(n, value), lo, hi);
}

AdmittanceField AdmittanceField::clipped(std::vector<double> values, double lo, double hi) {
    if (!(lo > 0.0) || !(hi > lo)) throw FemError("admittance clip bounds must satisfy 0 < lo < hi");
    for (double& v : values) {
        if (!std::isfinite(v)) throw FemError("admittance value is not finite");
        v = std::clamp(v, lo, hi);
    }
    AdmittanceField a;
    a.values = std::move(values);
    a.lo = lo;
    a.hi = hi;
    return a;
}

void SparseOperator::apply(std::span<const double> x, std::span<double> y) const {
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = row_start[i]; k < row_start[i + 1]; ++k)
            acc += vals[k] * x[std::size_t(col_idx[k])];
        y[std::size_t(i)] = acc;
    }
}

std::vector<double> SparseOperator::apply(const std::vector<double>& x) const {
    std::vector<double> y(std::size_t(n), 0.0);
    apply(x, y);
    return y;
}

std::vector<double> SparseOperator::diagonal() const {
    std::vector<double> d(std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = row_start[i]; k < row_start[i + 1]; ++k)
            if (col_idx[k] == i) d[std::size_t(i)] = vals[k];
    return d;
}

double SparseOperator::quadratic_form(std::span<const double> x) const {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int k = row_start[i]; k < row_start[i + 1]; ++k)
            row += vals[k] * x[std::size_t(col_idx[k])];
        acc += x[std::size_t(i)] * row;
    }
    return acc;
}

bool SparseOperator::is_symmetric(double tol) const {
    for (int i = 0; i < n; ++i) {
        for (int k = row_start[i]; k < row_start[i + 1]; ++k) {
            const int j = col_idx[k];
            bool found = false;
            for (int l = row_start[j]; l < row_start[j + 1]; ++l) {
                if (col_idx[l] == i) {
                    if (std::abs(vals[l] - vals[k]) > tol) return false;
                    found = true;
                    break;
                }
            }
            if (!found && std::abs(vals[k]) > tol) return false;
        }
    }
    return true;
}

SparseOperator SparseBuilder::compress() const {
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (entries[a].i != entries[b].i) return entries[a].i < entries[b].i;
        return entries[a].j < entries[b].j;
    });
    SparseOperator op;
    op.n = n;
    op.row_start.assign(std::size_t(n) + 1, 0);
    for (std::size_t pos = 0; pos < order.size();) {
        const Entry& head = entries[order[pos]];
        double acc = 0.0;
        std::size_t q = pos;
        while (q < order.size() && entries[order[q]].i == head.i && entries[order[q]].j == head.j)
            acc += entries[order[q++]].v;
        op.col_idx.push_back(head.j);
        op.vals.push_back(acc);
        ++op.row_start[std::size_t(head.i) + 1];
        pos = q;
    }
    for (int i = 0; i < n; ++i) op.row_start[std::size_t(i) + 1] += op.row_start[std::size_t(i)];
    return op;
}

SparseOperator add_operators(const SparseOperator& a, const SparseOperator& b) {
    if (a.n != b.n) throw FemError("operator dimension mismatch");
    SparseBuilder builder(a.n);
    builder.entries.reserve(a.vals.size() + b.vals.size());
    for (int i = 0; i < a.n; ++i)
        for (int k = a.row_start[i]; k < a.row_start[i + 1]; ++k)
            builder.add(i, a.col_idx[k], a.vals[k]);
    for (int i = 0; i < b.n; ++i)
        for (int k = b.row_start[i]; k < b.row_start[i + 1]; ++k)
            builder.add(i, b.col_idx[k], b.vals[k]);
    return builder.compress();
}

namespace {

struct TriangleGeometry {
    double area;
    Vec2 grad[3]; // gradient of each hat function
};

TriangleGeometry triangle_geometry(const AnnularMesh& mesh, const std::array<int, 3>& t) {
    const Point2 a = mesh.nodes[std::size_t(t[0])];
    const Point2 b = mesh.nodes[std::size_t(t[1])];
    const Point2 c = mesh.nodes[std::size_t(t[2])];
    const double twice_area = cross(b - a, c - a);
    if (twice_area <= 0.0) throw FemError("assembly hit an inverted or degenerate triangle");
    TriangleGeometry g;
    g.area = 0.5 * twice_area;
    // grad of hat at vertex i is the inward rotation of the opposite edge
    g.grad[0] = {(b.x2 - c.x2) / twice_area, (c.x1 - b.x1) / twice_area};
    g.grad[1] = {(c.x2 - a.x2) / twice_area, (a.x1 - c.x1) / twice_area};
    g.grad[2] = {(a.x2 - b.x2) / twice_area, (b.x1 - a.x1) / twice_area};
    return g;
}

// 3-point Gauss-Legendre on [0,1]: exact through degree 5.
constexpr double kGauss3X[3] = {0.1127016653792583, 0.5, 0.8872983346207417};
constexpr double kGauss3W[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

// 2-point Gauss-Legendre on [0,1]: exact through degree 3.
constexpr double kGauss2X[2] = {0.2113248654051871, 0.7886751345948129};
constexpr double kGauss2W[2] = {0.5, 0.5};

} // namespace

SparseOperator assemble_stiffness(const AnnularMesh& mesh) {
    const int n = int(mesh.node_count());
    SparseBuilder builder(n);
    builder.entries.reserve(mesh.triangles.size() * 9);
    for (const auto& t : mesh.triangles) {
        const TriangleGeometry g = triangle_geometry(mesh, t);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                builder.add(t[std::size_t(i)], t[std::size_t(j)], g.area * dot(g.grad[i], g.grad[j]));
    }
    return builder.compress();
}

SparseOperator assemble_domain_mass(const AnnularMesh& mesh) {
    const int n = int(mesh.node_count());
    SparseBuilder builder(n);
    builder.entries.reserve(mesh.triangles.size() * 9);
    for (const auto& t : mesh.triangles) {
        const TriangleGeometry g = triangle_geometry(mesh, t);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                builder.add(t[std::size_t(i)], t[std::size_t(j)], g.area * (i == j ? 1.0 : 0.5) / 6.0);
    }
    return builder.compress();
}

SparseOperator assemble_gamma_mass(const AnnularMesh& mesh, const AdmittanceField& alpha) {
    const int n = int(mesh.node_count());
    const auto& ring = mesh.gamma_ring;
    const std::size_t m = ring.size();
    if (alpha.size() != m) throw FemError("admittance field length does not match gamma ring");
    SparseBuilder builder(n);
    builder.entries.reserve(m * 4);
    for (std::size_t e = 0; e < m; ++e) {
        const int ia = ring[e];
        const int ib = ring[(e + 1) % m];
        const double len = norm(mesh.nodes[std::size_t(ib)] - mesh.nodes[std::size_t(ia)]);
        const double aa = alpha[e];
        const double ab = alpha[(e + 1) % m];
        double maa = 0.0, mab = 0.0, mbb = 0.0;
        for (int q = 0; q < 3; ++q) {
            const double x = kGauss3X[q];
            const double w = kGauss3W[q] * len;
            const double al = aa * (1.0 - x) + ab * x;
            maa += w * al * (1.0 - x) * (1.0 - x);
            mab += w * al * (1.0 - x) * x;
            mbb += w * al * x * x;
        }
        builder.add(ia, ia, maa);
        builder.add(ia, ib, mab);
        builder.add(ib, ia, mab);
        builder.add(ib, ib, mbb);
    }
    return builder.compress();
}

SparseOperator assemble_bilinear(const AnnularMesh& mesh, const AdmittanceField& alpha) {
    return add_operators(assemble_stiffness(mesh), assemble_gamma_mass(mesh, alpha));
}

SparseOperator assemble_sigma_mass(const AnnularMesh& mesh) {
    const auto& ring = mesh.sigma_ring;
    const int m = int(ring.size());
    SparseBuilder builder(m);
    for (int e = 0; e < m; ++e) {
        const int f = (e + 1) % m;
        const double len = norm(mesh.nodes[std::size_t(ring[std::size_t(f)])] -
                                mesh.nodes[std::size_t(ring[std::size_t(e)])]);
        builder.add(e, e, len / 3.0);
        builder.add(e, f, len / 6.0);
        builder.add(f, e, len / 6.0);
        builder.add(f, f, len / 3.0);
    }
    return builder.compress();
}

NodalField sigma_load_vector(const AnnularMesh& mesh, const BoundaryTrace& g) {
    if (g.ring != Ring::Sigma) throw FemError("sigma load requires a Sigma trace");
    const auto& ring = mesh.sigma_ring;
    const std::size_t m = ring.size();
    if (g.size() != m) throw FemError("trace length does not match sigma ring");
    NodalField rhs(mesh.node_count(), 0.0);
    for (std::size_t e = 0; e < m; ++e) {
        const int ia = ring[e];
        const int ib = ring[(e + 1) % m];
        const double len = norm(mesh.nodes[std::size_t(ib)] - mesh.nodes[std::size_t(ia)]);
        const double ga = g[e];
        const double gb = g[(e + 1) % m];
        double ra = 0.0, rb = 0.0;
        for (int q = 0; q < 2; ++q) {
            const double x = kGauss2X[q];
            const double w = kGauss2W[q] * len;
            const double gv = ga * (1.0 - x) + gb * x;
            ra += w * gv * (1.0 - x);
            rb += w * gv * x;
        }
        rhs[std::size_t(ia)] += ra;
        rhs[std::size_t(ib)] += rb;
    }
    return rhs;
}

NodalField gamma_sensitivity_load(const AnnularMesh& mesh, const BoundaryTrace& rho,
                                  const NodalField& u) {
    if (rho.ring != Ring::Gamma) throw FemError("sensitivity load requires a Gamma trace");
    const auto& ring = mesh.gamma_ring;
    const std::size_t m = ring.size();
    if (rho.size() != m) throw FemError("trace length does not match gamma ring");
    NodalField rhs(mesh.node_count(), 0.0);
    for (std::size_t e = 0; e < m; ++e) {
        const int ia = ring[e];
        const int ib = ring[(e + 1) % m];
        const double len = norm(mesh.nodes[std::size_t(ib)] - mesh.nodes[std::size_t(ia)]);
        const double ra = rho[e], rb = rho[(e + 1) % m];
        const double ua = u[std::size_t(ia)], ub = u[std::size_t(ib)];
        double fa = 0.0, fb = 0.0;
        for (int q = 0; q < 3; ++q) {
            const double x = kGauss3X[q];
            const double w = kGauss3W[q] * len;
            const double rv = ra * (1.0 - x) + rb * x;
            const double uv = ua * (1.0 - x) + ub * x;
            fa += w * rv * uv * (1.0 - x);
            fb += w * rv * uv * x;
        }
        rhs[std::size_t(ia)] -= fa;
        rhs[std::size_t(ib)] -= fb;
    }
    return rhs;
}

NodalField solve_spd(const SparseOperator& op, const NodalField& rhs, double tol,
                     const NodalField* warm_start) {
    const std::size_t n = std::size_t(op.n);
    if (rhs.size() != n) throw FemError("rhs dimension mismatch");
    const double rhs_norm = std::sqrt(std::inner_product(rhs.begin(), rhs.end(), rhs.begin(), 0.0));
    NodalField x(n, 0.0);
    if (rhs_norm == 0.0) return x;
    if (warm_start) {
        if (warm_start->size() != n) throw FemError("warm start dimension mismatch");
        x = *warm_start;
    }

    std::vector<double> inv_diag = op.diagonal();
    for (double& d : inv_diag) {
        if (d <= 0.0) throw SolverError("operator diagonal is not positive");
        d = 1.0 / d;
    }

    NodalField r(n), z(n), p(n), ap(n);
    op.apply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double target = tol * rhs_norm;
    const long max_iter = 10L * long(n);

    for (long iter = 0; iter <= max_iter; ++iter) {
        const double r_norm = std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
        if (r_norm <= target) return x;
        if (iter == max_iter) break;
        op.apply(p, ap);
        const double pap = std::inner_product(p.begin(), p.end(), ap.begin(), 0.0);
        if (pap <= 0.0) throw SolverError("conjugate gradients met a non-positive curvature direction");
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
        for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * ap[i];
        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_next = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw SolverError("conjugate gradients failed to reach tolerance within 10n iterations");
}

SigmaEliminatedSystem::SigmaEliminatedSystem(const SparseOperator& full, const AnnularMesh& mesh)
    : mesh_(mesh), full_(full) {
    const int n = full.n;
    free_of_global_.assign(std::size_t(n), 0);
    for (int i : mesh.sigma_ring) free_of_global_[std::size_t(i)] = -1;
    for (int i = 0; i < n; ++i) {
        if (free_of_global_[std::size_t(i)] == 0) {
            free_of_global_[std::size_t(i)] = int(global_of_free_.size());
            global_of_free_.push_back(i);
        }
    }
    SparseBuilder builder(int(global_of_free_.size()));
    for (int i = 0; i < n; ++i) {
        const int fi = free_of_global_[std::size_t(i)];
        if (fi < 0) continue;
        for (int k = full.row_start[i]; k < full.row_start[i + 1]; ++k) {
            const int fj = free_of_global_[std::size_t(full.col_idx[k])];
            if (fj >= 0) builder.add(fi, fj, full.vals[k]);
        }
    }
    reduced_ = builder.compress();
}

NodalField SigmaEliminatedSystem::solve(const NodalField& rhs, const BoundaryTrace& boundary_values,
                                        double tol, const NodalField* warm_start) const {
    const std::size_t n = std::size_t(full_.n);
    if (rhs.size() != n) throw FemError("rhs dimension mismatch");
    NodalField lifted(n, 0.0);
    if (!boundary_values.values.empty()) {
        if (boundary_values.ring != Ring::Sigma || boundary_values.size() != mesh_.sigma_ring.size())
            throw FemError("boundary values must live on the sigma ring");
        for (std::size_t i = 0; i < mesh_.sigma_ring.size(); ++i)
            lifted[std::size_t(mesh_.sigma_ring[i])] = boundary_values[i];
    }
    NodalField coupled = full_.apply(lifted);

    const std::size_t nf = global_of_free_.size();
    NodalField rhs_f(nf), warm_f;
    for (std::size_t i = 0; i < nf; ++i)
        rhs_f[i] = rhs[std::size_t(global_of_free_[i])] - coupled[std::size_t(global_of_free_[i])];
    const NodalField* warm_ptr = nullptr;
    if (warm_start) {
        warm_f.resize(nf);
        for (std::size_t i = 0; i < nf; ++i)
            warm_f[i] = (*warm_start)[std::size_t(global_of_free_[i])] -
                        lifted[std::size_t(global_of_free_[i])];
        warm_ptr = &warm_f;
    }
    const NodalField u_f = solve_spd(reduced_, rhs_f, tol, warm_ptr);

    NodalField u = lifted;
    for (std::size_t i = 0; i < nf; ++i) u[std::size_t(global_of_free_[i])] += u_f[i];
    return u;
}

NodalField solve_dirichlet_state(const AnnularMesh& mesh, const AdmittanceField& alpha,
                                 const BoundaryTrace& f, double tol,
                                 const NodalField* warm_start) {
    if (f.ring != Ring::Sigma) throw FemError("Dirichlet data must live on Sigma");
    for (double v : f.values)
        if (!std::isfinite(v)) throw FemError("Dirichlet data must be finite");
    const SparseOperator a = assemble_bilinear(mesh, alpha);
    const SigmaEliminatedSystem system(a, mesh);
    const NodalField zero(mesh.node_count(), 0.0);
    return system.solve(zero, f, tol, warm_start);
}

NodalField solve_neumann_state(const AnnularMesh& mesh, const AdmittanceField& alpha,
                               const BoundaryTrace& g, double tol,
                               const NodalField* warm_start) {
    const SparseOperator a = assemble_bilinear(mesh, alpha);
    const NodalField rhs = sigma_load_vector(mesh, g);
    return solve_spd(a, rhs, tol, warm_start);
}

BoundaryTrace extract_neumann_trace(const AnnularMesh& mesh, const AdmittanceField& alpha,
                                    const NodalField& u, double tol) {
    const SparseOperator a = assemble_bilinear(mesh, alpha);
    const NodalField au = a.apply(u);
    const std::size_t m = mesh.sigma_ring.size();
    NodalField residual(m);
    for (std::size_t i = 0; i < m; ++i) residual[i] = au[std::size_t(mesh.sigma_ring[i])];
    const SparseOperator mass = assemble_sigma_mass(mesh);
    BoundaryTrace g;
    g.ring = Ring::Sigma;
    g.values = solve_spd(mass, residual, tol);
    return g;
}

NodalField solve_alpha_sensitivity(const AnnularMesh& mesh, const AdmittanceField& alpha,
                                   const NodalField& u, const BoundaryTrace& rho,
                                   StateKind kind, double tol) {
    const SparseOperator a = assemble_bilinear(mesh, alpha);
    const NodalField rhs = gamma_sensitivity_load(mesh, rho, u);
    if (kind == StateKind::Neumann) return solve_spd(a, rhs, tol);
    const SigmaEliminatedSystem system(a, mesh);
    return system.solve(rhs, BoundaryTrace{Ring::Sigma, {}}, tol);
}

BoundaryTrace trace_on_ring(const AnnularMesh& mesh, const NodalField& u, Ring ring) {
    const auto& idx = (ring == Ring::Sigma) ? mesh.sigma_ring : mesh.gamma_ring;
    BoundaryTrace t;
    t.ring = ring;
    t.values.reserve(idx.size());
    for (int i : idx) t.values.push_back(u[std::size_t(i)]);
    return t;
}

double ring_inner_product(const AnnularMesh& mesh, const BoundaryTrace& a,
                          const BoundaryTrace& b) {
    if (a.ring != b.ring) throw FemError("traces live on different rings");
    const auto& idx = (a.ring == Ring::Sigma) ? mesh.sigma_ring : mesh.gamma_ring;
    const std::size_t m = idx.size();
    if (a.size() != m || b.size() != m) throw FemError("trace length mismatch");
    double acc = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
        const std::size_t f = (e + 1) % m;
        const double len = norm(mesh.nodes[std::size_t(idx[f])] - mesh.nodes[std::size_t(idx[e])]);
        // exact integral of the product of two linear functions
        acc += len * (2.0 * a[e] * b[e] + a[e] * b[f] + a[f] * b[e] + 2.0 * a[f] * b[f]) / 6.0;
    }
    return acc;
}

double ring_l2_sq_trapezoid(const AnnularMesh& mesh, const BoundaryTrace& v) {
    const auto& idx = (v.ring == Ring::Sigma) ? mesh.sigma_ring : mesh.gamma_ring;
    const std::size_t m = idx.size();
    if (v.size() != m) throw FemError("trace length mismatch");
    double acc = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
        const std::size_t f = (e + 1) % m;
        const double len = norm(mesh.nodes[std::size_t(idx[f])] - mesh.nodes[std::size_t(idx[e])]);
        acc += 0.5 * len * (v[e] * v[e] + v[f] * v[f]);
    }
    return acc;
}

} // namespace kv
