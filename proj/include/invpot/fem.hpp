#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "invpot/errors.hpp"
#include "invpot/functions.hpp"
#include "invpot/mesh.hpp"
#include "invpot/sparse.hpp"

namespace invpot {

/// V_h: P1 functions over all nodes. X_h: zero trace, boundary dofs pinned to 0.
enum class Space { Vh, Xh };

/// One coefficient per mesh node of the mesh it was built on. Fields in X_h
/// keep explicit zeros at boundary nodes so evaluation code never needs the
/// dof map. Plain value type; the owning mesh travels alongside in call
/// signatures.
struct NodalField {
    Space space = Space::Vh;
    std::vector<double> values;
};

inline NodalField make_field(const Mesh& m, Space space, double fill = 0.0) {
    NodalField f{space, std::vector<double>(static_cast<std::size_t>(m.node_count()), fill)};
    if (space == Space::Xh)
        for (int i = 0; i < m.node_count(); ++i)
            if (m.boundary[static_cast<std::size_t>(i)]) f.values[static_cast<std::size_t>(i)] = 0.0;
    return f;
}

/// Nodal interpolant of a registered analytic function.
inline NodalField interpolate(const Mesh& m, const std::string& function_id) {
    const auto& fn = lookup_function(function_id, m.dim);
    NodalField f = make_field(m, Space::Vh);
    for (int i = 0; i < m.node_count(); ++i)
        f.values[static_cast<std::size_t>(i)] = fn.f(m.nodes[static_cast<std::size_t>(i)][0], m.nodes[static_cast<std::size_t>(i)][1]);
    return f;
}

/// Interior/boundary dof bookkeeping for the Dirichlet-eliminated system.
struct DofMap {
    std::vector<int> interior_index; // per node; -1 for boundary nodes
    std::vector<int> interior_nodes; // interior dof -> node id

    int interior_count() const { return static_cast<int>(interior_nodes.size()); }
};

inline DofMap make_dof_map(const Mesh& m) {
    DofMap d;
    d.interior_index.assign(static_cast<std::size_t>(m.node_count()), -1);
    for (int i = 0; i < m.node_count(); ++i) {
        if (!m.boundary[static_cast<std::size_t>(i)]) {
            d.interior_index[static_cast<std::size_t>(i)] = static_cast<int>(d.interior_nodes.size());
            d.interior_nodes.push_back(i);
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Local element integrals. P1 barycentric monomials integrate exactly:
//   2-d triangle, area A:  int lam^2 = A/6, lam*mu = A/12,
//                          lam^3 = A/10, lam^2*mu = A/30, lam*mu*nu = A/60
//   1-d segment, length L: int lam^2 = L/3, lam*mu = L/6,
//                          lam^3 = L/4, lam^2*mu = L/12
// ---------------------------------------------------------------------------

/// int over the element of lam_a * lam_b (divided by the element measure).
inline double basis_pair_integral(int dim, int a, int b) {
    if (dim == 1) return a == b ? 1.0 / 3.0 : 1.0 / 6.0;
    return a == b ? 1.0 / 6.0 : 1.0 / 12.0;
}

/// int over the element of lam_a * lam_b * lam_c (divided by the element measure).
inline double basis_triple_integral(int dim, int a, int b, int c) {
    if (dim == 1) return (a == b && b == c) ? 1.0 / 4.0 : 1.0 / 12.0;
    if (a == b && b == c) return 1.0 / 10.0;
    if (a != b && b != c && a != c) return 1.0 / 60.0;
    return 1.0 / 30.0;
}

/// Local P1 stiffness matrix of a triangle (entries beyond 2x2 unused in 1-d).
inline std::array<std::array<double, 3>, 3> local_stiffness(const Mesh& m, int e) {
    std::array<std::array<double, 3>, 3> K{};
    const auto& el = m.elements[static_cast<std::size_t>(e)];
    if (m.dim == 1) {
        const double L = m.nodes[el[1]][0] - m.nodes[el[0]][0];
        K[0][0] = K[1][1] = 1.0 / L;
        K[0][1] = K[1][0] = -1.0 / L;
        return K;
    }
    const auto& p0 = m.nodes[el[0]];
    const auto& p1 = m.nodes[el[1]];
    const auto& p2 = m.nodes[el[2]];
    const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    const double area = 0.5 * std::abs(det);
    // grad(phi_i) = (b_i, c_i) / det with the cyclic edge differences
    const std::array<double, 3> b{p1[1] - p2[1], p2[1] - p0[1], p0[1] - p1[1]};
    const std::array<double, 3> c{p2[0] - p1[0], p0[0] - p2[0], p1[0] - p0[0]};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) K[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = area * (b[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)] + c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(j)]) / (det * det);
    return K;
}

namespace detail {

template <typename LocalEntry>
SparseMatrix assemble(const Mesh& m, Space space, const DofMap& dofs, LocalEntry&& local) {
    const int nv = m.nodes_per_element();
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(m.element_count()) * nv * nv);
    const bool interior_only = space == Space::Xh;
    for (int e = 0; e < m.element_count(); ++e) {
        const auto& el = m.elements[static_cast<std::size_t>(e)];
        for (int a = 0; a < nv; ++a) {
            for (int b = 0; b < nv; ++b) {
                int ra = el[static_cast<std::size_t>(a)], cb = el[static_cast<std::size_t>(b)];
                if (interior_only) {
                    ra = dofs.interior_index[static_cast<std::size_t>(ra)];
                    cb = dofs.interior_index[static_cast<std::size_t>(cb)];
                    if (ra < 0 || cb < 0) continue;
                }
                trip.push_back({ra, cb, local(e, el, a, b)});
            }
        }
    }
    const int dim_out = interior_only ? dofs.interior_count() : m.node_count();
    return from_triplets(dim_out, dim_out, std::move(trip));
}

} // namespace detail

inline SparseMatrix assemble_stiffness(const Mesh& m, Space space) {
    const DofMap dofs = make_dof_map(m);
    std::vector<std::array<std::array<double, 3>, 3>> cache(static_cast<std::size_t>(m.element_count()));
    for (int e = 0; e < m.element_count(); ++e) cache[static_cast<std::size_t>(e)] = local_stiffness(m, e);
    return detail::assemble(m, space, dofs, [&](int e, const std::array<int, 3>&, int a, int b) {
        return cache[static_cast<std::size_t>(e)][static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    });
}

/// Mass matrix with an optional piecewise-linear weight, integrated exactly.
/// weight == nullptr means unit weight.
inline SparseMatrix assemble_mass(const Mesh& m, Space space, const NodalField* weight = nullptr) {
    if (weight && weight->values.size() != static_cast<std::size_t>(m.node_count()))
        throw ConfigError("assemble_mass: weight field does not live on this mesh");
    const DofMap dofs = make_dof_map(m);
    const int nv = m.nodes_per_element();
    if (!weight) {
        return detail::assemble(m, space, dofs, [&](int e, const std::array<int, 3>&, int a, int b) {
            return element_volume(m, e) * basis_pair_integral(m.dim, a, b);
        });
    }
    return detail::assemble(m, space, dofs, [&](int e, const std::array<int, 3>& el, int a, int b) {
        double s = 0.0;
        for (int c = 0; c < nv; ++c)
            s += weight->values[static_cast<std::size_t>(el[static_cast<std::size_t>(c)])] * basis_triple_integral(m.dim, a, b, c);
        return element_volume(m, e) * s;
    });
}

/// Precomputed operators shared by forward/adjoint/penalty work.
/// K_full annihilates constants; K_dir, Mass_dir, Mass_full are SPD.
struct OperatorSet {
    DofMap dofs;
    SparseMatrix K_full, Mass_full; // over all nodes (Neumann / V_h forms)
    SparseMatrix K_dir, Mass_dir;   // interior nodes only (Dirichlet-eliminated)
};

inline OperatorSet assemble_operators(const Mesh& m) {
    OperatorSet ops;
    ops.dofs = make_dof_map(m);
    ops.K_full = assemble_stiffness(m, Space::Vh);
    ops.Mass_full = assemble_mass(m, Space::Vh);
    ops.K_dir = assemble_stiffness(m, Space::Xh);
    ops.Mass_dir = assemble_mass(m, Space::Xh);
    return ops;
}

inline std::vector<double> restrict_interior(const DofMap& dofs, const std::vector<double>& full) {
    std::vector<double> r(static_cast<std::size_t>(dofs.interior_count()));
    for (int i = 0; i < dofs.interior_count(); ++i) r[static_cast<std::size_t>(i)] = full[static_cast<std::size_t>(dofs.interior_nodes[static_cast<std::size_t>(i)])];
    return r;
}

inline std::vector<double> scatter_interior(const DofMap& dofs, const std::vector<double>& interior, int node_count) {
    std::vector<double> full(static_cast<std::size_t>(node_count), 0.0);
    for (int i = 0; i < dofs.interior_count(); ++i) full[static_cast<std::size_t>(dofs.interior_nodes[static_cast<std::size_t>(i)])] = interior[static_cast<std::size_t>(i)];
    return full;
}

/// Load vector b_i = (Pi_h f, phi_i), i.e. Mass_full * f restricted per space.
inline std::vector<double> assemble_load(const Mesh& m, const OperatorSet& ops, const NodalField& f, Space space) {
    if (f.values.size() != static_cast<std::size_t>(m.node_count())) throw ConfigError("assemble_load: field/mesh mismatch");
    std::vector<double> b = spmv(ops.Mass_full, f.values);
    if (space == Space::Vh) return b;
    return restrict_interior(ops.dofs, b);
}

/// Evaluation matrix P = [phi_i(x_j)], nodes by points. Each column holds the
/// barycentric weights of one sampling point (at most dim+1 nonzeros).
inline SparseMatrix evaluation_matrix(const Mesh& m, const PointSet& ps) {
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(ps.n()) * static_cast<std::size_t>(m.nodes_per_element()));
    for (int j = 0; j < ps.n(); ++j) {
        const Location loc = locate(m, ps.points[static_cast<std::size_t>(j)]);
        const auto& el = m.elements[static_cast<std::size_t>(loc.element)];
        for (int a = 0; a < m.nodes_per_element(); ++a) {
            const double w = loc.bary[static_cast<std::size_t>(a)];
            if (w != 0.0) trip.push_back({el[static_cast<std::size_t>(a)], j, w});
        }
    }
    return from_triplets(m.node_count(), ps.n(), std::move(trip));
}

/// Solve (grad u, grad phi) + (q u, phi) = (f, phi) over X_h. Requires q >= 0
/// nodally so the system stays SPD. Returns the state extended by zero to the
/// boundary. warm, if given, seeds the linear solver.
inline NodalField solve_forward(const Mesh& m, const OperatorSet& ops, const NodalField& q, const NodalField& f,
                                double tol = 1e-12, int max_iter = 20000, const NodalField* warm = nullptr) {
    const SparseMatrix Mq = assemble_mass(m, Space::Xh, &q);
    const SparseMatrix A = add(ops.K_dir, Mq);
    const std::vector<double> b = assemble_load(m, ops, f, Space::Xh);
    std::vector<double> x0;
    if (warm) x0 = restrict_interior(ops.dofs, warm->values);
    auto [u_int, stats] = solve_spd(A, b, tol, max_iter, warm ? &x0 : nullptr);
    if (!stats.converged)
        throw NumericalError("solve_forward: PCG stalled after " + std::to_string(stats.iterations) +
                             " iterations, residual " + std::to_string(stats.residual_norm));
    return NodalField{Space::Xh, scatter_interior(ops.dofs, u_int, m.node_count())};
}

/// Adjoint solve: same operator, load 2/n * sum_j (u(x_j) - m_j) phi_i(x_j).
inline NodalField solve_adjoint(const Mesh& m, const OperatorSet& ops, const NodalField& q, const NodalField& u,
                                const SparseMatrix& P, const std::vector<double>& obs_values,
                                double tol = 1e-12, int max_iter = 20000, const NodalField* warm = nullptr) {
    const std::size_t n = obs_values.size();
    if (static_cast<int>(n) != P.cols) throw ConfigError("solve_adjoint: observation count does not match P");
    std::vector<double> r = spmv_transposed(P, u.values); // u at the sampling points
    for (std::size_t j = 0; j < n; ++j) r[j] = (2.0 / static_cast<double>(n)) * (r[j] - obs_values[j]);
    const std::vector<double> rhs_full = spmv(P, r);

    const SparseMatrix Mq = assemble_mass(m, Space::Xh, &q);
    const SparseMatrix A = add(ops.K_dir, Mq);
    const std::vector<double> b = restrict_interior(ops.dofs, rhs_full);
    std::vector<double> x0;
    if (warm) x0 = restrict_interior(ops.dofs, warm->values);
    auto [v_int, stats] = solve_spd(A, b, tol, max_iter, warm ? &x0 : nullptr);
    if (!stats.converged)
        throw NumericalError("solve_adjoint: PCG stalled after " + std::to_string(stats.iterations) +
                             " iterations, residual " + std::to_string(stats.residual_norm));
    return NodalField{Space::Xh, scatter_interior(ops.dofs, v_int, m.node_count())};
}

/// W_k = int u_h v_h phi_k over all nodes; the misfit part of the objective
/// gradient. Cubic P1 product, integrated exactly.
inline std::vector<double> product_load(const Mesh& m, const NodalField& u, const NodalField& v) {
    std::vector<double> w(static_cast<std::size_t>(m.node_count()), 0.0);
    const int nv = m.nodes_per_element();
    for (int e = 0; e < m.element_count(); ++e) {
        const auto& el = m.elements[static_cast<std::size_t>(e)];
        const double vol = element_volume(m, e);
        for (int a = 0; a < nv; ++a) {
            const double ua = u.values[static_cast<std::size_t>(el[static_cast<std::size_t>(a)])];
            if (ua == 0.0) continue;
            for (int b = 0; b < nv; ++b) {
                const double vb = v.values[static_cast<std::size_t>(el[static_cast<std::size_t>(b)])];
                if (vb == 0.0) continue;
                for (int c = 0; c < nv; ++c)
                    w[static_cast<std::size_t>(el[static_cast<std::size_t>(c)])] += vol * ua * vb * basis_triple_integral(m.dim, a, b, c);
            }
        }
    }
    return w;
}

inline double quadratic_form(const SparseMatrix& A, const std::vector<double>& x, const std::vector<double>& y) {
    return dot(x, spmv(A, y));
}

inline double l2_norm(const OperatorSet& ops, const NodalField& v) {
    return std::sqrt(std::max(0.0, quadratic_form(ops.Mass_full, v.values, v.values)));
}

inline double h1_inner(const OperatorSet& ops, const NodalField& a, const NodalField& b) {
    return quadratic_form(ops.K_full, a.values, b.values) + quadratic_form(ops.Mass_full, a.values, b.values);
}

inline double h1_norm(const OperatorSet& ops, const NodalField& v) {
    return std::sqrt(std::max(0.0, h1_inner(ops, v, v)));
}

} // namespace invpot
