#pragma once

// Test-side oracles: quadrature error norms, dense linear algebra references,
// brute-force geometry. Kept independent of the library paths they check.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "invpot/invpot.hpp"

namespace testing_support {

using invpot::Mesh;
using invpot::NodalField;

/// L2 distance between a P1 field and an analytic function, via Gauss
/// quadrature exact to degree 5 (independent of locate/interpolate_at).
inline double l2_error_vs(const Mesh& m, const NodalField& u, const std::function<double(double, double)>& exact) {
    double acc = 0.0;
    if (m.dim == 1) {
        static const double gp[3] = {-0.774596669241483377, 0.0, 0.774596669241483377};
        static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
        for (int e = 0; e < m.element_count(); ++e) {
            const auto& el = m.elements[static_cast<std::size_t>(e)];
            const double x0 = m.nodes[static_cast<std::size_t>(el[0])][0];
            const double x1 = m.nodes[static_cast<std::size_t>(el[1])][0];
            const double L = x1 - x0;
            for (int g = 0; g < 3; ++g) {
                const double t = 0.5 * (gp[g] + 1.0);
                const double x = x0 + t * L;
                const double uh = (1.0 - t) * u.values[static_cast<std::size_t>(el[0])] + t * u.values[static_cast<std::size_t>(el[1])];
                const double d = uh - exact(x, 0.0);
                acc += 0.5 * L * gw[g] * d * d;
            }
        }
        return std::sqrt(acc);
    }
    // 7-point degree-5 rule in barycentric form
    static const double a = 0.101286507323456339, wa = 0.125939180544827153;
    static const double b = 0.470142064105115090, wb = 0.132394152788506181;
    static const double pts[7][3] = {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {a, a, 1 - 2 * a}, {a, 1 - 2 * a, a},
                                     {1 - 2 * a, a, a},           {b, b, 1 - 2 * b}, {b, 1 - 2 * b, b},
                                     {1 - 2 * b, b, b}};
    static const double w[7] = {9.0 / 40, wa, wa, wa, wb, wb, wb};
    for (int e = 0; e < m.element_count(); ++e) {
        const auto& el = m.elements[static_cast<std::size_t>(e)];
        const double A = invpot::element_volume(m, e);
        for (int g = 0; g < 7; ++g) {
            double x = 0, y = 0, uh = 0;
            for (int i = 0; i < 3; ++i) {
                x += pts[g][i] * m.nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(i)])][0];
                y += pts[g][i] * m.nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(i)])][1];
                uh += pts[g][i] * u.values[static_cast<std::size_t>(el[static_cast<std::size_t>(i)])];
            }
            const double d = uh - exact(x, y);
            acc += A * w[g] * d * d;
        }
    }
    return std::sqrt(acc);
}

/// Dense reference for sparse matvec checks.
inline std::vector<std::vector<double>> to_dense(const invpot::SparseMatrix& A) {
    std::vector<std::vector<double>> D(static_cast<std::size_t>(A.rows),
                                       std::vector<double>(static_cast<std::size_t>(A.cols), 0.0));
    for (int r = 0; r < A.rows; ++r)
        for (int k = A.row_offsets[static_cast<std::size_t>(r)]; k < A.row_offsets[static_cast<std::size_t>(r) + 1]; ++k)
            D[static_cast<std::size_t>(r)][static_cast<std::size_t>(A.col_indices[static_cast<std::size_t>(k)])] =
                A.values[static_cast<std::size_t>(k)];
    return D;
}

/// Brute-force point location: test every element's barycentric coordinates.
inline invpot::Location brute_force_locate(const Mesh& m, const std::array<double, 2>& x, double tol = 1e-12) {
    invpot::Location best;
    for (int e = 0; e < m.element_count(); ++e) {
        const auto& el = m.elements[static_cast<std::size_t>(e)];
        if (m.dim == 1) {
            const double x0 = m.nodes[static_cast<std::size_t>(el[0])][0];
            const double x1 = m.nodes[static_cast<std::size_t>(el[1])][0];
            if (x[0] < x0 - tol || x[0] > x1 + tol) continue;
            const double t = (x[0] - x0) / (x1 - x0);
            return {e, {1.0 - t, t, 0.0}};
        }
        const auto& p0 = m.nodes[static_cast<std::size_t>(el[0])];
        const auto& p1 = m.nodes[static_cast<std::size_t>(el[1])];
        const auto& p2 = m.nodes[static_cast<std::size_t>(el[2])];
        const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        const double l1 = ((x[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (x[1] - p0[1])) / det;
        const double l2 = ((p1[0] - p0[0]) * (x[1] - p0[1]) - (x[0] - p0[0]) * (p1[1] - p0[1])) / det;
        const double l0 = 1.0 - l1 - l2;
        if (l0 >= -tol && l1 >= -tol && l2 >= -tol) return {e, {l0, l1, l2}};
    }
    return best; // element = -1: not found
}

} // namespace testing_support
