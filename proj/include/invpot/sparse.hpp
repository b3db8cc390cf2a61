#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "invpot/errors.hpp"

namespace invpot {

struct Triplet {
    int row;
    int col;
    double value;
};

/// Compressed-row sparse matrix. Column indices are strictly increasing
/// within each row; duplicate triplets are summed on construction.
struct SparseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_offsets; // size rows+1
    std::vector<int> col_indices;
    std::vector<double> values;

    std::size_t nnz() const { return values.size(); }
};

inline SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> entries) {
    for (const auto& t : entries) {
        if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
            throw ConfigError("from_triplets: index (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                              ") out of range for " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });

    SparseMatrix A;
    A.rows = rows;
    A.cols = cols;
    A.row_offsets.assign(static_cast<std::size_t>(rows) + 1, 0);
    A.col_indices.reserve(entries.size());
    A.values.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size();) {
        std::size_t j = i;
        double v = 0.0;
        while (j < entries.size() && entries[j].row == entries[i].row && entries[j].col == entries[i].col)
            v += entries[j++].value;
        A.col_indices.push_back(entries[i].col);
        A.values.push_back(v);
        ++A.row_offsets[static_cast<std::size_t>(entries[i].row) + 1];
        i = j;
    }
    for (int r = 0; r < rows; ++r) A.row_offsets[static_cast<std::size_t>(r) + 1] += A.row_offsets[static_cast<std::size_t>(r)];
    return A;
}

inline void spmv(const SparseMatrix& A, const std::vector<double>& x, std::vector<double>& y) {
    if (static_cast<int>(x.size()) != A.cols) throw ConfigError("spmv: dimension mismatch");
    y.assign(static_cast<std::size_t>(A.rows), 0.0);
    for (int r = 0; r < A.rows; ++r) {
        double s = 0.0;
        for (int k = A.row_offsets[static_cast<std::size_t>(r)]; k < A.row_offsets[static_cast<std::size_t>(r) + 1]; ++k)
            s += A.values[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(A.col_indices[static_cast<std::size_t>(k)])];
        y[static_cast<std::size_t>(r)] = s;
    }
}

inline std::vector<double> spmv(const SparseMatrix& A, const std::vector<double>& x) {
    std::vector<double> y;
    spmv(A, x, y);
    return y;
}

/// y = A^T x without materializing the transpose.
inline std::vector<double> spmv_transposed(const SparseMatrix& A, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != A.rows) throw ConfigError("spmv_transposed: dimension mismatch");
    std::vector<double> y(static_cast<std::size_t>(A.cols), 0.0);
    for (int r = 0; r < A.rows; ++r) {
        const double xr = x[static_cast<std::size_t>(r)];
        if (xr == 0.0) continue;
        for (int k = A.row_offsets[static_cast<std::size_t>(r)]; k < A.row_offsets[static_cast<std::size_t>(r) + 1]; ++k)
            y[static_cast<std::size_t>(A.col_indices[static_cast<std::size_t>(k)])] += A.values[static_cast<std::size_t>(k)] * xr;
    }
    return y;
}

/// alpha*A + beta*B, same dimensions required.
inline SparseMatrix add(const SparseMatrix& A, const SparseMatrix& B, double alpha = 1.0, double beta = 1.0) {
    if (A.rows != B.rows || A.cols != B.cols) throw ConfigError("add: dimension mismatch");
    SparseMatrix C;
    C.rows = A.rows;
    C.cols = A.cols;
    C.row_offsets.assign(static_cast<std::size_t>(A.rows) + 1, 0);
    C.col_indices.reserve(A.nnz() + B.nnz());
    C.values.reserve(A.nnz() + B.nnz());
    for (int r = 0; r < A.rows; ++r) {
        int ka = A.row_offsets[static_cast<std::size_t>(r)], ea = A.row_offsets[static_cast<std::size_t>(r) + 1];
        int kb = B.row_offsets[static_cast<std::size_t>(r)], eb = B.row_offsets[static_cast<std::size_t>(r) + 1];
        while (ka < ea || kb < eb) {
            int ca = ka < ea ? A.col_indices[static_cast<std::size_t>(ka)] : A.cols;
            int cb = kb < eb ? B.col_indices[static_cast<std::size_t>(kb)] : B.cols;
            if (ca < cb) {
                C.col_indices.push_back(ca);
                C.values.push_back(alpha * A.values[static_cast<std::size_t>(ka++)]);
            } else if (cb < ca) {
                C.col_indices.push_back(cb);
                C.values.push_back(beta * B.values[static_cast<std::size_t>(kb++)]);
            } else {
                C.col_indices.push_back(ca);
                C.values.push_back(alpha * A.values[static_cast<std::size_t>(ka++)] + beta * B.values[static_cast<std::size_t>(kb++)]);
            }
        }
        C.row_offsets[static_cast<std::size_t>(r) + 1] = static_cast<int>(C.col_indices.size());
    }
    return C;
}

inline SparseMatrix transpose(const SparseMatrix& A) {
    std::vector<Triplet> t;
    t.reserve(A.nnz());
    for (int r = 0; r < A.rows; ++r)
        for (int k = A.row_offsets[static_cast<std::size_t>(r)]; k < A.row_offsets[static_cast<std::size_t>(r) + 1]; ++k)
            t.push_back({A.col_indices[static_cast<std::size_t>(k)], r, A.values[static_cast<std::size_t>(k)]});
    return from_triplets(A.cols, A.rows, std::move(t));
}

/// Entrywise symmetry check, relative tolerance on the max |A_ij|.
inline bool is_symmetric(const SparseMatrix& A, double rtol = 1e-14) {
    if (A.rows != A.cols) return false;
    double scale = 0.0;
    for (double v : A.values) scale = std::max(scale, std::abs(v));
    const SparseMatrix At = transpose(A);
    if (At.nnz() != A.nnz()) return false;
    for (std::size_t k = 0; k < A.values.size(); ++k) {
        if (At.col_indices[k] != A.col_indices[k]) return false;
        if (std::abs(At.values[k] - A.values[k]) > rtol * scale) return false;
    }
    return A.row_offsets == At.row_offsets;
}

struct SolveStats {
    int iterations = 0;
    double residual_norm = 0.0;
    bool converged = false;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

/// Jacobi-preconditioned conjugate gradients for SPD systems.
/// Converged means ||b - Ax|| <= tol * ||b||. A non-positive diagonal entry
/// is rejected up front; non-convergence is reported through the stats, not
/// thrown, so the caller decides.
inline std::pair<std::vector<double>, SolveStats> solve_spd(const SparseMatrix& A, const std::vector<double>& b,
                                                            double tol = 1e-12, int max_iter = 20000,
                                                            const std::vector<double>* x0 = nullptr) {
    if (A.rows != A.cols || static_cast<int>(b.size()) != A.rows) throw ConfigError("solve_spd: dimension mismatch");
    const std::size_t n = b.size();

    std::vector<double> inv_diag(n, 0.0);
    for (int r = 0; r < A.rows; ++r) {
        double d = 0.0;
        for (int k = A.row_offsets[static_cast<std::size_t>(r)]; k < A.row_offsets[static_cast<std::size_t>(r) + 1]; ++k)
            if (A.col_indices[static_cast<std::size_t>(k)] == r) d = A.values[static_cast<std::size_t>(k)];
        if (d <= 0.0) throw NumericalError("solve_spd: non-positive diagonal entry at row " + std::to_string(r));
        inv_diag[static_cast<std::size_t>(r)] = 1.0 / d;
    }

    SolveStats stats;
    const double bnorm = norm2(b);
    std::vector<double> x = x0 ? *x0 : std::vector<double>(n, 0.0);
    if (bnorm == 0.0) {
        stats.converged = true;
        return {std::vector<double>(n, 0.0), stats};
    }

    std::vector<double> r(n), z(n), p(n), Ap(n);
    auto refresh_residual = [&] { // true residual b - Ax; the recursive one can drift
        spmv(A, x, Ap);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
        return norm2(r);
    };
    auto restart_direction = [&] {
        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        p = z;
        return dot(r, z);
    };

    double rnorm = refresh_residual();
    double rz = restart_direction();
    bool rnorm_is_true = true;

    while (stats.iterations < max_iter) {
        if (rnorm <= tol * bnorm) {
            if (rnorm_is_true) break;
            rnorm = refresh_residual(); // confirm before declaring victory
            rnorm_is_true = true;
            if (rnorm <= tol * bnorm) break;
            rz = restart_direction();
            continue;
        }
        spmv(A, p, Ap);
        const double pAp = dot(p, Ap);
        if (pAp <= 0.0) throw NumericalError("solve_spd: matrix is not positive definite (p'Ap <= 0)");
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
        for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * Ap[i];
        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        rz = rz_new;
        rnorm = norm2(r);
        rnorm_is_true = false;
        ++stats.iterations;
    }
    if (!rnorm_is_true) rnorm = refresh_residual();
    stats.residual_norm = rnorm;
    stats.converged = rnorm <= tol * bnorm;
    return {std::move(x), stats};
}

/// Debug export: header line, then one 1-based "i j v" triplet per line.
inline void write_triplets(const SparseMatrix& A, std::ostream& os) {
    os << A.rows << " " << A.cols << " " << A.nnz() << "\n";
    char buf[64];
    for (int r = 0; r < A.rows; ++r) {
        for (int k = A.row_offsets[static_cast<std::size_t>(r)]; k < A.row_offsets[static_cast<std::size_t>(r) + 1]; ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", A.values[static_cast<std::size_t>(k)]);
            os << (r + 1) << " " << (A.col_indices[static_cast<std::size_t>(k)] + 1) << " " << buf << "\n";
        }
    }
}

} // namespace invpot
