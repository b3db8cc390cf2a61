#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "invpot/errors.hpp"
#include "invpot/fem.hpp"
#include "invpot/mesh.hpp"
#include "invpot/rng.hpp"

namespace invpot {

enum class NoiseKind { gaussian, uniform };

inline std::string to_string(NoiseKind k) { return k == NoiseKind::gaussian ? "gaussian" : "uniform"; }

/// Noisy point measurements m_i = u(x_i) + sigma * ||u||_inf * xi_i.
struct ObservationSet {
    PointSet points;
    std::vector<double> values; // m
    double sigma = 0.0;         // relative noise strength
    NoiseKind noise_kind = NoiseKind::gaussian;
    std::uint64_t seed = 0;

    int n() const { return points.n(); }
};

/// Exact data synthesized on a fine mesh, kept apart from the inversion mesh
/// so the reconstruction never sees its own discretization.
struct GroundTruth {
    Mesh mesh;
    NodalField q;    // exact potential, interpolated on the fine mesh
    NodalField u;    // fine-mesh state
    double sup_norm; // max |u| over nodes (exact for P1)
};

inline GroundTruth make_ground_truth(int dim, const std::string& q_id, const std::string& f_id, int M_fine,
                                     double tol = 1e-12) {
    GroundTruth gt;
    gt.mesh = build_structured_mesh(dim, M_fine);
    const OperatorSet ops = assemble_operators(gt.mesh);
    gt.q = interpolate(gt.mesh, q_id);
    const NodalField f = interpolate(gt.mesh, f_id);
    gt.u = solve_forward(gt.mesh, ops, gt.q, f, tol);
    gt.sup_norm = 0.0;
    for (double v : gt.u.values) gt.sup_norm = std::max(gt.sup_norm, std::abs(v));
    return gt;
}

/// i.i.d. unit-variance, zero-mean draws: standard normal, or uniform on
/// [-sqrt(3), sqrt(3)] rescaled to unit variance.
inline std::vector<double> sample_noise(int n, NoiseKind kind, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample_noise: n must be >= 1");
    Rng rng(mix_seed(seed, 0x6e6f697365u + static_cast<std::uint64_t>(kind)));
    std::vector<double> xi(static_cast<std::size_t>(n));
    const double s3 = std::sqrt(3.0);
    for (int i = 0; i < n; ++i)
        xi[static_cast<std::size_t>(i)] = kind == NoiseKind::gaussian ? rng.normal() : s3 * (2.0 * rng.uniform01() - 1.0);
    return xi;
}

inline ObservationSet observe(const GroundTruth& gt, const PointSet& points, double sigma, NoiseKind kind,
                              std::uint64_t seed) {
    ObservationSet obs;
    obs.points = points;
    obs.sigma = sigma;
    obs.noise_kind = kind;
    obs.seed = seed;
    obs.values.resize(points.points.size());
    for (int i = 0; i < points.n(); ++i)
        obs.values[static_cast<std::size_t>(i)] = interpolate_at(gt.mesh, gt.u.values, points.points[static_cast<std::size_t>(i)]);
    if (sigma > 0.0) {
        const std::vector<double> xi = sample_noise(points.n(), kind, seed);
        for (int i = 0; i < points.n(); ++i) obs.values[static_cast<std::size_t>(i)] += sigma * gt.sup_norm * xi[static_cast<std::size_t>(i)];
    }
    return obs;
}

/// ||v||_n = sqrt(n^-1 sum v_i^2).
inline double discrete_seminorm(const std::vector<double>& v) {
    if (v.empty()) throw ConfigError("discrete_seminorm: empty vector");
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

} // namespace invpot
