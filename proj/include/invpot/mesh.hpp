#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "invpot/errors.hpp"
#include "invpot/rng.hpp"

namespace invpot {

/// Structured P1 triangulation of the unit interval (dim=1) or unit square
/// (dim=2). Squares are split along the lower-left -> upper-right diagonal.
struct Mesh {
    int dim = 0;          // 1 or 2
    int subdivisions = 0; // M cells per side
    double h = 0.0;       // element diameter: 1/M (dim=1), sqrt(2)/M (dim=2)
    std::vector<std::array<double, 2>> nodes;   // y = 0 for dim=1
    std::vector<std::array<int, 3>> elements;   // third index = -1 for dim=1
    std::vector<std::uint8_t> boundary;         // 1 if node lies on the boundary

    int node_count() const { return static_cast<int>(nodes.size()); }
    int element_count() const { return static_cast<int>(elements.size()); }
    int nodes_per_element() const { return dim + 1; }
};

enum class PointKind { uniform, perturbed, radial };

inline std::string to_string(PointKind k) {
    switch (k) {
    case PointKind::uniform: return "uniform";
    case PointKind::perturbed: return "perturbed";
    case PointKind::radial: return "radial";
    }
    return "?";
}

struct PointSet {
    int dim = 0;
    PointKind kind = PointKind::uniform;
    std::vector<std::array<double, 2>> points; // y = 0 for dim=1

    int n() const { return static_cast<int>(points.size()); }
};

/// Fill distance d_max, separation distance d_min, and their ratio.
struct SamplingQuality {
    double d_max = 0.0;
    double d_min = 0.0;
    double ratio = 0.0;
};

/// Element index plus barycentric coordinates of a located point.
struct Location {
    int element = -1;
    std::array<double, 3> bary{0.0, 0.0, 0.0}; // third unused for dim=1
};

inline Mesh build_structured_mesh(int dim, int M) {
    if (dim != 1 && dim != 2) throw ConfigError("mesh: dim must be 1 or 2, got " + std::to_string(dim));
    if (M < 1) throw ConfigError("mesh: subdivisions must be >= 1, got " + std::to_string(M));

    Mesh m;
    m.dim = dim;
    m.subdivisions = M;

    if (dim == 1) {
        m.h = 1.0 / M;
        m.nodes.reserve(M + 1);
        for (int i = 0; i <= M; ++i) {
            m.nodes.push_back({static_cast<double>(i) / M, 0.0});
            m.boundary.push_back(i == 0 || i == M ? 1 : 0);
        }
        m.elements.reserve(M);
        for (int i = 0; i < M; ++i) m.elements.push_back({i, i + 1, -1});
        return m;
    }

    m.h = std::sqrt(2.0) / M;
    const int np = M + 1;
    m.nodes.reserve(static_cast<std::size_t>(np) * np);
    m.boundary.reserve(static_cast<std::size_t>(np) * np);
    for (int j = 0; j < np; ++j) {
        for (int i = 0; i < np; ++i) {
            m.nodes.push_back({static_cast<double>(i) / M, static_cast<double>(j) / M});
            m.boundary.push_back(i == 0 || j == 0 || i == M || j == M ? 1 : 0);
        }
    }
    auto vid = [np](int i, int j) { return j * np + i; };
    m.elements.reserve(2u * M * M);
    for (int j = 0; j < M; ++j) {
        for (int i = 0; i < M; ++i) {
            const int ll = vid(i, j), lr = vid(i + 1, j);
            const int ul = vid(i, j + 1), ur = vid(i + 1, j + 1);
            m.elements.push_back({ll, lr, ur}); // lower-right triangle
            m.elements.push_back({ll, ur, ul}); // upper-left triangle
        }
    }
    return m;
}

inline double element_volume(const Mesh& m, int e) {
    const auto& el = m.elements[static_cast<std::size_t>(e)];
    if (m.dim == 1) return m.nodes[el[1]][0] - m.nodes[el[0]][0];
    const auto& a = m.nodes[el[0]];
    const auto& b = m.nodes[el[1]];
    const auto& c = m.nodes[el[2]];
    return 0.5 * std::abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

/// O(1) point location on the structured mesh. Ties on the cell diagonal go
/// to the lower-right triangle.
inline Location locate(const Mesh& m, const std::array<double, 2>& x) {
    const double eps = 1e-12;
    if (x[0] < -eps || x[0] > 1.0 + eps || (m.dim == 2 && (x[1] < -eps || x[1] > 1.0 + eps)))
        throw ConfigError("locate: point outside the closed unit domain");

    const int M = m.subdivisions;
    Location loc;
    if (m.dim == 1) {
        const double xc = std::clamp(x[0], 0.0, 1.0);
        int c = std::min(static_cast<int>(xc * M), M - 1);
        double t = xc * M - c;
        loc.element = c;
        loc.bary = {1.0 - t, t, 0.0};
        return loc;
    }
    const double xc = std::clamp(x[0], 0.0, 1.0);
    const double yc = std::clamp(x[1], 0.0, 1.0);
    const int ci = std::min(static_cast<int>(xc * M), M - 1);
    const int cj = std::min(static_cast<int>(yc * M), M - 1);
    const double fx = xc * M - ci;
    const double fy = yc * M - cj;
    const int base = 2 * (cj * M + ci);
    if (fx >= fy) {
        // lower-right triangle (ll, lr, ur)
        loc.element = base;
        loc.bary = {1.0 - fx, fx - fy, fy};
    } else {
        // upper-left triangle (ll, ur, ul)
        loc.element = base + 1;
        loc.bary = {1.0 - fy, fx, fy - fx};
    }
    return loc;
}

/// Interpolate nodal values at a point (values indexed over all mesh nodes).
inline double interpolate_at(const Mesh& m, const std::vector<double>& nodal, const std::array<double, 2>& x) {
    const Location loc = locate(m, x);
    const auto& el = m.elements[static_cast<std::size_t>(loc.element)];
    double v = 0.0;
    for (int a = 0; a < m.nodes_per_element(); ++a) v += loc.bary[static_cast<std::size_t>(a)] * nodal[static_cast<std::size_t>(el[static_cast<std::size_t>(a)])];
    return v;
}

namespace detail {

// Uniform-bucket nearest-neighbour search over a 2-d point cloud; queries use
// expanding cell rings, so both clustered and uniform sets stay fast.
class PointGrid2 {
public:
    explicit PointGrid2(const std::vector<std::array<double, 2>>& pts) : pts_(pts) {
        const int n = static_cast<int>(pts.size());
        cells_per_side_ = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n)))));
        cell_ = 1.0 / cells_per_side_;
        buckets_.assign(static_cast<std::size_t>(cells_per_side_) * cells_per_side_, {});
        for (int p = 0; p < n; ++p) buckets_[bucket_of(pts[static_cast<std::size_t>(p)])].push_back(p);
    }

    /// Distance from x to the nearest stored point, optionally excluding one index.
    double nearest(const std::array<double, 2>& x, int exclude = -1) const {
        const int ci = cell_index(x[0]);
        const int cj = cell_index(x[1]);
        double best = std::numeric_limits<double>::infinity();
        for (int ring = 0; ring < 2 * cells_per_side_; ++ring) {
            if (static_cast<double>(ring - 1) * cell_ >= best) break;
            scan_ring(ci, cj, ring, x, exclude, best);
        }
        return best;
    }

private:
    std::size_t bucket_of(const std::array<double, 2>& p) const {
        return static_cast<std::size_t>(cell_index(p[1])) * cells_per_side_ + cell_index(p[0]);
    }
    int cell_index(double v) const { return std::clamp(static_cast<int>(v * cells_per_side_), 0, cells_per_side_ - 1); }

    void scan_cell(int i, int j, const std::array<double, 2>& x, int exclude, double& best) const {
        if (i < 0 || j < 0 || i >= cells_per_side_ || j >= cells_per_side_) return;
        for (int p : buckets_[static_cast<std::size_t>(j) * cells_per_side_ + i]) {
            if (p == exclude) continue;
            const auto& q = pts_[static_cast<std::size_t>(p)];
            best = std::min(best, std::hypot(q[0] - x[0], q[1] - x[1]));
        }
    }

    void scan_ring(int ci, int cj, int ring, const std::array<double, 2>& x, int exclude, double& best) const {
        if (ring == 0) {
            scan_cell(ci, cj, x, exclude, best);
            return;
        }
        for (int i = ci - ring; i <= ci + ring; ++i) {
            scan_cell(i, cj - ring, x, exclude, best);
            scan_cell(i, cj + ring, x, exclude, best);
        }
        for (int j = cj - ring + 1; j <= cj + ring - 1; ++j) {
            scan_cell(ci - ring, j, x, exclude, best);
            scan_cell(ci + ring, j, x, exclude, best);
        }
    }

    const std::vector<std::array<double, 2>>& pts_;
    int cells_per_side_ = 1;
    double cell_ = 1.0;
    std::vector<std::vector<int>> buckets_;
};

} // namespace detail

/// Scattered sampling-point generators.
///   uniform:   k^dim lattice including the boundary gridlines.
///   perturbed: element centers of a uniform k-mesh, each coordinate displaced
///              by a uniform draw in (-1/(4k), 1/(4k)).
///   radial:    k^2 draws with radius u^2 (u uniform), clustering at the origin;
///              violates quasi-uniformity by construction.
inline PointSet generate_points(int dim, PointKind kind, int k, std::uint64_t seed) {
    if (dim != 1 && dim != 2) throw ConfigError("points: dim must be 1 or 2");
    if (k < 2) throw ConfigError("points: k must be >= 2, got " + std::to_string(k));

    PointSet ps;
    ps.dim = dim;
    ps.kind = kind;
    Rng rng(mix_seed(mix_seed(seed, 0x706f696e74u + static_cast<std::uint64_t>(kind)), static_cast<std::uint64_t>(k)));

    switch (kind) {
    case PointKind::uniform: {
        const double s = 1.0 / (k - 1);
        if (dim == 1) {
            for (int i = 0; i < k; ++i) ps.points.push_back({i * s, 0.0});
        } else {
            for (int j = 0; j < k; ++j)
                for (int i = 0; i < k; ++i) ps.points.push_back({i * s, j * s});
        }
        break;
    }
    case PointKind::perturbed: {
        const Mesh grid = build_structured_mesh(dim, k);
        const double bound = 1.0 / (4.0 * k);
        for (int e = 0; e < grid.element_count(); ++e) {
            const auto& el = grid.elements[static_cast<std::size_t>(e)];
            std::array<double, 2> c{0.0, 0.0};
            for (int a = 0; a < grid.nodes_per_element(); ++a) {
                c[0] += grid.nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(a)])][0];
                c[1] += grid.nodes[static_cast<std::size_t>(el[static_cast<std::size_t>(a)])][1];
            }
            c[0] /= grid.nodes_per_element();
            c[1] /= grid.nodes_per_element();
            c[0] += rng.uniform(-bound, bound);
            if (dim == 2) c[1] += rng.uniform(-bound, bound);
            ps.points.push_back(c);
        }
        break;
    }
    case PointKind::radial: {
        const int n = k * k;
        for (int i = 0; i < n; ++i) {
            const double u = rng.uniform01_open0();
            const double r = u * u;
            if (dim == 1) {
                ps.points.push_back({r, 0.0});
            } else {
                const double theta = rng.uniform01() * M_PI / 2.0;
                ps.points.push_back({r * std::cos(theta), r * std::sin(theta)});
            }
        }
        break;
    }
    }
    return ps;
}

/// Measure fill distance (approximated on a probe lattice), separation
/// distance (exact pairwise minimum), and their ratio.
inline SamplingQuality quasi_uniformity(const PointSet& ps, int probe_resolution = 256) {
    if (ps.n() < 2) throw ConfigError("quasi_uniformity: need at least 2 points");
    if (probe_resolution < 64) throw ConfigError("quasi_uniformity: probe_resolution must be >= 64");

    SamplingQuality q;
    if (ps.dim == 1) {
        std::vector<double> xs;
        xs.reserve(ps.points.size());
        for (const auto& p : ps.points) xs.push_back(p[0]);
        std::sort(xs.begin(), xs.end());
        q.d_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < xs.size(); ++i) q.d_min = std::min(q.d_min, xs[i] - xs[i - 1]);
        for (int g = 0; g <= probe_resolution; ++g) {
            const double x = static_cast<double>(g) / probe_resolution;
            auto it = std::lower_bound(xs.begin(), xs.end(), x);
            double d = std::numeric_limits<double>::infinity();
            if (it != xs.end()) d = std::min(d, *it - x);
            if (it != xs.begin()) d = std::min(d, x - *std::prev(it));
            q.d_max = std::max(q.d_max, d);
        }
    } else {
        detail::PointGrid2 grid(ps.points);
        q.d_min = std::numeric_limits<double>::infinity();
        for (int p = 0; p < ps.n(); ++p)
            q.d_min = std::min(q.d_min, grid.nearest(ps.points[static_cast<std::size_t>(p)], p));
        for (int j = 0; j <= probe_resolution; ++j) {
            for (int i = 0; i <= probe_resolution; ++i) {
                const std::array<double, 2> x{static_cast<double>(i) / probe_resolution,
                                              static_cast<double>(j) / probe_resolution};
                q.d_max = std::max(q.d_max, grid.nearest(x));
            }
        }
    }
    q.ratio = q.d_max / q.d_min;
    return q;
}

} // namespace invpot
