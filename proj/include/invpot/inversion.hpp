#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "invpot/errors.hpp"
#include "invpot/fem.hpp"
#include "invpot/observation.hpp"

namespace invpot {

/// Nodal box constraint c0 <= q <= c1.
struct AdmissibleBox {
    double c0 = 1.0;
    double c1 = 5.0;
};

struct ArmijoParams {
    double c_dec = 1e-4;
    double shrink = 0.5;
    double s_init = 1.0;
    int max_backtracks = 40;
};

struct InversionConfig {
    double gamma = 1e-8;
    AdmissibleBox box;
    int max_iter = 500;
    double grad_tol = 1e-6; // relative to the first iterate's smoothed-gradient norm
    ArmijoParams armijo;
    int restart_period = 20;
    double linear_tol = 1e-12;
    int linear_max_iter = 20000;
    std::optional<double> q_init; // constant initial guess; default (c0+c1)/2
};

/// Per-iterate diagnostics; one row per evaluated iterate. step/beta describe
/// the move taken *from* that iterate (0 on the terminal row).
struct IterateDiag {
    int k = 0;
    double J = 0.0;
    double misfit = 0.0;    // ||u_h(q) - m||_n
    double penalty = 0.0;   // ||q||_H1
    double grad_norm = 0.0; // L2 norm of the smoothed gradient
    double step = 0.0;
    double beta = 0.0;
};

/// Everything the optimizer needs, assembled once per (mesh, observations).
struct InverseProblem {
    const Mesh* mesh = nullptr;
    OperatorSet ops;
    SparseMatrix H; // K_full + Mass_full: H1 quadratic form and smoother
    SparseMatrix P; // evaluation matrix, nodes x points
    std::vector<double> m;
    NodalField f;
    double linear_tol = 1e-12;
    int linear_max_iter = 20000;

    int n() const { return static_cast<int>(m.size()); }
};

inline InverseProblem make_problem(const Mesh& mesh, const ObservationSet& obs, const NodalField& f) {
    InverseProblem p;
    p.mesh = &mesh;
    p.ops = assemble_operators(mesh);
    p.H = add(p.ops.K_full, p.ops.Mass_full);
    p.P = evaluation_matrix(mesh, obs.points);
    p.m = obs.values;
    p.f = f;
    return p;
}

struct Objective {
    double J = 0.0;
    double misfit = 0.0;  // ||u - m||_n, not squared
    double penalty = 0.0; // ||q||_H1, not squared
};

inline NodalField forward(const InverseProblem& p, const NodalField& q, const NodalField* warm = nullptr) {
    return solve_forward(*p.mesh, p.ops, q, p.f, p.linear_tol, p.linear_max_iter, warm);
}

/// Objective pieces for an already-computed state u = u_h(q).
inline Objective objective_at(const InverseProblem& p, const NodalField& q, double gamma, const NodalField& u) {
    std::vector<double> r = spmv_transposed(p.P, u.values);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= p.m[j];
    Objective o;
    o.misfit = discrete_seminorm(r);
    o.penalty = std::sqrt(std::max(0.0, quadratic_form(p.H, q.values, q.values)));
    o.J = o.misfit * o.misfit + gamma * o.penalty * o.penalty;
    return o;
}

/// J(q) = ||u_h(q) - m||_n^2 + gamma ||q||_H1^2 (solves the forward problem).
inline Objective objective(const InverseProblem& p, const NodalField& q, double gamma) {
    return objective_at(p, q, gamma, forward(p, q));
}

/// Exact discrete gradient of the objective w.r.t. the nodal coefficients:
/// G = -W(u,v) + 2 gamma (K_full + Mass_full) q, with v the adjoint state.
inline std::vector<double> gradient_at(const InverseProblem& p, const NodalField& q, double gamma,
                                       const NodalField& u, const NodalField& v) {
    std::vector<double> G = product_load(*p.mesh, u, v);
    const std::vector<double> Hq = spmv(p.H, q.values);
    for (std::size_t i = 0; i < G.size(); ++i) G[i] = -G[i] + 2.0 * gamma * Hq[i];
    return G;
}

inline std::vector<double> gradient(const InverseProblem& p, const NodalField& q, double gamma) {
    const NodalField u = forward(p, q);
    const NodalField v = solve_adjoint(*p.mesh, p.ops, q, u, p.P, p.m, p.linear_tol, p.linear_max_iter);
    return gradient_at(p, q, gamma, u, v);
}

/// Descent direction g solving (K_full + Mass_full) g = -G, i.e. the H1 Riesz
/// representative of the negative gradient under zero Neumann conditions.
inline std::vector<double> smooth_gradient(const InverseProblem& p, const std::vector<double>& G,
                                           const std::vector<double>* warm = nullptr) {
    std::vector<double> rhs(G.size());
    for (std::size_t i = 0; i < G.size(); ++i) rhs[i] = -G[i];
    auto [g, stats] = solve_spd(p.H, rhs, p.linear_tol, p.linear_max_iter, warm);
    if (!stats.converged) throw NumericalError("smooth_gradient: PCG stalled");
    return g;
}

inline NodalField project_box(const NodalField& q, const AdmissibleBox& box) {
    NodalField out = q;
    for (double& v : out.values) v = std::clamp(v, box.c0, box.c1);
    return out;
}

/// Fletcher-Reeves state across iterations.
struct CgState {
    std::vector<double> g_prev, d_prev;
    double g_prev_norm2 = 0.0; // L2(Omega) quadratic form of g_prev
    int since_restart = 0;
};

/// d = g + beta d_prev with beta = ||g||^2 / ||g_prev||^2 in L2(Omega).
/// beta resets to zero on the first iteration, every restart_period
/// iterations, and whenever the combined direction fails the descent test
/// <d, -G> > 0.
inline std::pair<std::vector<double>, double> cg_direction(const SparseMatrix& mass, CgState& st,
                                                           const std::vector<double>& g,
                                                           const std::vector<double>& G, int restart_period) {
    const double gn2 = quadratic_form(mass, g, g);
    double beta = 0.0;
    if (st.g_prev_norm2 > 0.0 && st.since_restart < restart_period) beta = gn2 / st.g_prev_norm2;

    std::vector<double> d = g;
    if (beta > 0.0) {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += beta * st.d_prev[i];
        if (dot(d, G) >= 0.0) { // lost descent: fall back to the smoothed gradient
            d = g;
            beta = 0.0;
        }
    }
    st.since_restart = beta == 0.0 ? 1 : st.since_restart + 1;
    st.g_prev = g;
    st.d_prev = d;
    st.g_prev_norm2 = gn2;
    return {std::move(d), beta};
}

struct LineSearchResult {
    bool accepted = false;
    double step = 0.0;
    NodalField q_next;
    NodalField u_next;
    Objective next;
};

/// Projected backtracking line search. Acceptance is the projected Armijo
/// test J(P(q + s d)) <= J(q) - c_dec ||P(q + s d) - q||_L2^2 / s.
inline LineSearchResult line_search(const InverseProblem& p, const NodalField& q, const std::vector<double>& d,
                                    double gamma, double J0, const AdmissibleBox& box, const ArmijoParams& armijo,
                                    const NodalField& u_warm) {
    LineSearchResult res;
    double s = armijo.s_init;
    for (int t = 0; t <= armijo.max_backtracks; ++t, s *= armijo.shrink) {
        NodalField q_trial = q;
        for (std::size_t i = 0; i < q_trial.values.size(); ++i)
            q_trial.values[i] = std::clamp(q.values[i] + s * d[i], box.c0, box.c1);

        std::vector<double> dq(q.values.size());
        for (std::size_t i = 0; i < dq.size(); ++i) dq[i] = q_trial.values[i] - q.values[i];
        const double dq2 = quadratic_form(p.ops.Mass_full, dq, dq);
        if (dq2 <= 0.0) return res; // direction is zero or fully blocked by the box

        NodalField u_trial = forward(p, q_trial, &u_warm);
        const Objective obj = objective_at(p, q_trial, gamma, u_trial);
        if (obj.J <= J0 - armijo.c_dec * dq2 / s) {
            res.accepted = true;
            res.step = s;
            res.q_next = std::move(q_trial);
            res.u_next = std::move(u_trial);
            res.next = obj;
            return res;
        }
    }
    return res;
}

enum class StopReason { grad_tol, max_iter, stagnation };

struct ReconstructResult {
    NodalField q;
    std::vector<IterateDiag> history; // one row per evaluated iterate
    StopReason reason = StopReason::max_iter;
    Objective final_objective;

    int accepted_steps() const { return static_cast<int>(history.size()) - 1; }
};

/// Projected conjugate-gradient reconstruction: forward solve, adjoint solve,
/// exact gradient, H1 smoothing, Fletcher-Reeves direction, projected Armijo
/// step, until the relative smoothed-gradient norm, the iteration budget, or
/// line-search stagnation stops it.
inline ReconstructResult reconstruct(const InverseProblem& p, const InversionConfig& cfg,
                                     const NodalField* q_init = nullptr,
                                     const std::function<void(int, const NodalField&)>& observer = {}) {
    if (!(cfg.gamma > 0.0)) throw ConfigError("reconstruct: gamma must be positive");
    if (!(cfg.box.c0 >= 0.0 && cfg.box.c0 < cfg.box.c1)) throw ConfigError("reconstruct: need 0 <= c0 < c1");
    if (!(cfg.armijo.c_dec > 0.0 && cfg.armijo.c_dec < 1.0)) throw ConfigError("reconstruct: need 0 < c_dec < 1");
    if (!(cfg.armijo.shrink > 0.0 && cfg.armijo.shrink < 1.0)) throw ConfigError("reconstruct: need 0 < shrink < 1");
    if (cfg.max_iter < 0) throw ConfigError("reconstruct: max_iter must be >= 0");

    InverseProblem prob = p; // cheap views; adjust solver knobs locally
    prob.linear_tol = cfg.linear_tol;
    prob.linear_max_iter = cfg.linear_max_iter;

    ReconstructResult res;
    NodalField q = q_init ? project_box(*q_init, cfg.box)
                          : project_box(make_field(*p.mesh, Space::Vh, cfg.q_init.value_or(0.5 * (cfg.box.c0 + cfg.box.c1))),
                                        cfg.box);
    if (observer) observer(0, q);

    NodalField u = forward(prob, q);
    Objective obj = objective_at(prob, q, cfg.gamma, u);

    NodalField v = make_field(*p.mesh, Space::Xh);
    std::vector<double> g_warm(q.values.size(), 0.0);
    CgState cg;
    double grad0 = -1.0;
    // Warm-started backtracking: each search begins one shrink-notch above
    // the previously accepted step, so the trial step tracks the problem's
    // own scale instead of restarting from s_init every iteration.
    double s_start = cfg.armijo.s_init;
    res.reason = StopReason::max_iter;

    auto eval_grad = [&](double& grad_norm_out) {
        v = solve_adjoint(*prob.mesh, prob.ops, q, u, prob.P, prob.m, prob.linear_tol, prob.linear_max_iter, &v);
        std::vector<double> G = gradient_at(prob, q, cfg.gamma, u, v);
        g_warm = smooth_gradient(prob, G, &g_warm);
        grad_norm_out = std::sqrt(std::max(0.0, quadratic_form(prob.ops.Mass_full, g_warm, g_warm)));
        return G;
    };

    int k = 0;
    for (; k < cfg.max_iter; ++k) {
        double grad_norm = 0.0;
        const std::vector<double> G = eval_grad(grad_norm);
        if (grad0 < 0.0) grad0 = grad_norm;
        if (grad0 == 0.0 || grad_norm <= cfg.grad_tol * grad0) {
            res.history.push_back({k, obj.J, obj.misfit, obj.penalty, grad_norm, 0.0, 0.0});
            res.reason = StopReason::grad_tol;
            break;
        }
        auto [d, beta] = cg_direction(prob.ops.Mass_full, cg, g_warm, G, cfg.restart_period);
        ArmijoParams armijo_k = cfg.armijo;
        armijo_k.s_init = s_start;
        LineSearchResult ls = line_search(prob, q, d, cfg.gamma, obj.J, cfg.box, armijo_k, u);
        if (!ls.accepted && beta != 0.0) {
            // the conjugate direction failed the search; retry once from a
            // clean steepest-descent restart before giving up
            cg = CgState{};
            std::tie(d, beta) = cg_direction(prob.ops.Mass_full, cg, g_warm, G, cfg.restart_period);
            ls = line_search(prob, q, d, cfg.gamma, obj.J, cfg.box, armijo_k, u);
        }
        if (!ls.accepted) {
            res.history.push_back({k, obj.J, obj.misfit, obj.penalty, grad_norm, 0.0, beta});
            res.reason = StopReason::stagnation;
            break;
        }
        res.history.push_back({k, obj.J, obj.misfit, obj.penalty, grad_norm, ls.step, beta});
        s_start = std::min(ls.step / cfg.armijo.shrink, 1e14);
        q = std::move(ls.q_next);
        u = std::move(ls.u_next);
        obj = ls.next;
        if (observer) observer(k + 1, q);
    }
    if (k == cfg.max_iter) { // budget exhausted (or max_iter == 0): record the final state
        double grad_norm = 0.0;
        eval_grad(grad_norm);
        res.history.push_back({k, obj.J, obj.misfit, obj.penalty, grad_norm, 0.0, 0.0});
    }

    res.q = std::move(q);
    res.final_objective = obj;
    return res;
}

// ---------------------------------------------------------------------------
// Regularization-parameter rules: gamma^(1/2 + d/12) equals the ratio
// s / (||q||_H1 + s) with s = sigma n^{-1/2} (a priori) or s = n^{-1/2} times
// the achieved misfit (adaptive update). Hidden constant taken as 1.
// ---------------------------------------------------------------------------

inline double gamma_floor() { return 1e-16; }

namespace detail {
inline double gamma_from_ratio(int dim, double s, double q_h1_norm) {
    if (dim != 1 && dim != 2) throw ConfigError("gamma rule: dim must be 1 or 2");
    const double den = q_h1_norm + s;
    if (den <= 0.0) return 0.0;
    const double exponent = 1.0 / (0.5 + static_cast<double>(dim) / 12.0); // 12/7 (d=1), 3/2 (d=2)
    return std::pow(s / den, exponent);
}
} // namespace detail

/// A priori rule from the error analysis; returns 0 when sigma = 0 (callers
/// substitute the gamma_floor).
inline double apriori_gamma(int dim, double sigma, double n, double q_h1_norm) {
    if (sigma < 0.0 || n < 1.0 || q_h1_norm <= 0.0) throw ConfigError("apriori_gamma: invalid arguments");
    if (sigma == 0.0) return 0.0;
    return detail::gamma_from_ratio(dim, sigma / std::sqrt(n), q_h1_norm);
}

/// Self-consistent update using the achieved misfit as a noise proxy.
inline double update_gamma(int dim, double n, double misfit_n, double q_h1_norm) {
    if (misfit_n < 0.0 || q_h1_norm < 0.0 || n < 1.0) throw ConfigError("update_gamma: invalid arguments");
    const double g = detail::gamma_from_ratio(dim, misfit_n / std::sqrt(n), q_h1_norm);
    return std::max(g, gamma_floor());
}

struct GammaTraceRow {
    int k = 0;
    double gamma = 0.0;
    double misfit = 0.0;
    double q_h1 = 0.0;
    double e_q = std::numeric_limits<double>::quiet_NaN(); // filled when the truth is known
};

struct AdaptResult {
    std::vector<GammaTraceRow> trace;
    NodalField q;
    double gamma_final = 0.0;
    bool converged = false;
    std::vector<IterateDiag> last_history;
};

/// Adaptive gamma loop: reconstruct at gamma_k, update from the achieved
/// misfit and H1 norm, stop when the relative change drops below rel_tol.
/// Each outer solve warm-starts from the previous minimizer.
inline AdaptResult adapt(const InverseProblem& p, const InversionConfig& base, double gamma0, int K_outer = 15,
                         double rel_tol = 1e-3,
                         const std::function<double(const NodalField&)>& e_q_of = {}) {
    if (!(gamma0 > 0.0)) throw ConfigError("adapt: gamma0 must be positive");
    if (K_outer < 1) throw ConfigError("adapt: K_outer must be >= 1");

    AdaptResult out;
    const int dim = p.mesh->dim;
    const double n = static_cast<double>(p.n());
    double gamma = std::max(gamma0, gamma_floor());
    std::optional<NodalField> warm;

    for (int k = 0; k < K_outer; ++k) {
        InversionConfig cfg = base;
        cfg.gamma = gamma;
        ReconstructResult res = reconstruct(p, cfg, warm ? &*warm : nullptr);

        GammaTraceRow row;
        row.k = k;
        row.gamma = gamma;
        row.misfit = res.final_objective.misfit;
        row.q_h1 = res.final_objective.penalty;
        if (e_q_of) row.e_q = e_q_of(res.q);
        out.trace.push_back(row);

        out.q = std::move(res.q);
        out.last_history = std::move(res.history);
        warm = out.q;

        const double gamma_next = update_gamma(dim, n, row.misfit, row.q_h1);
        if (std::abs(gamma_next - gamma) <= rel_tol * gamma) {
            out.converged = true;
            break;
        }
        gamma = gamma_next;
    }
    out.gamma_final = out.trace.back().gamma;
    return out;
}

} // namespace invpot
