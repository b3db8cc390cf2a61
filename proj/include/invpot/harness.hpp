#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "invpot/errors.hpp"
#include "invpot/inversion.hpp"
#include "invpot/io.hpp"

namespace invpot::harness {

enum class GammaMode { fixed, apriori, adaptive };

inline std::string to_string(GammaMode m) {
    switch (m) {
    case GammaMode::fixed: return "fixed";
    case GammaMode::apriori: return "apriori";
    case GammaMode::adaptive: return "adaptive";
    }
    return "?";
}

struct ExperimentConfig {
    std::string id = "custom"; // ex_gamma_sweep | ex_adaptive | ex_rate_1d | ex_rate_2d | custom
    int dim = 2;
    int M = 16;
    int M_fine = 200;
    PointKind point_kind = PointKind::uniform;
    int k = 0;
    double sigma = 0.0;
    NoiseKind noise_kind = NoiseKind::gaussian;
    std::uint64_t seed = 0;
    GammaMode gamma_mode = GammaMode::fixed;
    double gamma_value = 0.0;       // fixed mode
    std::vector<double> gammas;     // sweep
    double gamma0 = 0.0;            // adaptive; <= 0 means n^(-3/4)
    int K_outer = 15;
    AdmissibleBox box;
    std::string q_true;
    std::string f_id = "const1";
    InversionConfig opt; // gamma filled per run
    std::vector<double> n_list;
    std::string out_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for '" + key + "': '" + v + "'");
    }
}

inline long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value for '" + key + "': '" + v + "'");
    }
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_double(key, item));
    }
    if (out.empty()) throw ConfigError("config: empty list for '" + key + "'");
    return out;
}

template <typename F>
auto staged(const std::string& stage, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(stage + ": " + e.what());
    }
}

} // namespace detail

inline void validate(const ExperimentConfig& c) {
    static const std::vector<std::string> ids{"ex_gamma_sweep", "ex_adaptive", "ex_rate_1d", "ex_rate_2d", "custom"};
    if (std::find(ids.begin(), ids.end(), c.id) == ids.end()) throw ConfigError("config: unknown experiment id '" + c.id + "'");
    if (c.dim != 1 && c.dim != 2) throw ConfigError("config: dim must be 1 or 2");
    if (c.M < 1) throw ConfigError("config: M must be >= 1");
    if (c.M_fine < 4 * c.M) throw ConfigError("config: M_fine must be >= 4*M");
    if (c.k < 2) throw ConfigError("config: k must be >= 2");
    if (c.sigma < 0.0) throw ConfigError("config: sigma must be >= 0");
    if (!(c.box.c0 >= 0.0 && c.box.c0 < c.box.c1)) throw ConfigError("config: need 0 <= c0 < c1");
    if (c.q_true.empty()) throw ConfigError("config: functions.q_true is required");
    lookup_function(c.q_true, c.dim);
    lookup_function(c.f_id, c.dim);
}

/// Flat key = value format with [section] headers and '#' comments.
inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;
    std::string section;
    std::stringstream ss(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(ss, raw)) {
        ++lineno;
        std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = section + "." + detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));

        if (key == "experiment.id") c.id = val;
        else if (key == "experiment.dim") c.dim = static_cast<int>(detail::to_int(key, val));
        else if (key == "experiment.M") c.M = static_cast<int>(detail::to_int(key, val));
        else if (key == "experiment.M_fine") c.M_fine = static_cast<int>(detail::to_int(key, val));
        else if (key == "points.kind") {
            if (val == "uniform") c.point_kind = PointKind::uniform;
            else if (val == "perturbed") c.point_kind = PointKind::perturbed;
            else if (val == "radial") c.point_kind = PointKind::radial;
            else throw ConfigError("config: unknown point kind '" + val + "'");
        } else if (key == "points.k") c.k = static_cast<int>(detail::to_int(key, val));
        else if (key == "noise.sigma") c.sigma = detail::to_double(key, val);
        else if (key == "noise.kind") {
            if (val == "gaussian") c.noise_kind = NoiseKind::gaussian;
            else if (val == "uniform") c.noise_kind = NoiseKind::uniform;
            else throw ConfigError("config: unknown noise kind '" + val + "'");
        } else if (key == "noise.seed") c.seed = static_cast<std::uint64_t>(detail::to_int(key, val));
        else if (key == "gamma.mode") {
            if (val == "fixed") c.gamma_mode = GammaMode::fixed;
            else if (val == "apriori") c.gamma_mode = GammaMode::apriori;
            else if (val == "adaptive") c.gamma_mode = GammaMode::adaptive;
            else throw ConfigError("config: unknown gamma mode '" + val + "'");
        } else if (key == "gamma.value") c.gamma_value = detail::to_double(key, val);
        else if (key == "gamma.gammas") c.gammas = detail::to_list(key, val);
        else if (key == "gamma.gamma0") c.gamma0 = detail::to_double(key, val);
        else if (key == "gamma.K_outer") c.K_outer = static_cast<int>(detail::to_int(key, val));
        else if (key == "box.c0") c.box.c0 = detail::to_double(key, val);
        else if (key == "box.c1") c.box.c1 = detail::to_double(key, val);
        else if (key == "functions.q_true") c.q_true = val;
        else if (key == "functions.f") c.f_id = val;
        else if (key == "optimizer.max_iter") c.opt.max_iter = static_cast<int>(detail::to_int(key, val));
        else if (key == "optimizer.grad_tol") c.opt.grad_tol = detail::to_double(key, val);
        else if (key == "optimizer.restart_period") c.opt.restart_period = static_cast<int>(detail::to_int(key, val));
        else if (key == "optimizer.linear_tol") c.opt.linear_tol = detail::to_double(key, val);
        else if (key == "optimizer.c_dec") c.opt.armijo.c_dec = detail::to_double(key, val);
        else if (key == "optimizer.shrink") c.opt.armijo.shrink = detail::to_double(key, val);
        else if (key == "optimizer.s_init") c.opt.armijo.s_init = detail::to_double(key, val);
        else if (key == "optimizer.max_backtracks") c.opt.armijo.max_backtracks = static_cast<int>(detail::to_int(key, val));
        else if (key == "optimizer.q_init") c.opt.q_init = detail::to_double(key, val);
        else if (key == "rate.n_list") c.n_list = detail::to_list(key, val);
        else if (key == "output.dir") c.out_dir = val;
        else throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    c.opt.box = c.box;
    validate(c);
    return c;
}

inline ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

/// Canonical serialization of the effective configuration. Everything that
/// influences results is included; the output directory is not, so reruns
/// into different directories stay byte-identical.
inline std::string canonical_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "box.c0=" << io::fmt(c.box.c0) << "\n"
       << "box.c1=" << io::fmt(c.box.c1) << "\n"
       << "experiment.M=" << c.M << "\n"
       << "experiment.M_fine=" << c.M_fine << "\n"
       << "experiment.dim=" << c.dim << "\n"
       << "experiment.id=" << c.id << "\n"
       << "functions.f=" << c.f_id << "\n"
       << "functions.q_true=" << c.q_true << "\n"
       << "gamma.K_outer=" << c.K_outer << "\n"
       << "gamma.gamma0=" << io::fmt(c.gamma0) << "\n";
    os << "gamma.gammas=";
    for (std::size_t i = 0; i < c.gammas.size(); ++i) os << (i ? "," : "") << io::fmt(c.gammas[i]);
    os << "\n"
       << "gamma.mode=" << to_string(c.gamma_mode) << "\n"
       << "gamma.value=" << io::fmt(c.gamma_value) << "\n"
       << "noise.kind=" << invpot::to_string(c.noise_kind) << "\n"
       << "noise.seed=" << c.seed << "\n"
       << "noise.sigma=" << io::fmt(c.sigma) << "\n"
       << "optimizer.c_dec=" << io::fmt(c.opt.armijo.c_dec) << "\n"
       << "optimizer.grad_tol=" << io::fmt(c.opt.grad_tol) << "\n"
       << "optimizer.linear_tol=" << io::fmt(c.opt.linear_tol) << "\n"
       << "optimizer.max_backtracks=" << c.opt.armijo.max_backtracks << "\n"
       << "optimizer.max_iter=" << c.opt.max_iter << "\n"
       << "optimizer.q_init=" << (c.opt.q_init ? io::fmt(*c.opt.q_init) : std::string("default")) << "\n"
       << "optimizer.restart_period=" << c.opt.restart_period << "\n"
       << "optimizer.s_init=" << io::fmt(c.opt.armijo.s_init) << "\n"
       << "optimizer.shrink=" << io::fmt(c.opt.armijo.shrink) << "\n"
       << "points.k=" << c.k << "\n"
       << "points.kind=" << invpot::to_string(c.point_kind) << "\n";
    os << "rate.n_list=";
    for (std::size_t i = 0; i < c.n_list.size(); ++i) os << (i ? "," : "") << io::fmt(c.n_list[i]);
    os << "\n";
    return os.str();
}

inline std::string config_hash(const ExperimentConfig& c) { return io::fnv1a_hex(canonical_config(c)); }

/// Everything assembled for one inversion run. Meshes are shared pointers so
/// the struct can be copied while InverseProblem keeps a stable mesh address.
struct Pipeline {
    ExperimentConfig cfg;
    std::string hash;
    std::shared_ptr<const GroundTruth> gt;
    std::shared_ptr<const Mesh> inv_mesh;
    PointSet points;
    ObservationSet obs;
    InverseProblem prob;
    NodalField q_truth;      // interpolant of the exact potential on the inversion mesh
    double q_truth_norm = 0; // L2 norm of q_truth
    double q_h1_fine = 0;    // H1 norm of the fine-mesh interpolant of the exact potential
    double sigma_eff = 0;    // sigma * sup-norm of the exact state
    std::vector<double> u_truth_at_points;
};

inline std::shared_ptr<const GroundTruth> make_shared_ground_truth(const ExperimentConfig& cfg) {
    return detail::staged("ground_truth", [&] {
        auto gt = std::make_shared<GroundTruth>(make_ground_truth(cfg.dim, cfg.q_true, cfg.f_id, cfg.M_fine, cfg.opt.linear_tol));
        return std::shared_ptr<const GroundTruth>(gt);
    });
}

/// Build the run pipeline around an existing ground truth (shared by sweep
/// and rate rows). M/k/seed may override the config for per-row variation.
inline Pipeline build_pipeline(const ExperimentConfig& cfg, std::shared_ptr<const GroundTruth> gt,
                               std::optional<int> M_override = {}, std::optional<int> k_override = {},
                               std::optional<std::uint64_t> seed_override = {}) {
    Pipeline pl;
    pl.cfg = cfg;
    pl.cfg.M = M_override.value_or(cfg.M);
    pl.cfg.k = k_override.value_or(cfg.k);
    pl.cfg.seed = seed_override.value_or(cfg.seed);
    validate(pl.cfg);
    pl.hash = config_hash(pl.cfg);
    pl.gt = std::move(gt);

    detail::staged("points", [&] {
        pl.points = generate_points(pl.cfg.dim, pl.cfg.point_kind, pl.cfg.k, pl.cfg.seed);
        return 0;
    });
    detail::staged("observe", [&] {
        pl.obs = observe(*pl.gt, pl.points, pl.cfg.sigma, pl.cfg.noise_kind, pl.cfg.seed);
        return 0;
    });
    detail::staged("operators", [&] {
        pl.inv_mesh = std::make_shared<const Mesh>(build_structured_mesh(pl.cfg.dim, pl.cfg.M));
        pl.prob = make_problem(*pl.inv_mesh, pl.obs, interpolate(*pl.inv_mesh, pl.cfg.f_id));
        pl.prob.linear_tol = pl.cfg.opt.linear_tol;
        pl.prob.linear_max_iter = pl.cfg.opt.linear_max_iter;
        return 0;
    });

    pl.q_truth = interpolate(*pl.inv_mesh, pl.cfg.q_true);
    pl.q_truth_norm = l2_norm(pl.prob.ops, pl.q_truth);
    const OperatorSet fine_ops = assemble_operators(pl.gt->mesh);
    pl.q_h1_fine = h1_norm(fine_ops, pl.gt->q);
    pl.sigma_eff = pl.cfg.sigma * pl.gt->sup_norm;
    pl.u_truth_at_points.resize(pl.points.points.size());
    for (int i = 0; i < pl.points.n(); ++i)
        pl.u_truth_at_points[static_cast<std::size_t>(i)] =
            interpolate_at(pl.gt->mesh, pl.gt->u.values, pl.points.points[static_cast<std::size_t>(i)]);
    return pl;
}

inline Pipeline build_pipeline(const ExperimentConfig& cfg) { return build_pipeline(cfg, make_shared_ground_truth(cfg)); }

/// e_q = ||q_truth - q*||_L2 / ||q_truth||_L2, both fields on the inversion mesh.
inline double e_q_metric(const Pipeline& pl, const NodalField& q_star) {
    std::vector<double> d(q_star.values.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = q_star.values[i] - pl.q_truth.values[i];
    return std::sqrt(std::max(0.0, quadratic_form(pl.prob.ops.Mass_full, d, d))) / pl.q_truth_norm;
}

/// e_u = ||u_truth - u_h(q*)||_n over the sampling points. Also returns the
/// reconstructed state for export.
inline std::pair<double, NodalField> e_u_metric(const Pipeline& pl, const NodalField& q_star) {
    NodalField u_star = forward(pl.prob, q_star);
    std::vector<double> at_pts = spmv_transposed(pl.prob.P, u_star.values);
    for (std::size_t i = 0; i < at_pts.size(); ++i) at_pts[i] -= pl.u_truth_at_points[i];
    return {discrete_seminorm(at_pts), std::move(u_star)};
}

// --------------------------------------------------------------------------
// CSV emission. Fixed headers; every file starts with the config-hash line.
// --------------------------------------------------------------------------

inline void emit_iterations(const std::filesystem::path& dir, const std::string& hash,
                            const std::vector<IterateDiag>& hist) {
    io::CsvTable t;
    t.config_hash = hash;
    t.header = {"k", "J", "misfit", "penalty", "grad_norm", "step", "beta"};
    for (const auto& d : hist)
        t.rows.push_back({std::to_string(d.k), io::fmt(d.J), io::fmt(d.misfit), io::fmt(d.penalty),
                          io::fmt(d.grad_norm), io::fmt(d.step), io::fmt(d.beta)});
    io::write_csv(dir / "iterations.csv", t);
}

inline void emit_gamma_trace(const std::filesystem::path& dir, const std::string& hash,
                             const std::vector<GammaTraceRow>& trace) {
    io::CsvTable t;
    t.config_hash = hash;
    t.header = {"k", "gamma", "misfit", "q_h1", "e_q"};
    for (const auto& r : trace)
        t.rows.push_back({std::to_string(r.k), io::fmt(r.gamma), io::fmt(r.misfit), io::fmt(r.q_h1), io::fmt(r.e_q)});
    io::write_csv(dir / "gamma_trace.csv", t);
}

struct SweepRow {
    double gamma = 0.0;
    double e_q = 0.0;
    double e_u = 0.0;
};

inline void emit_sweep(const std::filesystem::path& dir, const std::string& hash, const std::vector<SweepRow>& rows) {
    io::CsvTable t;
    t.config_hash = hash;
    t.header = {"gamma", "e_q", "e_u"};
    for (const auto& r : rows) t.rows.push_back({io::fmt(r.gamma), io::fmt(r.e_q), io::fmt(r.e_u)});
    io::write_csv(dir / "sweep.csv", t);
}

struct RateRow {
    long long n = 0;
    double gamma = 0.0;
    int M = 0;
    double e_q = 0.0;
    double e_u = 0.0;
};

inline void emit_rate(const std::filesystem::path& dir, const std::string& hash, const std::vector<RateRow>& rows) {
    io::CsvTable t;
    t.config_hash = hash;
    t.header = {"n", "gamma", "M", "e_q", "e_u"};
    for (const auto& r : rows)
        t.rows.push_back({std::to_string(r.n), io::fmt(r.gamma), std::to_string(r.M), io::fmt(r.e_q), io::fmt(r.e_u)});
    io::write_csv(dir / "rate.csv", t);
}

struct RunReport {
    double gamma_used = 0.0;
    int iterations = 0; // accepted optimizer steps (fixed/apriori) or outer iterations (adaptive)
    double e_q = 0.0;
    double e_u = 0.0;
    double wall_seconds = 0.0;
    bool adaptive_converged = true;
};

inline void emit_report(const std::filesystem::path& dir, const std::string& hash, int M, int n,
                        const RunReport& rep) {
    io::CsvTable t;
    t.config_hash = hash;
    t.header = {"gamma", "M", "n", "iterations", "e_q", "e_u"};
    t.rows.push_back({io::fmt(rep.gamma_used), std::to_string(M), std::to_string(n), std::to_string(rep.iterations),
                      io::fmt(rep.e_q), io::fmt(rep.e_u)});
    io::write_csv(dir / "report.csv", t);
}

/// Full single-run pipeline: ground truth -> observations -> inversion per
/// the configured gamma mode -> metrics -> CSV artifacts in out_dir.
inline RunReport run(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
    const auto t_start = std::chrono::steady_clock::now();
    Pipeline pl = build_pipeline(cfg);
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);

    RunReport rep;
    NodalField q_star;
    std::vector<IterateDiag> history;
    std::vector<GammaTraceRow> trace;

    if (cfg.gamma_mode == GammaMode::adaptive) {
        const double n = static_cast<double>(pl.prob.n());
        const double gamma0 = cfg.gamma0 > 0.0 ? cfg.gamma0 : std::pow(n, -0.75);
        InversionConfig opt = cfg.opt;
        opt.box = cfg.box;
        AdaptResult ar = detail::staged("adapt", [&] {
            return adapt(pl.prob, opt, gamma0, cfg.K_outer, 1e-3,
                         [&](const NodalField& q) { return e_q_metric(pl, q); });
        });
        q_star = std::move(ar.q);
        history = std::move(ar.last_history);
        trace = std::move(ar.trace);
        rep.gamma_used = ar.gamma_final;
        rep.iterations = static_cast<int>(trace.size());
        rep.adaptive_converged = ar.converged;
    } else {
        double gamma = cfg.gamma_value;
        if (cfg.gamma_mode == GammaMode::apriori)
            gamma = std::max(apriori_gamma(cfg.dim, pl.sigma_eff, static_cast<double>(pl.prob.n()), pl.q_h1_fine),
                             gamma_floor());
        else if (!(gamma > 0.0))
            throw ConfigError("run: gamma.value must be positive in fixed mode");
        InversionConfig opt = cfg.opt;
        opt.box = cfg.box;
        opt.gamma = gamma;
        ReconstructResult res = detail::staged("reconstruct", [&] { return reconstruct(pl.prob, opt); });
        rep.gamma_used = gamma;
        rep.iterations = res.accepted_steps();
        q_star = std::move(res.q);
        history = std::move(res.history);
    }

    rep.e_q = detail::staged("metrics", [&] { return e_q_metric(pl, q_star); });
    auto [e_u, u_star] = detail::staged("metrics", [&] { return e_u_metric(pl, q_star); });
    rep.e_u = e_u;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    detail::staged("emit", [&] {
        io::write_points_csv(pl.points, dir / "points.csv", pl.hash);
        io::write_observations_csv(pl.obs, dir / "observations.csv", pl.hash);
        emit_iterations(dir, pl.hash, history);
        if (!trace.empty()) emit_gamma_trace(dir, pl.hash, trace);
        io::write_field_csv(q_star, dir / "q_star.csv", pl.hash);
        io::write_field_csv(u_star, dir / "u_star.csv", pl.hash);
        emit_report(dir, pl.hash, pl.cfg.M, pl.prob.n(), rep);
        return 0;
    });

    if (log)
        *log << "run: gamma=" << rep.gamma_used << " iterations=" << rep.iterations << " e_q=" << rep.e_q
             << " e_u=" << rep.e_u << " wall=" << rep.wall_seconds << "s\n";
    return rep;
}

/// One cold-started reconstruction per gamma over a shared observation set.
/// Failed entries are recorded as NaN rows and the sweep continues.
inline std::vector<SweepRow> gamma_sweep(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
    if (cfg.gammas.size() < 2) throw ConfigError("sweep: need at least 2 gamma values");
    Pipeline pl = build_pipeline(cfg);
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);

    std::vector<SweepRow> rows;
    for (double gamma : cfg.gammas) {
        SweepRow row;
        row.gamma = gamma;
        try {
            InversionConfig opt = cfg.opt;
            opt.box = cfg.box;
            opt.gamma = gamma;
            ReconstructResult res = reconstruct(pl.prob, opt);
            row.e_q = e_q_metric(pl, res.q);
            row.e_u = e_u_metric(pl, res.q).first;
        } catch (const std::exception& e) {
            row.e_q = row.e_u = std::numeric_limits<double>::quiet_NaN();
            if (log) *log << "sweep: gamma=" << gamma << " failed: " << e.what() << "\n";
        }
        if (log) *log << "sweep: gamma=" << row.gamma << " e_q=" << row.e_q << " e_u=" << row.e_u << "\n";
        rows.push_back(row);
    }
    emit_sweep(dir, pl.hash, rows);

    if (log) {
        auto best = [&](auto proj) {
            double bg = rows.front().gamma, bv = std::numeric_limits<double>::infinity();
            for (const auto& r : rows)
                if (!std::isnan(proj(r)) && proj(r) < bv) {
                    bv = proj(r);
                    bg = r.gamma;
                }
            return bg;
        };
        *log << "sweep: argmin e_q at gamma=" << best([](const SweepRow& r) { return r.e_q; })
             << ", argmin e_u at gamma=" << best([](const SweepRow& r) { return r.e_u; }) << "\n";
    }
    return rows;
}

/// Mesh resolution coupled to the a priori gamma: M ~ gamma^(-1/4), clamped
/// to the desk-scale window [8, 64] and to M_fine/4 so the synthesis mesh
/// stays at least 4x finer.
inline int rate_mesh_for_gamma(double gamma, int M_fine) {
    const int M_raw = static_cast<int>(std::llround(std::pow(gamma, -0.25)));
    return std::clamp(M_raw, 8, std::min(64, M_fine / 4));
}

/// One full pipeline per n in n_list; gamma from the a priori rule, the mesh
/// from rate_mesh_for_gamma, seeds decorrelated per row.
inline std::vector<RateRow> rate_study(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
    if (cfg.n_list.empty()) throw ConfigError("rate: rate.n_list is required");
    for (std::size_t i = 1; i < cfg.n_list.size(); ++i)
        if (!(cfg.n_list[i] > cfg.n_list[i - 1])) throw ConfigError("rate: n_list must be strictly increasing");

    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    auto gt = make_shared_ground_truth(cfg);

    const OperatorSet fine_ops = assemble_operators(gt->mesh);
    const double q_h1_fine = h1_norm(fine_ops, gt->q);
    const double sigma_eff = cfg.sigma * gt->sup_norm;

    std::vector<RateRow> rows;
    for (std::size_t idx = 0; idx < cfg.n_list.size(); ++idx) {
        const int k = cfg.dim == 2 ? static_cast<int>(std::llround(std::sqrt(cfg.n_list[idx])))
                                   : static_cast<int>(std::llround(cfg.n_list[idx]));
        const long long n_actual = cfg.dim == 2 ? static_cast<long long>(k) * k : k;

        RateRow row;
        row.n = n_actual;
        row.gamma = std::max(apriori_gamma(cfg.dim, sigma_eff, static_cast<double>(n_actual), q_h1_fine), gamma_floor());
        row.M = rate_mesh_for_gamma(row.gamma, cfg.M_fine);

        try {
            Pipeline pl = build_pipeline(cfg, gt, row.M, k, cfg.seed + idx);
            InversionConfig opt = cfg.opt;
            opt.box = cfg.box;
            opt.gamma = row.gamma;
            ReconstructResult res = reconstruct(pl.prob, opt);
            row.e_q = e_q_metric(pl, res.q);
            row.e_u = e_u_metric(pl, res.q).first;
        } catch (const std::exception& e) {
            row.e_q = row.e_u = std::numeric_limits<double>::quiet_NaN();
            if (log) *log << "rate: n=" << row.n << " failed: " << e.what() << "\n";
        }
        if (log)
            *log << "rate: n=" << row.n << " gamma=" << row.gamma << " M=" << row.M << " e_q=" << row.e_q
                 << " e_u=" << row.e_u << "\n";
        rows.push_back(row);
    }
    emit_rate(dir, config_hash(cfg), rows);
    return rows;
}

} // namespace invpot::harness
