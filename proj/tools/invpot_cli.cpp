// Command-line driver: mesh diagnostics, forward data synthesis, single
// reconstructions, gamma sweeps, the adaptive gamma loop, and rate studies.
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "invpot/invpot.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "experiment config file")->required();
    cmd->add_option("--out", o.out_dir, "output directory (overrides output.dir)");
    cmd->add_option("--seed", o.seed, "seed override (overrides noise.seed)");
}

invpot::harness::ExperimentConfig load_config(const CommonOpts& o) {
    auto cfg = invpot::harness::parse_config_file(o.config_path);
    if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
    if (o.seed) cfg.seed = *o.seed;
    return cfg;
}

void cmd_mesh_info(const CommonOpts& o) {
    using namespace invpot;
    auto cfg = load_config(o);
    const std::string hash = harness::config_hash(cfg);
    const Mesh mesh = build_structured_mesh(cfg.dim, cfg.M);
    const PointSet pts = generate_points(cfg.dim, cfg.point_kind, cfg.k, cfg.seed);
    const SamplingQuality sq = quasi_uniformity(pts);

    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path dir(cfg.out_dir);
    io::write_nodes_csv(mesh, dir / "nodes.csv", hash);
    io::write_elements_csv(mesh, dir / "elements.csv", hash);
    io::write_points_csv(pts, dir / "points.csv", hash);

    std::cout << "mesh: dim=" << mesh.dim << " M=" << mesh.subdivisions << " nodes=" << mesh.node_count()
              << " elements=" << mesh.element_count() << " h=" << mesh.h << " (side length " << 1.0 / mesh.subdivisions
              << ")\n";
    std::cout << "points: kind=" << to_string(pts.kind) << " n=" << pts.n() << " d_max=" << sq.d_max
              << " d_min=" << sq.d_min << " ratio=" << sq.ratio << "\n";
}

void cmd_forward(const CommonOpts& o) {
    using namespace invpot;
    auto cfg = load_config(o);
    const std::string hash = harness::config_hash(cfg);
    const GroundTruth gt = make_ground_truth(cfg.dim, cfg.q_true, cfg.f_id, cfg.M_fine, cfg.opt.linear_tol);
    const PointSet pts = generate_points(cfg.dim, cfg.point_kind, cfg.k, cfg.seed);
    const ObservationSet obs = observe(gt, pts, cfg.sigma, cfg.noise_kind, cfg.seed);

    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path dir(cfg.out_dir);
    io::write_field_csv(gt.q, dir / "q_truth.csv", hash);
    io::write_field_csv(gt.u, dir / "u_truth.csv", hash);
    io::write_points_csv(pts, dir / "points.csv", hash);
    io::write_observations_csv(obs, dir / "observations.csv", hash);

    std::cout << "forward: M_fine=" << cfg.M_fine << " sup_norm=" << gt.sup_norm
              << " ||m||_n=" << discrete_seminorm(obs.values) << " n=" << obs.n() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"potential reconstruction from noisy point observations"};
    app.require_subcommand(1);

    CommonOpts mesh_o, fwd_o, run_o, sweep_o, adapt_o, rate_o;
    auto* c_mesh = app.add_subcommand("mesh-info", "build mesh + sampling points, report quasi-uniformity");
    add_common(c_mesh, mesh_o);
    auto* c_fwd = app.add_subcommand("forward", "synthesize fine-mesh ground truth and noisy observations");
    add_common(c_fwd, fwd_o);
    auto* c_run = app.add_subcommand("run", "single reconstruction per the configured gamma mode");
    add_common(c_run, run_o);
    auto* c_sweep = app.add_subcommand("sweep", "one reconstruction per gamma in gamma.gammas");
    add_common(c_sweep, sweep_o);
    auto* c_adapt = app.add_subcommand("adapt", "adaptive gamma loop");
    add_common(c_adapt, adapt_o);
    auto* c_rate = app.add_subcommand("rate", "error-vs-n study with the a priori gamma rule");
    add_common(c_rate, rate_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_mesh) cmd_mesh_info(mesh_o);
        if (*c_fwd) cmd_forward(fwd_o);
        if (*c_run) invpot::harness::run(load_config(run_o), &std::cout);
        if (*c_sweep) invpot::harness::gamma_sweep(load_config(sweep_o), &std::cout);
        if (*c_adapt) {
            auto cfg = load_config(adapt_o);
            cfg.gamma_mode = invpot::harness::GammaMode::adaptive;
            invpot::harness::run(cfg, &std::cout);
        }
        if (*c_rate) invpot::harness::rate_study(load_config(rate_o), &std::cout);
    } catch (const invpot::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const invpot::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
