#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>

#include "invpot/invpot.hpp"
#include "support.hpp"

using namespace invpot;
using namespace invpot::harness;

namespace {

const char* kBaseConfig = R"(# desk-scale smoke configuration
[experiment]
id = custom
dim = 2
M = 8
M_fine = 32

[points]
kind = uniform
k = 17

[noise]
sigma = 0.05
kind = gaussian
seed = 3

[gamma]
mode = fixed
value = 1e-8

[functions]
q_true = ex1_q
f = const1

[optimizer]
max_iter = 80
)";

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "invpot_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p);
    REQUIRE(is);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config parsing") {
    SECTION("base config round-trips through the struct") {
        const ExperimentConfig c = parse_config(kBaseConfig);
        CHECK(c.dim == 2);
        CHECK(c.M == 8);
        CHECK(c.M_fine == 32);
        CHECK(c.k == 17);
        CHECK(c.sigma == 0.05);
        CHECK(c.seed == 3);
        CHECK(c.gamma_mode == GammaMode::fixed);
        CHECK(c.gamma_value == 1e-8);
        CHECK(c.q_true == "ex1_q");
        CHECK(c.opt.max_iter == 80);
        CHECK(c.box.c0 == 1.0);
        CHECK(c.box.c1 == 5.0);
    }
    SECTION("unknown keys are rejected") {
        CHECK_THROWS_AS(parse_config("[experiment]\nbogus = 1\n"), ConfigError);
    }
    SECTION("malformed lines are rejected") {
        CHECK_THROWS_AS(parse_config("[experiment\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[experiment]\ndim\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[experiment]\ndim = two\n"), ConfigError);
    }
    SECTION("validation failures") {
        std::string bad = kBaseConfig;
        bad += "\n[experiment]\nM_fine = 16\n"; // < 4*M
        CHECK_THROWS_AS(parse_config(bad), ConfigError);
        std::string badfn = kBaseConfig;
        badfn += "\n[functions]\nq_true = missing\n";
        CHECK_THROWS_AS(parse_config(badfn), ConfigError);
        std::string baddim = kBaseConfig;
        baddim += "\n[functions]\nq_true = ex3ab_q\n"; // 1-d function on a 2-d run
        CHECK_THROWS_AS(parse_config(baddim), ConfigError);
    }
    SECTION("hash ignores the output directory") {
        ExperimentConfig a = parse_config(kBaseConfig);
        ExperimentConfig b = a;
        b.out_dir = "elsewhere";
        CHECK(config_hash(a) == config_hash(b));
        b.seed = 4;
        CHECK(config_hash(a) != config_hash(b));
    }
}

TEST_CASE("error metrics") {
    ExperimentConfig cfg = parse_config(kBaseConfig);
    Pipeline pl = build_pipeline(cfg);
    SECTION("interpolated truth has zero e_q") {
        CHECK(e_q_metric(pl, pl.q_truth) == 0.0);
    }
    SECTION("e_u = 0 when the state matches the truth at every point") {
        // fabricate a problem whose data mesh is the inversion mesh itself
        Pipeline pl2 = pl;
        const NodalField u = forward(pl2.prob, pl2.q_truth);
        pl2.u_truth_at_points = spmv_transposed(pl2.prob.P, u.values);
        CHECK(e_u_metric(pl2, pl2.q_truth).first == 0.0);
    }
    SECTION("noiseless run beats the noisy run at identical settings") {
        // identifiable instance: 1-d, sampling on the coarse node lattice
        ExperimentConfig noisy;
        noisy.dim = 1;
        noisy.M = 16;
        noisy.M_fine = 128;
        noisy.k = 17;
        noisy.sigma = 0.05;
        noisy.seed = 3;
        noisy.q_true = "const2";
        noisy.gamma_value = 1e-12;
        noisy.out_dir = temp_dir("noisy").string();
        ExperimentConfig clean = noisy;
        clean.sigma = 0.0;
        clean.out_dir = temp_dir("clean").string();
        const RunReport r_noisy = run(noisy);
        const RunReport r_clean = run(clean);
        CHECK(r_clean.e_q < r_noisy.e_q);
    }
}

TEST_CASE("run emits labelled artifacts") {
    ExperimentConfig cfg = parse_config(kBaseConfig);
    const auto dir = temp_dir("run_artifacts");
    cfg.out_dir = dir.string();
    const RunReport rep = run(cfg);
    CHECK(rep.e_q > 0.0);
    CHECK(rep.iterations > 0);

    for (const char* name : {"points.csv", "observations.csv", "iterations.csv", "q_star.csv", "u_star.csv", "report.csv"}) {
        CAPTURE(name);
        REQUIRE(std::filesystem::exists(dir / name));
        const io::CsvTable t = io::read_csv(dir / name);
        CHECK(t.config_hash == config_hash(cfg));
    }
    const io::CsvTable its = io::read_csv(dir / "iterations.csv");
    CHECK(its.header == std::vector<std::string>{"k", "J", "misfit", "penalty", "grad_norm", "step", "beta"});
    REQUIRE(its.rows.size() == static_cast<std::size_t>(rep.iterations) + 1);
    // J column strictly decreasing
    for (std::size_t i = 1; i < its.rows.size(); ++i)
        CHECK(std::stod(its.rows[i][1]) < std::stod(its.rows[i - 1][1]));
}

TEST_CASE("identical configs produce byte-identical outputs") {
    ExperimentConfig cfg = parse_config(kBaseConfig);
    const auto dir_a = temp_dir("det_a");
    const auto dir_b = temp_dir("det_b");
    cfg.out_dir = dir_a.string();
    run(cfg);
    cfg.out_dir = dir_b.string();
    run(cfg);
    for (const char* name : {"points.csv", "observations.csv", "iterations.csv", "q_star.csv", "u_star.csv", "report.csv"})
        CHECK(slurp(dir_a / name) == slurp(dir_b / name));
}

TEST_CASE("gamma sweep") {
    ExperimentConfig cfg = parse_config(kBaseConfig);
    cfg.gammas = {1e-7, 1e-8, 1e-8, 1e-9};
    const auto dir = temp_dir("sweep");
    cfg.out_dir = dir.string();
    const auto rows = gamma_sweep(cfg);
    REQUIRE(rows.size() == 4);
    SECTION("duplicate gammas give identical rows") {
        CHECK(rows[1].e_q == rows[2].e_q);
        CHECK(rows[1].e_u == rows[2].e_u);
    }
    SECTION("sweep.csv contract") {
        const io::CsvTable t = io::read_csv(dir / "sweep.csv");
        CHECK(t.header == std::vector<std::string>{"gamma", "e_q", "e_u"});
        REQUIRE(t.rows.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(std::stod(t.rows[i][0]) == rows[i].gamma);
            CHECK(std::stod(t.rows[i][1]) == rows[i].e_q);
            CHECK(std::stod(t.rows[i][2]) == rows[i].e_u);
        }
    }
    SECTION("needs at least two gammas") {
        cfg.gammas = {1e-8};
        CHECK_THROWS_AS(gamma_sweep(cfg), ConfigError);
    }
}

TEST_CASE("rate study rows") {
    ExperimentConfig cfg = parse_config(kBaseConfig);
    cfg.dim = 1;
    cfg.M = 8;
    cfg.M_fine = 128;
    cfg.k = 33;
    cfg.sigma = 0.05;
    cfg.q_true = "ex3ab_q";
    cfg.n_list = {65, 129, 257};
    const auto dir = temp_dir("rate");
    cfg.out_dir = dir.string();
    const auto rows = rate_study(cfg);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].n == static_cast<long long>(cfg.n_list[i]));
        CHECK(rows[i].M >= 8);
        CHECK(rows[i].M <= 32); // M_fine/4 cap
        // gamma column reproduces the formula exactly
        const GroundTruth gt = make_ground_truth(1, "ex3ab_q", "const1", cfg.M_fine);
        const OperatorSet ops = assemble_operators(gt.mesh);
        const double expect = apriori_gamma(1, cfg.sigma * gt.sup_norm, static_cast<double>(rows[i].n), h1_norm(ops, gt.q));
        CHECK(rows[i].gamma == Catch::Approx(expect).epsilon(1e-12));
    }
    SECTION("gamma column strictly decreasing in n") {
        CHECK(rows[0].gamma > rows[1].gamma);
        CHECK(rows[1].gamma > rows[2].gamma);
    }
    SECTION("desk-scale error magnitudes stay in the expected decade") {
        for (const auto& r : rows) {
            CHECK(r.e_q < 0.2);
            CHECK(r.e_u < 5e-3); // noise scale sigma*||u||_inf is ~5.5e-3 here
        }
    }
    SECTION("single-entry list gives one row") {
        cfg.n_list = {129};
        cfg.out_dir = temp_dir("rate_single").string();
        CHECK(rate_study(cfg).size() == 1);
    }
    SECTION("n_list must increase") {
        cfg.n_list = {129, 65};
        CHECK_THROWS_AS(rate_study(cfg), ConfigError);
    }
}

TEST_CASE("staged failures do not leave partial files") {
    ExperimentConfig cfg = parse_config(kBaseConfig);
    const auto dir = temp_dir("staged_fail");
    cfg.out_dir = dir.string();
    cfg.gamma_value = -1.0; // rejected after the pipeline stages, before emission
    CHECK_THROWS_AS(run(cfg), ConfigError);
    CHECK(std::filesystem::is_empty(dir));
}

TEST_CASE("empty tables still carry header and hash") {
    const auto dir = temp_dir("empty");
    emit_sweep(dir, "deadbeef", {});
    const io::CsvTable t = io::read_csv(dir / "sweep.csv");
    CHECK(t.config_hash == "deadbeef");
    CHECK(t.header == std::vector<std::string>{"gamma", "e_q", "e_u"});
    CHECK(t.rows.empty());
}

#ifdef INVPOT_CLI_PATH
TEST_CASE("command-line interface") {
    const auto dir = temp_dir("cli");
    const auto cfg_path = dir / "smoke.cfg";
    {
        std::ofstream os(cfg_path);
        os << kBaseConfig;
    }
    const std::string base = std::string(INVPOT_CLI_PATH);

    SECTION("run subcommand succeeds and writes the report") {
        const std::string cmd = base + " run --config " + cfg_path.string() + " --out " + (dir / "out").string() +
                                " > " + (dir / "stdout.txt").string() + " 2>&1";
        const int rc = std::system(cmd.c_str());
        REQUIRE(rc != -1);
        CHECK(WEXITSTATUS(rc) == 0);
        CHECK(std::filesystem::exists(dir / "out" / "report.csv"));
    }
    SECTION("mesh-info reports quasi-uniformity") {
        const std::string cmd = base + " mesh-info --config " + cfg_path.string() + " --out " + (dir / "mi").string() +
                                " > " + (dir / "mi.txt").string() + " 2>&1";
        const int rc = std::system(cmd.c_str());
        REQUIRE(rc != -1);
        CHECK(WEXITSTATUS(rc) == 0);
        CHECK(std::filesystem::exists(dir / "mi" / "nodes.csv"));
        CHECK(std::filesystem::exists(dir / "mi" / "elements.csv"));
        CHECK(slurp(dir / "mi.txt").find("d_max") != std::string::npos);
    }
    SECTION("config errors exit with code 2") {
        const auto bad_path = dir / "bad.cfg";
        {
            std::ofstream os(bad_path);
            os << "[experiment]\ndim = 7\n";
        }
        const std::string cmd = base + " run --config " + bad_path.string() + " --out " + (dir / "bad_out").string() +
                                " > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        REQUIRE(rc != -1);
        CHECK(WEXITSTATUS(rc) == 2);
    }
    SECTION("missing config file exits with code 2") {
        const std::string cmd = base + " run --config /nonexistent.cfg > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        REQUIRE(rc != -1);
        CHECK(WEXITSTATUS(rc) == 2);
    }
    SECTION("numerical failures exit with code 3") {
        const auto stall_path = dir / "stall.cfg";
        {
            std::ofstream os(stall_path);
            os << kBaseConfig << "\n[optimizer]\nlinear_tol = 1e-30\n";
        }
        const std::string cmd = base + " run --config " + stall_path.string() + " --out " +
                                (dir / "stall_out").string() + " > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        REQUIRE(rc != -1);
        CHECK(WEXITSTATUS(rc) == 3);
    }
    SECTION("sweep, adapt, rate, and forward subcommands produce their tables") {
        const auto multi_path = dir / "multi.cfg";
        {
            std::ofstream os(multi_path);
            os << kBaseConfig << "\n[gamma]\ngammas = 1e-7,1e-9\nK_outer = 8\n\n[rate]\nn_list = 65,129\n";
        }
        auto call = [&](const std::string& sub) {
            const std::string cmd = base + " " + sub + " --config " + multi_path.string() + " --out " +
                                    (dir / sub).string() + " > " + (dir / (sub + ".txt")).string() + " 2>&1";
            const int rc = std::system(cmd.c_str());
            REQUIRE(rc != -1);
            CHECK(WEXITSTATUS(rc) == 0);
        };
        call("forward");
        CHECK(std::filesystem::exists(dir / "forward" / "observations.csv"));
        CHECK(std::filesystem::exists(dir / "forward" / "u_truth.csv"));
        call("sweep");
        CHECK(std::filesystem::exists(dir / "sweep" / "sweep.csv"));
        call("adapt");
        CHECK(std::filesystem::exists(dir / "adapt" / "gamma_trace.csv"));
        call("rate");
        CHECK(std::filesystem::exists(dir / "rate" / "rate.csv"));
    }
}
#endif
