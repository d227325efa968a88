#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "scto/experiments.hpp"

using namespace scto;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("scto_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::string without_timestamp(std::string s) {
    return std::regex_replace(s, std::regex("\"timestamp\": \"[^\"]*\""),
                              "\"timestamp\": \"\"");
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(SCTO_BIN) + " " + args;
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
    ExperimentConfig cfg;
    cfg.command = "fixed-point";
    cfg.gamma_star = 1.5;
    CHECK_THROWS_WITH_AS(validate_config(cfg), "gamma_star: must lie in (0,1)",
                         std::invalid_argument);
    cfg.gamma_star = 0.5;
    cfg.n_cells = 1000;
    try {
        validate_config(cfg);
        CHECK(false);
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("n_cells") == 0);
    }
    cfg.n_cells = 4096;
    cfg.epsilon = 0.3;
    try {
        validate_config(cfg);
        CHECK(false);
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("epsilon") == 0);
    }
    cfg.epsilon = 0.0;
    cfg.command = "bogus";
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
}

TEST_CASE("sequence lemma experiment writes a report") {
    fs::path dir = fresh_dir("seq");
    ExperimentConfig cfg;
    cfg.command = "sequence-lemma";
    cfg.n_instances = 20;
    cfg.output_dir = dir.string();
    CHECK(run_experiment(cfg) == 0);
    const std::string rep = slurp(dir / "report.json");
    CHECK(rep.find("\"schema\": 1") != std::string::npos);
    CHECK(rep.find("\"pass\": true") != std::string::npos);
    CHECK(rep.find("\"failures\": 0") != std::string::npos);
}

TEST_CASE("reports are byte-identical apart from the timestamp") {
    fs::path a = fresh_dir("rep_a"), b = fresh_dir("rep_b");
    ExperimentConfig cfg;
    cfg.command = "sequence-lemma";
    cfg.n_instances = 10;
    cfg.seed = 99;
    cfg.output_dir = a.string();
    CHECK(run_experiment(cfg) == 0);
    cfg.output_dir = b.string();
    CHECK(run_experiment(cfg) == 0);
    std::string ra = slurp(a / "report.json"), rb = slurp(b / "report.json");
    ra = std::regex_replace(ra, std::regex("\"output_dir\": \"[^\"]*\""),
                            "\"output_dir\": \"\"");
    rb = std::regex_replace(rb, std::regex("\"output_dir\": \"[^\"]*\""),
                            "\"output_dir\": \"\"");
    CHECK(without_timestamp(ra) == without_timestamp(rb));
}

TEST_CASE("fixed point experiment end to end") {
    fs::path dir = fresh_dir("fp");
    ExperimentConfig cfg;
    cfg.command = "fixed-point";
    cfg.n_cells = 1024;
    cfg.inner_tol = 1e-7;
    cfg.outer_tol = 1e-6;
    cfg.output_dir = dir.string();
    CHECK(run_experiment(cfg) == 0);
    CHECK(fs::exists(dir / "density_fixed_point.csv"));
    const std::string rep = slurp(dir / "report.json");
    CHECK(rep.find("\"residual_l1\"") != std::string::npos);
    CHECK(rep.find("\"cone_report\"") != std::string::npos);
}

TEST_CASE("verify-assumptions experiment") {
    fs::path dir = fresh_dir("va");
    ExperimentConfig cfg;
    cfg.command = "verify-assumptions";
    cfg.assumption_nodes = 20000;
    cfg.output_dir = dir.string();
    CHECK(run_experiment(cfg) == 0);
    const std::string rep = slurp(dir / "report.json");
    CHECK(rep.find("\"c_gamma\"") != std::string::npos);
    CHECK(rep.find("\"monomials\"") != std::string::npos);
}

TEST_CASE("remaining experiments run end to end at smoke scale") {
    ExperimentConfig cfg;
    cfg.n_cells = 256;
    cfg.inner_tol = 1e-6;
    cfg.outer_tol = 1e-5;

    {
        fs::path dir = fresh_dir("conv");
        ExperimentConfig c = cfg;
        c.command = "converge";
        c.n_steps = 60;
        c.ref_steps = 600;
        c.fit_lo = 5;
        c.fit_hi = 20;
        c.output_dir = dir.string();
        const int rc = run_experiment(c);
        CHECK((rc == 0 || rc == 2));
        CHECK(fs::exists(dir / "distances_converge.csv"));
    }
    {
        fs::path dir = fresh_dir("ml");
        ExperimentConfig c = cfg;
        c.command = "memory-loss";
        c.n_steps = 120;
        c.fit_lo = 5;
        c.fit_hi = 60;
        c.epsilon = 0.05;
        c.output_dir = dir.string();
        const int rc = run_experiment(c);
        CHECK((rc == 0 || rc == 2));
        CHECK(fs::exists(dir / "distances_memory_loss.csv"));
    }
    {
        fs::path dir = fresh_dir("pert");
        ExperimentConfig c = cfg;
        c.command = "perturbation";
        c.epsilon = 0.05;
        c.output_dir = dir.string();
        CHECK(run_experiment(c) == 0);
    }
    {
        fs::path dir = fresh_dir("ens");
        ExperimentConfig c = cfg;
        c.command = "ensemble";
        c.n_particles = 2000;
        c.burn_in = 300;
        c.epsilon = 0.05;
        c.ks_threshold = 0.2;  // smoke scale, statistics are loose
        c.output_dir = dir.string();
        CHECK(run_experiment(c) == 0);
        CHECK(fs::exists(dir / "coupling_ensemble.csv"));
        CHECK(fs::exists(dir / "histogram_ensemble.csv"));
    }
}

TEST_CASE("binary rejects unknown flags without writing files") {
    fs::path dir = fresh_dir("badflag");
    const int rc = run_binary("fixed-point --bogus-flag 1 --out " + dir.string() +
                              " 2>/dev/null");
    CHECK(rc == 1);
    CHECK_FALSE(fs::exists(dir / "report.json"));
}

TEST_CASE("binary validates fields with exit 1") {
    fs::path dir = fresh_dir("badval");
    const int rc = run_binary("fixed-point --gamma-star 2.0 --out " + dir.string() +
                              " 2>/dev/null");
    CHECK(rc == 1);
    CHECK_FALSE(fs::exists(dir / "report.json"));
}

TEST_CASE("binary runs sequence-lemma to exit 0") {
    fs::path dir = fresh_dir("binseq");
    const int rc = run_binary("sequence-lemma --instances 10 --out " + dir.string());
    CHECK(rc == 0);
    CHECK(fs::exists(dir / "report.json"));
}

TEST_CASE("config file with flag override") {
    fs::path dir = fresh_dir("cfgfile");
    std::ofstream(dir / "run.cfg") << "gamma-star=0.45\ninstances=7\n";
    const int rc = run_binary("sequence-lemma --config " + (dir / "run.cfg").string() +
                              " --gamma-star 0.55 --out " + dir.string());
    CHECK(rc == 0);
    const std::string rep = slurp(dir / "report.json");
    CHECK(rep.find("\"gamma_star\": 0.55") != std::string::npos);  // flag wins
    CHECK(rep.find("\"n_instances\": 7") != std::string::npos);    // file applies
}

TEST_SUITE_END();
