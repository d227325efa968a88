#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scto/experiments.hpp"

namespace {

void add_common_options(CLI::App* sub, scto::ExperimentConfig& cfg) {
    sub->add_option("--gamma-star", cfg.gamma_star, "Base intermittency exponent in (0,1)");
    sub->add_option("--epsilon", cfg.epsilon, "Coupling strength");
    sub->add_option("--family", cfg.family, "Map family: coupled-pm | remark-pm");
    sub->add_option("--n-cells", cfg.n_cells, "Grid cells (power of two, 256..65536; 0 = per-command default)");
    sub->add_option("--grading-q", cfg.grading_q, "Grid grading exponent (0 = default)");
    sub->add_option("--eps-star", cfg.eps_star, "Coupling box half width");
    sub->add_option("--steps", cfg.n_steps, "Iteration steps");
    sub->add_option("--ref-steps", cfg.ref_steps, "Reference run steps (0 = 10x steps)");
    sub->add_option("--particles", cfg.n_particles, "Ensemble size");
    sub->add_option("--burn-in", cfg.burn_in, "Ensemble burn-in steps");
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_option("--out", cfg.output_dir, "Output directory");
    sub->add_option("--fit-lo", cfg.fit_lo, "Fit window lower n");
    sub->add_option("--fit-hi", cfg.fit_hi, "Fit window upper n");
    sub->add_option("--rate-gamma", cfg.rate_gamma, "Gamma for rate bounds (0 = gamma-star)");
    sub->add_option("--inner-tol", cfg.inner_tol, "Frozen-operator inner tolerance");
    sub->add_option("--outer-tol", cfg.outer_tol, "Coupling outer tolerance");
    sub->add_option("--residual-threshold", cfg.residual_threshold,
                    "Fixed-point residual pass threshold");
    sub->add_option("--ks-threshold", cfg.ks_threshold, "Ensemble KS pass threshold");
    sub->add_option("--grid-nodes", cfg.assumption_nodes,
                    "Assumption-sweep grid nodes");
    sub->add_option("--instances", cfg.n_instances, "Sequence-lemma instances");
    sub->add_option("--threads", cfg.n_threads, "Ensemble worker threads");
    sub->add_option("--bins", cfg.histogram_bins, "Histogram bins");
    sub->add_option("--config", "key=value configuration file (flags override)")
        ->expected(1);
}

// Plain key=value file applied before flag parsing, so flags override it.
void apply_config_file(const std::string& path, scto::ExperimentConfig& cfg) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r' ||
                                 line.back() == '\t'))
            line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "gamma-star") cfg.gamma_star = std::stod(val);
        else if (key == "epsilon") cfg.epsilon = std::stod(val);
        else if (key == "family") cfg.family = val;
        else if (key == "n-cells") cfg.n_cells = std::stoi(val);
        else if (key == "grading-q") cfg.grading_q = std::stod(val);
        else if (key == "eps-star") cfg.eps_star = std::stod(val);
        else if (key == "steps") cfg.n_steps = std::stoi(val);
        else if (key == "ref-steps") cfg.ref_steps = std::stoi(val);
        else if (key == "particles") cfg.n_particles = std::stoi(val);
        else if (key == "burn-in") cfg.burn_in = std::stoi(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "out") cfg.output_dir = val;
        else if (key == "fit-lo") cfg.fit_lo = std::stoi(val);
        else if (key == "fit-hi") cfg.fit_hi = std::stoi(val);
        else if (key == "rate-gamma") cfg.rate_gamma = std::stod(val);
        else if (key == "inner-tol") cfg.inner_tol = std::stod(val);
        else if (key == "outer-tol") cfg.outer_tol = std::stod(val);
        else if (key == "residual-threshold") cfg.residual_threshold = std::stod(val);
        else if (key == "ks-threshold") cfg.ks_threshold = std::stod(val);
        else if (key == "grid-nodes") cfg.assumption_nodes = std::stoi(val);
        else if (key == "instances") cfg.n_instances = std::stoi(val);
        else if (key == "threads") cfg.n_threads = std::stoi(val);
        else if (key == "bins") cfg.histogram_bins = std::stoi(val);
        else
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-consistent transfer operator laboratory for mean-field "
                 "coupled intermittent maps"};
    app.require_subcommand(1);

    scto::ExperimentConfig cfg;
    try {
        for (int i = 1; i + 1 < argc; ++i)
            if (std::string(argv[i]) == "--config") apply_config_file(argv[i + 1], cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"fixed-point", "Solve the self-consistent fixed point"},
        {"converge", "Measure L1 convergence toward the fixed point"},
        {"ensemble", "Finite particle system vs the stationary density"},
        {"verify-assumptions", "Certify expansion/distortion assumptions"},
        {"memory-loss", "Sequential composition memory-loss experiment"},
        {"perturbation", "Operator-difference decomposition bounds"},
        {"sequence-lemma", "Discrete sequence-bound verifier"},
    };
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc);
        add_common_options(sub, cfg);
        sub->callback([&cfg, n = name] { cfg.command = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        return scto::run_experiment(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
