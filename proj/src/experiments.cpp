#include "scto/experiments.hpp"

#include <chrono>
#include <limits>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "scto/cone.hpp"
#include "scto/density.hpp"
#include "scto/ensemble.hpp"
#include "scto/grid.hpp"
#include "scto/map_family.hpp"
#include "scto/rates.hpp"
#include "scto/transfer.hpp"

namespace scto {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

json config_json(const ExperimentConfig& c) {
    json j;
    j["command"] = c.command;
    j["gamma_star"] = c.gamma_star;
    j["epsilon"] = c.epsilon;
    j["family"] = c.family;
    j["n_cells"] = c.n_cells;
    j["grading_q"] = c.grading_q;
    j["eps_star"] = c.eps_star;
    j["n_steps"] = c.n_steps;
    j["ref_steps"] = c.ref_steps;
    j["n_particles"] = c.n_particles;
    j["burn_in"] = c.burn_in;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["fit_lo"] = c.fit_lo;
    j["fit_hi"] = c.fit_hi;
    j["rate_gamma"] = c.rate_gamma;
    j["inner_tol"] = c.inner_tol;
    j["outer_tol"] = c.outer_tol;
    j["residual_threshold"] = c.residual_threshold;
    j["ks_threshold"] = c.ks_threshold;
    j["assumption_nodes"] = c.assumption_nodes;
    j["n_instances"] = c.n_instances;
    j["n_threads"] = c.n_threads;
    j["histogram_bins"] = c.histogram_bins;
    return j;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_report(const ExperimentConfig& cfg, json results, bool pass) {
    json rep;
    rep["schema"] = 1;
    rep["command"] = cfg.command;
    rep["pass"] = pass;
    rep["timestamp"] = timestamp_utc();
    rep["config"] = config_json(cfg);
    rep["results"] = std::move(results);
    std::ofstream os(fs::path(cfg.output_dir) / "report.json", std::ios::binary);
    if (!os) throw std::runtime_error("output_dir: cannot write report.json");
    os << rep.dump(2) << "\n";
}

struct Setup {
    Family family;
    double gamma;  // gamma_star + 2 eps_star
    double grading_q;
    std::shared_ptr<const GradedGrid> grid;
};

int resolve_n_cells(const ExperimentConfig& cfg) {
    if (cfg.n_cells > 0) return cfg.n_cells;
    return cfg.command == "converge" || cfg.command == "memory-loss" ? 8192 : 4096;
}

Setup make_setup(const ExperimentConfig& cfg, int n_cells) {
    Setup s;
    s.family = family_from_name(cfg.family);
    s.gamma = cfg.gamma_star + 2.0 * cfg.eps_star;
    s.grading_q = cfg.grading_q > 0.0 ? cfg.grading_q : default_grading_q(s.gamma);
    s.grid = std::make_shared<GradedGrid>(make_graded_grid(n_cells, s.grading_q));
    return s;
}

void write_distances_csv(const fs::path& path,
                         const std::vector<std::pair<int, double>>& dist,
                         double C, double expnt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "n,d_n,bound\n";
    char buf[96];
    for (const auto& [n, d] : dist) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", n, d,
                      C * std::pow(static_cast<double>(n), expnt));
        os << buf;
    }
}

json cone_report_json(const ConeReport& rep) {
    json j;
    j["pass"] = rep.pass;
    j["mass"] = rep.mass;
    json conds = json::array();
    for (const auto& c : rep.conditions) {
        json cj;
        cj["name"] = c.name;
        cj["min_slack"] = c.min_slack;
        cj["worst_x"] = c.worst_x;
        cj["worst_ratio"] = c.worst_ratio;
        conds.push_back(cj);
    }
    j["conditions"] = conds;
    return j;
}

int run_fixed_point(const ExperimentConfig& cfg) {
    Setup su = make_setup(cfg, cfg.n_cells);
    ContextCache cache;
    FixedPointOptions opts;
    opts.inner_tol = cfg.inner_tol;
    opts.outer_tol = cfg.outer_tol;
    FixedPointResult fp = solve_fixed_point(su.family, cfg.gamma_star, cfg.epsilon,
                                            su.grid, opts, nullptr, &cache);
    ConeParams cp = fit_cone_params(su.grid, su.family, cfg.gamma_star,
                                    cfg.epsilon, su.gamma);
    ConeReport cone = cone_membership(fp.density, cp, 1);
    write_density_csv_file(
        (fs::path(cfg.output_dir) / "density_fixed_point.csv").string(), fp.density);

    json res;
    res["gamma_star"] = cfg.gamma_star;
    res["epsilon"] = cfg.epsilon;
    res["residual_l1"] = fp.residual_l1;
    res["coupling"] = {fp.s, fp.c};
    res["outer_iterations"] = fp.outer_iterations;
    res["inner_iterations"] = fp.inner_iterations;
    res["cone_report"] = cone_report_json(cone);
    res["density_csv"] = "density_fixed_point.csv";
    const bool pass = fp.residual_l1 <= cfg.residual_threshold && cone.pass;
    write_report(cfg, std::move(res), pass);
    return pass ? 0 : 2;
}

int run_converge(const ExperimentConfig& cfg) {
    Setup su = make_setup(cfg, cfg.n_cells);
    ContextCache cache;
    Density h0 = density_from_function(su.grid, [](double) { return 1.0; });
    const int ref_steps = cfg.ref_steps > 0 ? cfg.ref_steps : 10 * cfg.n_steps;
    Density reference =
        iterate_direct(h0, ref_steps, su.family, cfg.gamma_star, cfg.epsilon, cache)
            .final;
    IterateResult it = iterate_direct(h0, cfg.n_steps, su.family, cfg.gamma_star,
                                      cfg.epsilon, cache, &reference);

    std::vector<std::pair<int, double>> dist;
    for (std::size_t k = 0; k < it.ref_distances.size(); ++k)
        dist.emplace_back(static_cast<int>(k) + 1, it.ref_distances[k]);
    const double rate_gamma = cfg.rate_gamma > 0.0 ? cfg.rate_gamma : cfg.gamma_star;
    const double expnt = 1.0 - 1.0 / rate_gamma;
    double C = 0.0;
    for (const auto& [n, d] : dist)
        if (n >= cfg.fit_lo && n <= cfg.fit_hi)
            C = std::max(C, d / std::pow(static_cast<double>(n), expnt));
    bool bound_ok = true;
    for (const auto& [n, d] : dist)
        if (n > cfg.fit_hi && d > 1.2 * C * std::pow(static_cast<double>(n), expnt))
            bound_ok = false;
    double slope = std::numeric_limits<double>::quiet_NaN(), constant = 0.0;
    try {
        std::tie(slope, constant) =
            fit_decay_exponent(dist, cfg.fit_hi, cfg.n_steps);  // tail window
    } catch (const std::invalid_argument&) {
        // too few usable points for a tail fit; report NaN
    }
    write_distances_csv(fs::path(cfg.output_dir) / "distances_converge.csv", dist,
                        C, expnt);

    json res;
    res["bound_exponent"] = expnt;
    res["bound_constant"] = C;
    res["bound_satisfied"] = bound_ok;
    res["tail_exponent_fit"] = slope;
    res["tail_constant_fit"] = constant;
    res["final_step_residual"] = it.step_residuals.back();
    res["distances_csv"] = "distances_converge.csv";
    const bool pass = bound_ok;
    write_report(cfg, std::move(res), pass);
    return pass ? 0 : 2;
}

int run_ensemble(const ExperimentConfig& cfg) {
    Setup su = make_setup(cfg, cfg.n_cells);
    ContextCache cache;
    FixedPointOptions opts;
    opts.inner_tol = std::max(cfg.inner_tol, 1e-8);
    opts.outer_tol = std::max(cfg.outer_tol, 1e-8);
    FixedPointResult fp = solve_fixed_point(su.family, cfg.gamma_star, cfg.epsilon,
                                            su.grid, opts, nullptr, &cache);

    Ensemble e = make_uniform_ensemble(cfg.n_particles, cfg.seed);
    std::vector<std::array<double, 3>> series;
    series.reserve(static_cast<std::size_t>(cfg.burn_in));
    ensemble_run(e, cfg.burn_in, cfg.gamma_star, cfg.epsilon, su.family, &series,
                 cfg.n_threads);
    const double ks = ks_distance(e, fp.density);

    {
        std::ofstream os(fs::path(cfg.output_dir) / "coupling_ensemble.csv",
                         std::ios::binary);
        os << "step,s,c\n";
        char buf[96];
        for (const auto& row : series) {
            std::snprintf(buf, sizeof buf, "%.0f,%.17g,%.17g\n", row[0], row[1],
                          row[2]);
            os << buf;
        }
    }
    {
        std::vector<long> counts = histogram(e, cfg.histogram_bins);
        std::ofstream os(fs::path(cfg.output_dir) / "histogram_ensemble.csv",
                         std::ios::binary);
        os << "bin_left,bin_right,count\n";
        char buf[96];
        for (int b = 0; b < cfg.histogram_bins; ++b) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%ld\n",
                          static_cast<double>(b) / cfg.histogram_bins,
                          static_cast<double>(b + 1) / cfg.histogram_bins,
                          counts[static_cast<std::size_t>(b)]);
            os << buf;
        }
    }

    json res;
    res["N"] = cfg.n_particles;
    res["steps"] = cfg.burn_in;
    res["seed"] = cfg.seed;
    res["ks_distance"] = ks;
    res["ks_threshold"] = cfg.ks_threshold;
    res["fixed_point_residual"] = fp.residual_l1;
    res["deterministic_mode"] =
        cfg.n_threads == 1 ? "sequential-bitwise" : "fixed-chunk-tree";
    res["coupling_timeseries"] = "coupling_ensemble.csv";
    res["histogram_csv"] = "histogram_ensemble.csv";
    const bool pass = ks <= cfg.ks_threshold;
    write_report(cfg, std::move(res), pass);
    return pass ? 0 : 2;
}

int run_verify_assumptions(const ExperimentConfig& cfg) {
    Family family = family_from_name(cfg.family);
    const double gamma = cfg.gamma_star + 2.0 * cfg.eps_star;
    const double q = cfg.grading_q > 0.0 ? cfg.grading_q : default_grading_q(gamma);
    GradedGrid grid = make_graded_grid(cfg.assumption_nodes, q);

    std::vector<MapSpec> specs;
    const double es = cfg.eps_star;
    for (double eps : {-es, -0.5 * es, 0.0, 0.5 * es, es}) {
        for (auto [s, c] : {std::pair{0.0, 0.0}, std::pair{1.0, 1.0},
                            std::pair{1.0, -1.0}, std::pair{-1.0, 1.0},
                            std::pair{-1.0, -1.0}}) {
            if (family == Family::RemarkPM && eps < 0.0) continue;
            specs.push_back(make_map_spec(family, cfg.gamma_star, eps, s, c));
        }
    }
    AssumptionReport rep = verify_assumptions(specs, grid, gamma, 1.0);

    json res;
    res["n_specs"] = rep.n_specs;
    res["grid_nodes"] = rep.n_nodes;
    res["c_gamma"] = rep.constants.c_gamma;
    res["C_gamma"] = rep.constants.C_gamma;
    res["C_d"] = rep.constants.C_d;
    res["gamma"] = rep.constants.gamma;
    res["chi_star"] = rep.constants.chi_star;
    res["b"] = {rep.constants.b[0], rep.constants.b[1], rep.constants.b[2]};
    json mono = json::array();
    for (const auto& m : rep.monomials) {
        json mj;
        mj["ell"] = m.ell;
        mj["j"] = m.j;
        mj["monomial"] = m.label;
        mj["b"] = m.b;
        mj["arg_x"] = m.arg_x;
        mono.push_back(mj);
    }
    res["monomials"] = mono;
    write_report(cfg, std::move(res), rep.pass);
    return rep.pass ? 0 : 2;
}

int run_memory_loss(const ExperimentConfig& cfg) {
    Setup su = make_setup(cfg, cfg.n_cells);
    ContextCache cache;
    Density f = density_from_function(su.grid, [](double) { return 1.0; });
    Density g = normalize(density_from_function(su.grid, [](double x) { return 2.0 * x; }));
    std::vector<Density> hs = {f, g};
    const double rate_gamma = cfg.rate_gamma > 0.0 ? cfg.rate_gamma : cfg.gamma_star;
    ConvergenceReport rep = memory_loss_experiment(
        f, g, hs, cfg.n_steps, su.family, cfg.gamma_star, cfg.epsilon, rate_gamma,
        {cfg.fit_lo, cfg.fit_hi}, cache);
    write_distances_csv(fs::path(cfg.output_dir) / "distances_memory_loss.csv",
                        rep.distances, rep.bound_constant, rep.bound_exponent);

    const double sharp_target = -1.0 / rate_gamma + 0.3;
    json res;
    res["fitted_exponent"] = rep.fitted_exponent;
    res["fitted_constant"] = rep.fitted_constant;
    res["bound_exponent"] = rep.bound_exponent;
    res["bound_constant"] = rep.bound_constant;
    res["bound_satisfied"] = rep.bound_satisfied;
    res["sharp_exponent_target"] = sharp_target;
    res["distances_csv"] = "distances_memory_loss.csv";
    const bool pass = rep.bound_satisfied && rep.fitted_exponent <= sharp_target;
    write_report(cfg, std::move(res), pass);
    return pass ? 0 : 2;
}

int run_perturbation(const ExperimentConfig& cfg) {
    Family family = family_from_name(cfg.family);
    const double gamma = cfg.gamma_star + 2.0 * cfg.eps_star;
    const double beta = 4.0 * cfg.eps_star;  // gamma_plus - gamma_minus
    json pairs = json::array();
    bool pass = true;
    std::vector<double> ratios_coarse;
    for (int res_pass = 0; res_pass < 2; ++res_pass) {
        const int n = res_pass == 0 ? cfg.n_cells : 2 * cfg.n_cells;
        Setup su = make_setup(cfg, n);
        ContextCache cache;
        Density v = normalize(density_from_function(su.grid, [gamma](double x) {
            return (1.0 - gamma) * std::pow(x, -gamma);
        }));
        std::vector<Density> hs =
            sample_cone_densities(su.grid, gamma, 20, cfg.seed);
        for (int k = 0; k < 10; ++k) {
            PerturbationReport pr = perturbation_decomposition(
                v, hs[static_cast<std::size_t>(2 * k)],
                hs[static_cast<std::size_t>(2 * k + 1)], family, cfg.gamma_star,
                cfg.epsilon, beta, cache);
            if (res_pass == 0) {
                ratios_coarse.push_back(pr.ratio);
                json pj;
                pj["pair"] = k;
                pj["delta"] = pr.delta;
                pj["ratio"] = pr.ratio;
                pj["sup_f0_weighted"] = pr.sup_f0_weighted;
                pj["sup_f1_weighted"] = pr.sup_f1_weighted;
                pairs.push_back(pj);
                pass = pass && std::isfinite(pr.ratio) &&
                       std::isfinite(pr.sup_f0_weighted) &&
                       std::isfinite(pr.sup_f1_weighted);
            } else if (pr.defined && ratios_coarse[static_cast<std::size_t>(k)] > 0.0) {
                const double rel =
                    std::abs(pr.ratio - ratios_coarse[static_cast<std::size_t>(k)]) /
                    ratios_coarse[static_cast<std::size_t>(k)];
                pairs[static_cast<std::size_t>(k)]["refined_ratio"] = pr.ratio;
                pairs[static_cast<std::size_t>(k)]["ratio_drift"] = rel;
                pass = pass && rel < 0.10;
            }
        }
    }
    json res;
    res["beta"] = beta;
    res["pairs"] = std::move(pairs);
    write_report(cfg, std::move(res), pass);
    return pass ? 0 : 2;
}

int run_sequence_lemma(const ExperimentConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    int failures = 0, shifted_misses = 0;
    json worst;
    int module_arg = 0;
    const double module_C = convolution_constant(0.2, 0.6, 10000, &module_arg);
    for (int k = 0; k < cfg.n_instances; ++k) {
        const double gamma = 0.4 + 0.35 * uni(rng);
        const double beta = uni(rng) * 0.9 * std::min(gamma, 1.0 - gamma);
        const double xi = 0.1 + 10.0 * uni(rng);
        const double delta0 = 10.0 * uni(rng);
        int arg = 0;
        const double C = convolution_constant(beta, gamma, 4000, &arg);
        const double Cu = convolution_constant_unshifted(beta, gamma, 4000);
        const double sigma = (0.05 + 0.9 * uni(rng)) / Cu;  // sigma C < 1 both ways
        std::vector<double> delta =
            make_saturating_sequence(xi, sigma, gamma, beta, delta0, 1500);
        SequenceBound sb;
        sb.xi = xi;
        sb.sigma = sigma;
        sb.gamma = gamma;
        sb.beta = beta;
        sb.C_beta_gamma = C;
        sb.C_arg_n = arg;
        sb.delta = std::move(delta);
        SequenceLemmaReport rep = verify_sequence_lemma(sb);
        if (!rep.conclusion_holds) ++shifted_misses;
        if (!(rep.hypothesis_holds && rep.conclusion_holds_unshifted)) {
            ++failures;
            if (worst.empty()) {
                worst["instance"] = k;
                worst["gamma"] = gamma;
                worst["beta"] = beta;
                worst["xi"] = xi;
                worst["sigma"] = sigma;
                worst["K"] = rep.K_unshifted;
            }
        }
    }
    json res;
    res["instances"] = cfg.n_instances;
    res["failures"] = failures;
    res["shifted_constant_misses"] = shifted_misses;
    res["C_beta_gamma_example"] = module_C;
    res["C_example_arg_n"] = module_arg;
    res["C_example_beta"] = 0.2;
    res["C_example_gamma"] = 0.6;
    if (!worst.empty()) res["first_failure"] = worst;
    const bool pass = failures == 0;
    write_report(cfg, std::move(res), pass);
    return pass ? 0 : 2;
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
    static const char* kCommands[] = {"fixed-point",  "converge",
                                      "ensemble",     "verify-assumptions",
                                      "memory-loss",  "perturbation",
                                      "sequence-lemma"};
    bool known = false;
    for (const char* c : kCommands) known = known || cfg.command == c;
    if (!known) throw std::invalid_argument("command: unknown '" + cfg.command + "'");
    if (!(cfg.gamma_star > 0.0 && cfg.gamma_star < 1.0))
        throw std::invalid_argument("gamma_star: must lie in (0,1)");
    if (!(cfg.eps_star > 0.0))
        throw std::invalid_argument("eps_star: must be positive");
    if (std::abs(cfg.epsilon) > cfg.eps_star)
        throw std::invalid_argument("epsilon: |epsilon| must not exceed eps_star");
    if (!(cfg.gamma_star - 2.0 * cfg.eps_star > 0.0 &&
          cfg.gamma_star + 2.0 * cfg.eps_star < 1.0))
        throw std::invalid_argument(
            "eps_star: gamma_star +- 2 eps_star must stay inside (0,1)");
    if (cfg.n_cells != 0 &&
        (!power_of_two(cfg.n_cells) || cfg.n_cells < 256 || cfg.n_cells > 65536))
        throw std::invalid_argument(
            "n_cells: must be a power of two between 256 and 65536");
    if (cfg.grading_q != 0.0 && cfg.grading_q < 1.0)
        throw std::invalid_argument("grading_q: must be >= 1 (or 0 for default)");
    if (cfg.n_steps < 1) throw std::invalid_argument("n_steps: must be >= 1");
    if (cfg.n_particles < 1)
        throw std::invalid_argument("n_particles: must be >= 1");
    if (cfg.burn_in < 0) throw std::invalid_argument("burn_in: must be >= 0");
    if (cfg.fit_lo < 1 || cfg.fit_hi <= cfg.fit_lo)
        throw std::invalid_argument("fit_window: need 1 <= fit_lo < fit_hi");
    if (cfg.assumption_nodes < 1000)
        throw std::invalid_argument("assumption_nodes: must be >= 1000");
    if (cfg.n_instances < 1)
        throw std::invalid_argument("n_instances: must be >= 1");
    if (cfg.n_threads < 1 || cfg.n_threads > 16)
        throw std::invalid_argument("n_threads: must lie in 1..16");
    if (cfg.histogram_bins < 1)
        throw std::invalid_argument("histogram_bins: must be >= 1");
    family_from_name(cfg.family);
}

int run_experiment(const ExperimentConfig& cfg_in) {
    validate_config(cfg_in);
    ExperimentConfig cfg = cfg_in;
    cfg.n_cells = resolve_n_cells(cfg);  // reports embed the resolved value
    fs::create_directories(cfg.output_dir);
    if (cfg.command == "fixed-point") return run_fixed_point(cfg);
    if (cfg.command == "converge") return run_converge(cfg);
    if (cfg.command == "ensemble") return run_ensemble(cfg);
    if (cfg.command == "verify-assumptions") return run_verify_assumptions(cfg);
    if (cfg.command == "memory-loss") return run_memory_loss(cfg);
    if (cfg.command == "perturbation") return run_perturbation(cfg);
    return run_sequence_lemma(cfg);
}

}  // namespace scto
