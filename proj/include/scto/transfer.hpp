#ifndef SCTO_TRANSFER_HPP
#define SCTO_TRANSFER_HPP

#include <memory>
#include <utility>
#include <vector>

#include "scto/cone.hpp"
#include "scto/density.hpp"
#include "scto/grid.hpp"
#include "scto/map_family.hpp"

namespace scto {

// Cached per-node preimages and interpolation stencils for one map.
// Interpolation kinds mirror Density::interpolate exactly.
struct TransferContext {
    struct Node {
        double y = 0.0;       // branch preimage of the grid node
        double w = 0.0;       // 1/T'(y)
        int cell = 0;         // 0: below x_1 (tail); else cell [x_c, x_{c+1}]
        int kind = 0;         // 0 tail, 1 power-law cell, 2 linear cell
        double th = 0.0;      // tail: ln(y/x_1); power: log-space weight
        double la = 0.0;      // linear weight (fallback for power cells)
    };
    MapSpec spec;
    std::shared_ptr<const GradedGrid> grid;
    std::vector<Node> left, right;
};

TransferContext make_transfer_context(const MapSpec& spec,
                                      std::shared_ptr<const GradedGrid> grid,
                                      const TransferContext* warm = nullptr);

// Keyed by the map's effective parameters, so repeated couplings (epsilon=0,
// frozen inner loops, alternating sequences) reuse preimages.  Also owns the
// precomputed coupling-kernel weights for its grid.  Not thread-safe.
class ContextCache {
  public:
    std::shared_ptr<const TransferContext> get(
        const MapSpec& spec, const std::shared_ptr<const GradedGrid>& grid);

    // Same quadrature as coupling_functionals, with cached kernel weights.
    std::pair<double, double> coupling(const Density& d, Family family);

    std::size_t size() const { return entries_.size(); }

  private:
    struct Entry {
        int family;
        double gamma_eff;
        double phi_coeff;
        std::shared_ptr<const TransferContext> ctx;
    };
    std::vector<Entry> entries_;
    std::vector<double> kernel_s_, kernel_c_;
    const GradedGrid* kernel_grid_ = nullptr;
    Family kernel_family_ = Family::CoupledPM;
    static constexpr std::size_t kCapacity = 64;
};

// (L g)(x_i) = sum over branches of g(y)/T'(y) at the cached preimages.
Density apply_transfer(const TransferContext& ctx, const Density& g);

// Single-branch restricted operator (g w) o T^{-1}; not mass preserving.
Density apply_branch_restricted(const TransferContext& ctx, Branch branch,
                                const Density& g);

struct StepResult {
    Density density;
    double s = 0.0;
    double c = 0.0;
};

// One application of the self-consistent operator: couple to g, then push g
// through the resulting map.
StepResult self_consistent_step(const Density& g, Family family,
                                double gamma_star, double epsilon,
                                ContextCache& cache);

struct IterateResult {
    std::vector<double> step_residuals;  // l1(h_k, h_{k+1})
    std::vector<double> ref_distances;   // l1(h_k, reference), if given
    std::vector<std::pair<double, double>> couplings;
    Density final;
};

IterateResult iterate_direct(const Density& h0, int n_steps, Family family,
                             double gamma_star, double epsilon,
                             ContextCache& cache,
                             const Density* reference = nullptr);

struct FixedPointOptions {
    double inner_tol = 1e-10;
    double outer_tol = 1e-9;
    int stagnation_window = 50;
    double stagnation_frac = 1e-3;  // stop when 50-step improvement < 0.1%
    int max_inner = 200000;
    int max_outer = 200;
};

struct FixedPointResult {
    Density density;
    double residual_l1 = 0.0;  // certificate: one self-consistent step
    double s = 0.0, c = 0.0;
    int outer_iterations = 0;
    long long inner_iterations = 0;
};

// Inner-outer scheme: freeze the coupling, power-iterate the frozen linear
// operator to stagnation, refresh the coupling, repeat.
FixedPointResult solve_fixed_point(Family family, double gamma_star,
                                   double epsilon,
                                   std::shared_ptr<const GradedGrid> grid,
                                   const FixedPointOptions& opts = {},
                                   const Density* h_init = nullptr,
                                   ContextCache* cache = nullptr);

struct PerturbationConstants {
    double beta = 0.0;
    double C_beta = 0.0;
    double gamma_minus = 0.0;
    double gamma_plus = 0.0;
};

struct PerturbationReport {
    bool defined = false;  // false when the two operators coincide to noise
    double delta = 0.0;
    double delta_neg = 0.0;  // mass of the negative part
    double ratio = 0.0;      // delta / (|eps| ||h0 - h1||_1)
    double sup_f0_weighted = 0.0;  // sup f_i(x) x^beta
    double sup_f1_weighted = 0.0;
    std::shared_ptr<Density> f0, f1;
};

// Splits L_{eps h0} v - L_{eps h1} v into delta (f0 - f1) with f_i
// normalized positive/negative parts.
PerturbationReport perturbation_decomposition(const Density& v,
                                              const Density& h0,
                                              const Density& h1, Family family,
                                              double gamma_star, double epsilon,
                                              double beta, ContextCache& cache);

struct PartialDerivativeReport {
    double sup_s = 0.0;        // sup |d_s (L_s v)| x^{gp-gm} / |eps|
    double sup_sx = 0.0;       // x-derivative version, weight x^{gp-gm+1}
    double sup_s_refined = 0.0;
    double sup_sx_refined = 0.0;
    bool stable = false;  // refined values within 15%
    bool pass = false;
};

// Finite differences in s along the path f_s = (1-s) f0 + s f1.
PartialDerivativeReport partial_derivative_bound_check(
    const Density& v, const Density& f0, const Density& f1, Family family,
    double gamma_star, double epsilon, double gamma_minus, double gamma_plus,
    double s_point, double ds, ContextCache& cache);

// Calibrates cone constants so the reference density (1-gamma) x^{-gamma},
// the polynomial generators and their one-step images all fit with margin.
ConeParams fit_cone_params(const std::shared_ptr<const GradedGrid>& grid,
                           Family family, double gamma_star, double epsilon,
                           double gamma, double chi_star = 1.0, int r = 3,
                           double margin = 2.5);

// Random convex mixtures of the cone generators (members of D^r_1 by
// construction); used by the property and acceptance suites.
std::vector<Density> sample_cone_densities(
    const std::shared_ptr<const GradedGrid>& grid, double gamma, int count,
    unsigned long long seed);

}  // namespace scto

#endif
