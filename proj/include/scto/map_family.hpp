#ifndef SCTO_MAP_FAMILY_HPP
#define SCTO_MAP_FAMILY_HPP

#include <array>
#include <string>
#include <vector>

#include "scto/grid.hpp"

namespace scto {

enum class Family { CoupledPM, RemarkPM };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// A fully instantiated interval map.  CoupledPM is
//   T(x) = x (1 + x^{gamma_eff}) + phi_coeff x^2 (1-x)   mod 1,
// with gamma_eff = gamma_star + epsilon*s_h and phi_coeff = epsilon*c_h.
// RemarkPM keeps the exponent fixed and perturbs by phi_coeff x (1-x),
// phi_coeff = epsilon*s_h, epsilon >= 0.
struct MapSpec {
    Family family = Family::CoupledPM;
    double gamma_star = 0.5;
    double epsilon = 0.0;
    double s_h = 0.0;
    double c_h = 0.0;
    double gamma_eff = 0.5;
    double phi_coeff = 0.0;
    double branch_boundary = 0.0;  // x* with lifted T(x*) = 1
};

// Validates parameters and solves the branch boundary.  Throws
// std::invalid_argument when the effective exponent leaves (0,1) or the
// perturbation breaks monotonicity.
MapSpec make_map_spec(Family family, double gamma_star, double epsilon,
                      double s_h, double c_h);

// Monotone lift with T(0) = 0 and T(1) = 2.
double eval_map_lifted(const MapSpec& spec, double x);

// Reduced map on [0,1); lifted values 1 and 2 both map to 0.
double eval_map(const MapSpec& spec, double x);

// order-th derivative of the lifted map, order in 1..4 (r = 3).
double eval_derivative(const MapSpec& spec, double x, int order);

// T_lift(x)/x evaluated without cancellation; equals 1 + x^gamma_eff + ...
double map_ratio(const MapSpec& spec, double x);

// T'(x) - T_lift(x)/x, cancellation-free (both tend to 1 at 0).
double derivative_gap_ratio(const MapSpec& spec, double x);

// T'(x) - 1, cancellation-free.
double derivative_minus_one(const MapSpec& spec, double x);

enum class Branch { Left, Right };

// Root of lifted T(x) = 1 in (0,1), absolute tolerance 1e-13.
double solve_branch_boundary(const MapSpec& spec);

// Unique preimage of y in the closed branch interval.  The optional hint
// warm-starts the solve (used when couplings drift slowly step to step).
double branch_inverse(const MapSpec& spec, Branch branch, double y);
double branch_inverse(const MapSpec& spec, Branch branch, double y, double hint);

// Measured constants certifying the expansion/distortion assumptions.
struct AssumptionConstants {
    double c_gamma = 0.0;   // inf (T'-1)/x^gamma
    double C_gamma = 0.0;   // sup T'
    double gamma = 0.0;     // exponent used in the tail/expansion checks
    double C_d = 0.0;       // sup T''/(T')^2 over the right branch
    std::array<double, 3> b{};  // per-degree expansion margins, ell = 1..3
    double chi_star = 1.0;
    int r = 3;
};

struct MonomialBound {
    int ell = 0;
    int j = 0;
    int monomial_index = 0;
    std::string label;
    double b = 0.0;      // measured infimum of the admissible margin
    double arg_x = 0.0;  // node attaining it
};

struct AssumptionReport {
    AssumptionConstants constants;
    std::vector<MonomialBound> monomials;
    double worst_x_c_gamma = 0.0;
    double worst_x_C_d = 0.0;
    bool pass = false;
    int n_specs = 0;
    int n_nodes = 0;
};

// Measures c_gamma, C_gamma, C_d and the expansion margins b_ell over every
// spec in the set, on the interior nodes of the grid.  gamma should be the
// upper envelope gamma_star + 2*eps_star of the effective exponents.
AssumptionReport verify_assumptions(const std::vector<MapSpec>& specs,
                                    const GradedGrid& grid, double gamma,
                                    double chi_star);

// min(x^ell, chi_star); ell = 0 gives chi_star.
double chi_weight(double x, int ell, double chi_star);

}  // namespace scto

#endif
