#ifndef SCTO_CONE_HPP
#define SCTO_CONE_HPP

#include <string>
#include <vector>

#include "scto/density.hpp"

namespace scto {

// Constants (a_1..a_r, A) of the derivative-ratio and tail cones.
struct ConeParams {
    int r = 3;
    std::vector<double> a;  // size r, all > 0
    double A = 0.0;
    double chi_star = 1.0;
    double gamma = 0.0;
};

struct ConeCondition {
    std::string name;
    double min_slack = 0.0;  // min over nodes of 1 - ratio/allowed; >= 0 passes
    double worst_x = 0.0;
    double worst_ratio = 0.0;  // measured |g^(l)| chi_l / g (or tail analogue)
};

struct ConeReport {
    bool pass = false;
    std::vector<ConeCondition> conditions;  // derivative conditions then tail
    double mass = 0.0;
};

// Divided-difference estimate of the order-th derivative at every node.
// Second-order centered stencil on the nonuniform grid; endpoints one-sided.
std::vector<double> estimate_derivative(const GradedGrid& grid,
                                        const std::vector<double>& values,
                                        int order);

// Checks d against the derivative-ratio cone of order k plus the cumulative
// tail bound A x^{1-gamma}.  Skips the first two and last nodes.  Requires
// strictly positive values.
ConeReport cone_membership(const Density& d, const ConeParams& p, int k);

// Derivative-ratio and Lipschitz conditions only, restricted to nodes
// x >= x_min; no normalization or tail check.  Used for distortion chains,
// whose composed inverse Jacobians are not probability densities.
ConeReport cone_derivative_report(const Density& d, const ConeParams& p, int k,
                                  double x_min);

// Worst measured ratios |g^(l)| chi_l / g for l = 1..k (the k-th entry uses
// the Lipschitz estimate of g^(k-1)) and the worst tail ratio; used to
// calibrate ConeParams.
struct ConeRatios {
    std::vector<double> a_implied;
    double A_implied = 0.0;
};
ConeRatios measured_cone_ratios(const Density& d, double gamma, double chi_star,
                                int k);

}  // namespace scto

#endif
