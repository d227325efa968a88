#include "scto/map_family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scto {

std::string family_name(Family f) {
    return f == Family::CoupledPM ? "coupled-pm" : "remark-pm";
}

Family family_from_name(const std::string& name) {
    if (name == "coupled-pm") return Family::CoupledPM;
    if (name == "remark-pm") return Family::RemarkPM;
    throw std::invalid_argument("family: unknown name '" + name + "'");
}

namespace {

// Perturbation polynomial P with T = x + x^{1+ge} + phi*P(x).
// CoupledPM: P = x^2 (1-x);  RemarkPM: P = x (1-x).
double pert(Family f, double x, int order) {
    if (f == Family::CoupledPM) {
        switch (order) {
            case 0: return x * x * (1.0 - x);
            case 1: return 2.0 * x - 3.0 * x * x;
            case 2: return 2.0 - 6.0 * x;
            case 3: return -6.0;
            default: return 0.0;
        }
    }
    switch (order) {
        case 0: return x * (1.0 - x);
        case 1: return 1.0 - 2.0 * x;
        case 2: return -2.0;
        default: return 0.0;
    }
}

double lifted(const MapSpec& s, double x) {
    return x + std::pow(x, 1.0 + s.gamma_eff) + s.phi_coeff * pert(s.family, x, 0);
}

double lifted_d1(const MapSpec& s, double x) {
    return 1.0 + (1.0 + s.gamma_eff) * std::pow(x, s.gamma_eff) +
           s.phi_coeff * pert(s.family, x, 1);
}

double bisect_boundary(const MapSpec& s) {
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-13) {
        double mid = 0.5 * (lo + hi);
        if (lifted(s, mid) < 1.0)
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int k = 0; k < 2; ++k) x -= (lifted(s, x) - 1.0) / lifted_d1(s, x);
    return std::clamp(x, lo - 1e-12, hi + 1e-12);
}

}  // namespace

MapSpec make_map_spec(Family family, double gamma_star, double epsilon,
                      double s_h, double c_h) {
    if (!(gamma_star > 0.0 && gamma_star < 1.0))
        throw std::invalid_argument("gamma_star: must lie in (0,1)");
    if (!std::isfinite(epsilon) || !std::isfinite(s_h) || !std::isfinite(c_h))
        throw std::invalid_argument("epsilon/s_h/c_h: must be finite");
    MapSpec s;
    s.family = family;
    s.gamma_star = gamma_star;
    s.epsilon = epsilon;
    s.s_h = s_h;
    s.c_h = c_h;
    if (family == Family::CoupledPM) {
        s.gamma_eff = gamma_star + epsilon * s_h;
        s.phi_coeff = epsilon * c_h;
    } else {
        if (epsilon < 0.0)
            throw std::invalid_argument("epsilon: must be >= 0 for remark-pm");
        s.gamma_eff = gamma_star;
        s.phi_coeff = epsilon * s_h;
    }
    if (!(s.gamma_eff > 0.0 && s.gamma_eff < 1.0))
        throw std::invalid_argument(
            "epsilon: effective exponent gamma_star + epsilon*s_h leaves (0,1)");
    // Branch monotonicity: the polynomial perturbation must not cancel the
    // expansion anywhere.
    for (double x : {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.999}) {
        if (!(lifted_d1(s, x) > 1.0))
            throw std::invalid_argument(
                "epsilon: perturbation destroys strict expansion of the branches");
    }
    s.branch_boundary = bisect_boundary(s);
    return s;
}

double eval_map_lifted(const MapSpec& spec, double x) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::invalid_argument("x: must lie in [0,1]");
    return lifted(spec, x);
}

double eval_map(const MapSpec& spec, double x) {
    double t = eval_map_lifted(spec, x);
    double r = t - std::floor(t);
    if (r >= 1.0) r -= 1.0;  // t just below an integer can round up
    return r;
}

double eval_derivative(const MapSpec& spec, double x, int order) {
    if (order < 1 || order > 4)
        throw std::invalid_argument("order: supported range is 1..4");
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("x: must lie in [0,1]");
    if (x == 0.0 && order > 1)
        throw std::invalid_argument("x: derivatives of order >= 2 blow up at 0");
    const double ge = spec.gamma_eff;
    double lead;
    switch (order) {
        case 1: lead = 1.0 + (1.0 + ge) * std::pow(x, ge); break;
        case 2: lead = (1.0 + ge) * ge * std::pow(x, ge - 1.0); break;
        case 3: lead = (1.0 + ge) * ge * (ge - 1.0) * std::pow(x, ge - 2.0); break;
        default: lead = (1.0 + ge) * ge * (ge - 1.0) * (ge - 2.0) * std::pow(x, ge - 3.0);
    }
    return lead + spec.phi_coeff * pert(spec.family, x, order);
}

double map_ratio(const MapSpec& spec, double x) {
    double p = spec.family == Family::CoupledPM ? x * (1.0 - x) : (1.0 - x);
    return 1.0 + std::pow(x, spec.gamma_eff) + spec.phi_coeff * p;
}

double derivative_gap_ratio(const MapSpec& spec, double x) {
    if (spec.family == Family::CoupledPM)
        return spec.gamma_eff * std::pow(x, spec.gamma_eff) +
               spec.phi_coeff * x * (1.0 - 2.0 * x);
    return spec.gamma_star * std::pow(x, spec.gamma_star) - spec.phi_coeff * x;
}

double derivative_minus_one(const MapSpec& spec, double x) {
    if (spec.family == Family::CoupledPM)
        return (1.0 + spec.gamma_eff) * std::pow(x, spec.gamma_eff) +
               spec.phi_coeff * x * (2.0 - 3.0 * x);
    return (1.0 + spec.gamma_star) * std::pow(x, spec.gamma_star) +
           spec.phi_coeff * (1.0 - 2.0 * x);
}

double solve_branch_boundary(const MapSpec& spec) { return bisect_boundary(spec); }

namespace {

// Monotone solve of lifted T(x) = target on [lo, hi].  The lifted map is
// convex on each branch for the admissible parameter box, so a Newton step
// from below lands above the root and iterates then descend monotonically;
// a bisection fallback guards the few cases where rounding breaks that
// picture.
double invert_monotone(const MapSpec& s, double target, double lo, double hi,
                       double start) {
    double x = std::clamp(start, lo, hi);
    for (int it = 0; it < 80; ++it) {
        double f = lifted(s, x) - target;
        double step = f / lifted_d1(s, x);
        double xn = x - step;
        if (xn < lo) xn = lo;
        if (xn > hi) xn = hi;
        if (std::abs(step) <= 1e-16 * std::max(x, 1e-300) || xn == x) return xn;
        if (xn <= 1e-300) return 0.0;
        x = xn;
    }
    // Bisection down to relative width, then one polish step.
    double a = lo, b = hi;
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(b, 1e-300); ++it) {
        double mid = 0.5 * (a + b);
        if (lifted(s, mid) < target)
            a = mid;
        else
            b = mid;
    }
    x = 0.5 * (a + b);
    x -= (lifted(s, x) - target) / lifted_d1(s, x);
    return std::clamp(x, lo, hi);
}

}  // namespace

double branch_inverse(const MapSpec& spec, Branch branch, double y, double hint) {
    if (!(y >= 0.0 && y <= 1.0))
        throw std::invalid_argument("y: must lie in [0,1]");
    const double xs = spec.branch_boundary;
    if (branch == Branch::Left) {
        if (y == 0.0) return 0.0;
        if (y == 1.0) return xs;
        return invert_monotone(spec, y, 0.0, xs, hint);
    }
    if (y == 0.0) return xs;
    if (y == 1.0) return 1.0;
    return invert_monotone(spec, 1.0 + y, xs, 1.0, hint);
}

double branch_inverse(const MapSpec& spec, Branch branch, double y) {
    double start = branch == Branch::Left ? std::min(y, spec.branch_boundary) : 1.0;
    return branch_inverse(spec, branch, y, start);
}

double chi_weight(double x, int ell, double chi_star) {
    if (ell == 0) return chi_star;
    double p = 1.0;
    for (int i = 0; i < ell; ++i) p *= x;
    return std::min(p, chi_star);
}

namespace {

// Monomials of (w^ell)^(ell-j) as products w^p0 (w')^p1 (w'')^p2 (w''')^p3.
struct Monomial {
    int ell, j;
    double coef;
    int p0, p1, p2, p3;
    const char* label;
};

constexpr Monomial kMonomials[] = {
    {1, 1, 1.0, 1, 0, 0, 0, "w"},
    {1, 0, 1.0, 0, 1, 0, 0, "w'"},
    {2, 2, 1.0, 2, 0, 0, 0, "w^2"},
    {2, 1, 2.0, 1, 1, 0, 0, "2ww'"},
    {2, 0, 2.0, 0, 2, 0, 0, "2(w')^2"},
    {2, 0, 2.0, 1, 0, 1, 0, "2ww''"},
    {3, 3, 1.0, 3, 0, 0, 0, "w^3"},
    {3, 2, 3.0, 2, 1, 0, 0, "3w^2w'"},
    {3, 1, 6.0, 1, 2, 0, 0, "6w(w')^2"},
    {3, 1, 3.0, 2, 0, 1, 0, "3w^2w''"},
    {3, 0, 6.0, 0, 3, 0, 0, "6(w')^3"},
    {3, 0, 18.0, 1, 1, 1, 0, "18ww'w''"},
    {3, 0, 3.0, 2, 0, 0, 1, "3w^2w'''"},
};

double ipow(double v, int p) {
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= v;
    return r;
}

}  // namespace

AssumptionReport verify_assumptions(const std::vector<MapSpec>& specs,
                                    const GradedGrid& grid, double gamma,
                                    double chi_star) {
    if (specs.empty()) throw std::invalid_argument("specs: empty sweep");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma: must lie in (0,1)");
    if (!(chi_star > 0.0 && chi_star <= 1.0))
        throw std::invalid_argument("chi_star: must lie in (0,1]");

    AssumptionReport rep;
    rep.n_specs = static_cast<int>(specs.size());
    rep.n_nodes = grid.n_cells;
    rep.constants.gamma = gamma;
    rep.constants.chi_star = chi_star;
    rep.constants.r = 3;

    constexpr int kNumMonomials = static_cast<int>(std::size(kMonomials));
    std::array<double, kNumMonomials> best_b;
    std::array<double, kNumMonomials> best_x{};
    best_b.fill(std::numeric_limits<double>::infinity());
    double c_gamma = std::numeric_limits<double>::infinity();
    double C_gamma = 0.0, C_d = -std::numeric_limits<double>::infinity();
    double worst_cg = 0.0, worst_cd = 0.0;

    for (const MapSpec& s : specs) {
        const double xs = s.branch_boundary;
        for (int i = 1; i <= grid.n_cells; ++i) {
            const double x = grid.node(i);
            const bool left = x <= xs;
            const double t_lift = lifted(s, x);
            const double t_red = left ? t_lift : t_lift - 1.0;
            // Right-branch nodes adjacent to the boundary map arbitrarily
            // close to 0 and only contribute infinite (vacuous) margins.
            if (!left && t_red < 1e-12) continue;

            const double d1 = eval_derivative(s, x, 1);
            const double d2 = eval_derivative(s, x, 2);
            const double d3 = eval_derivative(s, x, 3);
            const double d4 = eval_derivative(s, x, 4);
            const double w = 1.0 / d1;
            const double w1 = -d2 * w * w;
            const double w2 = (-d3 + 2.0 * d2 * d2 * w) * w * w;
            const double w3 = (-d4 + 6.0 * d2 * d3 * w - 6.0 * d2 * d2 * d2 * w * w) * w * w;

            double cg = derivative_minus_one(s, x) / std::pow(x, gamma);
            if (cg < c_gamma) { c_gamma = cg; worst_cg = x; }
            if (d1 > C_gamma) C_gamma = d1;
            if (!left) {
                double cd = d2 * w * w;
                if (cd > C_d) { C_d = cd; worst_cd = x; }
            }

            const double u = map_ratio(s, x);
            const double aa = derivative_gap_ratio(s, x) / u;  // T'/u - 1, >= 0

            // 1/chi_ell(T) - w^ell/chi_ell(x) per degree, cancellation-free
            // on the left branch where both chi arguments are below chi_star.
            std::array<double, 4> gap{};
            std::array<bool, 4> pure{};  // chi == plain power at x and T
            for (int ell = 1; ell <= 3; ++ell) {
                double chix = chi_weight(x, ell, chi_star);
                double chit = chi_weight(t_red, ell, chi_star);
                bool pw = left && ipow(x, ell) < chi_star && ipow(t_red, ell) <= chi_star;
                pure[static_cast<std::size_t>(ell)] = pw;
                if (pw) {
                    double inv_u_minus_w = derivative_gap_ratio(s, x) / (u * d1);
                    double sum = 0.0;  // (a-b)(a^{l-1}+...+b^{l-1}) with a=1/u, b=w
                    for (int k = 0; k < ell; ++k)
                        sum += ipow(1.0 / u, k) * ipow(w, ell - 1 - k);
                    gap[static_cast<std::size_t>(ell)] =
                        inv_u_minus_w * sum / ipow(x, ell);
                } else {
                    gap[static_cast<std::size_t>(ell)] = 1.0 / chit - ipow(w, ell) / chix;
                }
            }

            for (int mi = 0; mi < kNumMonomials; ++mi) {
                const Monomial& m = kMonomials[mi];
                double bcand;
                if (m.j == m.ell) {
                    if (pure[static_cast<std::size_t>(m.ell)]) {
                        // ((T'/u)^ell - 1) without cancellation
                        bcand = m.ell == 1 ? aa
                              : m.ell == 2 ? aa * (2.0 + aa)
                                           : aa * (3.0 + aa * (3.0 + aa));
                    } else {
                        double chix = chi_weight(x, m.ell, chi_star);
                        double chit = chi_weight(t_red, m.ell, chi_star);
                        bcand = chix / (chit * ipow(w, m.ell)) - 1.0;
                    }
                } else {
                    double mval = m.coef * ipow(w, m.p0) * ipow(w1, m.p1) *
                                  ipow(w2, m.p2) * ipow(w3, m.p3);
                    double den = std::abs(mval) / chi_weight(x, m.j, chi_star);
                    if (den == 0.0) continue;
                    bcand = gap[static_cast<std::size_t>(m.ell)] / den;
                }
                if (!std::isfinite(bcand))
                    throw std::runtime_error(
                        "verify_assumptions: non-finite bound at x=" +
                        std::to_string(x) + " ell=" + std::to_string(m.ell) +
                        " j=" + std::to_string(m.j));
                if (bcand < best_b[static_cast<std::size_t>(mi)]) {
                    best_b[static_cast<std::size_t>(mi)] = bcand;
                    best_x[static_cast<std::size_t>(mi)] = x;
                }
            }
        }
    }

    rep.constants.c_gamma = c_gamma;
    rep.constants.C_gamma = C_gamma;
    rep.constants.C_d = C_d;
    rep.worst_x_c_gamma = worst_cg;
    rep.worst_x_C_d = worst_cd;
    rep.constants.b = {std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity()};
    for (int mi = 0; mi < kNumMonomials; ++mi) {
        const Monomial& m = kMonomials[mi];
        MonomialBound mb;
        mb.ell = m.ell;
        mb.j = m.j;
        mb.monomial_index = mi;
        mb.label = m.label;
        mb.b = best_b[static_cast<std::size_t>(mi)];
        mb.arg_x = best_x[static_cast<std::size_t>(mi)];
        rep.monomials.push_back(mb);
        auto& bl = rep.constants.b[static_cast<std::size_t>(m.ell - 1)];
        bl = std::min(bl, mb.b);
    }
    rep.pass = rep.constants.c_gamma > 0.0 && std::isfinite(rep.constants.C_gamma) &&
               std::isfinite(rep.constants.C_d);
    for (double bl : rep.constants.b) rep.pass = rep.pass && bl > 0.0;
    return rep;
}

}  // namespace scto
