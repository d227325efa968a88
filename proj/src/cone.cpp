#include "scto/cone.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace scto {

std::vector<double> estimate_derivative(const GradedGrid& grid,
                                        const std::vector<double>& values,
                                        int order) {
    if (order < 1) throw std::invalid_argument("order: must be >= 1");
    std::vector<double> cur = values;
    const int n = grid.n_cells;
    for (int pass = 0; pass < order; ++pass) {
        std::vector<double> next(cur.size());
        for (int i = 2; i <= n - 1; ++i) {
            const double hl = grid.node(i) - grid.node(i - 1);
            const double hr = grid.node(i + 1) - grid.node(i);
            next[static_cast<std::size_t>(i - 1)] =
                (-hr / (hl * (hl + hr))) * cur[static_cast<std::size_t>(i - 2)] +
                ((hr - hl) / (hl * hr)) * cur[static_cast<std::size_t>(i - 1)] +
                (hl / (hr * (hl + hr))) * cur[static_cast<std::size_t>(i)];
        }
        next[0] = (cur[1] - cur[0]) / (grid.node(2) - grid.node(1));
        next[static_cast<std::size_t>(n - 1)] =
            (cur[static_cast<std::size_t>(n - 1)] - cur[static_cast<std::size_t>(n - 2)]) /
            (grid.node(n) - grid.node(n - 1));
        cur = std::move(next);
    }
    return cur;
}

namespace {

struct Worst {
    double slack = std::numeric_limits<double>::infinity();
    double x = 0.0;
    double ratio = 0.0;
};

void track(Worst& w, double slack, double x, double ratio) {
    if (slack < w.slack) {
        w.slack = slack;
        w.x = x;
        w.ratio = ratio;
    }
}

}  // namespace

namespace {

void derivative_conditions(const Density& d, const ConeParams& p, int k,
                           double x_min, ConeReport& rep) {
    const GradedGrid& g = d.grid();
    const auto& v = d.values();
    const int n = g.n_cells;
    std::vector<double> deriv = v;
    for (int ell = 1; ell < k; ++ell) {
        deriv = estimate_derivative(g, ell == 1 ? v : deriv, 1);
        Worst w;
        const double a = p.a[static_cast<std::size_t>(ell - 1)];
        for (int i = 3; i <= n - 1; ++i) {
            const double x = g.node(i);
            if (x < x_min) continue;
            const double ratio = std::abs(deriv[static_cast<std::size_t>(i - 1)]) /
                                 v[static_cast<std::size_t>(i - 1)] *
                                 chi_weight(x, ell, p.chi_star);
            track(w, 1.0 - ratio / a, x, ratio);
        }
        rep.conditions.push_back(
            {"derivative_" + std::to_string(ell), w.slack, w.x, w.ratio});
    }
    // Lipschitz bound on g^(k-1) via slopes of its estimate.
    std::vector<double> base = k == 1 ? v : estimate_derivative(g, v, k - 1);
    Worst w;
    const double a = p.a[static_cast<std::size_t>(k - 1)];
    for (int i = 3; i <= n - 2; ++i) {
        const double x = g.node(i);
        if (x < x_min) continue;
        const double lip =
            std::abs(base[static_cast<std::size_t>(i)] - base[static_cast<std::size_t>(i - 1)]) /
            (g.node(i + 1) - g.node(i));
        const double ratio =
            lip / v[static_cast<std::size_t>(i - 1)] * chi_weight(x, k, p.chi_star);
        track(w, 1.0 - ratio / a, x, ratio);
    }
    rep.conditions.push_back({"lipschitz_" + std::to_string(k), w.slack, w.x, w.ratio});
}

void require_positive(const Density& d, const char* caller) {
    for (double val : d.values())
        if (!(val > 0.0))
            throw std::runtime_error(std::string(caller) +
                                     ": density not strictly positive");
}

}  // namespace

ConeReport cone_membership(const Density& d, const ConeParams& p, int k) {
    if (k < 1 || k > p.r) throw std::invalid_argument("k: must lie in 1..r");
    if (static_cast<int>(p.a.size()) < k)
        throw std::invalid_argument("cone params: need a_1..a_k");
    require_positive(d, "cone_membership");

    ConeReport rep;
    rep.mass = quadrature(d);
    derivative_conditions(d, p, k, 0.0, rep);

    // Tail: int_0^x g <= A x^{1-gamma}.
    {
        const GradedGrid& g = d.grid();
        std::vector<double> cum = cumulative(d);
        Worst w;
        for (int i = 1; i <= g.n_cells; ++i) {
            const double x = g.node(i);
            const double ratio =
                cum[static_cast<std::size_t>(i - 1)] / std::pow(x, 1.0 - p.gamma);
            track(w, 1.0 - ratio / p.A, x, ratio);
        }
        rep.conditions.push_back({"tail", w.slack, w.x, w.ratio});
    }

    rep.pass = std::abs(rep.mass - 1.0) <= 1e-6;
    for (const auto& c : rep.conditions) rep.pass = rep.pass && c.min_slack >= 0.0;
    return rep;
}

ConeReport cone_derivative_report(const Density& d, const ConeParams& p, int k,
                                  double x_min) {
    if (k < 1 || k > p.r) throw std::invalid_argument("k: must lie in 1..r");
    if (static_cast<int>(p.a.size()) < k)
        throw std::invalid_argument("cone params: need a_1..a_k");
    require_positive(d, "cone_derivative_report");
    ConeReport rep;
    rep.mass = quadrature(d);
    derivative_conditions(d, p, k, x_min, rep);
    rep.pass = true;
    for (const auto& c : rep.conditions) rep.pass = rep.pass && c.min_slack >= 0.0;
    return rep;
}

ConeRatios measured_cone_ratios(const Density& d, double gamma, double chi_star,
                                int k) {
    const GradedGrid& g = d.grid();
    const auto& v = d.values();
    const int n = g.n_cells;
    ConeRatios out;
    // Each degree can be probed either by the centered stencil or by slopes
    // of the previous degree (the Lipschitz estimate); calibrate on both so
    // membership checks at any order stay covered.
    std::vector<double> prev = v;
    for (int ell = 1; ell <= k; ++ell) {
        std::vector<double> cur = estimate_derivative(g, prev, 1);
        double worst = 0.0;
        for (int i = 3; i <= n - 1; ++i)
            worst = std::max(worst, std::abs(cur[static_cast<std::size_t>(i - 1)]) /
                                        v[static_cast<std::size_t>(i - 1)] *
                                        chi_weight(g.node(i), ell, chi_star));
        for (int i = 3; i <= n - 2; ++i) {
            const double lip =
                std::abs(prev[static_cast<std::size_t>(i)] - prev[static_cast<std::size_t>(i - 1)]) /
                (g.node(i + 1) - g.node(i));
            worst = std::max(worst, lip / v[static_cast<std::size_t>(i - 1)] *
                                        chi_weight(g.node(i), ell, chi_star));
        }
        out.a_implied.push_back(worst);
        prev = std::move(cur);
    }
    std::vector<double> cum = cumulative(d);
    for (int i = 1; i <= n; ++i)
        out.A_implied = std::max(out.A_implied, cum[static_cast<std::size_t>(i - 1)] /
                                                    std::pow(g.node(i), 1.0 - gamma));
    return out;
}

}  // namespace scto
