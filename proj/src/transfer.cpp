#include "scto/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace scto {

namespace {

TransferContext::Node make_node(const GradedGrid& g, double y, double w) {
    TransferContext::Node nd;
    nd.y = y;
    nd.w = w;
    const double x1 = g.node(1);
    if (y <= x1) {
        nd.kind = 0;
        nd.cell = 0;
        nd.th = std::log(std::max(y, 1e-300) / x1);
        return nd;
    }
    int j = std::max(g.locate(y), 1);
    nd.cell = j;
    const double xa = g.node(j), xb = g.node(j + 1);
    nd.la = (y - xa) / (xb - xa);
    if (xb <= 0.1) {
        nd.kind = 1;
        nd.th = std::log(y / xa) / std::log(xb / xa);
    } else {
        nd.kind = 2;
    }
    return nd;
}

inline double eval_node(const TransferContext::Node& nd,
                        const std::vector<double>& v,
                        const std::vector<double>& lnv, double tail_p) {
    switch (nd.kind) {
        case 0:
            return v[0] > 0.0 ? v[0] * std::exp(tail_p * nd.th) : 0.0;
        case 1: {
            const double a = v[static_cast<std::size_t>(nd.cell - 1)];
            const double b = v[static_cast<std::size_t>(nd.cell)];
            if (a > 0.0 && b > 0.0) {
                const double la = lnv[static_cast<std::size_t>(nd.cell - 1)];
                const double lb = lnv[static_cast<std::size_t>(nd.cell)];
                return std::exp(la + nd.th * (lb - la));
            }
            return a + nd.la * (b - a);
        }
        default: {
            const double a = v[static_cast<std::size_t>(nd.cell - 1)];
            const double b = v[static_cast<std::size_t>(nd.cell)];
            return a + nd.la * (b - a);
        }
    }
}

}  // namespace

TransferContext make_transfer_context(const MapSpec& spec,
                                      std::shared_ptr<const GradedGrid> grid,
                                      const TransferContext* warm) {
    TransferContext ctx;
    ctx.spec = spec;
    ctx.grid = std::move(grid);
    const GradedGrid& g = *ctx.grid;
    const int n = g.n_cells;
    ctx.left.resize(static_cast<std::size_t>(n));
    ctx.right.resize(static_cast<std::size_t>(n));
    const bool have_warm = warm && warm->grid->same_layout(g);
    double prev_l = 0.0, prev_r = 1.0;
    for (int i = 1; i <= n; ++i) {
        const double x = g.node(i);
        const double hint_l = have_warm ? warm->left[static_cast<std::size_t>(i - 1)].y
                              : i > 1  ? prev_l
                                       : std::min(x, spec.branch_boundary);
        const double hint_r = have_warm ? warm->right[static_cast<std::size_t>(i - 1)].y
                              : i > 1  ? prev_r
                                       : 1.0;
        const double yl = branch_inverse(spec, Branch::Left, x, hint_l);
        const double yr = branch_inverse(spec, Branch::Right, x, hint_r);
        prev_l = yl;
        prev_r = yr;
        const double wl = yl > 0.0 ? 1.0 / eval_derivative(spec, yl, 1) : 1.0;
        const double wr = 1.0 / eval_derivative(spec, yr, 1);
        ctx.left[static_cast<std::size_t>(i - 1)] = make_node(g, yl, wl);
        ctx.right[static_cast<std::size_t>(i - 1)] = make_node(g, yr, wr);
    }
    return ctx;
}

std::shared_ptr<const TransferContext> ContextCache::get(
    const MapSpec& spec, const std::shared_ptr<const GradedGrid>& grid) {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->family == static_cast<int>(spec.family) &&
            it->gamma_eff == spec.gamma_eff && it->phi_coeff == spec.phi_coeff &&
            it->ctx->grid->same_layout(*grid))
            return it->ctx;
    }
    const TransferContext* warm = nullptr;
    if (!entries_.empty() && entries_.back().ctx->grid->same_layout(*grid))
        warm = entries_.back().ctx.get();
    auto ctx = std::make_shared<TransferContext>(
        make_transfer_context(spec, grid, warm));
    entries_.push_back({static_cast<int>(spec.family), spec.gamma_eff,
                        spec.phi_coeff, ctx});
    if (entries_.size() > kCapacity) entries_.erase(entries_.begin());
    return ctx;
}

std::pair<double, double> ContextCache::coupling(const Density& d, Family family) {
    const GradedGrid& g = d.grid();
    if (kernel_grid_ != &g || kernel_family_ != family ||
        kernel_s_.size() != d.values().size()) {
        const int n = g.n_cells;
        kernel_s_.assign(static_cast<std::size_t>(n), 0.0);
        kernel_c_.assign(static_cast<std::size_t>(n), 0.0);
        for (int i = 1; i <= n; ++i) {
            double w = 0.0;
            if (i > 1) w += 0.5 * (g.node(i) - g.node(i - 1));
            if (i < n) w += 0.5 * (g.node(i + 1) - g.node(i));
            if (i == 1) w += g.node(1);
            const double x = g.node(i);
            if (family == Family::CoupledPM) {
                kernel_s_[static_cast<std::size_t>(i - 1)] = w * std::sin(2.0 * M_PI * x);
                kernel_c_[static_cast<std::size_t>(i - 1)] = w * std::cos(2.0 * M_PI * x);
            } else {
                kernel_s_[static_cast<std::size_t>(i - 1)] = w * std::sin(M_PI * x);
            }
        }
        kernel_grid_ = &g;
        kernel_family_ = family;
    }
    double s = 0.0, c = 0.0;
    const auto& v = d.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += v[i] * kernel_s_[i];
        c += v[i] * kernel_c_[i];
    }
    return {s, family == Family::CoupledPM ? c : 0.0};
}

Density apply_transfer(const TransferContext& ctx, const Density& g) {
    if (!ctx.grid->same_layout(g.grid()))
        throw std::invalid_argument("apply_transfer: grid mismatch");
    const auto& v = g.values();
    const std::size_t n = v.size();
    std::vector<double> lnv(n);
    for (std::size_t i = 0; i < n; ++i) lnv[i] = v[i] > 0.0 ? std::log(v[i]) : 0.0;
    const double p = g.tail_exponent();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& l = ctx.left[i];
        const auto& r = ctx.right[i];
        out[i] = eval_node(l, v, lnv, p) * l.w + eval_node(r, v, lnv, p) * r.w;
    }
    return Density(g.grid_ptr(), std::move(out));
}

Density apply_branch_restricted(const TransferContext& ctx, Branch branch,
                                const Density& g) {
    if (!ctx.grid->same_layout(g.grid()))
        throw std::invalid_argument("apply_branch_restricted: grid mismatch");
    const auto& v = g.values();
    const std::size_t n = v.size();
    std::vector<double> lnv(n);
    for (std::size_t i = 0; i < n; ++i) lnv[i] = v[i] > 0.0 ? std::log(v[i]) : 0.0;
    const double p = g.tail_exponent();
    const auto& side = branch == Branch::Left ? ctx.left : ctx.right;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = eval_node(side[i], v, lnv, p) * side[i].w;
    return Density(g.grid_ptr(), std::move(out));
}

StepResult self_consistent_step(const Density& g, Family family,
                                double gamma_star, double epsilon,
                                ContextCache& cache) {
    auto [s, c] = cache.coupling(g, family);
    MapSpec spec = make_map_spec(family, gamma_star, epsilon, s, c);
    auto ctx = cache.get(spec, g.grid_ptr());
    return {apply_transfer(*ctx, g), s, c};
}

IterateResult iterate_direct(const Density& h0, int n_steps, Family family,
                             double gamma_star, double epsilon,
                             ContextCache& cache, const Density* reference) {
    IterateResult res{{}, {}, {}, h0};
    res.step_residuals.reserve(static_cast<std::size_t>(n_steps));
    for (int k = 0; k < n_steps; ++k) {
        StepResult step = self_consistent_step(res.final, family, gamma_star,
                                               epsilon, cache);
        res.step_residuals.push_back(l1_distance(res.final, step.density));
        res.couplings.emplace_back(step.s, step.c);
        if (reference)
            res.ref_distances.push_back(l1_distance(step.density, *reference));
        res.final = std::move(step.density);
    }
    return res;
}

FixedPointResult solve_fixed_point(Family family, double gamma_star,
                                   double epsilon,
                                   std::shared_ptr<const GradedGrid> grid,
                                   const FixedPointOptions& opts,
                                   const Density* h_init, ContextCache* cache) {
    ContextCache local;
    ContextCache& cc = cache ? *cache : local;
    if (h_init && !h_init->grid().same_layout(*grid))
        throw std::invalid_argument("solve_fixed_point: h_init grid mismatch");
    Density h = h_init ? normalize(*h_init)
                       : density_from_function(grid, [](double) { return 1.0; });
    auto [s, c] = cc.coupling(h, family);
    long long inner_total = 0;
    int outer = 0;
    for (;;) {
        if (++outer > opts.max_outer) {
            StepResult step = self_consistent_step(h, family, gamma_star, epsilon, cc);
            throw std::runtime_error(
                "solve_fixed_point: outer loop exceeded max_outer; last residual " +
                std::to_string(l1_distance(h, step.density)));
        }
        MapSpec spec = make_map_spec(family, gamma_star, epsilon, s, c);
        auto ctx = cc.get(spec, grid);
        std::vector<double> ring(static_cast<std::size_t>(opts.stagnation_window), 0.0);
        double last_d = 0.0;
        for (int k = 0; k < opts.max_inner; ++k) {
            Density next = normalize(apply_transfer(*ctx, h));
            last_d = l1_distance(h, next);
            h = std::move(next);
            ++inner_total;
            const std::size_t slot =
                static_cast<std::size_t>(k % opts.stagnation_window);
            if (last_d < opts.inner_tol) break;
            if (k >= opts.stagnation_window &&
                last_d > (1.0 - opts.stagnation_frac) * ring[slot])
                break;
            ring[slot] = last_d;
        }
        auto [s2, c2] = cc.coupling(h, family);
        const double change = std::abs(s2 - s) + std::abs(c2 - c);
        s = s2;
        c = c2;
        // The coupling cannot be resolved below the inner residual scale, so
        // a change at that scale means the outer loop has converged too.
        if (change < std::max(opts.outer_tol, last_d)) break;
    }
    StepResult step = self_consistent_step(h, family, gamma_star, epsilon, cc);
    const double residual = l1_distance(step.density, h);
    return {std::move(h), residual, s, c, outer, inner_total};
}

PerturbationReport perturbation_decomposition(const Density& v,
                                              const Density& h0,
                                              const Density& h1, Family family,
                                              double gamma_star, double epsilon,
                                              double beta, ContextCache& cache) {
    if (!v.grid().same_layout(h0.grid()) || !v.grid().same_layout(h1.grid()))
        throw std::invalid_argument("perturbation_decomposition: grid mismatch");
    auto [s0, c0] = cache.coupling(h0, family);
    auto [s1, c1] = cache.coupling(h1, family);
    auto ctx0 = cache.get(make_map_spec(family, gamma_star, epsilon, s0, c0), v.grid_ptr());
    auto ctx1 = cache.get(make_map_spec(family, gamma_star, epsilon, s1, c1), v.grid_ptr());
    Density a = apply_transfer(*ctx0, v);
    Density b = apply_transfer(*ctx1, v);

    const std::size_t n = a.values().size();
    std::vector<double> pos(n, 0.0), neg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = a.values()[i] - b.values()[i];
        if (diff > 1e-14) pos[i] = diff;
        else if (diff < -1e-14) neg[i] = -diff;
    }
    PerturbationReport rep;
    rep.delta = integrate_difference(v.grid(), pos);
    rep.delta_neg = integrate_difference(v.grid(), neg);
    if (rep.delta <= 1e-14) {
        rep.delta = 0.0;
        return rep;
    }
    rep.defined = true;
    std::vector<double> f0v = std::move(pos), f1v = std::move(neg);
    for (double& x : f0v) x /= rep.delta;
    for (double& x : f1v) x /= rep.delta;
    rep.f0 = std::make_shared<Density>(v.grid_ptr(), std::move(f0v));
    rep.f1 = std::make_shared<Density>(v.grid_ptr(), std::move(f1v));
    const double dist = l1_distance(h0, h1);
    rep.ratio = epsilon != 0.0 && dist > 0.0
                    ? rep.delta / (std::abs(epsilon) * dist)
                    : 0.0;
    rep.sup_f0_weighted = sup_weighted(*rep.f0, beta);
    rep.sup_f1_weighted = sup_weighted(*rep.f1, beta);
    return rep;
}

namespace {

Density mix_densities(const Density& f0, const Density& f1, double s) {
    std::vector<double> v(f0.values().size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = (1.0 - s) * f0.values()[i] + s * f1.values()[i];
    return Density(f0.grid_ptr(), std::move(v));
}

std::pair<double, double> partial_sups(const Density& v, const Density& f0,
                                       const Density& f1, Family family,
                                       double gamma_star, double epsilon,
                                       double gm, double gp, double s_point,
                                       double ds, ContextCache& cache) {
    Density lo_mix = mix_densities(f0, f1, s_point - ds);
    Density hi_mix = mix_densities(f0, f1, s_point + ds);
    auto [sl, cl] = cache.coupling(lo_mix, family);
    auto [sh, ch] = cache.coupling(hi_mix, family);
    auto ctx_lo = cache.get(make_map_spec(family, gamma_star, epsilon, sl, cl), v.grid_ptr());
    auto ctx_hi = cache.get(make_map_spec(family, gamma_star, epsilon, sh, ch), v.grid_ptr());
    Density a = apply_transfer(*ctx_lo, v);
    Density b = apply_transfer(*ctx_hi, v);
    const GradedGrid& g = v.grid();
    std::vector<double> dsv(a.values().size());
    for (std::size_t i = 0; i < dsv.size(); ++i)
        dsv[i] = (b.values()[i] - a.values()[i]) / (2.0 * ds);
    const double aeps = std::max(std::abs(epsilon), 1e-300);
    double sup_s = 0.0, sup_sx = 0.0;
    std::vector<double> dx = estimate_derivative(g, dsv, 1);
    for (int i = 1; i <= g.n_cells; ++i) {
        const double ws = std::abs(dsv[static_cast<std::size_t>(i - 1)]) *
                          std::pow(g.node(i), gp - gm) / aeps;
        const double wx = i >= 3 && i <= g.n_cells - 1
                              ? std::abs(dx[static_cast<std::size_t>(i - 1)]) *
                                    std::pow(g.node(i), gp - gm + 1.0) / aeps
                              : 0.0;
        if (!std::isfinite(ws) || !std::isfinite(wx))
            throw std::runtime_error(
                "partial_derivative_bound_check: non-finite difference at x=" +
                std::to_string(g.node(i)));
        sup_s = std::max(sup_s, ws);
        sup_sx = std::max(sup_sx, wx);
    }
    return {sup_s, sup_sx};
}

}  // namespace

PartialDerivativeReport partial_derivative_bound_check(
    const Density& v, const Density& f0, const Density& f1, Family family,
    double gamma_star, double epsilon, double gamma_minus, double gamma_plus,
    double s_point, double ds, ContextCache& cache) {
    PartialDerivativeReport rep;
    auto [a1, b1] = partial_sups(v, f0, f1, family, gamma_star, epsilon,
                                 gamma_minus, gamma_plus, s_point, ds, cache);
    auto [a2, b2] = partial_sups(v, f0, f1, family, gamma_star, epsilon,
                                 gamma_minus, gamma_plus, s_point, 0.5 * ds, cache);
    rep.sup_s = a1;
    rep.sup_sx = b1;
    rep.sup_s_refined = a2;
    rep.sup_sx_refined = b2;
    const double scale_s = std::max({a1, a2, 1e-12});
    const double scale_x = std::max({b1, b2, 1e-12});
    rep.stable = std::abs(a1 - a2) <= 0.15 * scale_s &&
                 std::abs(b1 - b2) <= 0.15 * scale_x;
    rep.pass = rep.stable && std::isfinite(a1) && std::isfinite(b1);
    return rep;
}

namespace {

std::vector<Density> cone_generators(const std::shared_ptr<const GradedGrid>& grid,
                                     double gamma) {
    std::vector<Density> gens;
    gens.push_back(density_from_function(grid, [](double) { return 1.0; }));
    gens.push_back(density_from_function(grid, [](double x) { return 2.0 * x; }));
    gens.push_back(density_from_function(grid, [](double x) { return 3.0 * x * x; }));
    gens.push_back(density_from_function(
        grid, [gamma](double x) { return (1.0 - gamma) * std::pow(x, -gamma); }));
    return gens;
}

}  // namespace

ConeParams fit_cone_params(const std::shared_ptr<const GradedGrid>& grid,
                           Family family, double gamma_star, double epsilon,
                           double gamma, double chi_star, int r, double margin) {
    ContextCache cache;
    std::vector<Density> sample = cone_generators(grid, gamma);
    const std::size_t n_gen = sample.size();
    for (std::size_t hi = 0; hi < n_gen; ++hi) {
        auto [s, c] = cache.coupling(sample[hi], family);
        auto ctx = cache.get(make_map_spec(family, gamma_star, epsilon, s, c), grid);
        for (std::size_t ui = 0; ui < n_gen; ++ui)
            sample.push_back(apply_transfer(*ctx, sample[ui]));
    }
    ConeParams p;
    p.r = r;
    p.chi_star = chi_star;
    p.gamma = gamma;
    p.a.assign(static_cast<std::size_t>(r), 0.0);
    p.A = 0.0;
    for (const Density& d : sample) {
        Density dn = normalize(d);
        ConeRatios ratios = measured_cone_ratios(dn, gamma, chi_star, r);
        for (int ell = 0; ell < r; ++ell)
            p.a[static_cast<std::size_t>(ell)] =
                std::max(p.a[static_cast<std::size_t>(ell)],
                         ratios.a_implied[static_cast<std::size_t>(ell)]);
        p.A = std::max(p.A, ratios.A_implied);
    }
    for (double& a : p.a) a *= margin;
    p.A *= margin;
    return p;
}

std::vector<Density> sample_cone_densities(
    const std::shared_ptr<const GradedGrid>& grid, double gamma, int count,
    unsigned long long seed) {
    std::vector<Density> gens = cone_generators(grid, gamma);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Density> out;
    for (int k = 0; k < count; ++k) {
        std::array<double, 4> w{};
        double tot = 0.0;
        for (double& x : w) {
            x = uni(rng);
            tot += x;
        }
        std::vector<double> v(gens[0].values().size(), 0.0);
        for (std::size_t gi = 0; gi < gens.size(); ++gi)
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] += w[gi] / tot * gens[gi].values()[i];
        out.push_back(normalize(Density(grid, std::move(v))));
    }
    return out;
}

}  // namespace scto
