#include "scto/rates.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace scto {

std::pair<double, double> fit_decay_exponent(
    const std::vector<std::pair<int, double>>& distances, int n_lo, int n_hi) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int count = 0;
    for (const auto& [n, d] : distances) {
        if (n < n_lo || n > n_hi) continue;
        if (!(d > 0.0))
            throw std::invalid_argument(
                "fit_decay_exponent: non-positive distance in the fit window");
        const double x = std::log(static_cast<double>(n));
        const double y = std::log(d);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count < 5)
        throw std::invalid_argument("fit_decay_exponent: need at least 5 points");
    const double det = count * sxx - sx * sx;
    const double slope = (count * sxy - sx * sy) / det;
    const double intercept = (sy - slope * sx) / count;
    return {slope, std::exp(intercept)};
}

ConvergenceReport memory_loss_experiment(const Density& f, const Density& g,
                                         const std::vector<Density>& h_sequence,
                                         int n_steps, Family family,
                                         double gamma_star, double epsilon,
                                         double gamma,
                                         std::pair<int, int> fit_window,
                                         ContextCache& cache) {
    if (h_sequence.empty())
        throw std::invalid_argument("memory_loss_experiment: empty h_sequence");
    std::vector<MapSpec> specs;
    specs.reserve(h_sequence.size());
    for (const Density& h : h_sequence) {
        auto [s, c] = cache.coupling(h, family);
        specs.push_back(make_map_spec(family, gamma_star, epsilon, s, c));
    }

    ConvergenceReport rep;
    rep.fit_window = fit_window;
    rep.bound_exponent = 1.0 - 1.0 / gamma;
    Density fn = f, gn = g;
    for (int k = 0; k < n_steps; ++k) {
        const MapSpec& spec = specs[static_cast<std::size_t>(k) % specs.size()];
        auto ctx = cache.get(spec, fn.grid_ptr());
        fn = apply_transfer(*ctx, fn);
        gn = apply_transfer(*ctx, gn);
        rep.distances.emplace_back(k + 1, l1_distance(fn, gn));
    }

    try {
        auto [expnt, constant] =
            fit_decay_exponent(rep.distances, fit_window.first, fit_window.second);
        rep.fitted_exponent = expnt;
        rep.fitted_constant = constant;
    } catch (const std::invalid_argument&) {
        rep.fitted_exponent = std::numeric_limits<double>::quiet_NaN();
        rep.fitted_constant = 0.0;
    }

    // Fit C on the front third, verify the back two thirds with 20% slack.
    const int front = std::max(n_steps / 3, 1);
    double C = 0.0;
    for (const auto& [n, d] : rep.distances)
        if (n <= front)
            C = std::max(C, d / std::pow(static_cast<double>(n), rep.bound_exponent));
    rep.bound_constant = C;
    rep.bound_satisfied = true;
    for (const auto& [n, d] : rep.distances)
        if (n > front &&
            d > 1.2 * C * std::pow(static_cast<double>(n), rep.bound_exponent))
            rep.bound_satisfied = false;
    return rep;
}

namespace {

double convolution_sup(double beta, double gamma, int n_max, int* arg_n,
                       bool shifted) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma: must lie in (0,1)");
    if (!(beta >= 0.0 && beta < gamma))
        throw std::invalid_argument("beta: must lie in [0, gamma)");
    const double p = 1.0 - 1.0 / gamma;
    const double q = -1.0 / gamma + beta / gamma;
    std::vector<double> pw_p(static_cast<std::size_t>(n_max) + 1),
        pw_q(static_cast<std::size_t>(n_max) + 1);
    for (int k = 1; k <= n_max; ++k) {
        pw_p[static_cast<std::size_t>(k)] = std::pow(static_cast<double>(k), p);
        pw_q[static_cast<std::size_t>(k)] = std::pow(static_cast<double>(k), q);
    }
    double best = 0.0;
    int best_n = 0;
    for (int n = 1; n <= n_max; ++n) {
        double sum = shifted ? 0.0 : pw_q[static_cast<std::size_t>(n)];
        for (int j = shifted ? 0 : 1; j < n; ++j)
            sum += pw_p[static_cast<std::size_t>(j + (shifted ? 1 : 0))] *
                   pw_q[static_cast<std::size_t>(n - j)];
        const double ratio =
            sum / (shifted ? std::pow(static_cast<double>(n + 1), p)
                           : pw_p[static_cast<std::size_t>(n)]);
        if (ratio > best) {
            best = ratio;
            best_n = n;
        }
    }
    if (arg_n) *arg_n = best_n;
    return best;
}

}  // namespace

double convolution_constant(double beta, double gamma, int n_max, int* arg_n) {
    return convolution_sup(beta, gamma, n_max, arg_n, true);
}

double convolution_constant_unshifted(double beta, double gamma, int n_max,
                                      int* arg_n) {
    return convolution_sup(beta, gamma, n_max, arg_n, false);
}

SequenceBound make_sequence_bound(double xi, double sigma, double gamma,
                                  double beta, std::vector<double> delta,
                                  int c_n_max) {
    SequenceBound sb;
    sb.xi = xi;
    sb.sigma = sigma;
    sb.gamma = gamma;
    sb.beta = beta;
    sb.delta = std::move(delta);
    sb.C_beta_gamma = convolution_constant(beta, gamma, c_n_max, &sb.C_arg_n);
    return sb;
}

std::vector<double> make_saturating_sequence(double xi, double sigma,
                                             double gamma, double beta,
                                             double delta0, int length) {
    std::vector<double> d(static_cast<std::size_t>(length));
    if (length == 0) return d;
    d[0] = delta0;
    const double q = -1.0 / gamma + beta / gamma;
    for (int n = 1; n < length; ++n) {
        double conv = 0.0;
        for (int j = 0; j < n; ++j)
            conv += d[static_cast<std::size_t>(j)] *
                    std::pow(static_cast<double>(n - j), q);
        d[static_cast<std::size_t>(n)] =
            xi * std::pow(static_cast<double>(n), 1.0 - 1.0 / gamma) + sigma * conv;
    }
    return d;
}

SequenceLemmaReport verify_sequence_lemma(const SequenceBound& sb) {
    SequenceLemmaReport rep;
    const int len = static_cast<int>(sb.delta.size());
    const double p = 1.0 - 1.0 / sb.gamma;
    const double q = -1.0 / sb.gamma + sb.beta / sb.gamma;

    rep.hypothesis_holds = true;
    for (int n = 1; n < len; ++n) {
        double conv = 0.0;
        for (int j = 0; j < n; ++j)
            conv += sb.delta[static_cast<std::size_t>(j)] *
                    std::pow(static_cast<double>(n - j), q);
        const double rhs = sb.xi * std::pow(static_cast<double>(n), p) + sb.sigma * conv;
        if (sb.delta[static_cast<std::size_t>(n)] > rhs * (1.0 + 1e-12)) {
            rep.hypothesis_holds = false;
            break;
        }
    }

    const double delta0 = sb.delta.empty() ? 0.0 : sb.delta[0];
    auto check_with = [&](double C, double& K_out) {
        const double denom = 1.0 - sb.sigma * C;
        if (denom <= 0.0) {
            K_out = std::numeric_limits<double>::infinity();
            return false;
        }
        K_out = std::max(delta0, sb.xi / denom);
        for (int n = 1; n < len; ++n)
            if (sb.delta[static_cast<std::size_t>(n)] >
                K_out * std::pow(static_cast<double>(n), p) * (1.0 + 1e-12))
                return false;
        return true;
    };
    rep.conclusion_holds = check_with(sb.C_beta_gamma, rep.K);
    rep.C_unshifted = convolution_constant_unshifted(
        sb.beta, sb.gamma, std::max(1000, 2 * len), nullptr);
    rep.conclusion_holds_unshifted = check_with(rep.C_unshifted, rep.K_unshifted);
    return rep;
}

}  // namespace scto
