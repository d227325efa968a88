#include "scto/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace scto {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct KahanSum {
    double sum = 0.0, comp = 0.0;
    void add(double x) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

// CDF of the density at y, consistent with cumulative(): power-law model on
// the first cell, integral of the linear interpolant elsewhere.
double cdf_at(const Density& d, const std::vector<double>& cum, double y) {
    const GradedGrid& g = d.grid();
    if (y <= 0.0) return 0.0;
    if (y >= 1.0) return cum.back();
    const double x1 = g.node(1);
    if (y <= x1) {
        double p = d.tail_exponent();
        return cum[0] * std::pow(y / x1, 1.0 + p);
    }
    int j = std::max(g.locate(y), 1);
    const double xa = g.node(j), xb = g.node(j + 1);
    const double ha = d.value(j - 1), hb = d.value(j);
    const double dy = y - xa;
    return cum[static_cast<std::size_t>(j - 1)] + ha * dy +
           0.5 * (hb - ha) * dy * dy / (xb - xa);
}

double invert_cdf(const Density& d, const std::vector<double>& cum, double t) {
    const GradedGrid& g = d.grid();
    const double total = cum.back();
    t = std::clamp(t * total, 0.0, total);
    auto it = std::lower_bound(cum.begin(), cum.end(), t);
    int idx = static_cast<int>(it - cum.begin());  // node index i-1
    if (idx == 0) {
        const double p = d.tail_exponent();
        if (cum[0] <= 0.0) return g.node(1) * t;
        return g.node(1) * std::pow(std::max(t, 0.0) / cum[0], 1.0 / (1.0 + p));
    }
    const double xa = g.node(idx), xb = g.node(idx + 1);
    const double ha = d.value(idx - 1), hb = d.value(idx);
    const double dx = xb - xa;
    const double tp = t - cum[static_cast<std::size_t>(idx - 1)];
    const double slope = (hb - ha) / dx;
    double dy;
    if (std::abs(slope) < 1e-300) {
        dy = ha > 0.0 ? tp / ha : 0.0;
    } else {
        const double disc = std::max(ha * ha + 2.0 * slope * tp, 0.0);
        dy = (std::sqrt(disc) - ha) / slope;
    }
    return std::clamp(xa + dy, xa, std::nextafter(xb, 0.0));
}

}  // namespace

Ensemble make_ensemble(int n_particles, std::uint64_t seed, const Density& init) {
    if (n_particles < 1) throw std::invalid_argument("n_particles: must be >= 1");
    std::vector<double> cum = cumulative(init);
    std::mt19937_64 rng(seed);
    Ensemble e;
    e.rng_seed = seed;
    e.positions.resize(static_cast<std::size_t>(n_particles));
    for (double& x : e.positions) {
        x = invert_cdf(init, cum, uniform01(rng));
        if (x >= 1.0) x = std::nextafter(1.0, 0.0);
    }
    return e;
}

Ensemble make_uniform_ensemble(int n_particles, std::uint64_t seed) {
    if (n_particles < 1) throw std::invalid_argument("n_particles: must be >= 1");
    std::mt19937_64 rng(seed);
    Ensemble e;
    e.rng_seed = seed;
    e.positions.resize(static_cast<std::size_t>(n_particles));
    for (double& x : e.positions) x = uniform01(rng);
    return e;
}

std::pair<double, double> empirical_coupling(const Ensemble& e, Family family) {
    KahanSum s, c;
    if (family == Family::CoupledPM) {
        for (double x : e.positions) {
            s.add(std::sin(2.0 * M_PI * x));
            c.add(std::cos(2.0 * M_PI * x));
        }
    } else {
        for (double x : e.positions) s.add(std::sin(M_PI * x));
    }
    const double n = static_cast<double>(e.positions.size());
    return {s.sum / n, family == Family::CoupledPM ? c.sum / n : 0.0};
}

Ensemble ensemble_step(const Ensemble& e, double gamma_star, double epsilon,
                       Family family) {
    auto [s, c] = empirical_coupling(e, family);
    MapSpec spec = make_map_spec(family, gamma_star, epsilon, s, c);
    Ensemble out;
    out.rng_seed = e.rng_seed;
    out.step_count = e.step_count + 1;
    out.positions.resize(e.positions.size());
    for (std::size_t j = 0; j < e.positions.size(); ++j)
        out.positions[j] = eval_map(spec, e.positions[j]);
    return out;
}

void ensemble_step_inplace(Ensemble& e, double gamma_star, double epsilon,
                           Family family) {
    e = ensemble_step(e, gamma_star, epsilon, family);
}

namespace {

struct ChunkSums {
    double s = 0.0, c = 0.0;
};

// Moves positions[lo..hi) under spec and accumulates the post-move coupling
// sums with compensated summation.
ChunkSums move_chunk(std::vector<double>& pos, std::size_t lo, std::size_t hi,
                     const MapSpec& spec, Family family) {
    KahanSum s, c;
    const double ge1 = 1.0 + spec.gamma_eff;
    const double phi = spec.phi_coeff;
    const bool coupled = family == Family::CoupledPM;
    const bool cubic = spec.family == Family::CoupledPM;
    for (std::size_t j = lo; j < hi; ++j) {
        const double x = pos[j];
        double t = x + std::pow(x, ge1) +
                   phi * (cubic ? x * x * (1.0 - x) : x * (1.0 - x));
        t -= std::floor(t);
        if (t >= 1.0) t -= 1.0;
        pos[j] = t;
        if (coupled) {
            s.add(std::sin(2.0 * M_PI * t));
            c.add(std::cos(2.0 * M_PI * t));
        } else {
            s.add(std::sin(M_PI * t));
        }
    }
    return {s.sum, c.sum};
}

}  // namespace

void ensemble_run(Ensemble& e, int n_steps, double gamma_star, double epsilon,
                  Family family,
                  std::vector<std::array<double, 3>>* coupling_series,
                  int n_threads) {
    if (n_steps <= 0) return;
    const std::size_t n = e.positions.size();
    n_threads = std::clamp(n_threads, 1, 16);
    auto [s, c] = empirical_coupling(e, family);
    for (int k = 0; k < n_steps; ++k) {
        if (coupling_series)
            coupling_series->push_back({static_cast<double>(e.step_count), s, c});
        MapSpec spec = make_map_spec(family, gamma_star, epsilon, s, c);
        if (n_threads == 1 || n < 1024) {
            ChunkSums cs = move_chunk(e.positions, 0, n, spec, family);
            s = cs.s / static_cast<double>(n);
            c = family == Family::CoupledPM ? cs.c / static_cast<double>(n) : 0.0;
        } else {
            std::vector<ChunkSums> sums(static_cast<std::size_t>(n_threads));
            std::vector<std::thread> workers;
            const std::size_t chunk = (n + static_cast<std::size_t>(n_threads) - 1) /
                                      static_cast<std::size_t>(n_threads);
            for (int t = 0; t < n_threads; ++t) {
                const std::size_t lo = static_cast<std::size_t>(t) * chunk;
                const std::size_t hi = std::min(n, lo + chunk);
                if (lo >= hi) break;
                workers.emplace_back([&, t, lo, hi] {
                    sums[static_cast<std::size_t>(t)] =
                        move_chunk(e.positions, lo, hi, spec, family);
                });
            }
            for (auto& w : workers) w.join();
            KahanSum ts, tc;
            for (const ChunkSums& cs : sums) {
                ts.add(cs.s);
                tc.add(cs.c);
            }
            s = ts.sum / static_cast<double>(n);
            c = family == Family::CoupledPM ? tc.sum / static_cast<double>(n) : 0.0;
        }
        ++e.step_count;
    }
}

double ks_distance(const Ensemble& e, const Density& h) {
    std::vector<double> sorted = e.positions;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cum = cumulative(h);
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf_at(h, cum, sorted[i]);
        d = std::max(d, std::max(f - static_cast<double>(i) / n,
                                 static_cast<double>(i + 1) / n - f));
    }
    return d;
}

std::vector<long> histogram(const Ensemble& e, int n_bins) {
    if (n_bins < 1) throw std::invalid_argument("n_bins: must be >= 1");
    std::vector<long> counts(static_cast<std::size_t>(n_bins), 0);
    for (double x : e.positions) {
        int b = std::min(static_cast<int>(x * n_bins), n_bins - 1);
        ++counts[static_cast<std::size_t>(std::max(b, 0))];
    }
    return counts;
}

}  // namespace scto
