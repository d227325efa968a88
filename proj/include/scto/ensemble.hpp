#ifndef SCTO_ENSEMBLE_HPP
#define SCTO_ENSEMBLE_HPP

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "scto/density.hpp"
#include "scto/map_family.hpp"

namespace scto {

// Finite mean-field particle system with synchronous updates.
struct Ensemble {
    std::vector<double> positions;  // all in [0,1)
    std::uint64_t rng_seed = 0;
    long step_count = 0;
};

// i.i.d. sample from the density via inverse-CDF sampling on its grid.
Ensemble make_ensemble(int n_particles, std::uint64_t seed, const Density& init);

// Uniform initial conditions.
Ensemble make_uniform_ensemble(int n_particles, std::uint64_t seed);

// Empirical sine/cosine moments of the particle positions against the
// family's coupling kernels (compensated summation).
std::pair<double, double> empirical_coupling(const Ensemble& e, Family family);

// One synchronous step: couple to the current empirical measure, then move
// every particle with that frozen map.
Ensemble ensemble_step(const Ensemble& e, double gamma_star, double epsilon,
                       Family family);

// In-place variant used for long runs.
void ensemble_step_inplace(Ensemble& e, double gamma_star, double epsilon,
                           Family family);

// Runs n_steps synchronous steps, fusing the move and the next coupling
// reduction into one pass.  Sequential mode (n_threads = 1) is bitwise
// identical to repeated ensemble_step; n_threads > 1 uses a fixed per-chunk
// reduction tree, deterministic for a given thread count but not bitwise
// equal to sequential.  Appends (step, s, c) to coupling_series if given.
void ensemble_run(Ensemble& e, int n_steps, double gamma_star, double epsilon,
                  Family family,
                  std::vector<std::array<double, 3>>* coupling_series = nullptr,
                  int n_threads = 1);

// Kolmogorov-Smirnov distance between the empirical CDF and int_0^x h.
double ks_distance(const Ensemble& e, const Density& h);

// Histogram over uniform bins of [0,1); returns counts.
std::vector<long> histogram(const Ensemble& e, int n_bins);

}  // namespace scto

#endif
