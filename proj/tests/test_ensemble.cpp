#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "scto/ensemble.hpp"
#include "scto/transfer.hpp"

using namespace scto;

TEST_SUITE_BEGIN("ensemble");

namespace {

std::shared_ptr<const GradedGrid> grid4k() {
    static auto g = std::make_shared<GradedGrid>(make_graded_grid(4096, 7.0));
    return g;
}

}  // namespace

TEST_CASE("empirical coupling at degenerate states") {
    Ensemble e;
    e.positions.assign(100, 0.0);
    auto [s0, c0] = empirical_coupling(e, Family::CoupledPM);
    CHECK(s0 == 0.0);
    CHECK(c0 == 1.0);
    e.positions.assign(100, 0.25);
    auto [s1, c1] = empirical_coupling(e, Family::CoupledPM);
    CHECK(s1 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(c1) <= 1e-15);
    auto [s2, c2] = empirical_coupling(e, Family::RemarkPM);
    CHECK(s2 == doctest::Approx(std::sin(M_PI * 0.25)).epsilon(1e-15));
    CHECK(c2 == 0.0);
}

TEST_CASE("uniform sample coupling is CLT-small") {
    for (std::uint64_t seed : {1ull, 77ull, 123456ull}) {
        Ensemble e = make_uniform_ensemble(1000000, seed);
        auto [s, c] = empirical_coupling(e, Family::CoupledPM);
        const double bound = 3.0 / std::sqrt(1e6);
        CHECK(std::abs(s) <= bound);
        CHECK(std::abs(c) <= bound);
    }
}

TEST_CASE("single particle reduces to the plain orbit") {
    MapSpec pm = make_map_spec(Family::CoupledPM, 0.5, 0.0, 0.0, 0.0);
    Ensemble e;
    e.positions = {0.3};
    double x = 0.3;
    for (int k = 0; k < 100; ++k) {
        e = ensemble_step(e, 0.5, 0.0, Family::CoupledPM);
        x = eval_map(pm, x);
        CHECK(e.positions[0] == x);
    }
    CHECK(e.step_count == 100);
}

TEST_CASE("degenerate ensembles stay degenerate") {
    Ensemble e;
    e.positions.assign(64, 0.7);
    e = ensemble_step(e, 0.5, 0.08, Family::CoupledPM);
    for (double x : e.positions) CHECK(x == e.positions[0]);
}

TEST_CASE("epsilon 0 factorizes into independent orbits") {
    Ensemble joint = make_uniform_ensemble(8, 42);
    std::vector<Ensemble> solo(8);
    for (std::size_t j = 0; j < 8; ++j)
        solo[j].positions = {joint.positions[j]};
    for (int k = 0; k < 50; ++k) {
        joint = ensemble_step(joint, 0.5, 0.0, Family::CoupledPM);
        for (std::size_t j = 0; j < 8; ++j) {
            solo[j] = ensemble_step(solo[j], 0.5, 0.0, Family::CoupledPM);
            CHECK(joint.positions[j] == solo[j].positions[0]);
        }
    }
}

TEST_CASE("same seed gives bitwise identical trajectories") {
    Ensemble a = make_uniform_ensemble(2000, 9001);
    Ensemble b = make_uniform_ensemble(2000, 9001);
    for (int k = 0; k < 20; ++k) {
        a = ensemble_step(a, 0.5, 0.05, Family::CoupledPM);
        b = ensemble_step(b, 0.5, 0.05, Family::CoupledPM);
    }
    for (std::size_t j = 0; j < a.positions.size(); ++j)
        CHECK(a.positions[j] == b.positions[j]);
}

TEST_CASE("fused run matches repeated steps bitwise in sequential mode") {
    Ensemble a = make_uniform_ensemble(3000, 5);
    Ensemble b = a;
    std::vector<std::array<double, 3>> series;
    ensemble_run(a, 25, 0.5, 0.05, Family::CoupledPM, &series, 1);
    for (int k = 0; k < 25; ++k) b = ensemble_step(b, 0.5, 0.05, Family::CoupledPM);
    REQUIRE(series.size() == 25);
    for (std::size_t j = 0; j < a.positions.size(); ++j)
        CHECK(a.positions[j] == b.positions[j]);
    CHECK(a.step_count == 25);
}

TEST_CASE("exchangeability under permutation of initial conditions") {
    Ensemble a = make_uniform_ensemble(64, 31);
    Ensemble b = a;
    std::mt19937_64 rng(8);
    std::vector<std::size_t> perm(64);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t j = 0; j < 64; ++j) b.positions[j] = a.positions[perm[j]];
    for (int k = 0; k < 20; ++k) {
        a = ensemble_step(a, 0.5, 0.08, Family::CoupledPM);
        b = ensemble_step(b, 0.5, 0.08, Family::CoupledPM);
    }
    for (std::size_t j = 0; j < 64; ++j)
        CHECK(std::abs(b.positions[j] - a.positions[perm[j]]) <= 1e-13);
}

TEST_CASE("ks distance basics") {
    auto g = grid4k();
    Density uniform = density_from_function(g, [](double) { return 1.0; });
    Ensemble e;
    e.positions = {0.5};
    CHECK(ks_distance(e, uniform) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("inverse-CDF sampling matches the sampled density") {
    auto g = grid4k();
    // singular reference density exercises the first-cell inversion
    Density ref = normalize(density_from_function(
        g, [](double x) { return 0.3 * std::pow(x, -0.7); }));
    Ensemble e = make_ensemble(100000, 17, ref);
    CHECK(ks_distance(e, ref) <= 0.01);

    Density uniform = density_from_function(g, [](double) { return 1.0; });
    Ensemble u = make_ensemble(100000, 18, uniform);
    CHECK(ks_distance(u, uniform) <= 0.01);
}

TEST_CASE("histogram counts") {
    Ensemble e;
    e.positions = {0.05, 0.15, 0.17, 0.999};
    std::vector<long> h = histogram(e, 10);
    CHECK(h[0] == 1);
    CHECK(h[1] == 2);
    CHECK(h[9] == 1);
    CHECK(std::accumulate(h.begin(), h.end(), 0l) == 4);
}

TEST_CASE("invalid arguments") {
    CHECK_THROWS(make_uniform_ensemble(0, 1));
    Ensemble e;
    e.positions = {0.5};
    CHECK_THROWS(histogram(e, 0));
    // effective exponent outside (0,1) must surface as an error
    e.positions.assign(10, 0.25);  // coupling (1, 0)
    CHECK_THROWS(ensemble_step(e, 0.5, 0.6, Family::CoupledPM));
}

TEST_SUITE_END();
