#include "scto/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace scto {

namespace {

double fit_tail_exponent(const GradedGrid& g, const std::vector<double>& v) {
    if (v.size() < 2 || v[0] <= 0.0 || v[1] <= 0.0) return 0.0;
    double p = std::log(v[1] / v[0]) / std::log(g.node(2) / g.node(1));
    if (!std::isfinite(p)) return 0.0;
    return std::clamp(p, -60.0, 60.0);
}

}  // namespace

Density::Density(std::shared_ptr<const GradedGrid> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw std::invalid_argument("grid: null");
    if (static_cast<int>(values_.size()) != grid_->n_cells)
        throw std::invalid_argument("values: size must equal n_cells");
    for (double v : values_) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("values: must be finite and >= 0");
    }
    tail_exponent_ = fit_tail_exponent(*grid_, values_);
}

Density density_from_function(std::shared_ptr<const GradedGrid> grid,
                              const std::function<double(double)>& f) {
    std::vector<double> v(static_cast<std::size_t>(grid->n_cells));
    for (int i = 1; i <= grid->n_cells; ++i)
        v[static_cast<std::size_t>(i - 1)] = f(grid->node(i));
    return Density(std::move(grid), std::move(v));
}

double Density::interpolate(double y) const {
    const GradedGrid& g = *grid_;
    const double x1 = g.node(1);
    if (!(y > 0.0 && y <= 1.0))
        throw std::invalid_argument("interpolate: point outside (0,1]");
    if (y <= x1)
        return values_[0] * std::pow(y / x1, tail_exponent_);
    int j = g.locate(y);
    if (j < 1) j = 1;
    const double xa = g.node(j), xb = g.node(j + 1);
    const double va = values_[static_cast<std::size_t>(j - 1)];
    const double vb = values_[static_cast<std::size_t>(j)];
    if (xb <= 0.1 && va > 0.0 && vb > 0.0) {
        double e = std::log(vb / va) / std::log(xb / xa);
        return va * std::pow(y / xa, e);
    }
    return va + (vb - va) * (y - xa) / (xb - xa);
}

namespace {

double trapezoid_with_tail(const GradedGrid& g, const std::vector<double>& v,
                           double p) {
    double total = v[0] * g.node(1) / (1.0 + p);
    for (int i = 1; i < g.n_cells; ++i)
        total += 0.5 * (v[static_cast<std::size_t>(i - 1)] + v[static_cast<std::size_t>(i)]) *
                 (g.node(i + 1) - g.node(i));
    return total;
}

}  // namespace

double quadrature(const Density& d) {
    const double p = d.tail_exponent();
    if (p <= -1.0)
        throw std::runtime_error(
            "quadrature: first-cell model has non-integrable exponent " +
            std::to_string(p));
    return trapezoid_with_tail(d.grid(), d.values(), p);
}

double integrate_difference(const GradedGrid& grid,
                            const std::vector<double>& values) {
    if (static_cast<int>(values.size()) != grid.n_cells)
        throw std::invalid_argument("integrate_difference: size mismatch");
    const double p = std::max(fit_tail_exponent(grid, values), -0.999);
    return trapezoid_with_tail(grid, values, p);
}

Density normalize(const Density& d) {
    double m = quadrature(d);
    if (!(m > 0.0) || !std::isfinite(m))
        throw std::runtime_error("normalize: mass is not positive and finite");
    std::vector<double> v = d.values();
    for (double& x : v) x /= m;
    return Density(d.grid_ptr(), std::move(v));
}

double l1_distance(const Density& f, const Density& g) {
    if (!f.grid().same_layout(g.grid()))
        throw std::invalid_argument("l1_distance: grid mismatch");
    std::vector<double> diff(f.values().size());
    for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = std::abs(f.values()[i] - g.values()[i]);
    return integrate_difference(f.grid(), diff);
}

std::pair<double, double> coupling_functionals(const Density& d, Family family) {
    const GradedGrid& g = d.grid();
    const auto& v = d.values();
    const int n = g.n_cells;
    // Fixed linear weights: trapezoid between nodes, rectangle on (0, x_1].
    double s = 0.0, c = 0.0;
    for (int i = 1; i <= n; ++i) {
        double w = 0.0;
        if (i > 1) w += 0.5 * (g.node(i) - g.node(i - 1));
        if (i < n) w += 0.5 * (g.node(i + 1) - g.node(i));
        if (i == 1) w += g.node(1);
        const double x = g.node(i);
        const double f = w * v[static_cast<std::size_t>(i - 1)];
        if (family == Family::CoupledPM) {
            s += f * std::sin(2.0 * M_PI * x);
            c += f * std::cos(2.0 * M_PI * x);
        } else {
            s += f * std::sin(M_PI * x);
        }
    }
    return {s, family == Family::CoupledPM ? c : 0.0};
}

std::vector<double> cumulative(const Density& d) {
    const GradedGrid& g = d.grid();
    const auto& v = d.values();
    const double p = d.tail_exponent();
    std::vector<double> cum(v.size());
    cum[0] = p > -1.0 ? v[0] * g.node(1) / (1.0 + p) : v[0] * g.node(1);
    for (int i = 1; i < g.n_cells; ++i)
        cum[static_cast<std::size_t>(i)] =
            cum[static_cast<std::size_t>(i - 1)] +
            0.5 * (v[static_cast<std::size_t>(i - 1)] + v[static_cast<std::size_t>(i)]) *
                (g.node(i + 1) - g.node(i));
    return cum;
}

double sup_weighted(const Density& d, double gamma) {
    const GradedGrid& g = d.grid();
    double m = 0.0;
    for (int i = 1; i <= g.n_cells; ++i)
        m = std::max(m, d.value(i - 1) * std::pow(g.node(i), gamma));
    return m;
}

void write_density_csv(std::ostream& os, const Density& d) {
    os << "x,value\n";
    char buf[64];
    for (int i = 1; i <= d.grid().n_cells; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", d.grid().node(i),
                      d.value(i - 1));
        os << buf;
    }
}

void write_density_csv_file(const std::string& path, const Density& d) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_density_csv(os, d);
}

Density read_density_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("density csv: empty file");
    std::vector<double> xs, vs;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string a, b;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b))
            throw std::runtime_error("density csv: malformed row '" + line + "'");
        double x = std::stod(a), v = std::stod(b);
        if (!xs.empty() && x <= xs.back())
            throw std::runtime_error("density csv: x values must increase");
        if (!(v >= 0.0))
            throw std::runtime_error("density csv: negative value at x=" + a);
        xs.push_back(x);
        vs.push_back(v);
    }
    if (xs.size() < 2) throw std::runtime_error("density csv: too few rows");
    const int n = static_cast<int>(xs.size());
    double q = std::log(xs.front()) / std::log(1.0 / n);
    GradedGrid g = make_graded_grid(n, q);
    for (int i = 1; i <= n; ++i) {
        double ref = g.node(i);
        if (std::abs(xs[static_cast<std::size_t>(i - 1)] - ref) >
            1e-8 * std::max(ref, 1e-300))
            throw std::runtime_error("density csv: nodes do not form a graded grid");
    }
    return Density(std::make_shared<GradedGrid>(std::move(g)), std::move(vs));
}

Density read_density_csv_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return read_density_csv(is);
}

}  // namespace scto
