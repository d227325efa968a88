#ifndef SCTO_DENSITY_HPP
#define SCTO_DENSITY_HPP

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "scto/grid.hpp"
#include "scto/map_family.hpp"

namespace scto {

// Nonnegative function sampled on the grid nodes x_1..x_n.  The cell
// (0, x_1] is modeled by the power law fitted through the first two values,
// which keeps x^{-gamma}-type singularities integrable.
class Density {
  public:
    Density(std::shared_ptr<const GradedGrid> grid, std::vector<double> values);

    const GradedGrid& grid() const { return *grid_; }
    const std::shared_ptr<const GradedGrid>& grid_ptr() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    double value(int i) const { return values_[static_cast<std::size_t>(i)]; }
    int size() const { return static_cast<int>(values_.size()); }
    double tail_exponent() const { return tail_exponent_; }

    // Pointwise evaluation at y in (0,1]: power-law extrapolation below x_1,
    // log-log interpolation below x = 0.1, linear above.
    double interpolate(double y) const;

  private:
    std::shared_ptr<const GradedGrid> grid_;
    std::vector<double> values_;
    double tail_exponent_ = 0.0;
};

Density density_from_function(std::shared_ptr<const GradedGrid> grid,
                              const std::function<double(double)>& f);

// Total mass: trapezoid rule on the nodes plus the analytic first-cell
// integral.  Throws if the fitted tail exponent is not integrable.
double quadrature(const Density& d);

Density normalize(const Density& d);

double l1_distance(const Density& f, const Density& g);

// Quadrature of nonnegative node values that arise as differences of
// densities.  |f - g| <= f + g keeps the true tail integrable, so a fitted
// first-cell exponent at or below -1 is a two-point artifact of nearly
// cancelling values; it is clamped instead of raised as an error.
double integrate_difference(const GradedGrid& grid,
                            const std::vector<double>& values);

// (sin, cos) moments against the family's coupling kernels, computed with
// fixed linear quadrature weights so the functionals are linear in the
// density.
std::pair<double, double> coupling_functionals(const Density& d, Family family);

// Cumulative integral int_0^x at every node (index 0 corresponds to x_1).
std::vector<double> cumulative(const Density& d);

// max over nodes of d(x) x^gamma.
double sup_weighted(const Density& d, double gamma);

void write_density_csv(std::ostream& os, const Density& d);
void write_density_csv_file(const std::string& path, const Density& d);
Density read_density_csv(std::istream& is);
Density read_density_csv_file(const std::string& path);

}  // namespace scto

#endif
