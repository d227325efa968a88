#include "scto/grid.hpp"

#include <algorithm>
#include <stdexcept>

namespace scto {

int GradedGrid::locate(double y) const {
    // Invert the grading analytically, then fix up rounding.
    const int n = n_cells;
    double t = std::pow(y, 1.0 / grading_q);
    int j = static_cast<int>(t * n);
    j = std::clamp(j, 0, n - 1);
    while (j > 0 && y < nodes[static_cast<std::size_t>(j)]) --j;
    while (j < n - 1 && y > nodes[static_cast<std::size_t>(j) + 1]) ++j;
    return j;
}

GradedGrid make_graded_grid(int n_cells, double grading_q) {
    if (n_cells < 2) throw std::invalid_argument("n_cells: must be at least 2");
    if (grading_q < 1.0) throw std::invalid_argument("grading_q: must be >= 1");
    GradedGrid g;
    g.n_cells = n_cells;
    g.grading_q = grading_q;
    g.nodes.resize(static_cast<std::size_t>(n_cells) + 1);
    for (int i = 0; i <= n_cells; ++i)
        g.nodes[static_cast<std::size_t>(i)] =
            std::pow(static_cast<double>(i) / n_cells, grading_q);
    g.nodes.front() = 0.0;
    g.nodes.back() = 1.0;
    return g;
}

double default_grading_q(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma: must lie in (0,1)");
    return std::max(3.0, std::ceil(2.0 / (1.0 - gamma)));
}

}  // namespace scto
