#ifndef SCTO_GRID_HPP
#define SCTO_GRID_HPP

#include <cmath>
#include <cstddef>
#include <vector>

namespace scto {

// Grid on [0,1] graded toward 0: node i is (i/n)^q.  Densities live on the
// nodes x_1..x_n; the cell (0, x_1] is handled analytically by callers.
struct GradedGrid {
    int n_cells = 0;
    double grading_q = 1.0;
    std::vector<double> nodes;  // size n_cells + 1, nodes[0] = 0, nodes[n] = 1

    double node(int i) const { return nodes[static_cast<std::size_t>(i)]; }

    // Index j with nodes[j] <= y <= nodes[j+1], clamped to [0, n_cells-1].
    int locate(double y) const;

    bool same_layout(const GradedGrid& other) const {
        return n_cells == other.n_cells && grading_q == other.grading_q;
    }
};

GradedGrid make_graded_grid(int n_cells, double grading_q);

// Default exponent resolving an x^{-gamma} singularity with room to spare.
double default_grading_q(double gamma);

}  // namespace scto

#endif
