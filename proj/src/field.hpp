#pragma once

#include <cstddef>
#include <vector>

namespace kflow {

// Uniform closed grid on [0,1]: node k at k*dx, dx = 1/(n_points-1).
struct spatial_grid {
    int n_points = 0;
    double dx = 0.0;

    spatial_grid() = default;
    explicit spatial_grid(int n);
    static spatial_grid from_dx(double dx);

    double x(int k) const { return k * dx; }
    bool operator==(const spatial_grid&) const = default;
};

// Goursat triangle {0 <= xi <= x <= 1} on the same lattice, row-major
// ragged storage: row i holds nodes (x_i, xi_j), j = 0..i.
struct triangle_grid {
    spatial_grid base;

    triangle_grid() = default;
    explicit triangle_grid(spatial_grid g) : base(g) {}

    int rows() const { return base.n_points; }
    std::size_t node_count() const {
        auto n = static_cast<std::size_t>(base.n_points);
        return n * (n + 1) / 2;
    }
    std::size_t row_offset(int i) const {
        auto k = static_cast<std::size_t>(i);
        return k * (k + 1) / 2;
    }
    bool operator==(const triangle_grid&) const = default;
};

struct field {
    spatial_grid grid;
    std::vector<double> values;

    field() = default;
    explicit field(spatial_grid g, double fill = 0.0)
        : grid(g), values(static_cast<std::size_t>(g.n_points), fill) {}

    double& operator[](int k) { return values[static_cast<std::size_t>(k)]; }
    double operator[](int k) const { return values[static_cast<std::size_t>(k)]; }
    int size() const { return grid.n_points; }
};

// Composite trapezoid of the node values over [0,1].
double trapezoid(const std::vector<double>& v, double dx);

double l2_norm(const field& f);

// integral of e^{delta*x} f^2 over [0,1]; delta = 0 reduces to l2_norm squared.
double weighted_norm_sq(const field& f, double delta);

// integral over the triangle, nested trapezoid (row 0 contributes zero).
double triangle_integral(const triangle_grid& tri, const std::vector<double>& values);

void check_finite(const field& f, const char* what);

}  // namespace kflow
