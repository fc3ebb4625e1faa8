#include "field.hpp"

#include <cmath>

#include "errors.hpp"

namespace kflow {

spatial_grid::spatial_grid(int n) {
    if (n < 3) throw config_error("spatial grid needs at least 3 nodes");
    n_points = n;
    dx = 1.0 / (n - 1);
}

spatial_grid spatial_grid::from_dx(double dx) {
    if (!(dx > 0.0) || dx > 0.5) throw config_error("dx must be in (0, 0.5]");
    int n = static_cast<int>(std::lround(1.0 / dx)) + 1;
    if (std::abs((n - 1) * dx - 1.0) > 1e-9)
        throw config_error("dx must divide the unit interval evenly");
    return spatial_grid(n);
}

double trapezoid(const std::vector<double>& v, double dx) {
    if (v.size() < 2) return 0.0;
    double s = 0.5 * (v.front() + v.back());
    for (std::size_t k = 1; k + 1 < v.size(); ++k) s += v[k];
    return s * dx;
}

double l2_norm(const field& f) {
    check_finite(f, "l2_norm");
    double s = 0.5 * (f.values.front() * f.values.front() +
                      f.values.back() * f.values.back());
    for (std::size_t k = 1; k + 1 < f.values.size(); ++k)
        s += f.values[k] * f.values[k];
    return std::sqrt(s * f.grid.dx);
}

double weighted_norm_sq(const field& f, double delta) {
    check_finite(f, "weighted_norm_sq");
    const int n = f.size();
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
        double term = std::exp(delta * f.grid.x(k)) * f[k] * f[k];
        s += (k == 0 || k == n - 1) ? 0.5 * term : term;
    }
    return s * f.grid.dx;
}

double triangle_integral(const triangle_grid& tri, const std::vector<double>& values) {
    const int n = tri.rows();
    const double dx = tri.base.dx;
    std::vector<double> inner(static_cast<std::size_t>(n), 0.0);
    for (int i = 1; i < n; ++i) {
        const double* row = values.data() + tri.row_offset(i);
        double s = 0.5 * (row[0] + row[i]);
        for (int j = 1; j < i; ++j) s += row[j];
        inner[static_cast<std::size_t>(i)] = s * dx;
    }
    return trapezoid(inner, dx);
}

void check_finite(const field& f, const char* what) {
    for (double v : f.values)
        if (!std::isfinite(v))
            throw divergence_error(std::string(what) + ": non-finite field entry");
}

}  // namespace kflow
