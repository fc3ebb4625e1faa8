#pragma once

#include <array>
#include <vector>

#include "field.hpp"

namespace kflow {

struct triangle_kernel_grid {
    triangle_grid grid;
    std::vector<double> values;  // ragged row-major, row i has i+1 entries

    triangle_kernel_grid() = default;
    explicit triangle_kernel_grid(triangle_grid t)
        : grid(t), values(t.node_count(), 0.0) {}

    double& at(int i, int j) { return values[grid.row_offset(i) + static_cast<std::size_t>(j)]; }
    double at(int i, int j) const { return values[grid.row_offset(i) + static_cast<std::size_t>(j)]; }
    const double* row(int i) const { return values.data() + grid.row_offset(i); }
    double* row(int i) { return values.data() + grid.row_offset(i); }
};

enum class kernel_provenance { numerical, neural };

struct kernel_pair {
    triangle_kernel_grid alpha;
    triangle_kernel_grid beta;
    kernel_provenance provenance = kernel_provenance::numerical;
};

// Goursat march for
//   mu a_x - lambda a_xi = (m1 - m4) a + m3 b,   a(x,x) = -m3/(lambda+mu)
//   mu b_x + mu     b_xi = m2 a,                 b(x,0) = q (lambda/mu) a(x,0)
// x-rows advance from the apex; lambda > mu is handled by integer
// sub-stepping of the marching direction so the xi stencil stays one-sided.
kernel_pair solve_kernels(const std::array<double, 4>& m_hat, double lambda, double mu,
                          double q, const triangle_grid& tri);

// Successive approximation of
//   aI(x,xi) = a(x,xi) + int_xi^x b(x,s) aI(s,xi) ds   (bI analogous, b data)
// starting from aI = a, trapezoid in s, until the sup-norm update < tol.
kernel_pair solve_inverse_kernels(const kernel_pair& k, double tol = 1e-10,
                                  int max_iter = 64);

// U = int_0^1 a(1,xi) psi_hat + int_0^1 b(1,xi) phi_hat, trapezoid rule.
double control_law(const kernel_pair& k, const field& psi_hat, const field& phi_hat);

// Control value that is consistent with phi_hat(1) = U: solves the affine
// endpoint equation U = Uraw + c (U - phi_hat_end) with c the trapezoid end
// weight of beta(1,1). Returns the fixed-point U.
double control_law_consistent(const kernel_pair& k, const field& psi_hat,
                              const field& phi_hat);

// f2 = psi_hat; h2(x) = phi_hat(x) - int_0^x a(x,xi) psi_hat - int_0^x b(x,xi) phi_hat.
void backstepping_transform(const kernel_pair& k, const field& psi_hat,
                            const field& phi_hat, field& f2, field& h2);

// phi_hat(x) = h2(x) + int_0^x aI(x,xi) f2 + int_0^x bI(x,xi) h2.
field inverse_transform(const kernel_pair& k_inv, const field& f2, const field& h2);

}  // namespace kflow
